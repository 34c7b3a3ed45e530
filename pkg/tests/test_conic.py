import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ccbf import conic
from ccbf.conic import (
    AffineConstraint,
    LpProblem,
    QcqpProblem,
    QuadConstraint,
    SdpProblem,
    Status,
    TraceConstraint,
    herm_coeffs,
    herm_from_params,
    herm_params,
    real_embedding,
    solve_lp,
    solve_qcqp,
    solve_sdp,
)

TOL = conic.DEFAULT_TOL


def _rand_herm(rng, n, psd=False):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return A @ A.conj().T if psd else (A + A.conj().T) / 2


def test_sdp_rank1_closed_form():
    h = np.array([1.0 + 0.5j, -0.3j, 2.0])
    H = np.outer(h, h.conj())
    p = SdpProblem([3], [np.eye(3)], [TraceConstraint([(0, H)], ">=", 10.0)])
    r = solve_sdp(p)
    assert r.status is Status.OPTIMAL
    assert r.objective == pytest.approx(10 / np.linalg.norm(h) ** 2, rel=1e-6)
    lam = np.linalg.eigvalsh(r.x[0])
    assert lam[-2] <= 1e-5 * lam[-1]


def test_sdp_infeasible_and_trivial():
    p = SdpProblem([2], [np.eye(2)], [TraceConstraint([(0, np.zeros((2, 2)))], ">=", 1.0)])
    assert solve_sdp(p).status is Status.INFEASIBLE
    r = solve_sdp(SdpProblem([2], [np.zeros((2, 2))], []))
    assert r.status is Status.OPTIMAL and np.allclose(r.x[0], 0)


@given(st.integers(0, 10_000))
def test_sdp_multi_group_recheck(seed):
    """Optimal solutions re-checked against the constraint list and PSD cone."""
    rng = np.random.default_rng(seed)
    n, M = 3, 2
    users = [rng.standard_normal(n) + 1j * rng.standard_normal(n) for _ in range(3)]
    cons = []
    for k, h in enumerate(users):
        m = 0 if k < 2 else 1
        H = np.outer(h, h.conj())
        cons.append(TraceConstraint([(m, H), (1 - m, -2.0 * H)], ">=", 2.0))
    p = SdpProblem([n] * M, [np.eye(n)] * M, cons)
    r = solve_sdp(p)
    if r.status is Status.OPTIMAL:
        for c in cons:
            lhs = sum(np.real(np.trace(A @ r.x[i])) for i, A in c.terms)
            assert lhs >= c.rhs - 10 * TOL * max(1, abs(c.rhs))
        for W in r.x:
            assert np.allclose(W, W.conj().T)
            assert np.linalg.eigvalsh(W)[0] >= -10 * TOL * max(1, np.abs(W).max())
        direct = sum(np.real(np.trace(W)) for W in r.x)
        assert r.objective == pytest.approx(direct, rel=1e-9)
    else:
        assert r.status in (Status.INFEASIBLE, Status.NUMERICAL_FAILURE)


@given(st.integers(0, 10_000), st.integers(1, 5))
def test_embedding_exact(seed, n):
    rng = np.random.default_rng(seed)
    A, W = _rand_herm(rng, n), _rand_herm(rng, n)
    assert herm_coeffs(A) @ herm_params(W) == pytest.approx(np.real(np.trace(A @ W)), rel=1e-9, abs=1e-12)
    assert np.allclose(herm_from_params(herm_params(W), n), W)
    E = real_embedding(W)
    ev_c = np.sort(np.linalg.eigvalsh(W))
    ev_r = np.sort(np.linalg.eigvalsh(E))
    assert np.allclose(ev_r[::2], ev_c) and np.allclose(ev_r[1::2], ev_c)
    # the PSD-cone rows map params to svec of the embedding
    T = conic._embed_svec(n)
    m = 2 * n
    iu = np.triu_indices(m)
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2))
    order = np.lexsort((iu[0], iu[1]))  # column-major upper triangle
    svec = (E[iu] * scale)[order]
    assert np.allclose(T @ herm_params(W), svec)


def test_qcqp_projection():
    # minimise t  s.t. |w|^2 <= t, Re(w) >= 3
    p = QcqpProblem(
        1, 1, q_r=np.array([1.0]),
        affine=[AffineConstraint(np.array([1.0 + 0j]), None, 3.0, ">=")],
        quad=[QuadConstraint(np.eye(1), a_r=np.array([1.0]))],
    )
    r = solve_qcqp(p)
    assert r.status is Status.OPTIMAL and r.objective == pytest.approx(9.0, rel=1e-6)


def test_qcqp_trivial_and_infeasible():
    p = QcqpProblem(2, 2, q_r=np.ones(2), quad=[
        QuadConstraint(np.array([[1.0, 0]]), a_r=np.array([1.0, 0])),
        QuadConstraint(np.array([[0, 1.0]]), a_r=np.array([0, 1.0])),
    ])
    r = solve_qcqp(p)
    assert r.status is Status.OPTIMAL and np.allclose(r.x[1], 0, atol=1e-6)
    bad = QcqpProblem(0, 1, q_r=np.zeros(1), affine=[
        AffineConstraint(None, np.array([1.0]), 1.0, ">="),
        AffineConstraint(None, np.array([1.0]), 0.0, "<="),
    ])
    assert solve_qcqp(bad).status is Status.INFEASIBLE


def test_lp_examples():
    r = solve_lp(LpProblem(np.array([1.0]), np.array([[-1.0]]), np.array([-2.0])))
    assert r.status is Status.OPTIMAL and r.objective == pytest.approx(2.0)
    r = solve_lp(LpProblem(np.array([0.0]), np.array([[1.0]]), np.array([-1.0])))
    assert r.status is Status.INFEASIBLE
    # single-group scaling LP: a beta >= gamma sigma^2
    a, gamma = 0.4, 10.0
    r = solve_lp(LpProblem(np.array([1.0]), np.array([[-a]]), np.array([-gamma])))
    assert r.x[0] == pytest.approx(gamma / a)
    r = solve_lp(LpProblem(np.array([-1.0])))
    assert r.status is Status.UNBOUNDED


def test_dump(tmp_path):
    p = SdpProblem([2], [np.eye(2)], [TraceConstraint([(0, np.eye(2))], ">=", 1.0)])
    path = tmp_path / "p.txt"
    conic.dump_problem(p, path)
    text = path.read_text().splitlines()
    assert text[0].startswith("n 4") and any(l.startswith("cone psd") for l in text)
