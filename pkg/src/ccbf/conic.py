"""Small conic modelling layer over Clarabel (SDP, SOCP-representable QCQP) and HiGHS (LP).

Complex Hermitian matrix variables are handled through the real embedding
``[[Re W, -Im W], [Im W, Re W]]``; complex vectors are split into real and
imaginary parts. Every solution labelled optimal is re-checked against the
original complex constraint data and ``max_violation`` is reported.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import clarabel
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

DEFAULT_TOL = 1e-7

ArrayLike = Union[np.ndarray, sp.spmatrix]


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class SolveStatus:
    status: Status
    objective: float = math.nan
    x: object = None
    iterations: int = 0
    max_violation: float = math.nan

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


# --------------------------------------------------------------------------
# problem containers


@dataclass
class TraceConstraint:
    """sum_i Re Tr(A_i W_{var_i})  (sense)  rhs."""

    terms: list[tuple[int, np.ndarray]]
    sense: str
    rhs: float

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "=="):
            raise ValueError(f"bad sense {self.sense!r}")


@dataclass
class SdpProblem:
    """Minimise sum_m Re Tr(C_m W_m) over Hermitian PSD W_m of size dims[m]."""

    dims: list[int]
    objective: list[Optional[np.ndarray]]
    constraints: list[TraceConstraint] = field(default_factory=list)

    def __post_init__(self):
        if len(self.objective) != len(self.dims):
            raise ValueError("one objective matrix per variable")
        for C, n in zip(self.objective, self.dims):
            if C is not None:
                _check_herm(C, n)
        for con in self.constraints:
            for i, A in con.terms:
                _check_herm(A, self.dims[i])


def _check_herm(A, n):
    if A.shape != (n, n):
        raise ValueError(f"expected {n}x{n} coefficient, got {A.shape}")
    if not np.allclose(A, A.conj().T, atol=1e-12 * max(1.0, np.abs(A).max(initial=0.0))):
        raise ValueError("coefficient matrices must be Hermitian")


@dataclass
class AffineConstraint:
    """Re(a_c^H z) + a_r . r  (sense)  rhs."""

    a_c: Optional[np.ndarray]
    a_r: Optional[np.ndarray]
    rhs: float
    sense: str = "<="


@dataclass
class QuadConstraint:
    """||F z + g||^2 <= Re(a_c^H z) + a_r . r + c   (convex by construction)."""

    F: ArrayLike
    g: Optional[np.ndarray] = None
    a_c: Optional[np.ndarray] = None
    a_r: Optional[np.ndarray] = None
    c: float = 0.0


@dataclass
class SocConstraint:
    """||F z + g|| <= Re(a_c^H z) + a_r . r + c."""

    F: ArrayLike
    g: Optional[np.ndarray] = None
    a_c: Optional[np.ndarray] = None
    a_r: Optional[np.ndarray] = None
    c: float = 0.0


@dataclass
class QcqpProblem:
    """Minimise Re(q_c^H z) + q_r . r over complex z (n_complex) and real r (n_real)."""

    n_complex: int
    n_real: int
    q_c: Optional[np.ndarray] = None
    q_r: Optional[np.ndarray] = None
    affine: list[AffineConstraint] = field(default_factory=list)
    quad: list[QuadConstraint] = field(default_factory=list)
    soc: list[SocConstraint] = field(default_factory=list)

    def __post_init__(self):
        for con in list(self.quad) + list(self.soc):
            if con.F.shape[1] != self.n_complex:
                raise ValueError("quadratic factor has wrong column count")


@dataclass
class LpProblem:
    """Minimise c . x subject to A_ub x <= b_ub, A_eq x == b_eq, x >= 0."""

    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.c)
        for A in (self.A_ub, self.A_eq):
            if A is not None and np.shape(A)[1] != n:
                raise ValueError("constraint matrix width must match objective length")


# --------------------------------------------------------------------------
# standard form  min q.x  s.t.  b - A x in K


@dataclass
class StandardForm:
    q: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    cones: list[tuple[str, int]]  # ("zero"|"nonneg"|"soc"|"psd", dim)

    def clarabel_cones(self):
        make = {
            "zero": clarabel.ZeroConeT,
            "nonneg": clarabel.NonnegativeConeT,
            "soc": clarabel.SecondOrderConeT,
            "psd": clarabel.PSDTriangleConeT,
        }
        return [make[kind](dim) for kind, dim in self.cones]

    def dump(self, path) -> None:
        """Portable sparse text dump: cones, q, then A and b as triplets."""
        A = self.A.tocoo()
        lines = [f"n {A.shape[1]} m {A.shape[0]}"]
        lines += [f"cone {kind} {dim}" for kind, dim in self.cones]
        lines += [f"q {j} {v!r}" for j, v in enumerate(self.q) if v != 0]
        lines += [f"A {i} {j} {v!r}" for i, j, v in zip(A.row, A.col, A.data)]
        lines += [f"b {i} {v!r}" for i, v in enumerate(self.b) if v != 0]
        Path(path).write_text("\n".join(lines) + "\n")


class _Rows:
    """Accumulates cone blocks; zero and nonneg blocks are emitted first."""

    def __init__(self, nvar: int):
        self.nvar = nvar
        self.zero: list[tuple[sp.spmatrix, np.ndarray]] = []
        self.nonneg: list[tuple[sp.spmatrix, np.ndarray]] = []
        self.cones: list[tuple[str, int, sp.spmatrix, np.ndarray]] = []

    def add(self, kind: str, A, b) -> None:
        A = sp.csr_matrix(A).reshape((-1, self.nvar)) if not sp.issparse(A) else sp.csr_matrix(A)
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if kind == "zero":
            self.zero.append((A, b))
        elif kind == "nonneg":
            self.nonneg.append((A, b))
        else:
            self.cones.append((kind, A.shape[0], A, b))

    def build(self, q: np.ndarray) -> StandardForm:
        blocks, rhs, cones = [], [], []
        for kind, group in (("zero", self.zero), ("nonneg", self.nonneg)):
            if group:
                blocks += [A for A, _ in group]
                rhs += [b for _, b in group]
                cones.append((kind, sum(A.shape[0] for A, _ in group)))
        for kind, dim, A, b in self.cones:
            blocks.append(A)
            rhs.append(b)
            cones.append((kind, dim if kind != "psd" else _tri_side(dim)))
        if blocks:
            A = sp.vstack(blocks, format="csc")
            b = np.concatenate(rhs)
        else:
            A = sp.csc_matrix((0, self.nvar))
            b = np.zeros(0)
        return StandardForm(np.asarray(q, dtype=float), A, b, cones)


def _tri_side(n_tri: int) -> int:
    d = int(round((math.sqrt(8 * n_tri + 1) - 1) / 2))
    assert d * (d + 1) // 2 == n_tri
    return d


def _settings(tol: float, max_iter: int = 200, **overrides):
    s = clarabel.DefaultSettings()
    s.verbose = False
    s.tol_feas = tol * 0.1
    s.tol_gap_abs = tol * 0.1
    s.tol_gap_rel = tol * 0.1
    s.max_iter = max_iter
    s.presolve_enable = False
    s.equilibrate_max_iter = 100
    for k, v in overrides.items():
        setattr(s, k, v)
    return s


_SOLVED = {"Solved", "AlmostSolved"}
_INFEAS = {"PrimalInfeasible", "AlmostPrimalInfeasible"}
_UNBND = {"DualInfeasible", "AlmostDualInfeasible"}


def _run(sf: StandardForm, tol: float, **overrides):
    """Solve with Clarabel after scaling the objective to unit max-norm."""
    scale = float(np.abs(sf.q).max(initial=0.0)) or 1.0
    P = sp.csc_matrix((sf.A.shape[1], sf.A.shape[1]))
    solver = clarabel.DefaultSolver(P, sf.q / scale, sf.A, sf.b, sf.clarabel_cones(), _settings(tol, **overrides))
    sol = solver.solve()
    status = str(sol.status).split(".")[-1]
    if status in _SOLVED:
        st = Status.OPTIMAL
    elif status in _INFEAS:
        st = Status.INFEASIBLE
    elif status in _UNBND:
        st = Status.UNBOUNDED
    else:
        st = Status.NUMERICAL_FAILURE
    return st, np.array(sol.x), int(sol.iterations), status


# --------------------------------------------------------------------------
# Hermitian real embedding


@functools.lru_cache(maxsize=None)
def _upper(n: int):
    return np.triu_indices(n, 1)


def herm_coeffs(A: np.ndarray) -> np.ndarray:
    """Real vector c with Re Tr(A W) = c . params(W) for Hermitian A, W."""
    iu = _upper(A.shape[0])
    return np.concatenate([np.real(np.diag(A)), 2 * np.real(A[iu]), 2 * np.imag(A[iu])])


def herm_from_params(p: np.ndarray, n: int) -> np.ndarray:
    iu = _upper(n)
    k = len(iu[0])
    W = np.zeros((n, n), dtype=complex)
    W[iu] = p[n : n + k] + 1j * p[n + k : n + 2 * k]
    W = W + W.conj().T
    W[np.diag_indices(n)] = p[:n]
    return W


def herm_params(W: np.ndarray) -> np.ndarray:
    iu = _upper(W.shape[0])
    return np.concatenate([np.real(np.diag(W)), np.real(W[iu]), np.imag(W[iu])])


def real_embedding(W: np.ndarray) -> np.ndarray:
    """[[Re W, -Im W], [Im W, Re W]]; PSD iff W is PSD, eigenvalues doubled."""
    return np.block([[W.real, -W.imag], [W.imag, W.real]])


@functools.lru_cache(maxsize=None)
def _embed_svec(n: int) -> sp.csr_matrix:
    """Sparse map from Hermitian params (n^2) to svec of the 2n x 2n embedding."""
    iu = _upper(n)
    k = len(iu[0])
    re_idx = -np.ones((n, n), dtype=int)
    im_idx = np.zeros((n, n), dtype=int)
    im_sign = np.zeros((n, n))
    re_idx[np.diag_indices(n)] = np.arange(n)
    re_idx[iu] = n + np.arange(k)
    re_idx[(iu[1], iu[0])] = n + np.arange(k)
    im_idx[iu] = n + k + np.arange(k)
    im_idx[(iu[1], iu[0])] = n + k + np.arange(k)
    im_sign[iu] = 1.0
    im_sign[(iu[1], iu[0])] = -1.0  # Im W_ji = -Im W_ij

    rows, cols, vals = [], [], []
    d = 2 * n
    r = 0
    for q in range(d):  # column-major upper triangle
        for p in range(q + 1):
            scale = 1.0 if p == q else math.sqrt(2.0)
            if q < n or p >= n:  # Re W block
                i, j = p % n, q % n
                rows.append(r), cols.append(re_idx[i, j]), vals.append(scale)
            else:  # p < n <= q : X[p, n+j] = -Im W[p, j]
                i, j = p, q - n
                if i != j:
                    rows.append(r), cols.append(im_idx[i, j]), vals.append(-scale * im_sign[i, j])
            r += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(d * (d + 1) // 2, n * n))


def sdp_standard_form(p: SdpProblem) -> StandardForm:
    offs = np.concatenate([[0], np.cumsum([n * n for n in p.dims])]).astype(int)
    nvar = int(offs[-1])
    q = np.zeros(nvar)
    for i, C in enumerate(p.objective):
        if C is not None:
            q[offs[i] : offs[i + 1]] = herm_coeffs(C)
    rows = _Rows(nvar)
    for con in p.constraints:
        a = np.zeros(nvar)
        for i, A in con.terms:
            a[offs[i] : offs[i + 1]] += herm_coeffs(A)
        if con.sense == "==":
            rows.add("zero", a, con.rhs)
        elif con.sense == "<=":
            rows.add("nonneg", a, con.rhs)
        else:
            rows.add("nonneg", -a, -con.rhs)
    for i, n in enumerate(p.dims):
        T = _embed_svec(n)
        A = sp.hstack(
            [sp.csr_matrix((T.shape[0], offs[i])), -T, sp.csr_matrix((T.shape[0], nvar - offs[i + 1]))]
        )
        rows.add("psd", A, np.zeros(T.shape[0]))
    return rows.build(q)


def _sdp_violation(p: SdpProblem, Ws: list[np.ndarray]) -> float:
    worst = 0.0
    for con in p.constraints:
        lhs = sum(float(np.real(np.trace(A @ Ws[i]))) for i, A in con.terms)
        gap = {"<=": lhs - con.rhs, ">=": con.rhs - lhs, "==": abs(lhs - con.rhs)}[con.sense]
        worst = max(worst, gap / max(1.0, abs(con.rhs)))
    for W in Ws:
        if W.size:
            ev = np.linalg.eigvalsh(W)
            worst = max(worst, -ev[0] / max(1.0, ev[-1]))
    return worst


SDP_ACCEPT_VIOLATION = 1e-3


def solve_sdp(p: SdpProblem, tol: float = DEFAULT_TOL) -> SolveStatus:
    """Linear SDP over Hermitian PSD matrices. ``x`` is the list of W_m."""
    if not p.constraints:
        # W = 0 is optimal iff every objective matrix is PSD
        psd = all(C is None or np.linalg.eigvalsh(C)[0] >= -tol for C in p.objective)
        if not psd:
            return SolveStatus(Status.UNBOUNDED)
        Ws = [np.zeros((n, n), dtype=complex) for n in p.dims]
        return SolveStatus(Status.OPTIMAL, 0.0, Ws, 0, 0.0)
    sf = sdp_standard_form(p)
    res = _sdp_attempt(p, sf, tol)
    # near-infeasible instances: extra regularisation lets Clarabel return a
    # certificate instead of a numerical error
    for reg in SDP_RETRY_REGULARIZATION:
        if res.status is not Status.NUMERICAL_FAILURE:
            break
        res = _sdp_attempt(p, sf, tol, static_regularization_constant=reg)
    return res


SDP_RETRY_REGULARIZATION = (1e-7, 1e-6, 1e-5)


def _sdp_attempt(p: SdpProblem, sf: StandardForm, tol: float, **overrides) -> SolveStatus:
    st, x, iters, _ = _run(sf, tol, **overrides)
    # Interior-point runs on these SDPs often stall near 1e-5 residuals; a
    # stalled iterate is kept when its constraint violation is small.
    usable = st is Status.OPTIMAL or (st is Status.NUMERICAL_FAILURE and x.size and np.isfinite(x).all())
    if not usable:
        return SolveStatus(st, iterations=iters)
    offs = np.concatenate([[0], np.cumsum([n * n for n in p.dims])]).astype(int)
    Ws = [herm_from_params(x[offs[i] : offs[i + 1]], n) for i, n in enumerate(p.dims)]
    obj = sum(float(np.real(np.trace(C @ W))) for C, W in zip(p.objective, Ws) if C is not None)
    viol = _sdp_violation(p, Ws)
    st = Status.OPTIMAL if viol <= max(10 * tol, SDP_ACCEPT_VIOLATION) else Status.NUMERICAL_FAILURE
    return SolveStatus(st, obj, Ws, iters, viol)


# --------------------------------------------------------------------------
# QCQP / SOCP


def _lin_row(a_c, a_r, n_c, n_r) -> np.ndarray:
    row = np.zeros(2 * n_c + n_r)
    if a_c is not None:
        a_c = np.asarray(a_c, dtype=complex)
        row[:n_c] = a_c.real
        row[n_c : 2 * n_c] = a_c.imag
    if a_r is not None:
        row[2 * n_c :] = np.asarray(a_r, dtype=float)
    return row


def _factor_rows(F, n_r):
    F = sp.csr_matrix(F, dtype=complex)
    Fr, Fi = F.real, F.imag
    pad = sp.csr_matrix((F.shape[0], n_r))
    return sp.hstack([Fr, -Fi, pad]), sp.hstack([Fi, Fr, pad])


def qcqp_standard_form(p: QcqpProblem) -> StandardForm:
    n_c, n_r = p.n_complex, p.n_real
    nvar = 2 * n_c + n_r
    q = _lin_row(p.q_c, p.q_r, n_c, n_r)
    rows = _Rows(nvar)
    for con in p.affine:
        a = _lin_row(con.a_c, con.a_r, n_c, n_r)
        if con.sense == "==":
            rows.add("zero", a, con.rhs)
        elif con.sense == "<=":
            rows.add("nonneg", a, con.rhs)
        else:
            rows.add("nonneg", -a, -con.rhs)
    for con in p.quad:
        lin = _lin_row(con.a_c, con.a_r, n_c, n_r)
        if con.F.shape[0] == 0:
            rows.add("nonneg", -lin, con.c)  # 0 <= lin.x + c
            continue
        g = np.zeros(con.F.shape[0], dtype=complex) if con.g is None else np.asarray(con.g, dtype=complex)
        Re, Im = _factor_rows(con.F, n_r)
        A = sp.vstack([sp.csr_matrix(-lin / 2), sp.csr_matrix(-lin / 2), -Re, -Im])
        b = np.concatenate([[(con.c + 1) / 2, (con.c - 1) / 2], g.real, g.imag])
        rows.add("soc", A, b)
    for con in p.soc:
        lin = _lin_row(con.a_c, con.a_r, n_c, n_r)
        g = np.zeros(con.F.shape[0], dtype=complex) if con.g is None else np.asarray(con.g, dtype=complex)
        Re, Im = _factor_rows(con.F, n_r)
        A = sp.vstack([sp.csr_matrix(-lin), -Re, -Im])
        b = np.concatenate([[con.c], g.real, g.imag])
        rows.add("soc", A, b)
    return rows.build(q)


def _qcqp_violation(p: QcqpProblem, z: np.ndarray, r: np.ndarray) -> float:
    def lin(a_c, a_r):
        v = 0.0
        if a_c is not None:
            v += float(np.real(np.vdot(a_c, z)))
        if a_r is not None:
            v += float(np.dot(a_r, r))
        return v

    worst = 0.0
    for con in p.affine:
        lhs = lin(con.a_c, con.a_r)
        gap = {"<=": lhs - con.rhs, ">=": con.rhs - lhs, "==": abs(lhs - con.rhs)}[con.sense]
        worst = max(worst, gap / max(1.0, abs(con.rhs)))
    for con, squared in [(c, True) for c in p.quad] + [(c, False) for c in p.soc]:
        v = con.F @ z if con.F.shape[0] else np.zeros(0)
        if con.g is not None:
            v = v + con.g
        norm = float(np.linalg.norm(v))
        lhs = norm**2 if squared else norm
        rhs = lin(con.a_c, con.a_r) + con.c
        worst = max(worst, (lhs - rhs) / max(1.0, abs(lhs), abs(rhs)))
    return worst


def solve_qcqp(p: QcqpProblem, tol: float = DEFAULT_TOL) -> SolveStatus:
    """Convex QCQP via its SOC representation. ``x`` is the pair ``(z, r)``."""
    sf = qcqp_standard_form(p)
    st, x, iters, _ = _run(sf, tol)
    if st is not Status.OPTIMAL:
        return SolveStatus(st, iterations=iters)
    n_c = p.n_complex
    z = x[:n_c] + 1j * x[n_c : 2 * n_c]
    r = x[2 * n_c :]
    obj = 0.0
    if p.q_c is not None:
        obj += float(np.real(np.vdot(p.q_c, z)))
    if p.q_r is not None:
        obj += float(np.dot(p.q_r, r))
    viol = _qcqp_violation(p, z, r)
    if viol > 10 * tol:
        st = Status.NUMERICAL_FAILURE
    return SolveStatus(st, obj, (z, r), iters, viol)


# --------------------------------------------------------------------------
# LP


def solve_lp(p: LpProblem, tol: float = DEFAULT_TOL) -> SolveStatus:
    """LP over the nonnegative orthant (HiGHS)."""
    res = linprog(
        p.c, A_ub=p.A_ub, b_ub=p.b_ub, A_eq=p.A_eq, b_eq=p.b_eq,
        bounds=(0, None), method="highs",
        options={"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol},
    )
    if res.status == 2:
        return SolveStatus(Status.INFEASIBLE, iterations=int(res.nit))
    if res.status == 3:
        return SolveStatus(Status.UNBOUNDED, iterations=int(res.nit))
    if res.status != 0:
        return SolveStatus(Status.NUMERICAL_FAILURE, iterations=int(res.nit))
    x = np.asarray(res.x)
    viol = 0.0
    if p.A_ub is not None:
        viol = max(viol, float(np.max((np.asarray(p.A_ub) @ x - p.b_ub) / np.maximum(1.0, np.abs(p.b_ub)), initial=0.0)))
    if p.A_eq is not None:
        viol = max(viol, float(np.max(np.abs(np.asarray(p.A_eq) @ x - p.b_eq) / np.maximum(1.0, np.abs(p.b_eq)), initial=0.0)))
    return SolveStatus(Status.OPTIMAL, float(res.fun), x, int(res.nit), viol)


def dump_problem(p: Union[SdpProblem, QcqpProblem], path) -> None:
    """Write the conic standard form of ``p`` for cross-checking elsewhere."""
    sf = sdp_standard_form(p) if isinstance(p, SdpProblem) else qcqp_standard_form(p)
    sf.dump(path)
