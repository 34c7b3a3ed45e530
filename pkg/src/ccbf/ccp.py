"""CCP-based sparse multicast beamforming.

Two algorithms share the same outer structure: a feasible full-cooperation
start, a theta-annealed sequence of smoothed-l0 problems each solved by a
convex-concave procedure, and a final cluster extraction + polish step.

* :func:`sdr_ccp` lifts every group beamformer to a PSD matrix; each CCP step
  is an SDP and rank-1 extraction / Gaussian randomization happens at the end.
* :func:`g_ccp` keeps the vector variables, adds per-block power epigraph
  variables and linearises the concave part of every SINR constraint, so each
  CCP step is a convex QCQP and every iterate stays feasible.

All conic subproblems are posed with channels scaled by the per-user noise
amplitude, so the noise power is 1 and beamformer powers stay in watts.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import conic
from .scenario import (
    CachePlacement,
    CostBreakdown,
    MulticastGroups,
    Scenario,
    block_powers,
    min_sinr_margin,
    network_cost,
)
from .smooth import AnnealSchedule, SmoothKind, f_theta, grad_f_theta, theta_init, theta_levels

log = logging.getLogger(__name__)


class InfeasibleError(Exception):
    """No feasible beamformer was found.

    ``stage`` is one of ``"p_ini"`` (full-cooperation relaxation infeasible, so
    the instance is infeasible), ``"init"`` (relaxation feasible but no
    randomized draw could be scaled to feasibility) or ``"cluster"`` (the
    requested clustering cannot meet the SINR targets).
    """

    def __init__(self, stage: str, msg: str = ""):
        super().__init__(f"{stage}: {msg}" if msg else stage)
        self.stage = stage


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverSettings:
    eta: float = 1.0  # math.inf selects power-only mode
    smooth_kind: SmoothKind = SmoothKind.ARCTAN
    anneal: AnnealSchedule = AnnealSchedule()
    ccp_rel_tol: float = 1e-4
    ccp_max_iters: int = 30
    n_randomizations: int = 300
    cluster_threshold: float = 1e-4
    rank_tol: float = 1e-6
    conic_tol: float = conic.DEFAULT_TOL
    peak_per_antenna: Optional[float] = None  # W; falls back to the scenario config
    peak_per_bs: Optional[float] = None  # W
    polish_refine: bool = True
    verbose: bool = False

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if min(self.ccp_rel_tol, self.cluster_threshold, self.rank_tol, self.conic_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.ccp_max_iters < 1 or self.n_randomizations < 1:
            raise ValueError("iteration counts must be >= 1")

    @property
    def power_only(self) -> bool:
        return math.isinf(self.eta)

    def with_eta(self, eta: float) -> "SolverSettings":
        return replace(self, eta=float(eta))


@dataclass
class Diagnostics:
    algorithm: str = ""
    outer_levels: int = 0
    inner_iters: list[int] = field(default_factory=list)
    inner_converged: list[bool] = field(default_factory=list)
    rank_one: bool = True
    randomized: bool = False
    wall_time: float = 0.0
    trace: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


@dataclass
class SolveOutcome:
    beamformers: np.ndarray  # (M, N*L)
    clustering: np.ndarray  # (M, N) in {0, 1}
    costs: CostBreakdown
    min_sinr_margin: float
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    @property
    def feasible(self) -> bool:
        return self.min_sinr_margin >= 1 - 1e-5


# --------------------------------------------------------------------------
# shared helpers


def selection_matrices(n_bs: int, n_ant: int) -> list[np.ndarray]:
    """Diagonal 0/1 matrices J_n picking the antennas of BS n."""
    out = []
    for n in range(n_bs):
        d = np.zeros(n_bs * n_ant)
        d[n * n_ant : (n + 1) * n_ant] = 1.0
        out.append(np.diag(d))
    return out


def lifted_block_powers(Ws: list[np.ndarray], n_bs: int, n_ant: int) -> np.ndarray:
    """(M, N) array of Tr(W_m J_n)."""
    return np.array([np.real(np.diag(W)).reshape(n_bs, n_ant).sum(axis=1) for W in Ws])


def _peaks(sc: Scenario, settings: SolverSettings) -> tuple[Optional[float], Optional[float]]:
    ant = settings.peak_per_antenna if settings.peak_per_antenna is not None else sc.cfg.per_antenna_peak_watt
    bs = settings.peak_per_bs if settings.peak_per_bs is not None else sc.cfg.per_bs_peak_watt
    return ant, bs


def _support(s: np.ndarray, n_ant: int) -> np.ndarray:
    """(M, N*L) boolean mask of antennas a clustering allows."""
    return np.repeat(np.asarray(s, dtype=bool), n_ant, axis=1)


def _seed_for(seed: int, *keys: int) -> int:
    ss = np.random.SeedSequence([int(seed) & (2**63 - 1), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _users(sc: Scenario):
    """Flat (user, group) pairs in group order."""
    return [(k, m) for m, g in enumerate(sc.groups.users) for k in g]


def _lifted_margin(Ws, sc: Scenario) -> float:
    g = sc.scaled_channels()
    worst = math.inf
    for k, m in _users(sc):
        q = [float(np.real(np.vdot(g[k], W @ g[k]))) for W in Ws]
        sig = q[m] / (sum(q) - q[m] + 1.0)
        worst = min(worst, sig / sc.groups.gamma[m])
    return worst


def surrogate(p: np.ndarray, alpha: np.ndarray, eta: float, kind: SmoothKind, theta: float) -> float:
    """Smoothed objective sum alpha f_theta(p) + eta sum p over block powers p."""
    p = np.maximum(p, 0.0)
    return float(np.sum(alpha * f_theta(kind, p, theta)) + eta * np.sum(p))


# --------------------------------------------------------------------------
# SDR building blocks


def _sdr_problem(sc: Scenario, support: np.ndarray, weights: np.ndarray, peaks) -> conic.SdpProblem:
    """Power-weighted SDP: minimise sum_{m,n} weights[m,n] Tr(W_m J_n) under
    lifted SINR constraints, on the given per-group antenna support."""
    g = sc.scaled_channels()
    L = sc.L
    idx = [np.flatnonzero(support[m]) for m in range(sc.M)]
    dims = [len(i) for i in idx]
    gamma = sc.groups.gamma
    obj = [np.diag(np.repeat(weights[m], L)[idx[m]]).astype(complex) for m in range(sc.M)]
    cons = []
    for k, m in _users(sc):
        terms = []
        for j in range(sc.M):
            if not dims[j]:
                continue
            gk = g[k, idx[j]]
            H = np.outer(gk, gk.conj())
            terms.append((j, H if j == m else -gamma[m] * H))
        cons.append(conic.TraceConstraint(terms, ">=", float(gamma[m])))
    ant, bs = peaks
    if bs is not None:
        for n in range(sc.N):
            terms = []
            for m in range(sc.M):
                sel = (idx[m] // L) == n
                if sel.any():
                    terms.append((m, np.diag(sel.astype(float)).astype(complex)))
            if terms:
                cons.append(conic.TraceConstraint(terms, "<=", float(bs)))
    if ant is not None:
        for a in range(sc.N * L):
            terms = []
            for m in range(sc.M):
                sel = idx[m] == a
                if sel.any():
                    terms.append((m, np.diag(sel.astype(float)).astype(complex)))
            if terms:
                cons.append(conic.TraceConstraint(terms, "<=", float(ant)))
    # empty variables (group without any serving antenna) stay as 0x0
    return conic.SdpProblem([d for d in dims], obj, cons), idx


def _solve_sdr(sc, support, weights, peaks, tol):
    prob, idx = _sdr_problem(sc, support, weights, peaks)
    res = conic.solve_sdp(prob, tol)
    if res.status is conic.Status.INFEASIBLE:
        return None, res
    if not res.ok:
        raise NumericalFailure(f"SDP {res.status.value}")
    NL = sc.N * sc.L
    Ws = []
    for m, W in enumerate(res.x):
        full = np.zeros((NL, NL), dtype=complex)
        full[np.ix_(idx[m], idx[m])] = W
        Ws.append(full)
    return Ws, res


def solve_p_ini(sc: Scenario, settings: SolverSettings = SolverSettings()) -> list[np.ndarray]:
    """Full-cooperation power minimisation SDP; raises InfeasibleError('p_ini')."""
    support = np.ones((sc.M, sc.N * sc.L), dtype=bool)
    if np.any(sc.groups.gamma <= 0):
        raise ValueError("SINR targets must be positive")
    Ws, _ = _solve_sdr(sc, support, np.ones((sc.M, sc.N)), _peaks(sc, settings), settings.conic_tol)
    if Ws is None:
        raise InfeasibleError("p_ini", "full-cooperation relaxation is infeasible")
    return Ws


def extract_rank1(Ws: list[np.ndarray], rank_tol: float = 1e-6, floor: float = 0.0) -> Optional[np.ndarray]:
    """Principal-eigenvector beamformers if every W_m is numerically rank one.

    ``W_m`` passes when its second eigenvalue is at most ``rank_tol`` times the
    first, or at most ``floor`` (absolute solver noise).
    """
    out = []
    for W in Ws:
        lam, U = np.linalg.eigh(W)
        top = lam[-1]
        if top <= 0:
            out.append(np.zeros(W.shape[0], dtype=complex))
            continue
        if len(lam) > 1 and lam[-2] > max(rank_tol * top, floor):
            return None
        out.append(math.sqrt(top) * U[:, -1])
    return np.array(out)


def _gains(g: np.ndarray, cand: np.ndarray) -> np.ndarray:
    """|g_k^H w_j|^2 for candidates of shape (..., M, NL) -> (..., K, M)."""
    return np.abs(np.einsum("kd,...jd->...kj", g.conj(), cand)) ** 2


def _scaling_lp(a: np.ndarray, sc: Scenario, cand: np.ndarray, peaks) -> conic.LpProblem:
    """Per-group power scaling LP for one candidate; ``a`` is (K, M) gains."""
    M = sc.M
    gamma = sc.groups.gamma
    rows, rhs = [], []
    for k, m in _users(sc):
        row = gamma[m] * a[k].copy()
        row[m] = -a[k, m]
        rows.append(row)
        rhs.append(-gamma[m])
    ant, bs = peaks
    pw = np.abs(cand) ** 2  # (M, NL)
    if bs is not None:
        per_bs = pw.reshape(M, sc.N, sc.L).sum(axis=2)
        for n in range(sc.N):
            rows.append(per_bs[:, n])
            rhs.append(bs)
    if ant is not None:
        for i in range(pw.shape[1]):
            rows.append(pw[:, i])
            rhs.append(ant)
    return conic.LpProblem(pw.sum(axis=1), np.array(rows), np.array(rhs, dtype=float))


def _fixed_point_scaling(a: np.ndarray, sc: Scenario, max_iter: int = 400) -> np.ndarray:
    """Least per-group scalings meeting every SINR target, for a batch of
    candidates. ``a`` is (B, K, M); returns (B, M) with NaN where no finite
    fixed point was found. The SINR map is a standard interference function,
    so iterating from zero converges monotonically to the least feasible
    point, which is also the optimum of the scaling LP."""
    users = _users(sc)
    ks = np.array([k for k, _ in users])
    ms = np.array([m for _, m in users])
    gam = sc.groups.gamma[ms]
    B, M = a.shape[0], sc.M
    A = a[:, ks, :]  # (B, U, M)
    own = A[np.arange(B)[:, None], np.arange(len(ks))[None, :], ms[None, :]]  # (B, U)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_own = np.where(own > 0, 1.0 / own, np.inf)
    beta = np.zeros((B, M))
    done = np.zeros(B, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        beta = _iterate_scaling(A, own, inv_own, ms, gam, beta, done, max_iter)
    beta[~done] = np.nan
    beta[~np.isfinite(beta).all(axis=1)] = np.nan
    return beta


def _iterate_scaling(A, own, inv_own, ms, gam, beta, done, max_iter):
    B, M = beta.shape
    for _ in range(max_iter):
        interf = np.einsum("bum,bm->bu", A, beta) - own * beta[:, ms]
        need = gam * (interf + 1.0) * inv_own  # (B, U)
        new = np.zeros((B, M))
        for m in range(M):
            new[:, m] = need[:, ms == m].max(axis=1)
        change = np.abs(new - beta).max(axis=1) / np.maximum(new.max(axis=1), 1e-300)
        beta = new
        done |= change < 1e-12
        if done.all() or not np.isfinite(beta).any():
            break
    return beta


def randomize_and_scale(
    Ws: list[np.ndarray],
    sc: Scenario,
    settings: SolverSettings = SolverSettings(),
    seed: int = 0,
) -> np.ndarray:
    """Gaussian randomization with per-group power scaling.

    Candidate 0 is the principal-eigenvector beamformer; the remaining draws
    are CN(0, W_m). Each candidate is scaled by the least-power LP and the
    cheapest feasible one is returned. Raises InfeasibleError('init').
    """
    rng = np.random.default_rng(seed)
    g = sc.scaled_channels()
    M, NL = sc.M, sc.N * sc.L
    peaks = _peaks(sc, settings)
    factors = []
    principal = np.zeros((M, NL), dtype=complex)
    for m, W in enumerate(Ws):
        lam, U = np.linalg.eigh(W)
        lam = np.clip(lam, 0.0, None)
        factors.append(U * np.sqrt(lam))
        principal[m] = math.sqrt(lam[-1]) * U[:, -1]
    n_draw = settings.n_randomizations
    xi = (rng.standard_normal((n_draw - 1, M, NL)) + 1j * rng.standard_normal((n_draw - 1, M, NL))) / math.sqrt(2)
    draws = np.einsum("mij,bmj->bmi", np.array(factors), xi)
    cand = np.concatenate([principal[None], draws], axis=0)  # (B, M, NL)
    a = _gains(g, cand)  # (B, K, M)
    beta = _fixed_point_scaling(a, sc)
    pw = (np.abs(cand) ** 2).sum(axis=2)  # (B, M)
    ok = np.isfinite(beta).all(axis=1)
    unresolved = np.flatnonzero(~ok & (a.min(axis=1) > 0).all(axis=1))
    # near-infeasible draws where the fixed point is slow: hand them to the LP
    for b in unresolved[:20]:
        res = conic.solve_lp(_scaling_lp(a[b], sc, cand[b], (None, None)), settings.conic_tol)
        if res.ok:
            beta[b] = res.x
            ok[b] = True
    if peaks != (None, None):
        for b in np.flatnonzero(ok):
            scaled = np.sqrt(beta[b])[:, None] * cand[b]
            if not _peaks_ok(scaled, sc, peaks):
                ok[b] = False
    if not ok.any():
        raise InfeasibleError("init", "no randomized candidate could be scaled to feasibility")
    total = np.where(ok, np.nansum(beta * pw, axis=1), np.inf)
    best = int(np.argmin(total))
    # authoritative scaling of the winner from the LP itself
    res = conic.solve_lp(_scaling_lp(a[best], sc, cand[best], peaks), settings.conic_tol)
    b_best = res.x if res.ok else beta[best]
    return np.sqrt(np.maximum(b_best, 0.0))[:, None] * cand[best]


def _peaks_ok(w: np.ndarray, sc: Scenario, peaks, rtol: float = 1e-6) -> bool:
    ant, bs = peaks
    pw = np.abs(w) ** 2
    if bs is not None and pw.reshape(sc.M, sc.N, sc.L).sum(axis=(0, 2)).max() > bs * (1 + rtol):
        return False
    if ant is not None and pw.sum(axis=0).max() > ant * (1 + rtol):
        return False
    return True


def scale_to_feasible(w: np.ndarray, sc: Scenario, settings: SolverSettings) -> Optional[np.ndarray]:
    """Rescale per-group powers of ``w`` by the least-power LP; None if impossible."""
    a = _gains(sc.scaled_channels(), w)
    if np.any(a[[k for k, _ in _users(sc)], [m for _, m in _users(sc)]] <= 0):
        return None
    res = conic.solve_lp(_scaling_lp(a, sc, w, _peaks(sc, settings)), settings.conic_tol)
    if not res.ok:
        return None
    return np.sqrt(np.maximum(res.x, 0.0))[:, None] * w


def beamformers_from_lifted(Ws, sc: Scenario, settings: SolverSettings, seed: int, diag: Diagnostics) -> np.ndarray:
    top = max((np.linalg.eigvalsh(W)[-1] for W in Ws if W.size), default=0.0)
    w = extract_rank1(Ws, settings.rank_tol, floor=10 * settings.conic_tol * top)
    if w is not None:
        margin = min_sinr_margin(w, sc)
        if margin >= 1 - 1e-5 and _peaks_ok(w, sc, _peaks(sc, settings)):
            return w
        w2 = scale_to_feasible(w, sc, settings)
        if w2 is not None:
            return w2
    diag.rank_one = False
    diag.randomized = True
    return randomize_and_scale(Ws, sc, settings, seed)


# --------------------------------------------------------------------------
# G-CCP subproblem


def _gccp_problem(sc: Scenario, support: np.ndarray, w_lin: np.ndarray, weights: np.ndarray, peaks):
    """Convex QCQP: minimise sum weights[m,n] t_{m,n} with ||w_{m,n}||^2 <= t_{m,n}
    and every SINR constraint's concave part linearised at ``w_lin``."""
    g = sc.scaled_channels()
    M, N, L = sc.M, sc.N, sc.L
    NL = N * L
    gamma = sc.groups.gamma
    # complex variable layout: active antennas of group 0, group 1, ...
    pos = -np.ones((M, NL), dtype=int)
    pos[support] = np.arange(int(support.sum()))
    n_c = int(support.sum())
    blocks = [(m, n) for m in range(M) for n in range(N) if support[m, n * L : (n + 1) * L].any()]
    t_of = {b: i for i, b in enumerate(blocks)}
    n_r = len(blocks)
    q_r = np.array([weights[m, n] for m, n in blocks], dtype=float)

    quad = []
    for i, (m, n) in enumerate(blocks):
        cols = pos[m, n * L : (n + 1) * L]
        cols = cols[cols >= 0]
        F = sp.csr_matrix((np.ones(len(cols)), (np.arange(len(cols)), cols)), shape=(len(cols), n_c))
        a_r = np.zeros(n_r)
        a_r[i] = 1.0
        quad.append(conic.QuadConstraint(F, a_r=a_r))

    for k, m in _users(sc):
        rows, cols, vals = [], [], []
        r = 0
        sg = math.sqrt(gamma[m])
        for j in range(M):
            if j == m:
                continue
            act = np.flatnonzero(support[j])
            if not len(act):
                continue
            rows += [r] * len(act)
            cols += list(pos[j, act])
            vals += list(sg * g[k, act].conj())
            r += 1
        F = sp.csr_matrix((vals, (rows, cols)), shape=(r, n_c), dtype=complex)
        act = np.flatnonzero(support[m])
        c = complex(np.vdot(g[k, act], w_lin[m, act]))  # g_k^H w_m^(i)
        a_c = np.zeros(n_c, dtype=complex)
        a_c[pos[m, act]] = 2 * c * g[k, act]
        quad.append(conic.QuadConstraint(F, a_c=a_c, c=-abs(c) ** 2 - gamma[m]))

    affine = []
    ant, bs = peaks
    if bs is not None:
        for n in range(N):
            a_r = np.array([1.0 if bn == n else 0.0 for _, bn in blocks])
            if a_r.any():
                affine.append(conic.AffineConstraint(None, a_r, float(bs), "<="))
    if ant is not None:
        for a in range(NL):
            cols = [pos[m, a] for m in range(M) if pos[m, a] >= 0]
            if cols:
                F = sp.csr_matrix((np.ones(len(cols)), (np.arange(len(cols)), cols)), shape=(len(cols), n_c))
                quad.append(conic.QuadConstraint(F, c=float(ant)))
    prob = conic.QcqpProblem(n_c, n_r, q_r=q_r, affine=affine, quad=quad)
    return prob, pos


def _solve_gccp_step(sc, support, w_lin, weights, peaks, tol):
    prob, pos = _gccp_problem(sc, support, w_lin, weights, peaks)
    # Clarabel occasionally stalls just short of the tightest tolerance; a looser
    # retry is kept only if the iterate still meets the true SINR constraints.
    for i, t in enumerate((tol, 10 * tol, 100 * tol)):
        res = conic.solve_qcqp(prob, t)
        if res.status is conic.Status.INFEASIBLE:
            return None, res
        if not res.ok:
            continue
        z, _ = res.x
        w = np.zeros_like(w_lin)
        w[support] = z[pos[support]]
        if i == 0 or min_sinr_margin(w, sc) >= 1 - 1e-6:
            return w, res
    return None, res


def _ccp_vector_loop(
    sc: Scenario,
    w: np.ndarray,
    support: np.ndarray,
    alpha: np.ndarray,
    eta: float,
    theta: Optional[float],
    settings: SolverSettings,
    diag: Diagnostics,
) -> np.ndarray:
    """Inner CCP loop of G-CCP at fixed theta (theta None: pure power minimisation)."""
    kind = settings.smooth_kind
    peaks = _peaks(sc, settings)
    N, L = sc.N, sc.L

    def objective(w_):
        p = block_powers(w_, N, L)
        if theta is None:
            return float(p.sum())
        return surrogate(p, alpha, eta, kind, theta)

    obj = objective(w)
    converged = False
    it = 0
    for it in range(1, settings.ccp_max_iters + 1):
        p = block_powers(w, N, L)
        if theta is None:
            weights = np.ones((sc.M, N))
        else:
            weights = eta + alpha * grad_f_theta(kind, p, theta)
        w_new, res = _solve_gccp_step(sc, support, w, weights, peaks, settings.conic_tol)
        if w_new is None:
            diag.notes.append(f"G-CCP step stopped: {res.status.value}")
            it -= 1
            break
        new_obj = objective(w_new)
        if new_obj > obj + _descent_slack(obj, settings):
            # the majoriser guarantees descent; a rise is solver noise, so stop here
            diag.notes.append(f"G-CCP step rejected at theta={theta}: {obj:.10g} -> {new_obj:.10g}")
            it -= 1
            converged = True
            break
        w = w_new
        _trace(diag, sc, settings, theta, it, new_obj, w, res.objective)
        rel = abs(obj - new_obj) / max(abs(obj), 1e-300)
        obj = new_obj
        if rel < settings.ccp_rel_tol:
            converged = True
            break
    diag.inner_iters.append(it)
    diag.inner_converged.append(converged)
    return w


def _descent_slack(obj: float, settings: SolverSettings) -> float:
    return 10 * settings.conic_tol * max(1.0, abs(obj))


def _trace(diag, sc, settings, theta, it, obj, w, model_obj, lifted=False):
    if lifted:
        p = lifted_block_powers(w, sc.N, sc.L)
        margin = _lifted_margin(w, sc)
    else:
        p = block_powers(w, sc.N, sc.L)
        margin = min_sinr_margin(w, sc) if sc.M else math.inf
    top = p.max(initial=0.0)
    s = (p > settings.cluster_threshold * top) | sc.cached()
    cb = float(np.sum(s * sc.alpha()))
    power = float(p.sum())
    true_cost = power if settings.power_only else cb + settings.eta * power
    row = dict(theta=theta, iteration=it, surrogate=obj, model_objective=model_obj,
               true_cost=true_cost, min_sinr_margin=margin)
    diag.trace.append(row)
    if settings.verbose:
        log.info("theta=%s it=%d surrogate=%.6g cost=%.6g margin=%.6f", theta, it, obj, true_cost, margin)


# --------------------------------------------------------------------------
# clustering and polish


def extract_clusters(
    w: np.ndarray,
    cache: CachePlacement,
    groups: MulticastGroups,
    threshold: float = 1e-4,
) -> tuple[np.ndarray, np.ndarray]:
    """Clustering from near-sparse beamformers and the hard-zeroed beamformers.

    A pair is active when its block power exceeds ``threshold`` times the
    largest block power; BSs caching the group's content are always included
    and every group keeps at least its strongest block.
    """
    M = len(groups.contents)
    N = cache.c.shape[1]
    L = w.shape[1] // N
    p = block_powers(w, N, L)
    keep = p > threshold * p.max(initial=0.0)
    # a weak group (tiny power next to a far user's group) still needs a server
    lost = ~keep.any(axis=1) & (p.max(axis=1, initial=0.0) > 0)
    keep[lost, np.argmax(p[lost], axis=1)] = True
    cached = cache.c[list(groups.contents), :].astype(bool).reshape(M, N)
    w_hard = w * np.repeat(keep, L, axis=1)
    return (keep | cached).astype(int), w_hard


def _outcome(w, s, sc, settings, diag) -> SolveOutcome:
    s = (np.asarray(s, dtype=bool) | sc.cached()).astype(int)
    costs = network_cost(w, s, sc, settings.eta)
    return SolveOutcome(w, s, costs, min_sinr_margin(w, sc) if sc.M else math.inf, diag)


def polish(
    s: np.ndarray,
    sc: Scenario,
    settings: SolverSettings = SolverSettings(),
    seed: int = 0,
    warm: Optional[np.ndarray] = None,
    refine: Optional[bool] = None,
) -> SolveOutcome:
    """Power minimisation with w_{m,n} = 0 wherever s_{m,n} = 0.

    Uses the rescaled ``warm`` beamformer when it can be made feasible,
    otherwise SDR restricted to the clustering followed by rank-1 extraction
    or randomization. With ``refine`` the result is improved by CCP power
    minimisation on the same support. Raises InfeasibleError('cluster').
    """
    t0 = time.perf_counter()
    refine = settings.polish_refine if refine is None else refine
    s = np.asarray(s, dtype=bool)
    diag = Diagnostics(algorithm="polish")
    if np.any(~s.any(axis=1) & (sc.groups.gamma > 0)):
        raise InfeasibleError("cluster", "a group has no serving BS")
    support = _support(s, sc.L)
    w = None
    if warm is not None:
        w = scale_to_feasible(np.where(support, warm, 0), sc, settings)
    if w is None:
        try:
            Ws, _ = _solve_sdr(sc, support, np.ones((sc.M, sc.N)), _peaks(sc, settings), settings.conic_tol)
        except NumericalFailure as e:
            # only seen on near-infeasible, badly conditioned clusterings
            raise InfeasibleError("cluster", f"restricted relaxation unsolved: {e}") from e
        if Ws is None:
            raise InfeasibleError("cluster", "restricted relaxation infeasible")
        key = int("".join("1" if b else "0" for b in s.ravel()) or "0", 2)
        try:
            w = beamformers_from_lifted(Ws, sc, settings, _seed_for(seed, key), diag)
        except InfeasibleError as e:
            raise InfeasibleError("cluster", str(e)) from e
    if refine:
        w = _ccp_vector_loop(sc, w, support, np.zeros((sc.M, sc.N)), 1.0, None, settings, diag)
    diag.wall_time = time.perf_counter() - t0
    return _outcome(w, s, sc, settings, diag)


def _polish_extracted(w, sc: Scenario, settings: SolverSettings, seed: int, refine) -> SolveOutcome:
    """Polish the clustering read off ``w``.

    With binding peak limits, zeroing the sub-threshold blocks can make the
    clustering infeasible; the threshold is then lowered until it reaches the
    exact support of ``w``, which is feasible because ``w`` is.
    """
    thresholds = [settings.cluster_threshold, settings.cluster_threshold * 1e-2, settings.cluster_threshold * 1e-4, 0.0]
    for i, thr in enumerate(thresholds):
        s, w_hard = extract_clusters(w, sc.cache, sc.groups, thr)
        try:
            out = polish(s, sc, settings, seed, warm=w_hard, refine=refine)
        except InfeasibleError:
            if i == len(thresholds) - 1:
                raise
            continue
        if i:
            out.diagnostics.notes.append(f"clustering threshold lowered to {thr:g} for feasibility")
        return out


# --------------------------------------------------------------------------
# the two algorithms


def g_ccp(sc: Scenario, settings: SolverSettings = SolverSettings(), seed: int = 0) -> SolveOutcome:
    """Generalized CCP sparse multicast beamforming (vector variables)."""
    t0 = time.perf_counter()
    diag = Diagnostics(algorithm="g_ccp")
    W0 = solve_p_ini(sc, settings)
    w = beamformers_from_lifted(W0, sc, settings, seed, diag)
    full = np.ones((sc.M, sc.N * sc.L), dtype=bool)
    alpha = sc.alpha()
    if settings.power_only:
        diag.outer_levels = 1
        w = _ccp_vector_loop(sc, w, full, alpha, 1.0, None, settings, diag)
    else:
        levels = theta_levels(theta_init(block_powers(w, sc.N, sc.L)), settings.anneal)
        diag.outer_levels = len(levels)
        for theta in levels:
            w = _ccp_vector_loop(sc, w, full, alpha, settings.eta, theta, settings, diag)
    out = _polish_extracted(w, sc, settings, seed, refine=None)
    diag.trace.extend(out.diagnostics.trace)
    diag.notes.extend(out.diagnostics.notes)
    diag.wall_time = time.perf_counter() - t0
    out.diagnostics = diag
    return out


def _sdr_ccp_loop(sc, Ws, alpha, eta, theta, settings, diag):
    kind = settings.smooth_kind
    peaks = _peaks(sc, settings)
    support = np.ones((sc.M, sc.N * sc.L), dtype=bool)
    p = lifted_block_powers(Ws, sc.N, sc.L)
    obj = surrogate(p, alpha, eta, kind, theta)
    converged = False
    it = 0
    for it in range(1, settings.ccp_max_iters + 1):
        weights = eta + alpha * grad_f_theta(kind, np.maximum(p, 0.0), theta)
        try:
            W_new, res = _solve_sdr(sc, support, weights, peaks, settings.conic_tol)
        except NumericalFailure as e:
            diag.notes.append(f"SDR-CCP step stopped: {e}")
            it -= 1
            break
        if W_new is None:
            diag.notes.append("SDR-CCP step reported infeasible")
            it -= 1
            break
        p_new = lifted_block_powers(W_new, sc.N, sc.L)
        new_obj = surrogate(p_new, alpha, eta, kind, theta)
        if new_obj > obj + _descent_slack(obj, settings):
            diag.notes.append(f"SDR-CCP step rejected at theta={theta}: {obj:.10g} -> {new_obj:.10g}")
            it -= 1
            converged = True
            break
        # constant of the linearisation, so model_objective is the majoriser value
        const = float(np.sum(alpha * (f_theta(kind, np.maximum(p, 0), theta) - grad_f_theta(kind, np.maximum(p, 0), theta) * p)))
        Ws, p = W_new, p_new
        _trace(diag, sc, settings, theta, it, new_obj, Ws, res.objective + const, lifted=True)
        rel = abs(obj - new_obj) / max(abs(obj), 1e-300)
        obj = new_obj
        if rel < settings.ccp_rel_tol:
            converged = True
            break
    diag.inner_iters.append(it)
    diag.inner_converged.append(converged)
    return Ws


def sdr_ccp(sc: Scenario, settings: SolverSettings = SolverSettings(), seed: int = 0) -> SolveOutcome:
    """SDR-based CCP sparse multicast beamforming (lifted variables)."""
    t0 = time.perf_counter()
    diag = Diagnostics(algorithm="sdr_ccp")
    Ws = solve_p_ini(sc, settings)
    if not settings.power_only:
        alpha = sc.alpha()
        levels = theta_levels(theta_init(lifted_block_powers(Ws, sc.N, sc.L)), settings.anneal)
        diag.outer_levels = len(levels)
        for theta in levels:
            Ws = _sdr_ccp_loop(sc, Ws, alpha, settings.eta, theta, settings, diag)
    try:
        w = beamformers_from_lifted(Ws, sc, settings, seed, diag)
    except InfeasibleError as e:
        raise InfeasibleError("init", str(e)) from e
    out = _polish_extracted(w, sc, settings, seed, refine=False)
    diag.notes.extend(out.diagnostics.notes)
    diag.rank_one = diag.rank_one and out.diagnostics.rank_one
    diag.randomized = diag.randomized or out.diagnostics.randomized
    diag.wall_time = time.perf_counter() - t0
    out.diagnostics = diag
    return out
