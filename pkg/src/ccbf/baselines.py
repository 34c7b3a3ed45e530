"""Reference methods: exhaustive clustering oracle, cache-aware greedy, and
reweighted-l1 sparse unicast beamforming."""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import conic
from .ccp import (
    Diagnostics,
    InfeasibleError,
    SolveOutcome,
    SolverSettings,
    _peaks,
    polish,
)
from .scenario import CostBreakdown, Scenario, backhaul_cost, block_powers

MAX_SUBPROBLEMS = 2**20


class GuardError(ValueError):
    """Enumeration would exceed the subproblem budget."""


def _cost(backhaul: float, power: float, eta: float) -> float:
    return power if math.isinf(eta) else backhaul + eta * power


class PolishCache:
    """Memoised polish results keyed by clustering.

    The polished power of a clustering does not depend on eta, so one table
    serves an entire eta sweep. Infeasible clusterings are stored as None.
    """

    def __init__(self, sc: Scenario, settings: SolverSettings, seed: int = 0):
        self.sc, self.settings, self.seed = sc, settings, seed
        self._table: dict[bytes, Optional[SolveOutcome]] = {}

    def __len__(self):
        return len(self._table)

    def get(self, s: np.ndarray) -> Optional[SolveOutcome]:
        s = np.asarray(s, dtype=np.int8)
        key = s.tobytes()
        if key not in self._table:
            try:
                out = polish(s, self.sc, self.settings, self.seed)
                self._table[key] = out if out.feasible else None
            except InfeasibleError:
                self._table[key] = None
        return self._table[key]

    def evaluate(self, s: np.ndarray, eta: float) -> Optional[SolveOutcome]:
        """Polished outcome with costs at ``eta``; the clustering reported is ``s``."""
        out = self.get(s)
        if out is None:
            return None
        cb = backhaul_cost(s, self.sc.cache, self.sc.groups, self.sc.cfg.backhaul_unit)
        cp = out.costs.power
        costs = CostBreakdown(cb, cp, _cost(cb, cp, eta), float(eta))
        return SolveOutcome(out.beamformers, np.asarray(s, dtype=int), costs, out.min_sinr_margin, out.diagnostics)


@dataclass
class OracleOutcome:
    best_clustering: np.ndarray
    outcome: SolveOutcome
    n_evaluated: int
    n_pruned: int
    table: list[dict] = field(default_factory=list)


def enumerate_clusterings(sc: Scenario, prune: bool = True):
    """Yield every candidate clustering as an (M, N) int8 array.

    With ``prune`` the pairs whose content is cached at the BS are fixed to 1.
    Order is lexicographic in the row-major bit string, smallest first.
    """
    fixed = sc.cached() if prune else np.zeros((sc.M, sc.N), dtype=bool)
    free = np.flatnonzero(~fixed.ravel())
    if 2 ** len(free) > MAX_SUBPROBLEMS:
        raise GuardError(f"2^{len(free)} clusterings exceed the limit of {MAX_SUBPROBLEMS}")
    base = fixed.ravel().astype(np.int8)
    for bits in itertools.product((0, 1), repeat=len(free)):
        s = base.copy()
        s[free] = bits
        yield s.reshape(sc.M, sc.N)


def exhaustive_search(
    sc: Scenario,
    eta: float,
    settings: SolverSettings = SolverSettings(),
    seed: int = 0,
    prune: bool = True,
    cache: Optional[PolishCache] = None,
) -> OracleOutcome:
    """Minimum network cost over all clusterings, each polished.

    Optimal up to the quality of the per-clustering power minimisation.
    Raises InfeasibleError('cluster') when no clustering is feasible.
    """
    cache = cache or PolishCache(sc, settings.with_eta(eta), seed)
    n_free = int((~(sc.cached() if prune else np.zeros((sc.M, sc.N), bool))).sum())
    n_pruned = 2 ** (sc.M * sc.N) - 2**n_free
    best, best_key, table = None, None, []
    n_eval = 0
    for s in enumerate_clusterings(sc, prune):
        n_eval += 1
        out = cache.evaluate(s, eta)
        row = {"clustering": s.ravel().tolist(), "feasible": out is not None}
        if out is not None:
            row.update(backhaul=out.costs.backhaul, power=out.costs.power, total=out.costs.total)
            key = (out.costs.total, tuple(s.ravel()))
            if best_key is None or key < best_key:
                best, best_key = out, key
        table.append(row)
    if best is None:
        raise InfeasibleError("cluster", "no feasible clustering")
    best.diagnostics.notes.append(f"oracle: {n_eval} evaluated, {n_pruned} pruned")
    return OracleOutcome(best.clustering, best, n_eval, n_pruned, table)


def greedy_clustering(
    sc: Scenario,
    eta: float,
    settings: SolverSettings = SolverSettings(),
    seed: int = 0,
    cache: Optional[PolishCache] = None,
) -> SolveOutcome:
    """Steepest pairwise deactivation from full cooperation."""
    t0 = time.perf_counter()
    cache = cache or PolishCache(sc, settings.with_eta(eta), seed)
    s = np.ones((sc.M, sc.N), dtype=np.int8)
    cur = cache.evaluate(s, eta)
    if cur is None:
        raise InfeasibleError("init", "full cooperation infeasible")
    cached = sc.cached()
    rounds = 0
    while True:
        best = None
        for m, n in zip(*np.nonzero((s == 1) & ~cached)):
            trial = s.copy()
            trial[m, n] = 0
            out = cache.evaluate(trial, eta)
            if out is not None and out.costs.total < cur.costs.total and (
                best is None or out.costs.total < best[1].costs.total
            ):
                best = (trial, out)
        if best is None:
            break
        s, cur = best
        rounds += 1
    diag = Diagnostics(algorithm="greedy", outer_levels=rounds, wall_time=time.perf_counter() - t0)
    diag.notes.append("greedy variant: one (group, BS) pair removed per round, steepest descent")
    return SolveOutcome(cur.beamformers, cur.clustering, cur.costs, cur.min_sinr_margin, diag)


# --------------------------------------------------------------------------
# unicast


def _unicast_users(sc: Scenario):
    """(user, group) for every scheduled user."""
    return [(k, m) for m, users in enumerate(sc.groups.users) for k in users]


def unicast_margin(v: np.ndarray, sc: Scenario) -> float:
    """min_k SINR_k / gamma_k with one beamformer per user (rows of ``v``)."""
    users = _unicast_users(sc)
    g = sc.scaled_channels()[[k for k, _ in users]]
    gain = np.abs(g.conj() @ v.T) ** 2  # (U, U): user i, beam j
    sig = np.diag(gain)
    interf = gain.sum(axis=1) - sig
    gam = sc.groups.gamma[[m for _, m in users]]
    return float(np.min(sig / (interf + 1.0) / gam))


def _unicast_problem(sc: Scenario, support: np.ndarray, weights: Optional[np.ndarray], eta: float, peaks):
    """Reweighted-l1 (``weights`` given) or pure power-minimisation SOCP.

    Complex variables are the active entries of the (U, NL) beamformer matrix;
    real variables are one norm bound per (user, BS) plus the total power.
    """
    users = _unicast_users(sc)
    U, N, L = len(users), sc.N, sc.L
    g = sc.scaled_channels()[[k for k, _ in users]]
    gam = sc.groups.gamma[[m for _, m in users]]
    idx = -np.ones((U, N * L), dtype=int)
    idx[support] = np.arange(int(support.sum()))
    nz = int(support.sum())
    n_u = U * N
    n_real = n_u + 1
    p_col = n_u

    def row(j, coeffs):
        r = np.zeros(nz, dtype=complex)
        mask = idx[j] >= 0
        r[idx[j][mask]] = coeffs[mask]
        return r

    soc, aff, quad = [], [], []
    for i in range(U):
        # sqrt(gamma) || (g_i^H v_j)_{j != i}, 1 || <= Re(g_i^H v_i), Im(g_i^H v_i) = 0
        rows = [np.sqrt(gam[i]) * row(j, g[i].conj()) for j in range(U) if j != i]
        rows.append(np.zeros(nz, dtype=complex))
        F = np.array(rows)
        gvec = np.zeros(len(rows))
        gvec[-1] = np.sqrt(gam[i])
        a_own = np.conj(row(i, g[i].conj()))  # a^H z = g_i^H v_i
        soc.append(conic.SocConstraint(F, gvec, a_own, np.zeros(n_real), 0.0))
        aff.append(conic.AffineConstraint(1j * a_own, np.zeros(n_real), 0.0, "=="))
    for i in range(U):
        for n in range(N):
            cols = [idx[i, n * L + l] for l in range(L) if idx[i, n * L + l] >= 0]
            if not cols:
                continue
            F = np.zeros((len(cols), nz), dtype=complex)
            F[np.arange(len(cols)), cols] = 1.0
            a_r = np.zeros(n_real)
            a_r[i * N + n] = 1.0
            soc.append(conic.SocConstraint(F, np.zeros(len(cols)), np.zeros(nz, complex), a_r, 0.0))
    a_r = np.zeros(n_real)
    a_r[p_col] = 1.0
    quad.append(conic.QuadConstraint(np.eye(nz, dtype=complex), np.zeros(nz), np.zeros(nz, complex), a_r, 0.0))
    ant, bs = peaks
    for n in range(N):
        cols = [idx[i, n * L + l] for i in range(U) for l in range(L) if idx[i, n * L + l] >= 0]
        if bs is not None and cols:
            F = np.zeros((len(cols), nz), dtype=complex)
            F[np.arange(len(cols)), cols] = 1.0
            quad.append(conic.QuadConstraint(F, np.zeros(len(cols)), np.zeros(nz, complex), np.zeros(n_real), bs))
        if ant is not None:
            for l in range(L):
                cl = [idx[i, n * L + l] for i in range(U) if idx[i, n * L + l] >= 0]
                if cl:
                    F = np.zeros((len(cl), nz), dtype=complex)
                    F[np.arange(len(cl)), cl] = 1.0
                    quad.append(conic.QuadConstraint(F, np.zeros(len(cl)), np.zeros(nz, complex), np.zeros(n_real), ant))
    q_r = np.zeros(n_real)
    if weights is None:
        q_r[p_col] = 1.0
    else:
        q_r[:n_u] = weights.ravel()
        q_r[p_col] = 0.0 if math.isinf(eta) else eta
        if math.isinf(eta):
            q_r[:n_u] = 0.0
            q_r[p_col] = 1.0
    prob = conic.QcqpProblem(nz, n_real, np.zeros(nz, complex), q_r, aff, quad, soc)
    return prob, idx


def _solve_unicast(sc, support, weights, eta, peaks, tol):
    prob, idx = _unicast_problem(sc, support, weights, eta, peaks)
    res = conic.solve_qcqp(prob, tol)
    if not res.ok:
        return None, res
    z = res.x[0]
    v = np.zeros(idx.shape, dtype=complex)
    v[idx >= 0] = z[idx[idx >= 0]]
    return v, res


def unicast_sparse_bf(
    sc: Scenario,
    eta: float,
    settings: SolverSettings = SolverSettings(),
    seed: int = 0,
    iterations: int = 10,
    delta: float = 1e-6,
) -> SolveOutcome:
    """One beamformer per user, BS sparsity by iteratively reweighted l1.

    Each (BS, content) pair costs one backhaul copy at the group rate when the
    BS serves any user of that content without caching it. After reweighting,
    the power is re-minimised on the selected support. Raises
    InfeasibleError('p_ini') when the per-user SINR targets cannot be met.
    """
    t0 = time.perf_counter()
    users = _unicast_users(sc)
    U, N, L = len(users), sc.N, sc.L
    ms = np.array([m for _, m in users], dtype=int)
    alpha = sc.alpha()[ms]  # (U, N) backhaul weight of each user-BS link
    peaks = _peaks(sc, settings)
    full = np.ones((U, N * L), dtype=bool)
    rho = np.ones((U, N))
    diag = Diagnostics(algorithm="unicast")
    v = None
    for it in range(iterations):
        v_new, res = _solve_unicast(sc, full, rho * alpha, eta, peaks, settings.conic_tol)
        if v_new is None:
            if v is None:
                raise InfeasibleError("p_ini", f"unicast SINR targets infeasible ({res.status.value})")
            break
        v = v_new
        norms = np.sqrt(block_powers(v, N, L))
        rho = 1.0 / (norms + delta)
        diag.inner_iters.append(it + 1)
    p = block_powers(v, N, L)
    keep = p > settings.cluster_threshold * p.max(initial=0.0)
    keep |= sc.cached()[ms]
    support = np.repeat(keep, L, axis=1)
    v_fin, _ = _solve_unicast(sc, support, None, eta, peaks, settings.conic_tol)
    if v_fin is None:
        v_fin, keep = v, p > 0
    s = np.zeros((sc.M, N), dtype=int)
    for u, m in enumerate(ms):
        s[m] |= keep[u].astype(int)
    s |= sc.cached().astype(int)
    cb = backhaul_cost(s, sc.cache, sc.groups, sc.cfg.backhaul_unit)
    cp = float(np.sum(np.abs(v_fin) ** 2))
    diag.wall_time = time.perf_counter() - t0
    return SolveOutcome(v_fin, s, CostBreakdown(cb, cp, _cost(cb, cp, eta), float(eta)), unicast_margin(v_fin, sc), diag)
