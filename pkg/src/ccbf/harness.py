"""Seeded Monte-Carlo experiments, eta sweeps and flat result files."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import baselines
from .ccp import InfeasibleError, NumericalFailure, SolveOutcome, SolverSettings, g_ccp, sdr_ccp, solve_p_ini
from .scenario import ConfigError, Popularity, RadioConfig, Scenario, build_scenario, watt_to_dbm, zipf_popularity
from .smooth import AnnealSchedule, SmoothKind

ALGORITHMS = ("sdr_ccp", "g_ccp", "greedy", "exhaustive", "unicast", "full_coop")
STRATEGIES = ("PopC", "RanC", "ProC")
POWER_ONLY = "power-only"
PAPER_ETAS = (1e-6, 1e-3, 0.01, 0.1, 0.3, 1.0, 5.0, 10.0, 30.0, math.inf)


def parse_eta(x) -> float:
    if isinstance(x, str) and x.strip().lower() in (POWER_ONLY, "inf", "power_only"):
        return math.inf
    return float(x)


def format_eta(eta: float):
    return POWER_ONLY if math.isinf(eta) else eta


@dataclass(frozen=True)
class PopularitySpec:
    """``zipf`` (optionally with a trending subset), ``equal`` or ``explicit``."""

    kind: str = "zipf"
    alpha: float = 1.0
    trending_mass: Optional[float] = 0.5
    probs: tuple = ()

    def build(self, n_contents: int) -> Popularity:
        if self.kind == "zipf":
            return zipf_popularity(n_contents, self.alpha, self.trending_mass)
        if self.kind == "equal":
            return Popularity(np.full(n_contents, 1.0 / n_contents))
        if self.kind == "explicit":
            if len(self.probs) != n_contents:
                raise ConfigError("explicit popularity needs one probability per content")
            return Popularity(np.asarray(self.probs, dtype=float))
        raise ConfigError(f"unknown popularity kind {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    radio: RadioConfig = field(default_factory=RadioConfig)
    popularity: PopularitySpec = field(default_factory=PopularitySpec)
    strategy: str = "PopC"
    cache_size: int = 10
    algorithms: tuple = ("g_ccp",)
    etas: tuple = PAPER_ETAS
    n_trials: int = 1
    base_seed: int = 0
    out: Optional[str] = None
    jobs: int = 1
    smooth_kind: str = "arctan"
    n_randomizations: int = 300
    ccp_rel_tol: float = 1e-4
    ccp_max_iters: int = 30
    cluster_threshold: float = 1e-4
    record_wall_time: bool = False

    def __post_init__(self):
        if not self.etas:
            raise ConfigError("eta grid must be non-empty")
        if self.n_trials < 1 or self.jobs < 1:
            raise ConfigError("n_trials and jobs must be >= 1")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad or not self.algorithms:
            raise ConfigError(f"unknown algorithms {sorted(bad)}; choose from {ALGORITHMS}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if any(parse_eta(e) < 0 for e in self.etas):
            raise ConfigError("eta must be non-negative")
        object.__setattr__(self, "etas", tuple(parse_eta(e) for e in self.etas))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        SmoothKind(self.smooth_kind)

    def solver_settings(self, eta: float = 1.0) -> SolverSettings:
        return SolverSettings(
            eta=eta,
            smooth_kind=SmoothKind(self.smooth_kind),
            ccp_rel_tol=self.ccp_rel_tol,
            ccp_max_iters=self.ccp_max_iters,
            n_randomizations=self.n_randomizations,
            cluster_threshold=self.cluster_threshold,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["etas"] = [format_eta(e) for e in self.etas]
        d["algorithms"] = list(self.algorithms)
        d["popularity"]["probs"] = list(self.popularity.probs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "radio" in d:
            d["radio"] = RadioConfig(**d["radio"])
        if "popularity" in d:
            p = dict(d["popularity"])
            p["probs"] = tuple(p.get("probs", ()))
            d["popularity"] = PopularitySpec(**p)
        for key in ("algorithms", "etas"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def smallnet_config(**kw) -> ExperimentConfig:
    """The small-network validation setting: 3 BSs x 3 antennas, 6 users, 4 contents."""
    base = dict(
        radio=RadioConfig(n_bs=3, n_ant=3, n_users=6, n_contents=4),
        popularity=PopularitySpec("explicit", probs=(0.48, 0.24, 0.16, 0.12)),
        strategy="PopC",
        cache_size=2,
        algorithms=("exhaustive", "g_ccp", "sdr_ccp"),
        etas=(1e-6, 0.1, 1.0, 10.0, math.inf),
    )
    base.update(kw)
    return ExperimentConfig(**base)


# --------------------------------------------------------------------------
# rows


@dataclass
class ResultRow:
    trial: int
    seed: int
    scenario_hash: str
    strategy: str
    algorithm: str
    eta: float
    feasible: bool
    status: str
    n_groups: int
    backhaul_bps: Optional[float] = None
    power_w: Optional[float] = None
    power_dbm: Optional[float] = None
    total_cost: Optional[float] = None
    min_sinr_margin: Optional[float] = None
    outer_levels: Optional[int] = None
    inner_iters: Optional[int] = None
    rank_one: Optional[bool] = None
    randomized: Optional[bool] = None
    wall_time: Optional[float] = None


COLUMNS = [f.name for f in fields(ResultRow)]


def trial_seed(base_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([int(base_seed), int(trial)]).generate_state(1)[0])


def scenario_hash(sc: Scenario) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(sc.channels.h).tobytes())
    h.update(np.ascontiguousarray(sc.cache.c).tobytes())
    h.update(repr(sc.groups.users).encode())
    return h.hexdigest()[:16]


def build_trial_scenario(cfg: ExperimentConfig, seed: int) -> Scenario:
    pop = cfg.popularity.build(cfg.radio.n_contents)
    return build_scenario(cfg.radio, seed, pop, cfg.strategy, cfg.cache_size)


def solve_one(
    sc: Scenario,
    algorithm: str,
    eta: float,
    settings: SolverSettings,
    seed: int,
    cache: Optional[baselines.PolishCache] = None,
) -> SolveOutcome:
    """Dispatch one algorithm at one eta; errors propagate."""
    settings = settings.with_eta(eta)
    if algorithm == "g_ccp":
        return g_ccp(sc, settings, seed)
    if algorithm == "sdr_ccp":
        return sdr_ccp(sc, settings, seed)
    if algorithm == "unicast":
        return baselines.unicast_sparse_bf(sc, eta, settings, seed)
    cache = cache or baselines.PolishCache(sc, settings, seed)
    if algorithm == "exhaustive":
        return baselines.exhaustive_search(sc, eta, settings, seed, cache=cache).outcome
    if algorithm == "greedy":
        return baselines.greedy_clustering(sc, eta, settings, seed, cache=cache)
    if algorithm == "full_coop":
        out = cache.evaluate(np.ones((sc.M, sc.N), dtype=np.int8), eta)
        if out is None:
            raise InfeasibleError("init", "full cooperation infeasible")
        return out
    raise ConfigError(f"unknown algorithm {algorithm!r}")


def _row(base: dict, out: SolveOutcome, cb_unit: float, record_time: bool) -> ResultRow:
    d = out.diagnostics
    return ResultRow(
        **base,
        feasible=bool(out.feasible),
        status="ok" if out.feasible else "infeasible:margin",
        backhaul_bps=out.costs.backhaul * cb_unit,
        power_w=out.costs.power,
        power_dbm=watt_to_dbm(out.costs.power) if out.costs.power > 0 else -math.inf,
        total_cost=out.costs.total,
        min_sinr_margin=out.min_sinr_margin,
        outer_levels=d.outer_levels,
        inner_iters=int(sum(d.inner_iters)),
        rank_one=bool(d.rank_one),
        randomized=bool(d.randomized),
        wall_time=d.wall_time if record_time else None,
    )


def run_trial(cfg: ExperimentConfig, trial: int) -> list[ResultRow]:
    """Every (algorithm, eta) on one scenario draw; failures become rows."""
    seed = trial_seed(cfg.base_seed, trial)
    sc = build_trial_scenario(cfg, seed)
    base = dict(trial=trial, seed=seed, scenario_hash=scenario_hash(sc), strategy=cfg.strategy, n_groups=sc.M)
    settings = cfg.solver_settings()
    rows = []
    try:
        solve_p_ini(sc, settings)
        p_ini_status = None
    except InfeasibleError:
        p_ini_status = "infeasible:p_ini"
    except NumericalFailure:
        p_ini_status = "error:numerical"
    cache = baselines.PolishCache(sc, settings, seed)
    for alg in sorted(cfg.algorithms):
        for eta in sorted(cfg.etas):
            b = dict(base, algorithm=alg, eta=eta)
            if p_ini_status:
                rows.append(ResultRow(**b, feasible=False, status=p_ini_status))
                continue
            t0 = time.perf_counter()
            try:
                out = solve_one(sc, alg, eta, settings, seed, cache)
                out.diagnostics.wall_time = time.perf_counter() - t0
                rows.append(_row(b, out, sc.cfg.backhaul_unit, cfg.record_wall_time))
            except InfeasibleError as e:
                rows.append(ResultRow(**b, feasible=False, status=f"infeasible:{e.stage}"))
            except (NumericalFailure, baselines.GuardError) as e:
                rows.append(ResultRow(**b, feasible=False, status=f"error:{type(e).__name__}"))
    return rows


def _run_trial_star(args):
    return run_trial(*args)


@dataclass
class SummaryRow:
    strategy: str
    algorithm: str
    eta: float
    n_trials: int
    n_feasible: int
    mean_backhaul_bps: Optional[float]
    mean_power_w: Optional[float]
    mean_power_dbm: Optional[float]
    mean_total_cost: Optional[float]


def summarize(rows: Sequence[ResultRow]) -> list[SummaryRow]:
    """Tradeoff points: means over feasible rows per (strategy, algorithm, eta)."""
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.strategy, r.algorithm, r.eta), []).append(r)
    out = []
    for (strategy, alg, eta), rs in sorted(groups.items()):
        ok = [r for r in rs if r.feasible]
        mean = (lambda xs: float(np.mean(xs))) if ok else (lambda xs: None)
        pw = mean([r.power_w for r in ok])
        out.append(SummaryRow(
            strategy, alg, eta, len(rs), len(ok),
            mean([r.backhaul_bps for r in ok]), pw,
            watt_to_dbm(pw) if pw else None,
            mean([r.total_cost for r in ok]),
        ))
    return out


def sort_rows(rows):
    return sorted(rows, key=lambda r: (r.strategy, r.trial, r.algorithm, r.eta))


def run_sweep(cfg: ExperimentConfig) -> tuple[list[ResultRow], list[SummaryRow]]:
    tasks = [(cfg, t) for t in range(cfg.n_trials)]
    if cfg.jobs == 1:
        chunks = [_run_trial_star(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            chunks = list(ex.map(_run_trial_star, tasks))
    rows = sort_rows([r for c in chunks for r in c])
    return rows, summarize(rows)


# --------------------------------------------------------------------------
# files


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return POWER_ONLY if v > 0 else "-inf"
        return f"{v:.10g}"
    return str(v)


def _json_value(v):
    if isinstance(v, float):
        if math.isinf(v):
            return POWER_ONLY if v > 0 else "-inf"
        return float(f"{v:.10g}")
    return v


def emit_results(rows: Sequence, path, fmt: str = "csv") -> Path:
    """Write dataclass rows with a stable column order and 10 significant digits."""
    path = Path(path)
    cols = [f.name for f in fields(type(rows[0]))] if rows else COLUMNS
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in cols])
        text = buf.getvalue()
    elif fmt in ("jsonl", "json-lines"):
        text = "".join(
            json.dumps({c: _json_value(getattr(r, c)) for c in cols}, allow_nan=False) + "\n" for r in rows
        )
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path.write_text(text)
    return path


_INT = {"trial", "seed", "n_groups", "outer_levels", "inner_iters", "n_trials", "n_feasible"}
_BOOL = {"feasible", "rank_one", "randomized"}
_STR = {"scenario_hash", "strategy", "algorithm", "status"}


def _parse(col, v):
    if v is None or v == "":
        return None
    if col in _STR:
        return str(v)
    if col in _BOOL:
        return v if isinstance(v, bool) else v == "true"
    if col in _INT:
        return int(v)
    if v == POWER_ONLY:
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


def read_results(path, fmt: Optional[str] = None, row_type=ResultRow) -> list:
    path = Path(path)
    fmt = fmt or ("jsonl" if path.suffix in (".jsonl", ".json") else "csv")
    text = path.read_text()
    if fmt == "csv":
        recs = list(csv.DictReader(io.StringIO(text)))
    else:
        recs = [json.loads(line) for line in text.splitlines() if line.strip()]
    return [row_type(**{k: _parse(k, v) for k, v in rec.items()}) for rec in recs]


def rounded(row):
    """The row as it reads back from a file (10 significant digits)."""
    vals = {}
    for f in fields(row):
        v = getattr(row, f.name)
        vals[f.name] = float(f"{v:.10g}") if isinstance(v, float) and math.isfinite(v) else v
    return type(row)(**vals)
