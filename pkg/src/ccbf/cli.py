"""Command line interface: ``python -m ccbf <command> --seed S --out PATH --jobs J``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .ccp import InfeasibleError, NumericalFailure
from .scenario import ConfigError, Scenario, watt_to_dbm

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, required=True, help="base seed")
    p.add_argument("--out", required=True, help="output file")
    p.add_argument("--jobs", type=int, required=True, help="parallel worker processes")
    p.add_argument("--config", help="JSON experiment config; flags override its fields")
    p.add_argument("--n-bs", type=int)
    p.add_argument("--n-ant", type=int)
    p.add_argument("--n-users", type=int)
    p.add_argument("--n-contents", type=int)
    p.add_argument("--sinr-db", type=float)
    p.add_argument("--per-antenna-peak-dbm", type=float)
    p.add_argument("--per-bs-peak-dbm", type=float)
    p.add_argument("--strategy", choices=harness.STRATEGIES)
    p.add_argument("--cache-size", type=int)
    p.add_argument("--zipf-alpha", type=float)
    p.add_argument("--algorithms", help="comma separated subset of " + ",".join(harness.ALGORITHMS))
    p.add_argument("--etas", help="comma separated eta grid; 'power-only' for the power-only mode")
    p.add_argument("--trials", type=int)
    p.add_argument("--smooth", choices=["log", "exp", "arctan"])
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    p.add_argument("--record-wall-time", action="store_true", help="include wall time (not byte-reproducible)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ccbf", description="Cache-aware sparse multicast beamforming experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("generate", help="write one scenario as JSON"))
    p = sub.add_parser("solve", help="solve one scenario with one algorithm at one eta")
    _common(p)
    p.add_argument("--scenario", help="scenario JSON from 'generate' (default: draw from config and seed)")
    p.add_argument("--algorithm", choices=harness.ALGORITHMS, default="g_ccp")
    p.add_argument("--eta", default="1.0")
    _common(sub.add_parser("sweep", help="Monte-Carlo eta sweep"))
    _common(sub.add_parser("validate", help="small-network comparison against the exhaustive oracle"))
    _common(sub.add_parser("compare-caching", help="PopC / RanC / ProC sweep"))
    return ap


def config_from_args(args, base: harness.ExperimentConfig | None = None) -> harness.ExperimentConfig:
    cfg = harness.ExperimentConfig.load(args.config) if args.config else (base or harness.ExperimentConfig())
    radio_kw = {
        k: v
        for k, v in dict(
            n_bs=args.n_bs, n_ant=args.n_ant, n_users=args.n_users, n_contents=args.n_contents,
            sinr_target=args.sinr_db, per_antenna_peak=args.per_antenna_peak_dbm, per_bs_peak=args.per_bs_peak_dbm,
        ).items()
        if v is not None
    }
    kw = dict(base_seed=args.seed, out=args.out, jobs=args.jobs, record_wall_time=args.record_wall_time)
    if radio_kw:
        kw["radio"] = replace(cfg.radio, **radio_kw)
    if args.strategy:
        kw["strategy"] = args.strategy
    if args.cache_size is not None:
        kw["cache_size"] = args.cache_size
    if args.zipf_alpha is not None:
        kw["popularity"] = replace(cfg.popularity, kind="zipf", alpha=args.zipf_alpha)
    if args.algorithms:
        kw["algorithms"] = tuple(a.strip() for a in args.algorithms.split(","))
    if args.etas:
        kw["etas"] = tuple(harness.parse_eta(e) for e in args.etas.split(","))
    if args.trials is not None:
        kw["n_trials"] = args.trials
    if args.smooth:
        kw["smooth_kind"] = args.smooth
    return cfg.replace(**kw)


def _write_sweep(rows, summary, out: str, fmt: str) -> None:
    harness.emit_results(rows, out, fmt)
    p = Path(out)
    harness.emit_results(summary, p.with_name(p.stem + ".summary" + p.suffix), fmt)


def _print_summary(summary) -> None:
    for s in summary:
        eta = harness.format_eta(s.eta)
        if s.n_feasible:
            print(f"{s.strategy:5s} {s.algorithm:11s} eta={eta!s:>10}  feasible {s.n_feasible}/{s.n_trials}  "
                  f"backhaul {s.mean_backhaul_bps / 1e6:9.3f} Mbit/s  power {s.mean_power_w:9.4g} W  "
                  f"cost {s.mean_total_cost:.6g}")
        else:
            print(f"{s.strategy:5s} {s.algorithm:11s} eta={eta!s:>10}  feasible 0/{s.n_trials}")


def cmd_generate(args) -> int:
    cfg = config_from_args(args)
    sc = harness.build_trial_scenario(cfg, args.seed)
    sc.save(args.out)
    print(f"scenario {harness.scenario_hash(sc)}: {sc.M} groups, {sc.N} BSs x {sc.L} antennas -> {args.out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = config_from_args(args)
    sc = Scenario.load(args.scenario) if args.scenario else harness.build_trial_scenario(cfg, args.seed)
    eta = harness.parse_eta(args.eta)
    try:
        out = harness.solve_one(sc, args.algorithm, eta, cfg.solver_settings(eta), args.seed)
    except InfeasibleError as e:
        Path(args.out).write_text(json.dumps({"feasible": False, "status": f"infeasible:{e.stage}"}) + "\n")
        print(f"infeasible ({e.stage}): {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    res = {
        "algorithm": args.algorithm,
        "eta": harness.format_eta(eta),
        "scenario_hash": harness.scenario_hash(sc),
        "feasible": out.feasible,
        "backhaul_bps": out.costs.backhaul * sc.cfg.backhaul_unit,
        "power_w": out.costs.power,
        "power_dbm": watt_to_dbm(out.costs.power) if out.costs.power > 0 else None,
        "total_cost": out.costs.total,
        "min_sinr_margin": out.min_sinr_margin,
        "clustering": np.asarray(out.clustering).tolist(),
        "beamformers_real": np.real(out.beamformers).tolist(),
        "beamformers_imag": np.imag(out.beamformers).tolist(),
        "notes": out.diagnostics.notes,
    }
    Path(args.out).write_text(json.dumps(res, indent=1) + "\n")
    print(f"{args.algorithm} eta={res['eta']}: backhaul {res['backhaul_bps'] / 1e6:.3f} Mbit/s, "
          f"power {out.costs.power:.4g} W, margin {out.min_sinr_margin:.6f}")
    return EXIT_OK if out.feasible else EXIT_INFEASIBLE


def cmd_sweep(args, base=None) -> int:
    cfg = config_from_args(args, base)
    rows, summary = harness.run_sweep(cfg)
    _write_sweep(rows, summary, args.out, args.format)
    _print_summary(summary)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = config_from_args(args, harness.smallnet_config(n_trials=20))
    rows, summary = harness.run_sweep(cfg)
    _write_sweep(rows, summary, args.out, args.format)
    _print_summary(summary)
    oracle = {(r.trial, r.eta): r.total_cost for r in rows if r.algorithm == "exhaustive" and r.feasible}
    for alg in sorted(set(cfg.algorithms) - {"exhaustive"}):
        pairs = [(r.total_cost, oracle[(r.trial, r.eta)]) for r in rows
                 if r.algorithm == alg and r.feasible and (r.trial, r.eta) in oracle]
        if pairs:
            a, o = np.array(pairs).T
            print(f"{alg}: mean cost / oracle mean cost = {a.mean() / o.mean():.4f} over {len(pairs)} cells")
    return EXIT_OK


def cmd_compare_caching(args) -> int:
    base = config_from_args(args)
    rows = []
    for strategy in harness.STRATEGIES:
        r, _ = harness.run_sweep(base.replace(strategy=strategy))
        rows += r
    rows = harness.sort_rows(rows)
    summary = harness.summarize(rows)
    _write_sweep(rows, summary, args.out, args.format)
    _print_summary(summary)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "compare-caching": cmd_compare_caching,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError, OSError, NumericalFailure) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
