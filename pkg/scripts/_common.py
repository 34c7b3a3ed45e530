"""Shared argument handling for the experiment scripts."""
import argparse
import math

from ccbf import harness


def parser(description: str, trials: int = 2) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=trials)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default=None, help="CSV for per-trial rows (a .summary.csv is written next to it)")
    return ap


def radio(full: bool, **kw) -> harness.RadioConfig:
    """7 cells x 4 antennas, 30 users, 100 contents with ``full``; otherwise a 3-cell desk network."""
    base = {} if full else dict(n_bs=3, n_ant=2, n_users=6, n_contents=10)
    base.update(kw)
    return harness.RadioConfig(**base)


def run(cfg: harness.ExperimentConfig, out=None):
    rows, summary = harness.run_sweep(cfg)
    if out:
        harness.emit_results(rows, out)
        harness.emit_results(summary, out.rsplit(".", 1)[0] + ".summary.csv")
    return rows, summary


def table(summary, key=lambda s: s.algorithm) -> None:
    print(f"{'':14s} {'eta':>10s} {'feasible':>9s} {'backhaul Mbit/s':>16s} {'power dBm':>10s} {'cost':>12s}")
    for s in summary:
        eta = harness.format_eta(s.eta)
        if not s.n_feasible:
            print(f"{key(s):14s} {eta!s:>10} {'0/' + str(s.n_trials):>9s}")
            continue
        dbm = 10 * math.log10(s.mean_power_w * 1e3)
        print(f"{key(s):14s} {eta!s:>10} {f'{s.n_feasible}/{s.n_trials}':>9s} "
              f"{s.mean_backhaul_bps / 1e6:16.3f} {dbm:10.2f} {s.mean_total_cost:12.5g}")
