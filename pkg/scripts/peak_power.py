"""Effect of a per-BS peak power cap on the minimum backhaul G-CCP reaches (eta = 1e-6)."""
import argparse

import numpy as np

from ccbf import harness
from ccbf.ccp import InfeasibleError, SolverSettings, g_ccp
from ccbf.scenario import watt_to_dbm

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seed", type=int, default=9, help="scenario seed of the 3-BS validation network")
ap.add_argument("--caps-w", default="none,0.6,0.2", help="comma separated per-BS caps in W; 'none' for uncapped")
ap.add_argument("--eta", type=float, default=1e-6)
args = ap.parse_args()

sc = harness.build_trial_scenario(harness.smallnet_config(), args.seed)
print(f"{'cap':>10s} {'backhaul Mbit/s':>16s} {'power dBm':>10s} {'max BS power W':>15s}")
for cap in args.caps_w.split(","):
    peak = None if cap == "none" else float(cap)
    try:
        out = g_ccp(sc, SolverSettings(eta=args.eta, peak_per_bs=peak), args.seed)
    except InfeasibleError as e:
        print(f"{cap:>10s}  infeasible ({e.stage})")
        continue
    per_bs = (np.abs(out.beamformers) ** 2).reshape(sc.M, sc.N, sc.L).sum(axis=(0, 2))
    print(f"{cap:>10s} {out.costs.backhaul:16.3f} {watt_to_dbm(out.costs.power):10.2f} {per_bs.max():15.4f}")
