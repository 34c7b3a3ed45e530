"""Print the G-CCP iteration trace: surrogate value and SINR margin per inner step."""
import argparse

from ccbf import harness
from ccbf.ccp import SolverSettings, g_ccp
from ccbf.smooth import SmoothKind

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--eta", type=float, default=1.0)
ap.add_argument("--smooth", choices=[k.value for k in SmoothKind], default="arctan")
args = ap.parse_args()

sc = harness.build_trial_scenario(harness.smallnet_config(), args.seed)
out = g_ccp(sc, SolverSettings(eta=args.eta, smooth_kind=SmoothKind(args.smooth)), seed=args.seed)
print(f"{'theta':>10s} {'iter':>5s} {'surrogate':>14s} {'true cost':>12s} {'margin':>10s}")
for row in out.diagnostics.trace:
    theta = "init" if row["theta"] is None else f"{row['theta']:.3g}"
    print(f"{theta:>10s} {row['iteration']:5d} {row['surrogate']:14.8g} {row['true_cost']:12.6g} {row['min_sinr_margin']:10.6f}")
print(f"final: backhaul {out.costs.backhaul:.3f} Mbit/s, power {out.costs.power:.4g} W, cost {out.costs.total:.6g}")
for note in out.diagnostics.notes:
    print("note:", note)
