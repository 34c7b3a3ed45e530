"""G-CCP and SDR-CCP against the exhaustive oracle on the 3-BS validation network."""
import numpy as np
from _common import parser, run, table

from ccbf import harness

ap = parser(__doc__, trials=10)
args = ap.parse_args()

cfg = harness.smallnet_config(n_trials=args.trials, base_seed=args.seed, jobs=args.jobs)
rows, summary = run(cfg, args.out)
table(summary)
oracle = {(r.trial, r.eta): r.total_cost for r in rows if r.algorithm == "exhaustive" and r.feasible}
for alg in ("g_ccp", "sdr_ccp"):
    pairs = np.array([(r.total_cost, oracle[r.trial, r.eta]) for r in rows
                      if r.algorithm == alg and r.feasible and (r.trial, r.eta) in oracle])
    if len(pairs):
        print(f"{alg}: pooled cost ratio to oracle {pairs[:, 0].mean() / pairs[:, 1].mean():.4f}")
