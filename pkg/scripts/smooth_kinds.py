"""Compare the log, exp and arctan surrogates against the exhaustive oracle on small networks."""
from _common import parser, table

from ccbf import harness

ap = parser(__doc__, trials=5)
args = ap.parse_args()

rows, summaries = [], []
oracle_cfg = harness.smallnet_config(algorithms=("exhaustive",), n_trials=args.trials, base_seed=args.seed, jobs=args.jobs)
_, s = harness.run_sweep(oracle_cfg)
summaries += [(x, "exhaustive") for x in s]
for kind in ("log", "exp", "arctan"):
    cfg = oracle_cfg.replace(algorithms=("g_ccp",), smooth_kind=kind)
    r, s = harness.run_sweep(cfg)
    rows += r
    summaries += [(x, f"g_ccp/{kind}") for x in s]

labels = {id(x): name for x, name in summaries}
table([x for x, _ in summaries], key=lambda x: labels[id(x)])
if args.out:
    harness.emit_results([x for x, _ in summaries], args.out)
