"""Popularity-aware, random and probabilistic caching under G-CCP.

Defaults to a 3-cell desk network; ``--full`` selects the 7-cell network (slow).
"""
from _common import parser, radio, run, table

from ccbf import harness

ap = parser(__doc__.splitlines()[0])
ap.add_argument("--cache-size", type=int, default=2)
ap.add_argument("--full", action="store_true")
ap.add_argument("--zipf-alpha", type=float, default=1.0)
args = ap.parse_args()

base = harness.ExperimentConfig(
    radio=radio(args.full),
    cache_size=args.cache_size,
    popularity=harness.PopularitySpec("zipf", alpha=args.zipf_alpha),
    n_trials=args.trials,
    base_seed=args.seed,
    jobs=args.jobs,
)
for strategy in harness.STRATEGIES:
    out = args.out and args.out.replace(".csv", f".{strategy}.csv")
    _, summary = run(base.replace(strategy=strategy), out)
    table(summary, key=lambda s: f"{s.strategy} {s.algorithm}")
