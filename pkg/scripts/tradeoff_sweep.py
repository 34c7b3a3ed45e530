"""Backhaul/power tradeoff of the two CCP algorithms over the full eta grid.

The default is a 3-cell desk network with 2 cached contents per BS. ``--full`` selects
7 cells, 4 antennas per BS, 30 users, 100 contents and 10 cached contents per BS, which
is far slower.
"""
from _common import parser, radio, run, table

from ccbf import harness

ap = parser(__doc__.splitlines()[0])
ap.add_argument("--algorithms", default="g_ccp,sdr_ccp")
ap.add_argument("--full", action="store_true")
args = ap.parse_args()

cfg = harness.ExperimentConfig(
    radio=radio(args.full),
    cache_size=10 if args.full else 2,
    algorithms=tuple(args.algorithms.split(",")),
    n_trials=args.trials,
    base_seed=args.seed,
    jobs=args.jobs,
)
_, summary = run(cfg, args.out)
table(summary)
