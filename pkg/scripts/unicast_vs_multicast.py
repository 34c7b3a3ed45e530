"""Sparse multicast beamforming (G-CCP) against per-user unicast beamforming."""
from _common import parser, run, table

from ccbf import harness

ap = parser(__doc__)
ap.add_argument("--users", type=int, default=12)
args = ap.parse_args()

cfg = harness.ExperimentConfig(
    radio=harness.RadioConfig(n_bs=3, n_ant=4, n_users=args.users, n_contents=20),
    popularity=harness.PopularitySpec("zipf", alpha=1.0),
    cache_size=4,
    algorithms=("g_ccp", "unicast"),
    etas=(1e-6, 0.1, 1.0, 10.0, float("inf")),
    n_trials=args.trials,
    base_seed=args.seed,
    jobs=args.jobs,
)
_, summary = run(cfg, args.out)
table(summary)
