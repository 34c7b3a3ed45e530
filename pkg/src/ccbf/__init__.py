"""Content-centric sparse multicast beamforming for cache-enabled cloud RAN."""
from .ccp import InfeasibleError, NumericalFailure, SolveOutcome, SolverSettings, g_ccp, polish, sdr_ccp, solve_p_ini
from .scenario import RadioConfig, Scenario, build_scenario
from .smooth import AnnealSchedule, SmoothKind

__all__ = [
    "AnnealSchedule", "InfeasibleError", "NumericalFailure", "RadioConfig", "Scenario", "SmoothKind",
    "SolveOutcome", "SolverSettings", "build_scenario", "g_ccp", "polish", "sdr_ccp", "solve_p_ini",
]
