"""Two-mode optimal switching driven by a Brownian signal observed in noise.

The package solves the problem in three layers: `filtering` reduces the
partially observed signal to its posterior mean, `vi_solver` solves the
coupled variational inequalities for the reduced problem on a grid, and
`strategy` executes the resulting switching policy on simulated paths.
`verification` re-checks the structural properties of computed solutions and
`cli` exposes the whole pipeline as a command line tool.
"""

from .filtering import (
    FilterState,
    InnovationsReport,
    PathSample,
    ReducedPath,
    conditional_variance,
    innovations_diagnostics,
    simulate_joint_path,
    simulate_reduced_path,
)
from .strategy import MCEstimate, StrategyExecution, estimate_value, run_strategy
from .verification import (
    CheckReport,
    check_convergence,
    check_convexity,
    check_feasibility,
    check_monotonicity,
    compare_table2,
)
from .vi_solver import (
    CONVERGENCE_CONSTANT,
    Grid,
    NumericError,
    ProblemSpec,
    SwitchingRegions,
    ValueSurface,
    convergence_bound,
    diffusion_coeff,
    extract_regions,
    no_info_value,
    solve,
    write_surface_csv,
)

__all__ = [
    "CONVERGENCE_CONSTANT",
    "CheckReport",
    "FilterState",
    "Grid",
    "InnovationsReport",
    "MCEstimate",
    "NumericError",
    "PathSample",
    "ProblemSpec",
    "ReducedPath",
    "StrategyExecution",
    "SwitchingRegions",
    "ValueSurface",
    "check_convergence",
    "check_convexity",
    "check_feasibility",
    "check_monotonicity",
    "compare_table2",
    "conditional_variance",
    "convergence_bound",
    "diffusion_coeff",
    "estimate_value",
    "extract_regions",
    "innovations_diagnostics",
    "no_info_value",
    "run_strategy",
    "simulate_joint_path",
    "simulate_reduced_path",
    "solve",
    "write_surface_csv",
]

__version__ = "0.1.0"
