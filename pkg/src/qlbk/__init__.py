"""qlbk: spectral simulator for the 1D periodic quantum Liouville-BGK equation."""

from .spectral import (
    HermitianOperator,
    SpectralSpace,
    eigendecompose,
    grid_to_modes,
    laplacian,
    modes_to_grid,
    multiplication_operator,
)
from .states import (
    DensityField,
    DensityOperator,
    NormReport,
    coherence,
    entropy,
    free_energy,
    local_density,
    local_density_of,
    make_initial,
    norms,
    read_density,
    read_state,
    relative_entropy,
    write_state,
)
from .maxwellian import (
    EstimateReport,
    MomentSolution,
    Potential,
    SolveOptions,
    dual_gradient_check,
    dual_value,
    estimate_report,
    maxwellian_from_potential,
    partition_sum,
    representation_formula,
    solve_moment,
)
from .evolution import (
    EvolutionConfig,
    StepDiagnostics,
    Trajectory,
    entropy_integral,
    entropy_relation_defect,
    evolve,
    free_propagate,
    j1_distance,
    j2_distance,
    picard_solve,
    propagator_continuity_probe,
    step_exponential,
    write_trajectory_csv,
)
from .equilibrium import (
    ConvergenceVerdict,
    GibbsState,
    convergence_experiment,
    density_gap_monitor,
    gibbs_from_mass,
    relative_entropy_to_gibbs,
)
from .checks import PropertyResult, run_suite, write_report

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
