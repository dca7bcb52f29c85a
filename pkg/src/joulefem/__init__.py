"""Finite elements for coupled Joule heating in a thermoviscoelastic body.

P1 elements on crisscross meshes of the unit square, a decoupling
semi-implicit scheme and a fully coupled implicit Euler scheme, error
metrics against reference runs, and a CLI harness for convergence studies.
"""

from .assembly import (
    CoercivityError,
    coupling_matrix,
    elasticity_matrix,
    element_conductivity,
    interpolate_nodal,
    joule_load,
    lame_from_youngs,
    lame_voigt,
    load_vector,
    mass_matrix,
    stiffness_matrix,
    vector_mass_matrix,
)
from .mesh import (
    Mesh,
    OutOfDomainError,
    boundary_values,
    build_crisscross_mesh,
    dump_mesh,
    load_mesh,
    locate_point,
)
from .metrics import (
    ErrorReport,
    h1_seminorm,
    l2_norm,
    max_error_over_time,
    observed_order,
    strain_norm,
    transfer_to_fine,
)
from .problems import (
    AssumptionError,
    BENCHMARK_VOIGT,
    Conductivity,
    ManufacturedSolution,
    MaterialModel,
    ProblemSpec,
    ValidationReport,
    load_problem_config,
    make_manufactured,
    make_preset,
    make_problem1,
    make_problem2,
    sigma_constant,
    sigma_problem1,
    validate_assumptions,
)
from .sparse_linalg import (
    LinearSystem,
    NotSPDError,
    SolverError,
    SPDSolver,
    apply_dirichlet,
    from_triplets,
    solve_spd,
)
from .stepping import (
    Operators,
    PicardDivergenceError,
    Snapshot,
    State,
    StepperConfig,
    Trajectory,
    assemble_operators,
    dump_trajectory,
    implicit_euler_step,
    load_snapshot,
    run_simulation,
    semi_implicit_step,
    solve_potential,
)

__version__ = "0.1.0"
