"""Upwind hybrid-DG solver for linear transport on directed pipe networks."""

from importlib import resources

from .network import (
    BoundarySignal,
    CheckFailure,
    CompatibilityReport,
    ConfigError,
    Edge,
    Network,
    ValidationReport,
    VertexClassification,
    VertexKind,
    check_compatibility,
    classify,
    incidence,
    load_network,
    network_from_dict,
    network_to_dict,
    save_network,
    validate,
)
from .meshing import (
    Basis,
    HybridIndexMap,
    Mesh,
    build_hybrid_map,
    build_mesh,
    element_l2_coeffs,
    element_nodal_coeffs,
    eval_coeffs,
    l2_project_initial,
    nodal_interpolant,
    outflow_matching_projection,
)
from .operator import (
    CoupledSystem,
    Diagnostics,
    OdeSystem,
    State,
    apply_bilinear_form,
    assemble,
    assemble_coupled,
    compute_diagnostics,
    reconstruct_hybrid,
)
from .stepping import SolverError, StepperConfig, TimeSeries, simulate, step_implicit_euler
from .exact import (
    ConvergenceLevel,
    ConvergenceReport,
    ExactSolution,
    OracleUnavailableError,
    error_norm,
    run_convergence_study,
)

__version__ = "0.1.0"


def bundled_config_path(name: str = "diamond_network"):
    """Filesystem path of a config shipped with the package."""
    return resources.files(__name__) / "configs" / f"{name}.json"
