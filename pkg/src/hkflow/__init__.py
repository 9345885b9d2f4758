"""hkflow: a numerical laboratory for mean curvature flow coupled with the
complex-phase heat flow on surfaces in flat hyperkahler R^4 and T^4."""

__version__ = "0.1.0"

from .errors import (
    HkflowError,
    InputError,
    FrameError,
    PreconditionError,
    NumericalError,
    IOFailure,
)
from .kernel import (
    TwistorTriple,
    standard_twistor_triple,
    AmbientSpace,
    phase_operator,
    symplectic_form,
    HolomorphicSymplecticForm,
    holomorphic_symplectic,
    canonical_phase_from_frame,
)
from .surface import (
    ScenarioSpec,
    scenario,
    SurfaceGrid,
    build_immersion,
    GeometryCache,
    compute_geometry,
    laplace_beltrami,
    dirichlet_energy_density,
    surface_integral,
    gauss_curvature_check,
    save_snapshot,
    load_snapshot,
)
from .phase import (
    PhaseField,
    phase_field,
    field_from_array,
    twistor_energy,
    tension_field,
    kahler_angle,
    lagrangian_angle,
    plf_residual,
    bja_identity,
    polar_identity_check,
    hyper_lagrangian_residual,
)
from .spectral import (
    laplacian_matrix,
    lambda1,
    default_ball_centers,
    geodesic_ball_volumes,
    c0_from_l2_validator,
)
from .flow import (
    FlowConfig,
    SurfaceState,
    make_state,
    DiagnosticsRecord,
    DiagnosticsSeries,
    metric_spacing,
    cfl_dt,
    mcf_step,
    phase_heat_step,
    consistency_check,
    metric_evolution_monitor,
    coupled_step,
    efa_monitor,
    efe_monitor,
    run_flow,
    decay_fit,
)

__all__ = [
    "__version__",
    "HkflowError",
    "InputError",
    "FrameError",
    "PreconditionError",
    "NumericalError",
    "IOFailure",
    "TwistorTriple",
    "standard_twistor_triple",
    "AmbientSpace",
    "phase_operator",
    "symplectic_form",
    "HolomorphicSymplecticForm",
    "holomorphic_symplectic",
    "canonical_phase_from_frame",
    "ScenarioSpec",
    "scenario",
    "SurfaceGrid",
    "build_immersion",
    "GeometryCache",
    "compute_geometry",
    "laplace_beltrami",
    "dirichlet_energy_density",
    "surface_integral",
    "gauss_curvature_check",
    "save_snapshot",
    "load_snapshot",
    "PhaseField",
    "phase_field",
    "field_from_array",
    "twistor_energy",
    "tension_field",
    "kahler_angle",
    "lagrangian_angle",
    "plf_residual",
    "bja_identity",
    "polar_identity_check",
    "hyper_lagrangian_residual",
    "laplacian_matrix",
    "lambda1",
    "default_ball_centers",
    "geodesic_ball_volumes",
    "c0_from_l2_validator",
    "FlowConfig",
    "SurfaceState",
    "make_state",
    "DiagnosticsRecord",
    "DiagnosticsSeries",
    "metric_spacing",
    "cfl_dt",
    "mcf_step",
    "phase_heat_step",
    "consistency_check",
    "metric_evolution_monitor",
    "coupled_step",
    "efa_monitor",
    "efe_monitor",
    "run_flow",
    "decay_fit",
]
