"""Transient resistive loss analysis for droop- and DAPI-controlled inverter
networks: H2 norms of the loss output, communication-gain tuning, parameter
sweeps, and stochastic time-domain validation."""

__version__ = "0.1.0"

from .network import (  # noqa: E402
    Laplacian,
    NetworkGraph,
    Spectrum,
    build_complete_graph,
    build_line_graph,
    build_random_connected_graph,
    ingest_edge_list,
    laplacians,
    spectral_decomposition,
)
from .dynamics import (  # noqa: E402
    ControllerParams,
    ModalSubsystem,
    StateSpace,
    assemble_dapi,
    assemble_droop,
    check_stability,
    modal_subsystems,
    verify_modal_equivalence,
)
from .h2 import (  # noqa: E402
    H2Result,
    h2_dapi_closed_form,
    h2_droop_closed_form,
    h2_full_gramian,
    h2_modal,
    solve_lyapunov,
)
from .tuning import (  # noqa: E402
    SweepCurve,
    TuningResult,
    gamma_star_vs_k,
    loss_reduction_vs_k,
    norm_gamma_derivative,
    optimal_gamma,
    optimal_gamma_complete,
    sweep,
)
from .sim import (  # noqa: E402
    SimConfig,
    Trajectory,
    empirical_h2,
    export_trajectory,
    instantaneous_loss,
    integrated_loss,
    phase_perturbation,
    simulate,
)
from .errors import (  # noqa: E402
    AssemblyError,
    DisconnectedGraphError,
    EdgeListParseError,
    GraphGenerationError,
    GridlossError,
    LyapunovSolveError,
    StabilityError,
    StepSizeError,
    TuningError,
    ValidationError,
)

__all__ = [
    "__version__",
    "AssemblyError",
    "ControllerParams",
    "DisconnectedGraphError",
    "EdgeListParseError",
    "GraphGenerationError",
    "GridlossError",
    "H2Result",
    "Laplacian",
    "LyapunovSolveError",
    "ModalSubsystem",
    "NetworkGraph",
    "SimConfig",
    "Spectrum",
    "StabilityError",
    "StateSpace",
    "StepSizeError",
    "SweepCurve",
    "Trajectory",
    "TuningError",
    "TuningResult",
    "ValidationError",
    "assemble_dapi",
    "assemble_droop",
    "build_complete_graph",
    "build_line_graph",
    "build_random_connected_graph",
    "check_stability",
    "empirical_h2",
    "export_trajectory",
    "gamma_star_vs_k",
    "h2_dapi_closed_form",
    "h2_droop_closed_form",
    "h2_full_gramian",
    "h2_modal",
    "ingest_edge_list",
    "instantaneous_loss",
    "integrated_loss",
    "laplacians",
    "loss_reduction_vs_k",
    "modal_subsystems",
    "norm_gamma_derivative",
    "optimal_gamma",
    "optimal_gamma_complete",
    "phase_perturbation",
    "simulate",
    "solve_lyapunov",
    "spectral_decomposition",
    "sweep",
    "verify_modal_equivalence",
]
