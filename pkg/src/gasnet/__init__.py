"""Simulation and boundary optimal control of isothermal gas flow on
tree-shaped pipeline networks."""

from .errors import GasnetError, ScenarioError
from .network import (
    Constants,
    NetworkError,
    NetworkTopology,
    Pipe,
    PipeParameters,
    VertexClassification,
    classify_vertices,
    parse_network,
    validate_tree,
)
from .steady import (
    StateBox,
    SteadyState,
    SteadyStateError,
    ball_radius,
    compute_steady_state,
    steady_pressure_profile,
    validate_suitable_set,
)
from .discrete import Discretization, DiscretizationError, Grid, build_grid
from .controls import ControlSignal, H2Space, equilibrium_signal, h2_gram
from .forward import (
    ForwardError,
    Trajectory,
    constraint_monitor,
    kirchhoff_residual,
    linear_solve,
    picard_solve,
    pressure_continuity_residual,
)
from .adjoint import (
    AdjointResult,
    SensitivityResult,
    StepFactors,
    adjoint_solve,
    green_identity_residual,
    linearized_solve,
)
from .optimize import (
    ControlProblem,
    CostConfig,
    KKTReport,
    OptimizationReport,
    delta_homotopy,
    kkt_residual,
    optimize,
)
from .scenario import Scenario, load_scenario, scenario_from_dict

__version__ = "0.1.0"
