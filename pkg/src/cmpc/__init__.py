"""Contingency-aware model predictive steering control.

A receding-horizon steering controller that optimizes a nominal path-tracking
horizon together with an emergency low-friction horizon sharing the first
command, a nonlinear bicycle-model plant to drive it against, and a
closed-loop simulation harness with scenario files, logs, and a CLI.
"""

from .controller import (
    CMPC,
    CONTINGENCY,
    DMPC,
    NOMINAL,
    CmpcProblem,
    CmpcSolution,
    Controller,
    ControllerConfig,
    StageEnvelopes,
    StepResult,
    VariableLayout,
    Weights,
    assemble_qp,
    build_stage_envelopes,
    extract_solution,
    solve_problem,
    warm_start_shift,
)
from .envelopes import (
    ENVIRONMENTAL,
    STABILITY,
    Envelope,
    environmental_envelope,
    stability_envelope,
)
from .errors import (
    CmpcError,
    DimensionMismatchError,
    InfeasibleBoxError,
    InvalidGeometryError,
    NonFiniteError,
    OutOfRangeError,
    ScenarioParseError,
    SchemaVersionError,
    UxTooSmallError,
)
from .linearize import (
    FOH,
    ZOH,
    BranchPlan,
    HorizonModel,
    HorizonSpec,
    OperatingPoint,
    StageModel,
    build_horizon_models,
    continuous_jacobians,
    discretize,
    linearize_tire,
    operating_point,
)
from .qp import QpResult, kkt_residuals, solve_qp_core
from .simulate import (
    RunLog,
    Scenario,
    compute_metrics,
    load_scenario,
    read_log,
    replay,
    run_closed_loop,
    scenario_from_dict,
    write_log,
)
from .track import (
    FrictionMap,
    FrictionZone,
    Path,
    SpeedProfile,
    bounds_at,
    build_left_turn,
    constant_speed_profile,
    curvature_at,
    friction_at,
)
from .vehicle import (
    ControlInput,
    TireParams,
    VehicleParams,
    VehicleState,
    default_vehicle,
    fiala_force_slope,
    fiala_lateral_force,
    integrate_plant,
    lateral_forces,
    slip_angles,
    speed_tracking_forces,
    state_derivative,
)

__version__ = "0.1.0"
