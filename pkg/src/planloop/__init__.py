"""Closed-loop motion-planning harness.

Scenario logs in, scores out: a rule-based four-stage reasoning planner (plus
log-replay, IDM, and remote-endpoint planners), LQR-tracked kinematic
simulation with IDM background traffic, and open/closed-loop metrics with a
CLI that writes reports and figures.
"""

from .chain import (
    ChainConfig,
    ChainPlan,
    FinalAction,
    HazardAssessment,
    HazardLevel,
    ManeuverIntent,
    ReasoningTrace,
    TrafficAssessment,
    TrafficSignal,
)
from .config import HarnessConfig, Settings
from .dynamics import (
    Control,
    ControlLimits,
    LqrConfig,
    VehicleParams,
    VehicleState,
    kinematic_step,
    solve_lqr_gains,
    track_trajectory,
)
from .language import (
    PlanFailure,
    PlannerOutput,
    SamplingParams,
    parse_planner_output,
    serialize_context,
)
from .metrics import MetricParams, closed_loop_score, open_loop_score
from .scenario import (
    AgentObservation,
    EgoState,
    Instruction,
    MapContext,
    PlanningContext,
    Pose,
    Scenario,
    ScenarioError,
    Trajectory,
    from_ego_frame,
    load_scenario,
    planning_context_at,
    resample_trajectory,
    select_nearest_agents,
    to_ego_frame,
)
from .simulate import (
    ClosedLoopLog,
    OpenLoopLog,
    SimMode,
    SimulationConfig,
    run_closed_loop,
    run_open_loop,
)
from .traffic import IdmParams, idm_acceleration, step_background

__version__ = "0.1.0"
