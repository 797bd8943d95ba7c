"""Motion planning for control-affine systems with drift via the affine geometric heat flow.

An arbitrary sketch between two states is deformed by a parabolic flow whose
steady states extremize a penalty action; open-loop controls are then read off
the converged path and verified by forward integration.
"""

from .benchmarks import BenchmarkCase, case_names, load_case
from .config import BuiltProblem, RunConfig, build_problem, load_config, parse_config
from .constraints import (
    AugmentedProblem,
    BarrierSpec,
    Constraint,
    augment,
    barrier_value_grad,
    constrained_lagrangian_check,
    input_magnitude_bounds,
)
from .errors import (
    AghfError,
    BoundPreconditionError,
    ConfigError,
    ConstraintViolationError,
    DimensionError,
    FrameCompletionError,
    IntegrationDivergedError,
    SingularFrameError,
    StiffnessError,
    UnknownSystemError,
)
from .extraction import (
    DenseTrajectory,
    PlanSolution,
    TheoremBound,
    endpoint_error,
    extract_controls,
    extract_plan,
    integrate_path,
    plan,
    theorem_bound,
)
from .flow import FlowConfig, FlowResult, StepControl, aghf_rhs_covariant, aghf_rhs_el, solve_aghf
from .lagrangian import (
    CurvePoint,
    HomotopyPath,
    action,
    el_residual,
    lagrangian_partials,
    lagrangian_value,
)
from .metric import (
    FrameCompletion,
    MetricField,
    bracket_vector,
    christoffel,
    complete_frame,
    default_metric,
    directional_metric_derivative,
    metric_G,
    metric_derivatives,
)
from .systems import (
    AssumptionReport,
    ControlSystem,
    PlanningProblem,
    builtin_system,
    builtin_system_names,
    check_assumption_a,
    eval_dynamics,
)

__version__ = "0.1.0"
