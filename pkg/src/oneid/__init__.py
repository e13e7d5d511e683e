"""Fixed-confidence 1-identification: find an arm whose mean clears a threshold, or report that none does."""

from .bounds import (
    LowerBoundReport,
    UpperBoundReport,
    closed_form_lower_bound,
    dual_feasible_value,
    solve_lb_program,
    t_j_a,
    upper_bound_formula,
)
from .confidence import BoundKind, ScheduleOverflow, bound, envelope, phase_params, radius
from .core import (
    BanditInstance,
    ComplexityProfile,
    InstanceError,
    RngStream,
    classify,
    complexity_terms,
    gap,
    load_instance,
    mix_seed,
    sample,
)
from .harness import (
    ExperimentConfig,
    SummaryRow,
    TrialRecord,
    bracket_stats,
    concentration_check,
    run_experiment,
    uniform_lil_baseline,
    wilson,
)
from .pseeb import BracketSet, PseebOutcome, build_brackets, min_qualified_bracket, pseeb_run
from .see import InvariantViolation, SeeState, StepOutcome, see_new, see_step

__version__ = "0.1.0"
