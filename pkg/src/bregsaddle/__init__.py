"""Bregman extragradient and extrapolation solvers for smooth convex-concave
saddle point problems, with numerical checks of their convergence bounds."""

from bregsaddle.bregman import (
    BregmanGenerator,
    DualPair,
    augmented_l1_generator,
    bregman_distance,
    conjugate_duality_residual,
    euclidean_generator,
    prox_regularized_generator,
    shrinkage,
    three_point_residual,
)
from bregsaddle.errors import (
    BregsaddleError,
    DegenerateSample,
    InconsistentDual,
    InvalidArgument,
    NoSaddlePoint,
    NumericalBreakdown,
    ScheduleViolation,
    UnsupportedOperation,
)
from bregsaddle.operators import (
    OperatorHandle,
    SaddleProblem,
    estimate_lipschitz,
    lipschitz_from_blocks,
    monotonicity_residual,
    relative_lipschitz_lambda,
    relative_lipschitz_residual,
    saddle_operator,
    spectral_norm,
)
from bregsaddle.problems import make_bilinear, make_quadratic, random_instance
from bregsaddle.solvers import (
    SolverState,
    StepSchedule,
    StoppingRule,
    Trace,
    beg_step,
    bep_step,
    classical_eg_step,
    constant_beg_schedule,
    constant_bep_schedule,
    explicit_schedule,
    initial_state,
    ogda_step,
    run,
    run_reference,
    update_average,
    validate_schedule,
)

__version__ = "0.1.0"
