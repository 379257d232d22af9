"""Stochastic gradient methods that reach global optima of objectives
with hidden convexity, plus a booking-limit revenue-management layer."""

from .problem import (
    BinomialCount,
    BoxDomain,
    Discrete,
    PhiFamily,
    PoissonCount,
    Problem,
    QuadraticOuter,
    TransformEstimate,
    TruncatedNormal,
    Uniform,
    XiSampler,
    empirical_g,
    empirical_g_inverse,
    estimate_g,
    phi_eval,
    phi_grad,
    project_box,
    verify_mu_g,
)
from .estimators import (
    GradientSample,
    InverseEstimate,
    grad_estimate_coord_reform,
    grad_estimate_mirror,
    grad_estimate_plain,
    grad_estimate_regularized,
    grad_estimate_saa_reform,
    neumann_inverse,
)
from .optimizers import (
    LambdaSchedule,
    OutputRule,
    RunConfig,
    RunTrace,
    StepSchedule,
    StopRule,
    run,
    run_msg,
    run_rsg,
    run_saa_sg,
    run_sg,
    stop_check,
)
from .lp import LpProblem, LpSolution, solve_lp, verify_solution
from .rng import stream

__all__ = [name for name in dir() if not name.startswith("_")]
