"""The four optimization loops: SG, RSG, MSG, and SAA+SG.

All loops project every iterate back into the box, consume named random
streams derived from the run seed (so a run is reproducible bit for bit),
and record a trace with periodic Monte-Carlo objective evaluations.

SG is the unregularized special case of RSG.  MSG replaces the raw
gradient sample with the mirror (preconditioned) estimator.  SAA+SG
freezes a sample set, moves in the transformed space of the empirical
convex reformulation, and maps the averaged output back.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import InstanceError
from .estimators import (
    grad_estimate_mirror,
    grad_estimate_regularized,
    saa_gradient_at,
)
from .oracles import mc_objective
from .problem import BoxDomain, Problem, TransformEstimate, project_box
from .rng import stream

__all__ = [
    "StepSchedule",
    "LambdaSchedule",
    "OutputRule",
    "StopRule",
    "RunConfig",
    "RunTrace",
    "run",
    "run_sg",
    "run_rsg",
    "run_msg",
    "run_saa_sg",
    "stop_check",
    "theorem_step_rsg",
    "theorem_step_msg",
    "trace_equal",
]

SG = "sg"
RSG = "rsg"
MSG = "msg"
SAA_SG = "saa_sg"

_METHODS = (SG, RSG, MSG, SAA_SG)


@dataclass(frozen=True)
class StepSchedule:
    """Stepsize gamma_t: constant, or a / sqrt(t)."""

    kind: str = "inv_sqrt"  # "constant" | "inv_sqrt"
    a: float = 0.5

    def __post_init__(self):
        if self.kind not in ("constant", "inv_sqrt"):
            raise ValueError(f"unknown stepsize schedule {self.kind!r}")
        if self.a <= 0:
            raise ValueError("stepsize scale must be positive")

    def at(self, t: int) -> float:
        if self.kind == "constant":
            return self.a
        return self.a / math.sqrt(t)


@dataclass(frozen=True)
class LambdaSchedule:
    """Regularization weight lambda_t: zero, constant, or 1/t scaled."""

    kind: str = "inv_t"  # "zero" | "constant" | "inv_t"
    a: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "inv_t"):
            raise ValueError(f"unknown lambda schedule {self.kind!r}")
        if self.a < 0:
            raise ValueError("lambda scale must be nonnegative")

    def at(self, t: int) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return self.a
        return self.a / t


def theorem_step_rsg(T: int) -> StepSchedule:
    """Constant stepsize T^{-1/2} from the RSG guarantee."""
    return StepSchedule("constant", T ** -0.5)


def theorem_step_msg(domain: BoxDomain, T: int) -> StepSchedule:
    """Constant stepsize (D_X T)^{-1/2} from the MSG guarantee."""
    return StepSchedule("constant", (domain.radius * T) ** -0.5)


@dataclass(frozen=True)
class OutputRule:
    """How the reported solution is picked from the iterate history.

    ``uniform`` draws one iterate uniformly (the form the guarantees are
    stated for); ``tail_average`` averages the last ``window`` iterates
    (window None = all of them), the practical choice.
    """

    kind: str = "tail_average"  # "uniform" | "tail_average"
    window: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("uniform", "tail_average"):
            raise ValueError(f"unknown output rule {self.kind!r}")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be at least 1")


@dataclass(frozen=True)
class StopRule:
    """fixed_T runs all T iterations; avg_drift stops early once the means
    of two consecutive iterate windows move less than tol, or at the
    iteration cap t_max (None = the run's own T)."""

    kind: str = "fixed_T"  # "fixed_T" | "avg_drift"
    window: int = 100
    tol: float = 0.5
    t_max: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("fixed_T", "avg_drift"):
            raise ValueError(f"unknown stop rule {self.kind!r}")
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.t_max is not None and self.t_max < 1:
            raise ValueError("t_max must be positive")


@dataclass(frozen=True)
class RunConfig:
    method: str
    T: int
    seed: int
    step: StepSchedule = StepSchedule()
    lam: LambdaSchedule = LambdaSchedule()
    K: int = 10
    n: int = 1000
    delta0: Optional[float] = None  # SAA image-box shrink cap; default (d T)^{-1/2}
    output_rule: OutputRule = OutputRule()
    stop_rule: StopRule = StopRule()
    eval_every: int = 50  # 0 disables periodic objective evaluation
    eval_samples: int = 5000
    record_every: int = 1
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.T < 1 or self.K < 1 or self.n < 1 or self.record_every < 1:
            raise ValueError("T, K, n, record_every must be positive")


@dataclass
class RunTrace:
    method: str
    iterates: np.ndarray  # (recorded, d), thinned by record_every
    record_every: int
    grad_norms: np.ndarray
    samples_consumed: np.ndarray  # cumulative, aligned with iterates
    objective_evals: list  # (iteration, mean, stderr, n_samples)
    chosen_output: np.ndarray
    iters_run: int
    wall_time: float
    meta: dict = None
    eval_wall_ms: list = None  # per objective_evals entry; not part of the
    # deterministic payload (wall clock is never reproducible)

    def __post_init__(self):
        if self.meta is None:
            self.meta = {}
        if self.eval_wall_ms is None:
            self.eval_wall_ms = []


def trace_equal(a: RunTrace, b: RunTrace) -> bool:
    """Bit-identical deterministic payload (wall time excluded)."""
    return (
        a.method == b.method
        and a.iters_run == b.iters_run
        and np.array_equal(a.iterates, b.iterates)
        and np.array_equal(a.grad_norms, b.grad_norms)
        and np.array_equal(a.samples_consumed, b.samples_consumed)
        and a.objective_evals == b.objective_evals
        and np.array_equal(a.chosen_output, b.chosen_output)
        and a.meta == b.meta
    )


def stop_check(trace: RunTrace, rule: StopRule) -> bool:
    """Whether the recorded run satisfies the stopping rule at its end."""
    if rule.kind == "fixed_T":
        return True
    if rule.t_max is not None and trace.iters_run >= rule.t_max:
        return True
    if trace.iterates.shape[0] < 2 * rule.window:
        raise ValueError("avg_drift needs at least two full windows of iterates")
    return _drift_stop(trace.iterates, rule)


def _drift_stop(history: np.ndarray, rule: StopRule) -> bool:
    w = rule.window
    last = history[-w:].mean(axis=0)
    prev = history[-2 * w : -w].mean(axis=0)
    return float(np.linalg.norm(last - prev)) < rule.tol


def _resolve_output(config: RunConfig, history: np.ndarray, rng_out) -> np.ndarray:
    rule = config.output_rule
    if rule.kind == "uniform":
        t = int(rng_out.integers(history.shape[0]))
        return history[t].copy()
    window = rule.window
    if window is None:
        window = config.stop_rule.window if config.stop_rule.kind == "avg_drift" else len(history)
    window = min(window, len(history))
    return history[-window:].mean(axis=0)


def _initial_point(problem: Problem, config: RunConfig) -> np.ndarray:
    if config.x0 is not None:
        return project_box(problem.domain, np.asarray(config.x0, dtype=float))
    return project_box(problem.domain, np.zeros(problem.dim))


def _evaluate(problem: Problem, x: np.ndarray, config: RunConfig, t: int):
    mean, se = mc_objective(
        problem, x, config.eval_samples, stream(config.seed, "eval", t)
    )
    return (t, mean, se, config.eval_samples)


def run(problem: Problem, config: RunConfig) -> RunTrace:
    """Dispatch on the configured method."""
    if config.method == SAA_SG:
        return run_saa_sg(problem, config)
    return _run_projected(problem, config)


def run_sg(problem: Problem, config: RunConfig) -> RunTrace:
    """Projected SGD: RSG with the regularization forced to zero."""
    return _run_projected(
        problem, replace(config, method=SG, lam=LambdaSchedule("zero"))
    )


def run_rsg(problem: Problem, config: RunConfig) -> RunTrace:
    return _run_projected(problem, replace(config, method=RSG))


def run_msg(problem: Problem, config: RunConfig) -> RunTrace:
    return _run_projected(problem, replace(config, method=MSG))


def _run_projected(problem: Problem, config: RunConfig) -> RunTrace:
    """Shared loop for SG / RSG / MSG: x <- project(x - gamma_t v_t)."""
    t0 = time.perf_counter()
    domain = problem.domain
    lo, hi = domain.lower, domain.upper
    x = _initial_point(problem, config)
    rng_grad = stream(config.seed, "grad")
    rng_inv_a = stream(config.seed, "inv_a")
    rng_inv_b = stream(config.seed, "inv_b")
    rng_out = stream(config.seed, "output")
    mirror = config.method == MSG

    cap = config.T
    if config.stop_rule.t_max is not None:
        cap = min(cap, config.stop_rule.t_max)
    history = np.empty((cap, x.size))
    grad_norms = np.empty(cap)
    samples = np.empty(cap, dtype=np.int64)
    evals = []
    eval_wall = []
    consumed = 0
    stop_w = config.stop_rule.window
    iters = cap
    for t in range(1, cap + 1):
        lam = config.lam.at(t)
        if mirror:
            gs = grad_estimate_mirror(
                problem, x, config.K, lam, (rng_inv_a, rng_inv_b, rng_grad)
            )
        else:
            gs = grad_estimate_regularized(problem, x, lam, rng_grad)
        x = np.clip(x - config.step.at(t) * gs.vector, lo, hi)
        assert np.all(x >= lo) and np.all(x <= hi)
        consumed += gs.samples_used
        history[t - 1] = x
        grad_norms[t - 1] = np.linalg.norm(gs.vector)
        samples[t - 1] = consumed
        if config.eval_every and t % config.eval_every == 0:
            evals.append(_evaluate(problem, x, config, t))
            eval_wall.append((time.perf_counter() - t0) * 1000.0)
        if (
            config.stop_rule.kind == "avg_drift"
            and t >= 2 * stop_w
            and t % stop_w == 0
            and _drift_stop(history[:t], config.stop_rule)
        ):
            iters = t
            break
    history = history[:iters]
    chosen = _resolve_output(config, history, rng_out)
    keep = np.arange(config.record_every - 1, iters, config.record_every)
    return RunTrace(
        method=config.method,
        iterates=history[keep],
        record_every=config.record_every,
        grad_norms=grad_norms[keep],
        samples_consumed=samples[keep],
        objective_evals=evals,
        chosen_output=chosen,
        iters_run=iters,
        wall_time=time.perf_counter() - t0,
        meta={"K": config.K} if mirror else {},
        eval_wall_ms=eval_wall,
    )


def run_saa_sg(problem: Problem, config: RunConfig) -> RunTrace:
    """Projected SGD on the empirical convex reformulation.

    Freezes n samples, shrinks the empirical image box by delta so the
    inverse slope stays bounded, iterates in the transformed space, and
    maps the averaged output back through the empirical inverse.
    """
    t0 = time.perf_counter()
    d = problem.dim
    transform = TransformEstimate.freeze(problem, config.n, stream(config.seed, "saa"))
    spread = transform.g(problem.domain.upper) - transform.g(problem.domain.lower)
    delta0 = config.delta0 if config.delta0 is not None else 1.0 / math.sqrt(d * config.T)
    delta = min(delta0, 0.5 * float(spread.min()))
    if delta <= 0:
        raise InstanceError(
            "frozen sample set gives a flat empirical transformation; cannot shrink image box"
        )
    box_u = transform.shrunken_box(delta)
    rng_grad = stream(config.seed, "grad")
    rng_out = stream(config.seed, "output")

    x = _initial_point(problem, config)
    u = project_box(box_u, transform.g(x))
    cap = config.T
    if config.stop_rule.t_max is not None:
        cap = min(cap, config.stop_rule.t_max)
    history_u = np.empty((cap, d))
    history_x = np.empty((cap, d))
    grad_norms = np.empty(cap)
    samples = np.empty(cap, dtype=np.int64)
    evals = []
    eval_wall = []
    stop_w = config.stop_rule.window
    iters = cap
    for t in range(1, cap + 1):
        x = transform.g_inverse(u)
        assert np.all(x >= problem.domain.lower) and np.all(x <= problem.domain.upper)
        gs = saa_gradient_at(transform, problem, x, rng_grad)
        u = project_box(box_u, u - config.step.at(t) * gs.vector)
        history_u[t - 1] = u
        history_x[t - 1] = x
        grad_norms[t - 1] = np.linalg.norm(gs.vector)
        samples[t - 1] = config.n  # frozen set; no fresh draws per iteration
        if config.eval_every and t % config.eval_every == 0:
            evals.append(_evaluate(problem, x, config, t))
            eval_wall.append((time.perf_counter() - t0) * 1000.0)
        if (
            config.stop_rule.kind == "avg_drift"
            and t >= 2 * stop_w
            and t % stop_w == 0
            and _drift_stop(history_x[:t], config.stop_rule)
        ):
            iters = t
            break
    history_u = history_u[:iters]
    history_x = history_x[:iters]
    u_hat = _resolve_output(config, history_u, rng_out)
    chosen = transform.g_inverse(project_box(box_u, u_hat))
    keep = np.arange(config.record_every - 1, iters, config.record_every)
    return RunTrace(
        method=SAA_SG,
        iterates=history_x[keep],
        record_every=config.record_every,
        grad_norms=grad_norms[keep],
        samples_consumed=samples[keep],
        objective_evals=evals,
        chosen_output=chosen,
        iters_run=iters,
        wall_time=time.perf_counter() - t0,
        meta={"delta": delta, "n": config.n},
        eval_wall_ms=eval_wall,
    )
