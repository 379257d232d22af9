"""Brute-force and analytic oracles used to validate estimators.

Everything here deliberately avoids the code paths it checks: the grid
search evaluates the objective directly, the finite differences use raw
Monte-Carlo objective values, and the closed forms come from integrating
the distribution functions by hand.  Common random numbers are used
across compared evaluations to keep the oracles tight at desk scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import CostGuardError, UnsupportedFamilyError
from .problem import (
    Discrete,
    Problem,
    TruncatedNormal,
    Uniform,
    _as_rng,
    _norm_cdf,
    _norm_pdf,
    phi_eval,
)

__all__ = [
    "OracleResult",
    "FiniteDiffResult",
    "make_mc_objective",
    "finite_diff_grad",
    "grid_global_min",
    "closed_form_g",
    "GValue",
]


@dataclass(frozen=True)
class OracleResult:
    value: float
    argmin: Optional[np.ndarray]
    method: str
    resolution: float
    stderr: float


@dataclass(frozen=True)
class FiniteDiffResult:
    grad: np.ndarray
    stderr: np.ndarray
    one_sided: np.ndarray  # True where a boundary forced a one-sided difference


def make_mc_objective(problem: Problem) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Return a handle mapping (x, xi_batch) to per-sample objective values."""

    def handle(x: np.ndarray, xi_batch: np.ndarray) -> np.ndarray:
        y = phi_eval(problem.phi, np.asarray(x, dtype=float)[..., None, :], xi_batch)
        if hasattr(problem.outer, "value_batch"):
            return problem.outer.value_batch(y)
        return np.array([problem.outer.value(row) for row in y])

    return handle


def mc_objective(problem: Problem, x: np.ndarray, n: int, rng) -> tuple[float, float]:
    """Plain Monte-Carlo estimate of the objective with standard error."""
    rng = _as_rng(rng, "mc_objective")
    batch = problem.sampler.draw(rng, n)
    vals = make_mc_objective(problem)(x, batch)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


def finite_diff_grad(
    f_mc: Callable[[np.ndarray, np.ndarray], np.ndarray],
    domain,
    x: np.ndarray,
    h: float,
    n_mc: int,
    rng,
    sampler=None,
    xi_batch: Optional[np.ndarray] = None,
) -> FiniteDiffResult:
    """Central differences of a Monte-Carlo objective, CRN across the pair.

    Per coordinate the same sample batch evaluates both sides, so the
    standard error is that of the per-sample difference, not of two
    independent estimates.  Falls back to a one-sided difference (and
    flags it) when ``x +- h e_i`` would leave the box.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    if xi_batch is None:
        if sampler is None:
            raise ValueError("pass either a sampler or a frozen xi batch")
        xi_batch = sampler.draw(_as_rng(rng, "fd"), n_mc)
    grad = np.zeros(d)
    se = np.zeros(d)
    one_sided = np.zeros(d, dtype=bool)
    base_vals = None
    for i in range(d):
        up_ok = x[i] + h <= domain.upper[i] + 1e-15
        dn_ok = x[i] - h >= domain.lower[i] - 1e-15
        if not up_ok and not dn_ok:
            raise ValueError(f"step {h} does not fit inside the box at coordinate {i}")
        xp = x.copy()
        xm = x.copy()
        if up_ok and dn_ok:
            xp[i] += h
            xm[i] -= h
            diff = (f_mc(xp, xi_batch) - f_mc(xm, xi_batch)) / (2.0 * h)
        else:
            if base_vals is None:
                base_vals = f_mc(x, xi_batch)
            one_sided[i] = True
            if up_ok:
                xp[i] += h
                diff = (f_mc(xp, xi_batch) - base_vals) / h
            else:
                xm[i] -= h
                diff = (base_vals - f_mc(xm, xi_batch)) / h
        grad[i] = diff.mean()
        se[i] = diff.std(ddof=1) / math.sqrt(diff.size)
    return FiniteDiffResult(grad=grad, stderr=se, one_sided=one_sided)


def grid_global_min(
    problem: Problem, grid_step: float, n_mc: int, rng, max_dim: int = 3
) -> OracleResult:
    """Exhaustive Monte-Carlo grid search for the global minimum.

    The transformed problem is convex with the same optimal value, so at
    small dimension a fine grid over the original box brackets the global
    optimum.  One frozen sample batch scores every grid point (common
    random numbers), which makes grid-point comparisons far tighter than
    their individual standard errors.
    """
    if problem.dim > max_dim:
        raise CostGuardError(f"grid oracle capped at d<={max_dim}, got d={problem.dim}")
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    axes = [
        np.arange(lo, hi + grid_step * 0.5, grid_step)
        for lo, hi in zip(problem.domain.lower, problem.domain.upper)
    ]
    points = np.array(list(itertools.product(*axes)))
    batch = problem.sampler.draw(_as_rng(rng, "grid"), n_mc)
    handle = make_mc_objective(problem)
    best_val = math.inf
    best_point = None
    best_se = math.inf
    chunk = max(1, int(2_000_000 / max(n_mc, 1)))
    for start in range(0, len(points), chunk):
        block = points[start : start + chunk]
        vals = handle(block, batch)  # (chunk, n_mc)
        means = vals.mean(axis=1)
        j = int(np.argmin(means))
        if means[j] < best_val:
            best_val = float(means[j])
            best_point = block[j].copy()
            best_se = float(vals[j].std(ddof=1) / math.sqrt(n_mc))
    return OracleResult(
        value=best_val,
        argmin=best_point,
        method="grid_search",
        resolution=grid_step,
        stderr=best_se,
    )


@dataclass(frozen=True)
class GValue:
    value: float
    derivative: float


def closed_form_g(dist, x: float) -> GValue:
    """Exact transformation value and slope for min(x, xi).

    Uses g(x) = integral_0^x (1 - H(t)) dt, valid for xi >= 0 and x >= 0;
    the slope is 1 - H(x).  Supported distributions: uniform, truncated
    normal, finite discrete.
    """
    x = float(x)
    if x < 0:
        raise ValueError("closed form assumes x >= 0")
    if isinstance(dist, Uniform):
        a, b = dist.a, dist.b
        if a < 0:
            raise UnsupportedFamilyError("uniform support must be nonnegative")
        if x <= a:
            return GValue(x, 1.0)
        if x >= b:
            return GValue(0.5 * (a + b), 0.0)
        return GValue(x - (x - a) ** 2 / (2.0 * (b - a)), 1.0 - (x - a) / (b - a))
    if isinstance(dist, TruncatedNormal):
        mu, sig = dist.mu, dist.sigma
        z_lo = -mu / sig
        z = 1.0 - _norm_cdf(z_lo)

        def psi(t: float) -> float:
            return t * _norm_cdf(t) + _norm_pdf(t)

        int_H = (sig * (psi((x - mu) / sig) - psi(z_lo)) - x * _norm_cdf(z_lo)) / z
        return GValue(x - int_H, 1.0 - float(dist.cdf(x)))
    if isinstance(dist, Discrete):
        s = np.asarray(dist.support)
        w = np.asarray(dist.weights)
        if np.any(s < 0):
            raise UnsupportedFamilyError("discrete support must be nonnegative")
        value = float(np.dot(w, np.minimum(x, s)))
        slope = float(np.dot(w, (s > x).astype(float)))
        return GValue(value, slope)
    raise UnsupportedFamilyError(f"no closed form for {type(dist).__name__}")
