"""Stochastic gradient and matrix-inverse estimators.

All estimators are pure given their generator(s).  The composition
gradient sample is ``grad phi(x, xi)^T grad f(phi(x, xi))`` for one fresh
xi; the preconditioned (mirror) variant multiplies two independent
randomized Neumann-series estimates of the inverse transformation slope.
Because the coordinates of xi are independent, every matrix here is
diagonal and is stored as a vector of diagonal entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularTransformError, UnsupportedFamilyError
from .problem import (
    Problem,
    TransformEstimate,
    TRUNC_MIN,
    phi_eval,
    phi_grad,
)

__all__ = [
    "GradientSample",
    "InverseEstimate",
    "grad_estimate_plain",
    "grad_estimate_regularized",
    "neumann_inverse",
    "grad_estimate_mirror",
    "grad_estimate_saa_reform",
    "grad_estimate_coord_reform",
    "saa_gradient_at",
]


@dataclass(frozen=True)
class GradientSample:
    vector: np.ndarray
    kind: str  # plain | regularized | mirror | saa_reform | coord_reform
    samples_used: int


@dataclass(frozen=True)
class InverseEstimate:
    """Randomized truncated-series estimate of the inverse slope diagonal."""

    diag: np.ndarray
    index_k: int
    samples_used: int


def grad_estimate_plain(problem: Problem, x: np.ndarray, rng: np.random.Generator) -> GradientSample:
    """One-sample unbiased estimate of the objective gradient."""
    x = np.asarray(x, dtype=float)
    xi = problem.sampler.draw(rng, 1)[0]
    y = phi_eval(problem.phi, x, xi)
    v = phi_grad(problem.phi, x, xi) * problem.outer.grad(y, rng)
    return GradientSample(vector=v, kind="plain", samples_used=1)


def grad_estimate_regularized(
    problem: Problem, x: np.ndarray, lam: float, rng: np.random.Generator
) -> GradientSample:
    """Plain estimate plus lam * x; unbiased for the regularized objective.

    The shrinkage term is what keeps the iterate moving when the raw
    gradient vanishes almost surely (x above the essential sup of xi).
    """
    if lam < 0:
        raise ValueError("regularization weight must be nonnegative")
    x = np.asarray(x, dtype=float)
    base = grad_estimate_plain(problem, x, rng)
    return GradientSample(vector=base.vector + lam * x, kind="regularized", samples_used=1)


def neumann_inverse(
    problem: Problem, x: np.ndarray, K: int, c: float, rng: np.random.Generator
) -> InverseEstimate:
    """Randomized estimate of the inverse of diag(grad g(x)).

    Draw k uniformly from {0, ..., K-1} and return
    ``K/(c L_phi) * prod_{i<=k} (I - grad phi(x, xi^i)/(c L_phi))``
    (empty product = I).  Truncation at K leaves a bias below
    ``(1/mu_g)(1 - mu_g/(c L_phi))^K`` while the second moment stays
    bounded by ``K^2/(c L_phi)^2``; the expected sample cost is (K-1)/2.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if not c > 1.0:
        raise ValueError("c must exceed 1")
    x = np.asarray(x, dtype=float)
    cl = c * problem.phi.lipschitz
    k = int(rng.integers(K))
    diag = np.full(x.size, K / cl)
    if k > 0:
        xis = problem.sampler.draw(rng, k)
        factors = 1.0 - phi_grad(problem.phi, x[None, :], xis) / cl
        diag = diag * factors.prod(axis=0)
    return InverseEstimate(diag=diag, index_k=k, samples_used=k)


def grad_estimate_mirror(
    problem: Problem,
    x: np.ndarray,
    K: int,
    lam: float,
    rng,
) -> GradientSample:
    """Preconditioned gradient sample mirroring a descent step on the
    transformed convex objective.

    Two independent inverse-slope estimates (c = 2) multiply a fresh plain
    gradient factor, plus the lam * x shrinkage.  ``rng`` is either one
    generator (sequential draws are then disjoint) or a triple
    ``(rng_a, rng_b, rng_grad)`` of dedicated sub-streams.
    """
    if lam < 0:
        raise ValueError("regularization weight must be nonnegative")
    if isinstance(rng, (tuple, list)):
        rng_a, rng_b, rng_g = rng
    else:
        rng_a = rng_b = rng_g = rng
    x = np.asarray(x, dtype=float)
    inv_a = neumann_inverse(problem, x, K, 2.0, rng_a)
    inv_b = neumann_inverse(problem, x, K, 2.0, rng_b)
    xi = problem.sampler.draw(rng_g, 1)[0]
    y = phi_eval(problem.phi, x, xi)
    core = phi_grad(problem.phi, x, xi) * problem.outer.grad(y, rng_g)
    v = inv_a.diag * (inv_b.diag * core) + lam * x
    return GradientSample(
        vector=v,
        kind="mirror",
        samples_used=inv_a.samples_used + inv_b.samples_used + 1,
    )


def saa_gradient_at(
    transform: TransformEstimate, problem: Problem, x: np.ndarray, rng: np.random.Generator
) -> GradientSample:
    """Gradient sample for the empirical transformed objective at a known x.

    The transformation slope is the exact mean derivative over the frozen
    set (g_hat is known once the samples are frozen); the outer factor
    uses one draw from the frozen set.  A zero slope entry means x sits at
    the flat edge of the empirical image box: the caller must shrink the
    box rather than have us pseudo-invert.
    """
    x = np.asarray(x, dtype=float)
    slope = transform.g_grad(x)
    zero = np.flatnonzero(slope == 0.0)
    if zero.size:
        raise SingularTransformError(int(zero[0]))
    j = int(rng.integers(transform.n))
    xi = transform.samples[j]
    y = phi_eval(transform.phi, x, xi)
    core = phi_grad(transform.phi, x, xi) * problem.outer.grad(y, rng)
    return GradientSample(vector=core / slope, kind="saa_reform", samples_used=1)


def grad_estimate_saa_reform(
    transform: TransformEstimate, problem: Problem, u: np.ndarray, rng: np.random.Generator
) -> GradientSample:
    """Gradient sample at a transformed point u; inverts g_hat first."""
    x = transform.g_inverse(np.asarray(u, dtype=float))
    return saa_gradient_at(transform, problem, x, rng)


def grad_estimate_coord_reform(
    transform: TransformEstimate, problem: Problem, u: np.ndarray, rng: np.random.Generator
) -> GradientSample:
    """Low-variance coordinate estimator for the truncation family.

    For min(x, xi) the i-th transformed-gradient coordinate equals the
    expected i-th partial of f at the point whose i-th input is x_i left
    untruncated and whose other inputs are truncated by a fresh draw; no
    inverse-slope factor is needed, so the second moment is at most
    d * L_f^2.  Costs d gradient evaluations per call.
    """
    if transform.phi.kind != TRUNC_MIN:
        raise UnsupportedFamilyError("coordinate estimator requires the truncation family")
    u = np.asarray(u, dtype=float)
    x = transform.g_inverse(u)
    d = x.size
    v = np.zeros(d)
    for i in range(d):
        j = int(rng.integers(transform.n))
        point = np.minimum(x, transform.samples[j])
        point[i] = x[i]
        v[i] = problem.outer.grad(point, rng)[i]
    return GradientSample(vector=v, kind="coord_reform", samples_used=d)
