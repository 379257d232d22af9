"""Booking-limit revenue management as a truncation-composition problem.

Reservations are capped per demand class by a booking limit x; the
accepted amount is min(x, demand).  At service time, realized show-ups
compete for realized capacity (one-dimensional seats for passengers,
weight and volume with routing options for cargo); the recourse program
allocates capacity to minimize the rejection penalty.  The resulting
expected-profit objective is exactly min over the box of
E[f(min(x, D))] with a stochastic convex outer f, so every optimizer in
this library applies unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional

import numpy as np

from ..errors import DimensionError, InstanceError, LpInternalError
from ..lp import LpProblem, solve_lp
from ..problem import (
    BoxDomain,
    PhiFamily,
    Problem,
    TruncatedNormal,
    XiSampler,
    _as_rng,
)
from ..estimators import GradientSample
from ..rng import stream

__all__ = [
    "ShowUpModel",
    "NrmInstance",
    "ScenarioSet",
    "ServiceScenario",
    "GammaResult",
    "sample_show_ups",
    "gamma_passenger",
    "gamma_aircargo",
    "recourse_penalty",
    "NrmOuter",
    "booking_problem",
    "nrm_outer_gradient",
    "dlp_booking_limits",
    "booking_objective_mc",
    "policy_revenues",
    "evaluate_policy",
]

PASSENGER = "passenger"
AIRCARGO = "aircargo"

_unit_normal = NormalDist()


@dataclass(frozen=True)
class ShowUpModel:
    """How accepted reservations turn into service-time show-ups.

    ``all``      -- everyone shows up (show-ups equal acceptances);
    ``poisson``  -- Poisson with mean p * accepted (fractional-friendly);
    ``binomial`` -- Binomial(n, p) with the floor randomization: for
                    fractional accepted a, n = floor(a) with probability
                    floor(a) + 1 - a, else floor(a) + 1, preserving the
                    mean p * a.
    """

    kind: str = "all"
    p: float = 1.0

    def __post_init__(self):
        if self.kind not in ("all", "poisson", "binomial"):
            raise ValueError(f"unknown show-up model {self.kind!r}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("show-up probability must be in (0, 1]")


def sample_show_ups(model: ShowUpModel, accepted: np.ndarray, rng) -> np.ndarray:
    """Draw show-up counts for the given (possibly fractional) acceptances."""
    accepted = np.asarray(accepted, dtype=float)
    if np.any(accepted < 0):
        raise ValueError("accepted amounts must be nonnegative")
    if model.kind == "all":
        return accepted.copy()
    rng = _as_rng(rng, "showups")
    if model.kind == "poisson":
        return rng.poisson(model.p * accepted).astype(float)
    lo = np.floor(accepted)
    bump = rng.random(accepted.shape) < (accepted - lo)
    n = (lo + bump).astype(np.int64)
    return rng.binomial(n, model.p).astype(float)


# ---------------------------------------------------------------------------
# instance


@dataclass(frozen=True)
class NrmInstance:
    """One revenue-management market: network, distributions, prices.

    Passenger mode uses ``consumption`` (legs x classes 0/1 matrix, or
    nonnegative integers), per-leg ``capacity_*`` seat distributions, and
    fixed ``revenue``/``penalty`` vectors.

    Cargo mode uses ``routes`` (per class, the feasible routes, each a
    tuple of leg indices), correlated random per-unit weight/volume and
    two-dimensional capacity, and the tariff r_i = theta1_i * max(W_i,
    V_i / theta2) with penalty ``penalty_mult`` times the tariff.
    """

    mode: str
    demand_means: np.ndarray  # (d,)
    show_up: ShowUpModel
    x_upper: float = 100.0
    # passenger fields
    consumption: Optional[np.ndarray] = None  # (m, d)
    capacity_mean: Optional[np.ndarray] = None  # (m,)
    capacity_cv: float = 0.1
    revenue: Optional[np.ndarray] = None  # (d,)
    penalty: Optional[np.ndarray] = None  # (d,)
    # cargo fields
    routes: Optional[tuple] = None  # per class: tuple of tuples of leg ids
    n_legs: Optional[int] = None
    weight_mean: Optional[np.ndarray] = None  # (d,)
    volume_mean: Optional[np.ndarray] = None  # (d,)
    consumption_cv: float = 0.1
    rho_consumption: float = 0.8
    capacity_w_mean: Optional[np.ndarray] = None  # (m,)
    capacity_v_mean: Optional[np.ndarray] = None  # (m,)
    rho_capacity: float = 0.8
    theta1: Optional[np.ndarray] = None  # (d,)
    theta2: float = 0.6
    penalty_mult: float = 2.4
    demand_kind: str = "poisson"  # "poisson" | "binomial" totals
    horizon: int = 240  # reservation periods aggregated by binomial totals

    def __post_init__(self):
        problems = []
        d = len(np.atleast_1d(self.demand_means))
        object.__setattr__(self, "demand_means", np.atleast_1d(np.asarray(self.demand_means, float)))
        if np.any(self.demand_means < 0):
            problems.append("demand_means: must be nonnegative")
        if self.x_upper <= 0:
            problems.append("x_upper: must be positive")
        if not (-1.0 <= self.rho_consumption <= 1.0 and -1.0 <= self.rho_capacity <= 1.0):
            problems.append("rho_consumption/rho_capacity: correlations must lie in [-1, 1]")
        if self.demand_kind not in ("poisson", "binomial"):
            problems.append("demand_kind: must be 'poisson' or 'binomial'")
        if self.horizon < 1:
            problems.append("horizon: must be a positive period count")
        if self.mode == PASSENGER:
            for name in ("consumption", "capacity_mean", "revenue", "penalty"):
                if getattr(self, name) is None:
                    problems.append(f"{name}: required in passenger mode")
            if not problems:
                a = np.atleast_2d(np.asarray(self.consumption, float))
                object.__setattr__(self, "consumption", a)
                object.__setattr__(self, "capacity_mean", np.atleast_1d(np.asarray(self.capacity_mean, float)))
                object.__setattr__(self, "revenue", np.atleast_1d(np.asarray(self.revenue, float)))
                object.__setattr__(self, "penalty", np.atleast_1d(np.asarray(self.penalty, float)))
                if a.shape[1] != d:
                    problems.append("consumption: column count must equal demand classes")
                if self.capacity_mean.size != a.shape[0]:
                    problems.append("capacity_mean: one entry per leg row")
                if self.revenue.size != d or self.penalty.size != d:
                    problems.append("revenue/penalty: one entry per demand class")
                if np.any(a < 0) or np.any(a != np.rint(a)):
                    problems.append("consumption: entries must be nonnegative integers")
        elif self.mode == AIRCARGO:
            for name in ("routes", "n_legs", "weight_mean", "volume_mean",
                         "capacity_w_mean", "capacity_v_mean", "theta1"):
                if getattr(self, name) is None:
                    problems.append(f"{name}: required in cargo mode")
            if not problems:
                object.__setattr__(self, "weight_mean", np.atleast_1d(np.asarray(self.weight_mean, float)))
                object.__setattr__(self, "volume_mean", np.atleast_1d(np.asarray(self.volume_mean, float)))
                object.__setattr__(self, "capacity_w_mean", np.atleast_1d(np.asarray(self.capacity_w_mean, float)))
                object.__setattr__(self, "capacity_v_mean", np.atleast_1d(np.asarray(self.capacity_v_mean, float)))
                object.__setattr__(self, "theta1", np.atleast_1d(np.asarray(self.theta1, float)))
                routes = tuple(tuple(tuple(int(l) for l in r) for r in class_routes)
                               for class_routes in self.routes)
                object.__setattr__(self, "routes", routes)
                if len(routes) != d:
                    problems.append("routes: one route list per demand class")
                if any(len(r) < 1 for r in routes):
                    problems.append("routes: every class needs at least one route")
                m = self.n_legs
                if any(l < 0 or l >= m for cr in routes for r in cr for l in r):
                    problems.append("routes: leg index out of range")
                if self.capacity_w_mean.size != m or self.capacity_v_mean.size != m:
                    problems.append("capacity_w_mean/capacity_v_mean: one entry per leg")
                for name in ("weight_mean", "volume_mean", "theta1"):
                    if getattr(self, name).size != d:
                        problems.append(f"{name}: one entry per demand class")
        else:
            problems.append(f"mode: unknown {self.mode!r}")
        if problems:
            raise InstanceError("invalid instance: " + "; ".join(problems))

    @property
    def n_classes(self) -> int:
        return self.demand_means.size

    @property
    def legs(self) -> int:
        return self.consumption.shape[0] if self.mode == PASSENGER else self.n_legs

    def demand_sampler(self) -> XiSampler:
        from ..problem import BinomialCount, PoissonCount

        if self.demand_kind == "binomial":
            dists = tuple(
                BinomialCount(self.horizon, min(mu / self.horizon, 1.0))
                for mu in self.demand_means
            )
        else:
            dists = tuple(PoissonCount(mu) for mu in self.demand_means)
        return XiSampler(dists, "demand")

    def draw_scenarios(self, n: int, rng) -> "ScenarioSet":
        """Frozen batch of service-stage randomness for CRN evaluation."""
        rng = _as_rng(rng, "scenarios")
        demand = self.demand_sampler().draw(rng, n)
        if self.mode == PASSENGER:
            cap = _trunc_normal_matrix(rng, n, self.capacity_mean, self.capacity_cv)
            return ScenarioSet(demand=demand, capacity=cap)
        cap_w, cap_v = _correlated_trunc_normal(
            rng, n, self.capacity_w_mean, self.capacity_v_mean,
            self.capacity_cv, self.rho_capacity,
        )
        w, v = _correlated_trunc_normal(
            rng, n, self.weight_mean, self.volume_mean,
            self.consumption_cv, self.rho_consumption,
        )
        return ScenarioSet(demand=demand, cap_w=cap_w, cap_v=cap_v, weight=w, volume=v)

    def unit_revenue(self, weight=None, volume=None) -> np.ndarray:
        """Per-unit revenue; cargo tariff depends on the realized (W, V)."""
        if self.mode == PASSENGER:
            return self.revenue
        return self.theta1 * np.maximum(weight, volume / self.theta2)

    def unit_penalty(self, weight=None, volume=None) -> np.ndarray:
        if self.mode == PASSENGER:
            return self.penalty
        return self.penalty_mult * self.unit_revenue(weight, volume)


def _trunc_normal_matrix(rng, n, means, cv):
    out = np.empty((n, means.size))
    for j, mu in enumerate(means):
        out[:, j] = TruncatedNormal(float(mu), float(cv * mu)).sample(rng, n)
    return out


def _probit(u):
    flat = np.asarray(u, dtype=float).ravel()
    return np.array([_unit_normal.inv_cdf(min(max(v, 1e-12), 1 - 1e-12)) for v in flat]).reshape(np.shape(u))


def _correlated_trunc_normal(rng, n, means_a, means_b, cv, rho):
    """Gaussian copula with the declared correlation, truncated-normal
    marginals (parent mean/cv, conditioned on [0, inf))."""
    za = rng.standard_normal((n, means_a.size))
    zb_indep = rng.standard_normal((n, means_b.size))
    zb = rho * za + math.sqrt(max(0.0, 1.0 - rho * rho)) * zb_indep
    ua = _unit_normal_cdf(za)
    ub = _unit_normal_cdf(zb)
    a = _trunc_normal_ppf(ua, means_a, cv)
    b = _trunc_normal_ppf(ub, means_b, cv)
    return a, b


def _unit_normal_cdf(z):
    return 0.5 * (1.0 + np.vectorize(math.erf)(np.asarray(z) / math.sqrt(2.0)))


def _trunc_normal_ppf(u, means, cv):
    out = np.empty_like(np.asarray(u, dtype=float))
    for j, mu in enumerate(means):
        sigma = float(cv * mu)
        if sigma == 0.0:
            out[:, j] = mu
            continue
        c0 = _unit_normal.cdf(-mu / sigma)
        inner = c0 + np.asarray(u)[:, j] * (1.0 - c0)
        out[:, j] = mu + sigma * _probit(inner)
    return out


@dataclass(frozen=True)
class ScenarioSet:
    """Batch of realized randomness shared across compared policies."""

    demand: np.ndarray  # (S, d)
    capacity: Optional[np.ndarray] = None  # (S, m) passenger seats
    cap_w: Optional[np.ndarray] = None  # (S, m)
    cap_v: Optional[np.ndarray] = None
    weight: Optional[np.ndarray] = None  # (S, d)
    volume: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.demand.shape[0]

    def row(self, s: int) -> "ServiceScenario":
        pick = lambda a: None if a is None else a[s]
        return ServiceScenario(
            demand=self.demand[s], capacity=pick(self.capacity),
            cap_w=pick(self.cap_w), cap_v=pick(self.cap_v),
            weight=pick(self.weight), volume=pick(self.volume),
        )


@dataclass(frozen=True)
class ServiceScenario:
    demand: np.ndarray
    capacity: Optional[np.ndarray] = None
    cap_w: Optional[np.ndarray] = None
    cap_v: Optional[np.ndarray] = None
    weight: Optional[np.ndarray] = None
    volume: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# recourse programs


@dataclass(frozen=True)
class GammaResult:
    penalty: float
    class_duals: np.ndarray  # duals of the service caps w <= z, >= 0
    leg_duals: Optional[np.ndarray] = None  # passenger capacity rows
    weight_duals: Optional[np.ndarray] = None  # cargo weight rows
    volume_duals: Optional[np.ndarray] = None
    served: Optional[np.ndarray] = None
    routing: Optional[np.ndarray] = None


def gamma_passenger(z, c, consumption, penalty) -> GammaResult:
    """Minimal rejection penalty serving show-ups z within seat capacity c.

    min over w of penalty @ (z - w) with A w <= c, 0 <= w <= z.  Duals are
    reported in the nonnegative convention of the allocation program's
    dual form (the capacity dual is the marginal penalty saved per extra
    seat, the class dual enters the gradient as penalty - dual).
    """
    z = np.asarray(z, dtype=float)
    c = np.asarray(c, dtype=float)
    a = np.asarray(consumption, dtype=float)
    l = np.asarray(penalty, dtype=float)
    m, d = a.shape
    if z.size != d or c.size != m or l.size != d:
        raise DimensionError("inconsistent recourse dimensions")
    rows = np.vstack([a, np.eye(d)])
    rhs = np.concatenate([c, z])
    sol = solve_lp(LpProblem("min", -l, rows, ("<=",) * (m + d), rhs))
    if sol.status != "optimal":
        raise LpInternalError(f"allocation program is always feasible, got {sol.status}")
    penalty_val = float(l @ z + sol.objective)
    return GammaResult(
        penalty=max(penalty_val, 0.0),
        class_duals=np.maximum(-sol.dual[m:], 0.0),
        leg_duals=np.maximum(-sol.dual[:m], 0.0),
        served=sol.primal,
    )


def gamma_aircargo(z, weight, volume, cap_w, cap_v, routes, penalty) -> GammaResult:
    """Cargo recourse: route and serve show-ups within weight and volume.

    Variables are per-route allocations y_ik plus served totals w_i; the
    served totals link to the routes by equality, consume W_i (V_i) per
    unit on every leg of the chosen route, and are capped by z.
    """
    z = np.asarray(z, dtype=float)
    weight = np.asarray(weight, dtype=float)
    volume = np.asarray(volume, dtype=float)
    cap_w = np.asarray(cap_w, dtype=float)
    cap_v = np.asarray(cap_v, dtype=float)
    l = np.asarray(penalty, dtype=float)
    d = z.size
    m = cap_w.size
    offsets = []
    n_y = 0
    for i in range(d):
        offsets.append(n_y)
        n_y += len(routes[i])
    n_var = n_y + d  # y block then w block
    w_rows = np.zeros((m, n_var))
    v_rows = np.zeros((m, n_var))
    for i in range(d):
        for k, route in enumerate(routes[i]):
            col = offsets[i] + k
            for leg in route:
                w_rows[leg, col] = weight[i]
                v_rows[leg, col] = volume[i]
    link = np.zeros((d, n_var))
    capz = np.zeros((d, n_var))
    for i in range(d):
        link[i, n_y + i] = 1.0
        link[i, offsets[i] : offsets[i] + len(routes[i])] = -1.0
        capz[i, n_y + i] = 1.0
    rows = np.vstack([w_rows, v_rows, link, capz])
    senses = ("<=",) * m + ("<=",) * m + ("=",) * d + ("<=",) * d
    rhs = np.concatenate([cap_w, cap_v, np.zeros(d), z])
    cost = np.zeros(n_var)
    cost[n_y:] = -l
    sol = solve_lp(LpProblem("min", cost, rows, senses, rhs))
    if sol.status != "optimal":
        raise LpInternalError(f"cargo recourse always feasible, got {sol.status}")
    penalty_val = float(l @ z + sol.objective)
    return GammaResult(
        penalty=max(penalty_val, 0.0),
        class_duals=np.maximum(-sol.dual[2 * m + d :], 0.0),
        weight_duals=np.maximum(-sol.dual[:m], 0.0),
        volume_duals=np.maximum(-sol.dual[m : 2 * m], 0.0),
        served=sol.primal[n_y:],
        routing=sol.primal[:n_y],
    )


def recourse_penalty(instance: NrmInstance, z, scenario: ServiceScenario, penalty) -> GammaResult:
    """Mode-appropriate service-stage allocation for one scenario."""
    if instance.mode == PASSENGER:
        return gamma_passenger(z, scenario.capacity, instance.consumption, penalty)
    return gamma_aircargo(
        z, scenario.weight, scenario.volume, scenario.cap_w, scenario.cap_v,
        instance.routes, penalty,
    )


_gamma_for = recourse_penalty


# ---------------------------------------------------------------------------
# the outer function and the assembled composition problem

EXACT_DIFF = "exact_diff"
DUAL_APPROX = "dual_approx"


class NrmOuter:
    """Stochastic convex outer function of the booking-limit composition.

    Works in minimization convention: value is the negated expected profit
    of serving y accepted reservations, sampled one service scenario at a
    time.  The gradient uses either the one-extra-show-up difference of
    the recourse penalty (``exact_diff``, d+1 solves) or the recourse
    duals (``dual_approx``, one solve).

    Optimization always uses the Poisson version of a binomial show-up
    model (same p): the smooth relaxation keeps the gradient identity
    exact while evaluation retains the declared model.
    """

    def __init__(self, instance: NrmInstance, mode: str = DUAL_APPROX):
        if mode not in (EXACT_DIFF, DUAL_APPROX):
            raise ValueError(f"unknown gradient mode {mode!r}")
        self.instance = instance
        self.mode = mode
        show = instance.show_up
        self.opt_show_up = ShowUpModel("poisson", show.p) if show.kind == "binomial" else show

    def _draw_service(self, rng) -> ServiceScenario:
        inst = self.instance
        if inst.mode == PASSENGER:
            cap = _trunc_normal_matrix(rng, 1, inst.capacity_mean, inst.capacity_cv)[0]
            return ServiceScenario(demand=None, capacity=cap)
        cap_w, cap_v = _correlated_trunc_normal(
            rng, 1, inst.capacity_w_mean, inst.capacity_v_mean,
            inst.capacity_cv, inst.rho_capacity,
        )
        w, v = _correlated_trunc_normal(
            rng, 1, inst.weight_mean, inst.volume_mean,
            inst.consumption_cv, inst.rho_consumption,
        )
        return ServiceScenario(demand=None, cap_w=cap_w[0], cap_v=cap_v[0],
                               weight=w[0], volume=v[0])

    def _revenue_penalty(self, scenario: ServiceScenario):
        inst = self.instance
        r = inst.unit_revenue(scenario.weight, scenario.volume)
        l = inst.unit_penalty(scenario.weight, scenario.volume)
        return r, l

    def grad(self, y, rng) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        scenario = self._draw_service(rng)
        r, l = self._revenue_penalty(scenario)
        z = sample_show_ups(self.opt_show_up, y, rng)
        p = self.opt_show_up.p if self.opt_show_up.kind != "all" else 1.0
        if self.mode == DUAL_APPROX:
            res = _gamma_for(self.instance, z, scenario, l)
            ascent = r - p * (l - res.class_duals)
        else:
            base = _gamma_for(self.instance, z, scenario, l)
            diffs = np.empty(y.size)
            for i in range(y.size):
                bumped = _gamma_for(self.instance, z + _unit(y.size, i), scenario, l)
                diffs[i] = bumped.penalty - base.penalty
            ascent = r - p * diffs
        return -ascent

    def value(self, y, rng) -> float:
        y = np.asarray(y, dtype=float)
        scenario = self._draw_service(rng)
        r, l = self._revenue_penalty(scenario)
        z = sample_show_ups(self.opt_show_up, y, rng)
        res = _gamma_for(self.instance, z, scenario, l)
        return -(float(r @ y) - res.penalty)


def _unit(d, i):
    e = np.zeros(d)
    e[i] = 1.0
    return e


def booking_problem(instance: NrmInstance, mode: str = DUAL_APPROX) -> Problem:
    """The booking-limit task as a standard composition problem.

    The random inner map is min(x, demand); the outer function is the
    negated expected service-stage profit.  Optimizers and estimators
    then apply without modification.
    """
    d = instance.n_classes
    domain = BoxDomain(np.zeros(d), np.full(d, instance.x_upper))
    r_bound = expected_unit_revenue(instance)
    l_bound = instance.penalty if instance.mode == PASSENGER else instance.penalty_mult * r_bound
    lf = float(np.linalg.norm(np.maximum(np.abs(r_bound), np.abs(r_bound - l_bound)))) * 2.0
    return Problem(
        domain=domain,
        phi=PhiFamily("trunc_min", lipschitz=1.0),
        sampler=instance.demand_sampler(),
        outer=NrmOuter(instance, mode),
        outer_lipschitz=lf,
    )


def nrm_outer_gradient(instance: NrmInstance, x, rng, mode: str = DUAL_APPROX) -> GradientSample:
    """One-scenario estimate of the expected-profit gradient at limits x.

    Draws demand, show-ups from the accepted amount, and the service
    scenario; applies the acceptance indicator 1{x <= D} per coordinate.
    Returned in ascent convention (positive = raise the limit).
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("booking limits must be nonnegative")
    rng = _as_rng(rng, "nrm_grad")
    outer = NrmOuter(instance, mode)
    demand = instance.demand_sampler().draw(rng, 1)[0]
    indicator = (x <= demand).astype(float)
    ascent = -outer.grad(np.minimum(x, demand), rng)
    return GradientSample(vector=indicator * ascent, kind="nrm_" + mode, samples_used=1)


def expected_unit_revenue(instance: NrmInstance, n_mc: int = 200_000, seed: int = 0) -> np.ndarray:
    """Deterministic per-class expected unit revenue (frozen Monte Carlo
    for the cargo tariff, exact for passengers)."""
    if instance.mode == PASSENGER:
        return instance.revenue.copy()
    w, v = _correlated_trunc_normal(
        stream(seed, "exprev"), n_mc, instance.weight_mean, instance.volume_mean,
        instance.consumption_cv, instance.rho_consumption,
    )
    return instance.theta1 * np.maximum(w, v / instance.theta2).mean(axis=0)


# ---------------------------------------------------------------------------
# deterministic planning baseline


def dlp_booking_limits(instance: NrmInstance, n_mc: int = 200_000, seed: int = 0):
    """Booking limits from the expectation-substituted planning program.

    Maximizes r@x - l@(p x - w) with expected capacity rows, x capped by
    expected demand, and served w capped by expected show-ups p x.
    Returns the limits and the capacity-row duals (bid prices).
    """
    d = instance.n_classes
    p = instance.show_up.p if instance.show_up.kind != "all" else 1.0
    r = expected_unit_revenue(instance, n_mc, seed)
    if instance.mode == PASSENGER:
        l = instance.penalty
        a = instance.consumption
        m = a.shape[0]
        # variables: x (d) then w (d)
        rows = np.zeros((m + d + d, 2 * d))
        rows[:m, d:] = a
        rhs = np.concatenate([instance.capacity_mean, instance.demand_means, np.zeros(d)])
        for i in range(d):
            rows[m + i, i] = 1.0
            rows[m + d + i, d + i] = 1.0
            rows[m + d + i, i] = -p
        cost = np.concatenate([r - l * p, l])
        sol = solve_lp(LpProblem("max", cost, rows, ("<=",) * (m + 2 * d), rhs))
        if sol.status != "optimal":
            raise LpInternalError(f"planning program should be solvable, got {sol.status}")
        return sol.primal[:d], sol.dual[:m]
    # cargo: variables x (d), w (d), y (routes); expectation-substituted
    l = instance.penalty_mult * r
    m = instance.legs
    offsets = []
    n_y = 0
    for i in range(d):
        offsets.append(n_y)
        n_y += len(instance.routes[i])
    n_var = 2 * d + n_y
    ew, ev = instance.weight_mean, instance.volume_mean
    w_rows = np.zeros((m, n_var))
    v_rows = np.zeros((m, n_var))
    for i in range(d):
        for k, route in enumerate(instance.routes[i]):
            col = 2 * d + offsets[i] + k
            for leg in route:
                w_rows[leg, col] = ew[i]
                v_rows[leg, col] = ev[i]
    link = np.zeros((d, n_var))
    demand_rows = np.zeros((d, n_var))
    showup_rows = np.zeros((d, n_var))
    for i in range(d):
        link[i, d + i] = 1.0
        link[i, 2 * d + offsets[i] : 2 * d + offsets[i] + len(instance.routes[i])] = -1.0
        demand_rows[i, i] = 1.0
        showup_rows[i, d + i] = 1.0
        showup_rows[i, i] = -p
    rows = np.vstack([w_rows, v_rows, link, demand_rows, showup_rows])
    senses = ("<=",) * (2 * m) + ("=",) * d + ("<=",) * (2 * d)
    rhs = np.concatenate([
        instance.capacity_w_mean, instance.capacity_v_mean,
        np.zeros(d), instance.demand_means, np.zeros(d),
    ])
    cost = np.zeros(n_var)
    cost[:d] = r - l * p
    cost[d : 2 * d] = l
    sol = solve_lp(LpProblem("max", cost, rows, senses, rhs))
    if sol.status != "optimal":
        raise LpInternalError(f"planning program should be solvable, got {sol.status}")
    return sol.primal[:d], np.concatenate([sol.dual[:m], sol.dual[m : 2 * m]])


# ---------------------------------------------------------------------------
# Monte-Carlo evaluation


def booking_objective_mc(instance: NrmInstance, x, n_scenarios: int, rng):
    """Expected profit of fractional limits x (no rounding), with s.e.

    Used for optimizer convergence traces; the policy-grade evaluator
    below rounds to integers first.
    """
    x = np.asarray(x, dtype=float)
    scen = instance.draw_scenarios(n_scenarios, _as_rng(rng, "objective"))
    vals = _revenues_on(instance, x, scen, _as_rng(rng, "objective", "showups"), round_limits=False)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_scenarios))


def policy_revenues(instance: NrmInstance, x, scenarios: ScenarioSet, rng) -> np.ndarray:
    """Scenario-wise revenues of the rounded policy on a frozen set."""
    return _revenues_on(instance, np.asarray(x, float), scenarios, _as_rng(rng, "showups"),
                        round_limits=True)


def evaluate_policy(instance: NrmInstance, x, n_scenarios: int, seed):
    """Mean revenue and standard error of the rounded booking limits.

    Limits are rounded to the nearest integer; each scenario draws
    demand, show-ups for the accepted amount (under the instance's
    declared show-up model), capacities, and consumption, then solves
    the service-stage allocation.
    """
    if n_scenarios < 1:
        raise ValueError("need at least one scenario")
    scen = instance.draw_scenarios(n_scenarios, stream(_seed_int(seed), "scenario"))
    vals = policy_revenues(instance, x, scen, stream(_seed_int(seed), "showup"))
    se = vals.std(ddof=1) / math.sqrt(n_scenarios) if n_scenarios > 1 else math.inf
    return float(vals.mean()), float(se)


def _seed_int(seed) -> int:
    if isinstance(seed, np.random.Generator):
        raise TypeError("evaluate_policy takes a seed, not a generator")
    return int(seed)


def _revenues_on(instance, x, scenarios: ScenarioSet, rng, round_limits: bool) -> np.ndarray:
    limits = np.rint(x) if round_limits else x
    limits = np.clip(limits, 0.0, None)
    out = np.empty(scenarios.size)
    for s in range(scenarios.size):
        row = scenarios.row(s)
        accepted = np.minimum(limits, row.demand)
        z = sample_show_ups(instance.show_up, accepted, rng)
        r = instance.unit_revenue(row.weight, row.volume)
        l = instance.unit_penalty(row.weight, row.volume)
        res = _gamma_for(instance, z, row, l)
        out[s] = float(r @ accepted) - res.penalty
    return out
