import math
import numpy as np
import pytest

from hconvex.errors import CostGuardError, UnsupportedFamilyError
from hconvex.oracles import (
    closed_form_g,
    finite_diff_grad,
    grid_global_min,
    make_mc_objective,
    mc_objective,
)
from hconvex.problem import (
    BoxDomain,
    Discrete,
    PhiFamily,
    PoissonCount,
    Problem,
    QuadraticOuter,
    TruncatedNormal,
    Uniform,
    XiSampler,
    estimate_g,
)
from hconvex.rng import stream

from conftest import make_truncation_problem


# ---------------------------------------------------------------------------
# closed forms


def test_closed_form_uniform_interior():
    g = closed_form_g(Uniform(0.0, 1.0), 0.5)
    assert g.value == pytest.approx(0.375, abs=1e-15)
    assert g.derivative == pytest.approx(0.5, abs=1e-15)


def test_closed_form_uniform_above_support():
    assert closed_form_g(Uniform(0.0, 1.0), 1.7).value == pytest.approx(0.5, abs=1e-15)
    assert closed_form_g(Uniform(0.0, 1.0), 1.7).derivative == 0.0


def test_closed_form_discrete_matches_two_point_mean():
    g = closed_form_g(Discrete((0.2, 0.8), (0.5, 0.5)), 0.5)
    assert g.value == pytest.approx(0.35, abs=1e-15)
    assert g.derivative == pytest.approx(0.5, abs=1e-15)


def test_closed_form_trunc_normal_against_quadrature():
    # independent oracle: trapezoid on 1 - H over a fine grid
    dist = TruncatedNormal(1.2, 0.7)
    for x in (0.3, 0.8, 1.5, 2.5):
        ts = np.linspace(0.0, x, 20001)
        h_vals = np.array([float(np.asarray(dist.cdf(t))) for t in ts])
        quad = np.trapezoid(1.0 - h_vals, ts)
        got = closed_form_g(dist, x)
        assert got.value == pytest.approx(quad, abs=1e-7)
        assert got.derivative == pytest.approx(1.0 - float(np.asarray(dist.cdf(x))), abs=1e-12)


def test_closed_form_unsupported_distribution():
    with pytest.raises(UnsupportedFamilyError):
        closed_form_g(PoissonCount(3.0), 1.0)


@pytest.mark.parametrize(
    "dist",
    [Uniform(0.0, 1.0), TruncatedNormal(0.8, 0.5), Discrete((0.2, 0.5, 0.9), (0.3, 0.4, 0.3))],
)
def test_estimate_g_matches_closed_form_on_grid(dist):
    domain = BoxDomain([0.0], [1.2])
    prob = Problem(
        domain=domain,
        phi=PhiFamily("trunc_min"),
        sampler=XiSampler.iid(dist, 1),
        outer=QuadraticOuter(np.array([0.0])),
        outer_lipschitz=3.0,
    )
    for i, x in enumerate(np.linspace(0.05, 1.15, 10)):
        mean, se = estimate_g(prob, np.array([x]), 200_000, stream(31, "grid", i))
        exact = closed_form_g(dist, float(x)).value
        assert abs(mean[0] - exact) <= 4 * max(se[0], 1e-12)


# ---------------------------------------------------------------------------
# finite differences


def test_finite_diff_matches_calculus():
    # f(y) = y^2: grad F(x) = 2 x (1 - H(x)) = 0.5 at x = 0.5 for U[0,1]
    prob = make_truncation_problem(target=0.0)
    handle = make_mc_objective(prob)
    res = finite_diff_grad(
        handle, prob.domain, np.array([0.5]), 1e-3, 1_000_000,
        stream(32, "fd"), sampler=prob.sampler,
    )
    assert not res.one_sided[0]
    assert abs(res.grad[0] - 0.5) <= max(4 * res.stderr[0], 0.01)


def test_finite_diff_constant_outer_is_exactly_zero(problem_1d):
    handle = lambda x, batch: np.ones(batch.shape[0])
    res = finite_diff_grad(
        handle, problem_1d.domain, np.array([0.4]), 1e-2, 1000,
        stream(33, "fd"), sampler=problem_1d.sampler,
    )
    assert res.grad[0] == 0.0


def test_finite_diff_boundary_one_sided(problem_1d):
    handle = make_mc_objective(problem_1d)
    res = finite_diff_grad(
        handle, problem_1d.domain, np.array([0.0]), 0.1, 50_000,
        stream(34, "fd"), sampler=problem_1d.sampler,
    )
    assert bool(res.one_sided[0])
    # forward difference of F near 0: grad F(0) = -0.6, secant over [0, .1]
    assert res.grad[0] < 0.0


def test_finite_diff_step_too_large(problem_1d):
    handle = make_mc_objective(problem_1d)
    with pytest.raises(ValueError):
        finite_diff_grad(
            handle, problem_1d.domain, np.array([0.5]), 5.0, 100,
            stream(35, "fd"), sampler=problem_1d.sampler,
        )


# ---------------------------------------------------------------------------
# grid search


def test_grid_finds_1d_global_min(problem_1d):
    res = grid_global_min(problem_1d, 0.01, 40_000, stream(36, "grid"))
    assert abs(res.argmin[0] - 0.3) <= 0.01 + 1e-12
    assert abs(res.value - 0.009) <= max(4 * res.stderr, 5e-4)
    assert res.method == "grid_search"


def test_grid_zero_is_min_for_norm_objective():
    domain = BoxDomain([0.0, 0.0], [1.0, 1.0])
    prob = Problem(
        domain=domain,
        phi=PhiFamily("trunc_min"),
        sampler=XiSampler.iid(Uniform(0.0, 1.0), 2),
        outer=QuadraticOuter(np.zeros(2)),
        outer_lipschitz=3.0,
    )
    res = grid_global_min(prob, 0.05, 5_000, stream(37, "grid"))
    assert np.array_equal(res.argmin, [0.0, 0.0])
    assert res.value == 0.0


def test_grid_separable_matches_stacked_1d():
    targets = (0.25, 0.45)
    prob2 = make_truncation_problem(target=np.array(targets), dim=2)
    res2 = grid_global_min(prob2, 0.025, 30_000, stream(38, "grid"))
    for i, t in enumerate(targets):
        prob1 = make_truncation_problem(target=t, dim=1)
        res1 = grid_global_min(prob1, 0.025, 30_000, stream(38, "grid"))
        assert abs(res2.argmin[i] - res1.argmin[0]) <= 0.025 + 1e-12
        assert abs(res2.argmin[i] - t) <= 0.05


def test_grid_cost_guard():
    prob = make_truncation_problem(dim=4)
    with pytest.raises(CostGuardError):
        grid_global_min(prob, 0.1, 100, stream(39, "grid"))


def test_mc_objective_reports_se(problem_1d):
    mean, se = mc_objective(problem_1d, np.array([0.3]), 200_000, stream(40, "mc"))
    assert abs(mean - 0.009) <= 4 * se


def test_grid_value_dominates_optimizer_outputs(problem_1d):
    # the grid oracle's minimum can only undercut any feasible point
    from hconvex.optimizers import (
        LambdaSchedule, OutputRule, RunConfig, StepSchedule, run_msg, run_rsg,
    )

    grid = grid_global_min(problem_1d, 0.01, 50_000, stream(41, "dom"))
    for runner, method in ((run_rsg, "rsg"), (run_msg, "msg")):
        trace = runner(problem_1d, RunConfig(
            method=method, T=2000, seed=42,
            step=StepSchedule("inv_sqrt", 0.5), lam=LambdaSchedule("inv_t"),
            eval_every=0, output_rule=OutputRule("tail_average", 400),
        ))
        value, se = mc_objective(problem_1d, trace.chosen_output, 50_000, stream(43, "dom"))
        assert grid.value <= value + 2 * math.hypot(se, grid.stderr)
