import numpy as np
import pytest

from hconvex.errors import (
    DimensionError,
    SingularityError,
    TransformDomainError,
)
from hconvex.problem import (
    BoxDomain,
    Discrete,
    PhiFamily,
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
)
from hconvex.rng import stream

from conftest import make_truncation_problem


# ---------------------------------------------------------------------------
# family evaluation


def test_phi_eval_trunc_min():
    phi = PhiFamily("trunc_min")
    out = phi_eval(phi, np.array([0.5, 2.0]), np.array([0.7, 1.0]))
    assert np.array_equal(out, [0.5, 1.0])


def test_phi_eval_product_zero():
    out = phi_eval(PhiFamily("product", lipschitz=5.0), np.array([3.0]), np.array([0.0]))
    assert np.array_equal(out, [0.0])


def test_phi_eval_share():
    out = phi_eval(PhiFamily("share", scale=2.0), np.array([1.0]), np.array([1.0]))
    assert np.allclose(out, [1.0])


def test_phi_eval_length_mismatch():
    with pytest.raises(DimensionError):
        phi_eval(PhiFamily("trunc_min"), np.array([1.0, 2.0]), np.array([1.0]))


def test_saturating_singularity():
    phi = PhiFamily("saturating", alpha=1.0, kappa=1.0)
    with pytest.raises(SingularityError):
        phi_eval(phi, np.array([0.0]), np.array([0.0]))


def test_phi_grad_trunc_min_below():
    assert phi_grad(PhiFamily("trunc_min"), np.array([0.5]), np.array([0.7]))[0] == 1.0


def test_phi_grad_trunc_min_kink_is_zero():
    # at x == xi the kink maps to zero by convention
    assert phi_grad(PhiFamily("trunc_min"), np.array([0.7]), np.array([0.7]))[0] == 0.0


def test_phi_grad_product():
    assert phi_grad(PhiFamily("product", lipschitz=5.0), np.array([3.0]), np.array([2.0]))[0] == 2.0


_FAMILIES = [
    (PhiFamily("trunc_min"), Uniform(0.0, 1.0), 1.0),
    (PhiFamily("product", lipschitz=2.0), Uniform(0.0, 2.0), 2.0),
    (PhiFamily("saturating", lipschitz=1.0, alpha=1.0, kappa=1.0), Uniform(0.1, 2.0), 1.0),
    (PhiFamily("share", lipschitz=4.0, scale=2.0), Uniform(0.5, 1.5), 4.0),
]


@pytest.mark.parametrize("phi,dist,lip", _FAMILIES)
def test_monotone_in_x(phi, dist, lip):
    rng = stream(11, "mono", phi.kind)
    for _ in range(250):
        xi = dist.sample(rng, 4)
        x = rng.uniform(0.0, 3.0, 4)
        xp = x + rng.uniform(0.0, 2.0, 4)
        assert np.all(phi_eval(phi, x, xi) <= phi_eval(phi, xp, xi) + 1e-12)


@pytest.mark.parametrize("phi,dist,lip", _FAMILIES)
def test_lipschitz_bound(phi, dist, lip):
    rng = stream(12, "lip", phi.kind)
    for _ in range(250):
        xi = dist.sample(rng, 4)
        x = rng.uniform(0.0, 3.0, 4)
        y = rng.uniform(0.0, 3.0, 4)
        lhs = np.linalg.norm(phi_eval(phi, x, xi) - phi_eval(phi, y, xi))
        assert lhs <= lip * np.linalg.norm(x - y) + 1e-9


@pytest.mark.parametrize("phi,dist,lip", _FAMILIES)
def test_derivative_below_declared_lipschitz(phi, dist, lip):
    rng = stream(13, "deriv", phi.kind)
    for _ in range(250):
        xi = dist.sample(rng, 4)
        x = rng.uniform(0.0, 3.0, 4)
        assert np.all(np.abs(phi_grad(phi, x, xi)) <= lip + 1e-9)


# ---------------------------------------------------------------------------
# projection


def test_project_clamps_low():
    box = BoxDomain([0, 0], [1, 1])
    assert np.array_equal(project_box(box, np.array([-0.5, 0.3])), [0.0, 0.3])


def test_project_identity_inside():
    box = BoxDomain([0, 0], [1, 1])
    x = np.array([0.2, 0.8])
    assert np.array_equal(project_box(box, x), x)


def test_project_clamps_high_and_idempotent():
    box = BoxDomain([0, 0], [1, 1])
    once = project_box(box, np.array([2.0, 2.0]))
    assert np.array_equal(once, [1.0, 1.0])
    assert np.array_equal(project_box(box, once), once)


def test_box_validation():
    with pytest.raises(ValueError):
        BoxDomain([1.0], [0.0])
    assert BoxDomain([-3.0, 0.0], [1.0, 2.0]).radius == pytest.approx(np.sqrt(13.0))


# ---------------------------------------------------------------------------
# Monte-Carlo transformation estimate


def test_estimate_g_uniform_interior(problem_1d):
    # closed form: E[min(x, xi)] = x - x^2/2 = 0.375 at x = 0.5 for U[0,1]
    mean, se = estimate_g(problem_1d, np.array([0.5]), 1_000_000, stream(3, "g"))
    assert abs(mean[0] - 0.375) <= 4 * se[0]
    assert se[0] < 1e-3


def test_estimate_g_product_at_zero():
    domain = BoxDomain([0.0], [3.0])
    prob = Problem(
        domain=domain,
        phi=PhiFamily("product", lipschitz=1.0),
        sampler=XiSampler.iid(Uniform(0.0, 1.0), 1),
        outer=QuadraticOuter(np.array([0.0])),
        outer_lipschitz=6.0,
    )
    mean, _ = estimate_g(prob, np.array([0.0]), 100, stream(4, "g"))
    assert mean[0] == 0.0


def test_estimate_g_above_support(problem_1d):
    mean, se = estimate_g(problem_1d, np.array([2.0]), 1_000_000, stream(5, "g"))
    assert abs(mean[0] - 0.5) <= 4 * se[0]


def test_estimate_g_rejects_zero_samples(problem_1d):
    with pytest.raises(ValueError):
        estimate_g(problem_1d, np.array([0.5]), 0, stream(6, "g"))


# ---------------------------------------------------------------------------
# empirical transformation and its inverse


def _two_point_transform():
    domain = BoxDomain([0.0], [2.0])
    return TransformEstimate(
        samples=np.array([[0.2], [0.8]]), phi=PhiFamily("trunc_min"), domain=domain
    )


def test_empirical_g_two_point_mean():
    tr = _two_point_transform()
    assert empirical_g(tr, np.array([0.5]))[0] == pytest.approx(0.35, abs=1e-15)


def test_empirical_g_inverse_two_point():
    tr = _two_point_transform()
    x = empirical_g_inverse(tr, np.array([0.35]))
    assert x[0] == pytest.approx(0.5, abs=1e-8)
    assert empirical_g(tr, x)[0] == pytest.approx(0.35, abs=1e-10)


def test_empirical_g_inverse_lower_edge_exact():
    tr = _two_point_transform()
    u_lo = empirical_g(tr, tr.domain.lower)
    assert empirical_g_inverse(tr, u_lo)[0] == tr.domain.lower[0]


def test_empirical_g_inverse_domain_error_names_coordinate():
    tr = _two_point_transform()
    with pytest.raises(TransformDomainError) as err:
        empirical_g_inverse(tr, np.array([0.9]))
    assert err.value.coord == 0


@pytest.mark.parametrize("phi,dist,lip", _FAMILIES)
def test_inverse_round_trip_interior(phi, dist, lip):
    rng = stream(21, "round", phi.kind)
    domain = BoxDomain([0.05, 0.05, 0.05], [2.0, 2.0, 2.0])
    samples = np.column_stack([dist.sample(rng, 40) for _ in range(3)])
    tr = TransformEstimate(samples=samples, phi=phi, domain=domain)
    lo = tr.g(domain.lower)
    hi = tr.g(domain.upper)
    for _ in range(25):
        frac = rng.uniform(0.05, 0.95, 3)
        u = lo + frac * (hi - lo)
        x = tr.g_inverse(u)
        assert np.all(x >= domain.lower) and np.all(x <= domain.upper)
        assert np.allclose(tr.g(x), u, atol=1e-8)


@pytest.mark.parametrize("phi,dist,lip", _FAMILIES)
def test_projection_transform_commute(phi, dist, lip):
    # empirical g of the projected point equals the image-box projection
    # of empirical g, including points outside the box (the rational
    # families are only defined and monotone on x >= 0, so "outside"
    # stays nonnegative for them)
    rng = stream(22, "commute", phi.kind)
    domain = BoxDomain([0.1, 0.1], [1.5, 1.5])
    samples = np.column_stack([dist.sample(rng, 30) for _ in range(2)])
    tr = TransformEstimate(samples=samples, phi=phi, domain=domain)
    image = tr.image_box()
    x_lo = -2.0 if phi.kind in ("trunc_min", "product") else 0.0
    x = rng.uniform(x_lo, 4.0, size=(2000, 2))
    lhs = tr.g(project_box(domain, x))
    rhs = np.clip(tr.g(x), image.lower, image.upper)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_grad_of_g_matches_one_minus_cdf():
    # truncation family: the slope of g at x is P(xi > x) = 1 - H(x)
    prob = make_truncation_problem()
    rng = stream(23, "slope-check")
    n = 200_000
    xs = [0.1, 0.3, 0.5, 0.7, 0.85]
    samples = prob.sampler.draw(rng, n)
    for x in xs:
        grads = (np.full((n, 1), x) < samples).astype(float)[:, 0]
        se = grads.std(ddof=1) / np.sqrt(n)
        assert abs(grads.mean() - (1.0 - x)) <= 4 * se


# ---------------------------------------------------------------------------
# sampler reproducibility


def test_sampler_bit_exact_reproducibility():
    sampler = XiSampler(
        (Uniform(0, 1), TruncatedNormal(1.0, 0.5), Discrete((0.2, 0.8), (0.5, 0.5)))
    )
    a = sampler.draw(stream(99, "xi"), 500)
    b = sampler.draw(stream(99, "xi"), 500)
    c = sampler.draw(stream(100, "xi"), 500)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_truncated_normal_properties():
    dist = TruncatedNormal(1.0, 0.8)
    draws = dist.sample(stream(7, "tn"), 400_000)
    assert np.all(draws >= 0.0)
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - dist.mean()) <= 4 * se
    ts = np.linspace(-0.5, 4.0, 40)
    cdf = np.array([float(np.asarray(dist.cdf(t))) for t in ts])
    assert np.all(np.diff(cdf) >= -1e-12)
    # empirical CDF agreement at a few points
    for t in (0.5, 1.0, 2.0):
        emp = (draws <= t).mean()
        assert abs(emp - float(np.asarray(dist.cdf(t)))) < 4e-3


def test_binomial_count_totals():
    from hconvex.problem import BinomialCount

    dist = BinomialCount(240, 10.0 / 240.0)
    draws = dist.sample(stream(41, "bin"), 200_000)
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - 10.0) <= 4 * se
    assert np.all(draws >= 0) and np.all(draws <= 240)
    assert dist.mean() == pytest.approx(10.0)
    assert float(np.asarray(dist.cdf(240))) == pytest.approx(1.0)
    a = dist.sample(stream(42, "bin"), 50)
    b = dist.sample(stream(42, "bin"), 50)
    assert np.array_equal(a, b)


def test_verify_mu_g_flags_overclaimed_floor():
    from hconvex.problem import verify_mu_g

    honest = make_truncation_problem()  # declares 1 - 0.9 = 0.1
    est, ok = verify_mu_g(honest, 50_000, stream(43, "mu"))
    assert ok and est == pytest.approx(0.1, abs=0.01)
    from dataclasses import replace

    overclaimed = replace(honest, mu_g=0.5)
    est, ok = verify_mu_g(overclaimed, 50_000, stream(44, "mu"))
    assert not ok
    undeclared = replace(honest, mu_g=0.0)
    _, ok = verify_mu_g(undeclared, 10_000, stream(45, "mu"))
    assert ok
