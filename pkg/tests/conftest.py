import numpy as np
import pytest

from hconvex.problem import (
    BoxDomain,
    PhiFamily,
    Problem,
    QuadraticOuter,
    Uniform,
    XiSampler,
)


def make_truncation_problem(target=0.3, upper=0.9, xi_hi=1.0, dim=1):
    """min E[||min(x, xi) - target||^2], xi ~ U[0, xi_hi] iid, X = [0, upper]^d.

    For U[0,1] the gradient is 2(1-x)(x-target) per coordinate, so the
    global optimum is x = target with value target^3 / 3 per coordinate.
    """
    target_vec = np.full(dim, target) if np.isscalar(target) else np.asarray(target)
    domain = BoxDomain(np.zeros(dim), np.full(dim, upper))
    phi = PhiFamily("trunc_min", lipschitz=1.0)
    sampler = XiSampler.iid(Uniform(0.0, xi_hi), dim)
    outer = QuadraticOuter(target_vec)
    # ||grad f|| = 2||y - target|| <= 2 * sqrt(d) on the reachable range
    lf = 2.0 * float(np.sqrt(dim)) * max(xi_hi, upper)
    return Problem(domain=domain, phi=phi, sampler=sampler, outer=outer,
                   outer_lipschitz=lf, mu_g=1.0 - upper / xi_hi if upper < xi_hi else 0.1)


@pytest.fixture
def problem_1d():
    return make_truncation_problem()
