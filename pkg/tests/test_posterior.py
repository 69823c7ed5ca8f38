# tests/test_posterior.py

import math
import os
import sys
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate
from scipy.special import betaln

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from src.branching import Path, path_stats, simulate_path
from src.exceptions import InadmissiblePathError, InvalidParameterError, PathTooShortError
from src.kernel import m_of_r, rho, sigma2_of_r
from src.posterior import (
    DiscreteDist,
    PriorSpec,
    jeffreys_pi_n,
    joint_posterior,
    limit_mass_exact,
    limit_mode,
    limit_moments,
    limit_posterior,
    marginal_x0_weight,
    naive_ratio,
    standardized_mgf,
    stochastic_leq,
    total_variation,
    upper_half,
)

R_GRID = [Fraction(1, 8), Fraction(1, 3), Fraction(1), Fraction(4)]


def normalized(weights):
    total = sum(weights)
    return tuple(Fraction(w) / total for w in weights)


@pytest.mark.parametrize("x, expected", [(1, 1), (2, 1), (3, 2), (4, 2), (5, 3), (100, 50), (101, 51)])
def test_upper_half(x, expected):
    assert upper_half(x) == expected


def test_upper_half_rejects_zero():
    with pytest.raises(InvalidParameterError):
        upper_half(0)


def test_limit_posterior_x2_r1():
    dist = limit_posterior(1, 2)
    assert dist.support == range(1, 3)
    assert dist.exact_probs() == (Fraction(1, 4), Fraction(3, 4))


@pytest.mark.parametrize("r", R_GRID)
def test_limit_posterior_small_x_displays(r):
    assert limit_posterior(r, 3).exact_probs() == normalized([3, 5 * r])
    assert limit_posterior(r, 4).exact_probs() == normalized([3, 30 * r, 35 * r ** 2])
    assert limit_posterior(r, 5).exact_probs() == normalized([15, 70 * r, 63 * r ** 2])


def test_limit_posterior_float_matches_exact():
    exact = limit_posterior(Fraction(1, 3), 25)
    approx = limit_posterior(1 / 3, 25)
    assert not approx.is_exact
    np.testing.assert_allclose(approx.probs, [float(p) for p in exact.exact_probs()], rtol=1e-12)


def test_limit_posterior_dirac_cases():
    at_inf = limit_posterior(math.inf, 7)
    assert at_inf.support == range(7, 8)
    at_zero = limit_posterior(0, 7)
    assert at_zero.support == range(4, 5)
    assert at_zero.prob(4) == 1.0


def test_limit_posterior_large_x_is_finite():
    dist = limit_posterior(0.125, 5000)
    assert dist.probs.sum() == pytest.approx(1.0, rel=1e-12)
    assert np.all(np.isfinite(dist.probs))


def test_limit_posterior_rejects_bad_arguments():
    with pytest.raises(InvalidParameterError):
        limit_posterior(-1, 3)
    with pytest.raises(InvalidParameterError):
        limit_posterior(1, 0)


def test_limit_moments_one_eighth_two():
    mean, variance = limit_moments(Fraction(1, 8), 2)
    assert mean == pytest.approx(14 / 11, rel=1e-12)
    assert variance == pytest.approx(24 / 121, rel=1e-10)


@pytest.mark.parametrize("r", R_GRID)
def test_mean_times_mass_identity(r):
    for x in range(2, 31):
        dist = limit_posterior(r, x)
        b = limit_mass_exact(r, x)
        a = sum(y * w for y, w in zip(dist.support, dist.exact_weights))
        assert sum(dist.exact_weights) == b
        assert float(a / b) == pytest.approx(limit_moments(r, x)[0], rel=1e-12)


def test_limit_mode_example():
    assert limit_mode(Fraction(1, 8), 4) == 3


@pytest.mark.parametrize("r", R_GRID)
def test_limit_mode_matches_argmax(r):
    for x in range(1, 31):
        weights = limit_posterior(r, x).exact_weights
        best = max(weights)
        expected = upper_half(x) + weights.index(best)
        assert limit_mode(r, x) == expected


def test_limit_mode_at_infinity():
    assert limit_mode(math.inf, 9) == 9


def test_limit_mean_scales_like_m():
    r = float(rho(0.5))
    mean, variance = limit_moments(r, 4096)
    assert mean / 4096 == pytest.approx(m_of_r(r), abs=1e-3)
    assert variance / 4096 == pytest.approx(sigma2_of_r(r), rel=0.05)


def test_total_variation():
    first = DiscreteDist.dirac(3)
    second = DiscreteDist.dirac(4)
    assert total_variation(first, second) == 1.0
    assert total_variation(first, first) == 0.0
    assert total_variation(limit_posterior(1, 2), DiscreteDist.dirac(2)) == pytest.approx(0.25)


def test_stochastic_leq_examples():
    assert stochastic_leq(DiscreteDist.dirac(2), DiscreteDist.dirac(3))
    assert not stochastic_leq(DiscreteDist.dirac(3), DiscreteDist.dirac(2))
    small = limit_posterior(Fraction(1, 8), 10)
    large = limit_posterior(Fraction(4), 10)
    assert stochastic_leq(small, large)
    assert not stochastic_leq(large, small)
    assert stochastic_leq(limit_posterior(0.125, 10), limit_posterior(4.0, 10))


def test_naive_ratio_examples():
    assert naive_ratio(Fraction(1, 3)) == 1
    assert naive_ratio(Fraction(1, 2)) == Fraction(21, 22)
    assert naive_ratio(0.5) == pytest.approx(21 / 22, rel=1e-12)


def test_naive_ratio_rejects_endpoints():
    with pytest.raises(InvalidParameterError):
        naive_ratio(0)
    with pytest.raises(InvalidParameterError):
        naive_ratio(1)


def test_standardized_mgf_at_zero():
    assert standardized_mgf(0.5, 100, 0.0) == 1.0


@pytest.mark.parametrize("t", [-1.0, 1.0])
def test_standardized_mgf_tends_to_gaussian(t):
    expected = math.exp(sigma2_of_r(0.125) * t * t / 2)
    assert standardized_mgf(0.5, 4096, t) == pytest.approx(expected, abs=0.02)


def test_standardized_mgf_rejects_wide_t():
    with pytest.raises(InvalidParameterError):
        standardized_mgf(0.5, 100, 4.0)


def test_jeffreys_pi_one():
    for u in (0.1, 0.5, 0.9):
        assert jeffreys_pi_n(1, u) == pytest.approx(1 / math.sqrt(u * (1 - u)), rel=1e-12)


def test_jeffreys_small_u_behaviour():
    for n in (1, 3, 10):
        u = 1e-9
        assert u * jeffreys_pi_n(n, u) ** 2 == pytest.approx(n, rel=1e-6)


def test_jeffreys_endpoints_are_infinite():
    assert jeffreys_pi_n(3, 0.0) == math.inf
    assert jeffreys_pi_n(3, 1.0) == math.inf


@pytest.mark.parametrize("n", [1, 2, 5, 20])
def test_jeffreys_is_integrable(n):
    total, _ = integrate.quad(
        lambda theta: jeffreys_pi_n(n, math.sin(theta) ** 2) * math.sin(2 * theta),
        1e-12, math.pi / 2 - 1e-12, limit=200,
    )
    assert math.isfinite(total) and total > 0
    if n == 1:
        assert total == pytest.approx(math.pi, rel=1e-6)


def test_prior_spec_matches_jeffreys():
    prior = PriorSpec(n=4)
    assert math.exp(prior.log_u_density(0.3)) == pytest.approx(jeffreys_pi_n(4, 0.3), rel=1e-12)


def test_marginal_x0_weight():
    for x in (1, 2, 10):
        assert marginal_x0_weight(x) == pytest.approx(math.comb(2 * x, x) / 4 ** x, rel=1e-13)


def test_joint_posterior_path_of_ones():
    posterior = joint_posterior(Path((1, 1, 1, 1), origin_included=True))
    assert posterior.x0_support == (1,)
    assert posterior.x0_weights[0] == pytest.approx(1.0)
    assert posterior.x0_dist().prob(1) == pytest.approx(1.0)
    assert 0 < posterior.u_marginal_mean < 0.5


def test_joint_posterior_errors():
    with pytest.raises(PathTooShortError):
        joint_posterior(Path((3,), origin_included=False))
    with pytest.raises(PathTooShortError):
        joint_posterior(Path((2, 3), origin_included=True))
    with pytest.raises(InadmissiblePathError):
        joint_posterior(Path((1, 3, 4), origin_included=False))


def _oracle(path_values):
    """x0 weights and conditional means by direct quadrature in u, with pi_2(u) = sqrt((2+u)/(u(1-u)))."""
    x1, xn, sn = path_values[0], path_values[-1], sum(path_values)
    prior = lambda u: math.sqrt((2 + u) / (u * (1 - u)))
    weights, means = {}, {}
    for x0 in range(upper_half(x1), x1 + 1):
        a, b = xn - x0, sn - 2 * xn + 2 * x0
        mass, _ = integrate.quad(lambda u: u ** a * (1 - u) ** b * prior(u), 0, 1, epsabs=0, epsrel=1e-12, limit=200)
        first, _ = integrate.quad(lambda u: u ** (a + 1) * (1 - u) ** b * prior(u), 0, 1, epsabs=0, epsrel=1e-12, limit=200)
        weights[x0] = marginal_x0_weight(x0) * math.comb(x0, x1 - x0) * mass
        means[x0] = first / mass
    total = sum(weights.values())
    return {x0: w / total for x0, w in weights.items()}, means


def test_joint_posterior_matches_quadrature_oracle():
    posterior = joint_posterior(Path((3, 5), origin_included=False))
    assert posterior.x0_support == (2, 3)
    expected_weights, expected_means = _oracle((3, 5))

    tv = 0.5 * sum(abs(float(p) - expected_weights[x0]) for x0, p in zip(posterior.x0_support, posterior.x0_weights))
    assert tv < 1e-6
    for x0 in posterior.x0_support:
        assert posterior.u_conditional_mean(x0) == pytest.approx(expected_means[x0], abs=1e-4)


def test_joint_posterior_conditionals_are_normalized():
    posterior = joint_posterior(Path((4, 6, 9, 14), origin_included=False))
    for row in posterior.u_conditional:
        assert float(np.sum(posterior.u_weights * row)) == pytest.approx(1.0, rel=1e-9)
    assert float(np.sum(posterior.u_weights * posterior.u_marginal_density())) == pytest.approx(1.0, rel=1e-9)


def test_joint_posterior_is_worker_invariant():
    path = Path((5, 7, 10, 16, 25), origin_included=True)
    single = joint_posterior(path, workers=1)
    several = joint_posterior(path, workers=3)
    np.testing.assert_array_equal(single.x0_weights, several.x0_weights)
    assert single.u_marginal_mean == several.u_marginal_mean


def test_joint_posterior_to_dict():
    payload = joint_posterior(Path((3, 5), origin_included=False)).to_dict()
    assert set(payload['x0_probs']) == {'2', '3'}
    assert len(payload['u_grid']) == len(payload['u_density'])


@pytest.mark.parametrize("u, n", [(0.5, 40), (0.7, 40), (0.9, 30)])
def test_joint_posterior_on_long_paths(u, n):
    simulated = simulate_path(5, u, n, seed=1)
    path = Path(simulated.values[1:], origin_included=False)
    stats = path_stats(path)
    posterior = joint_posterior(path)

    assert posterior.sn > 10 ** 7
    assert float(np.sum(posterior.x0_weights)) == pytest.approx(1.0, rel=1e-12)
    assert posterior.u_marginal_mean == pytest.approx(stats.b_hat, abs=1e-3)
    assert posterior.u_marginal_sd < 1e-2

    # at this size the U-integrals are Beta functions up to a factor shared by every x0
    x1, xn, sn = posterior.x1, posterior.xn, posterior.sn
    log_expected = np.array([
        math.log(marginal_x0_weight(x0)) + math.lgamma(x0 + 1) - math.lgamma(x1 - x0 + 1)
        - math.lgamma(2 * x0 - x1 + 1) + betaln(xn - x0 + 1, sn - 2 * xn + 2 * x0 + 1)
        for x0 in posterior.x0_support
    ])
    expected = np.exp(log_expected - log_expected.max())
    expected /= expected.sum()
    assert 0.5 * float(np.sum(np.abs(posterior.x0_weights - expected))) < 1e-3


@pytest.mark.parametrize("r", [float(r) for r in np.logspace(-3, 3, 13)])
def test_limit_posterior_support_and_normalization(r):
    for x in range(1, 201):
        dist = limit_posterior(r, x)
        assert (dist.lo, dist.hi) == (upper_half(x), x)
        assert np.all(dist.probs >= 0)
        assert float(np.sum(dist.probs)) == pytest.approx(1.0, rel=1e-12)
        assert np.all(np.isfinite(dist.log_weights))


def test_limit_posterior_tends_to_endpoint_diracs():
    x = 20
    near_zero = [total_variation(limit_posterior(rho(u), x), DiscreteDist.dirac(x)) for u in (1e-2, 1e-4, 1e-6)]
    near_one = [total_variation(limit_posterior(rho(1 - e), x), DiscreteDist.dirac(upper_half(x)))
                for e in (1e-2, 1e-4, 1e-6)]
    for distances in (near_zero, near_one):
        assert distances[0] >= distances[1] >= distances[2]
        assert distances[-1] < 1e-3
