# tests/test_kernel.py

import math
import os
import sys
from fractions import Fraction

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from src.exceptions import InvalidParameterError
from src.kernel import (
    binomial,
    c_lambda_table,
    d_lambda,
    gamma_of_r,
    log_binomial,
    log_c_lambda,
    log_d_table,
    log_sum_exp,
    m_of_r,
    r_scalars,
    rho,
    rho_inverse,
    sigma2_of_r,
)

R_GRID = [Fraction(1, 8), Fraction(1, 3), Fraction(1), Fraction(4)]


def exact_b(r: Fraction, x: int) -> Fraction:
    """Direct double sum sum_y binom(2y, y) binom(y, x - y) r^y."""
    return sum((math.comb(2 * y, y) * math.comb(y, x - y) * r ** y for y in range((x + 1) // 2, x + 1)), Fraction(0))


def exact_g(r: Fraction, x: int) -> Fraction:
    """Direct sum sum_y binom(y, x - y) 4^y r^y."""
    return sum((math.comb(y, x - y) * (4 * r) ** y for y in range((x + 1) // 2, x + 1)), Fraction(0))


def test_binomial_examples():
    assert binomial(4, 2) == 6
    assert binomial(6, 3) == 20
    assert binomial(17, 0) == 1
    assert binomial(3, 5) == 0
    assert binomial(3, -1) == 0


def test_binomial_is_exact_for_large_n():
    assert binomial(400, 200) == math.comb(400, 200)


def test_log_binomial_matches_exact_values():
    assert log_binomial(5, 2) == pytest.approx(math.log(10), rel=1e-14)
    assert log_binomial(3, 4) == -math.inf
    values = log_binomial(np.array([4, 4, 4]), np.array([0, 2, 5]))
    assert values[0] == pytest.approx(0.0, abs=1e-14)
    assert values[1] == pytest.approx(math.log(6), rel=1e-14)
    assert values[2] == -math.inf


def test_log_sum_exp_examples():
    assert log_sum_exp([math.log(1), math.log(3)]) == pytest.approx(math.log(4), rel=1e-15)
    assert log_sum_exp([-math.inf, -math.inf]) == -math.inf
    # total mass of the limit weights at x = 2, r = 1
    assert log_sum_exp([math.log(2), math.log(6)]) == pytest.approx(math.log(8), rel=1e-15)


def test_log_sum_exp_is_stable_and_at_least_the_max():
    values = [1000.0, 999.0, -math.inf]
    total = log_sum_exp(values)
    assert math.isfinite(total)
    assert total >= 1000.0
    assert log_sum_exp(list(reversed(values))) == total


def test_log_sum_exp_is_monotone_in_each_argument():
    rng = np.random.default_rng(11)
    values = list(rng.uniform(-5.0, 5.0, size=8))
    base = log_sum_exp(values)
    for index in range(len(values)):
        raised = list(values)
        raised[index] += 0.5
        assert log_sum_exp(raised) > base
        lowered = list(values)
        lowered[index] = -math.inf
        assert log_sum_exp(lowered) < base


def test_log_sum_exp_rejects_empty_input():
    with pytest.raises(InvalidParameterError):
        log_sum_exp([])


def test_d_lambda_half_is_central_binomial():
    assert d_lambda(0.5, 0) == 1.0
    for x in range(1, 21):
        expected = math.comb(2 * x, x) / 4 ** x
        assert d_lambda(0.5, x) == pytest.approx(expected, rel=1e-13)


def test_d_lambda_beyond_direct_products():
    for x in (65, 100, 200):
        expected = float(Fraction(math.comb(2 * x, x), 4 ** x))
        assert d_lambda(0.5, x) == pytest.approx(expected, rel=1e-12)


def test_d_lambda_one_is_geometric():
    for x in (0, 1, 10, 64, 65, 1000):
        assert d_lambda(1.0, x) == pytest.approx(1.0, rel=1e-12)


def test_d_lambda_rejects_nonpositive_lambda():
    with pytest.raises(InvalidParameterError):
        d_lambda(0.0, 3)
    with pytest.raises(InvalidParameterError):
        d_lambda(-0.5, 3)


def test_log_d_table_matches_d_lambda():
    table = log_d_table(1.5, 120)
    for x in (0, 1, 30, 64, 65, 120):
        assert math.exp(table[x]) == pytest.approx(d_lambda(1.5, x), rel=1e-12)


def test_d_half_superadditivity_small_grid():
    table = log_d_table(0.5, 120)
    for x in range(61):
        for y in range(61):
            assert table[x] + table[y] <= table[x + y] + 1e-12


def test_c_lambda_constant_term_is_one():
    for lambda_ in (0.5, 1.0, 1.5):
        table = c_lambda_table(lambda_, 0.3, 5)
        assert table.log_coeffs[0] == 0.0
        assert table.coefficient(0) == 1.0


def test_c_lambda_examples():
    assert c_lambda_table(0.5, 1.0, 4).coefficient(2) == pytest.approx(8.0, rel=1e-12)
    assert c_lambda_table(1.0, 0.125, 4).coefficient(2) == pytest.approx(0.75, rel=1e-12)


@pytest.mark.parametrize("r", R_GRID)
def test_c_half_equals_exact_double_sum(r):
    table = c_lambda_table(0.5, float(r), 30)
    for x in range(31):
        assert table.coefficient(x) == pytest.approx(float(exact_b(r, x)), rel=1e-9)


@pytest.mark.parametrize("r", R_GRID)
def test_c_one_equals_exact_generating_sum(r):
    table = c_lambda_table(1.0, float(r), 30)
    for x in range(31):
        assert table.coefficient(x) == pytest.approx(float(exact_g(r, x)), rel=1e-9)


def test_single_coefficient_matches_table():
    table = c_lambda_table(1.5, 0.7, 50)
    for x in (0, 1, 17, 50):
        assert log_c_lambda(1.5, 0.7, x) == pytest.approx(table.log_coeffs[x], abs=1e-12)
    assert log_c_lambda(1.5, 0.7, -1) == -math.inf


def test_c_lambda_table_rejects_bad_arguments():
    with pytest.raises(InvalidParameterError):
        c_lambda_table(0.5, 0.0, 3)
    with pytest.raises(InvalidParameterError):
        c_lambda_table(0.0, 1.0, 3)
    with pytest.raises(InvalidParameterError):
        c_lambda_table(0.5, 1.0, -1)


def test_rho_examples():
    assert rho(Fraction(1, 2)) == Fraction(1, 8)
    assert rho(1) == 0
    assert rho(Fraction(1, 3)) == Fraction(1, 3)
    assert rho(0) == math.inf
    assert rho(0.5) == pytest.approx(0.125)


def test_rho_rejects_out_of_range():
    with pytest.raises(InvalidParameterError):
        rho(1.5)
    with pytest.raises(InvalidParameterError):
        rho(-0.1)


def test_rho_inverse_round_trip():
    for u in (0.01, 0.3, 0.5, 0.9, 0.999):
        assert rho_inverse(rho(u)) == pytest.approx(u, rel=1e-12)
    assert rho_inverse(math.inf) == 0.0
    assert rho_inverse(0) == 1.0


def test_gamma_m_sigma_at_one_eighth():
    assert gamma_of_r(0.125) == pytest.approx(1.0, rel=1e-15)
    assert m_of_r(0.125) == pytest.approx(2 / 3, rel=1e-15)
    assert sigma2_of_r(0.125) == pytest.approx(2 / 27, rel=1e-14)


def test_r_scalars_half():
    bundle = r_scalars(0.5)
    assert bundle.r == pytest.approx(0.125)
    assert bundle.gamma == pytest.approx(1.0)
    assert bundle.gamma2 == pytest.approx(2.0)
    assert bundle.m == pytest.approx(2 / 3)
    assert bundle.sigma2 == pytest.approx(2 / 27)
    assert not bundle.degenerate


def test_r_scalars_endpoints_are_degenerate():
    low = r_scalars(0)
    assert low.degenerate and low.r == math.inf and low.m == 1.0
    high = r_scalars(1)
    assert high.degenerate and high.r == 0.0 and high.m == 0.5 and high.sigma2 == 0.0


def test_r_scalars_m_in_open_interval():
    for u in np.linspace(0.01, 0.99, 25):
        bundle = r_scalars(float(u))
        assert 0.5 < bundle.m < 1.0


@pytest.mark.parametrize("r", [0.1, 1.0, 10.0])
def test_sigma2_is_r_times_m_prime(r):
    h = 1e-6 * r
    derivative = (m_of_r(r + h) - m_of_r(r - h)) / (2 * h)
    assert sigma2_of_r(r) == pytest.approx(r * derivative, rel=1e-6)
