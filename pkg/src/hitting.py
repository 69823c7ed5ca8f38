"""
Hitting-time estimation of the initial population.

sigma_y is the number of offspring of y individuals, eta_x the number of
parents whose offspring sum hits x exactly (conditioned on the hit H_x) and
zeta_x the first y with sigma_y >= x.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Tuple, Union

import numpy as np

from .config_loader import config_loader
from .decorators import with_error_handling
from .exceptions import ConsistencyCheckError, InvalidParameterError, NumericalError
from .kernel import Real, binomial, gamma_of_r, is_exact, log_binomial, m_of_r, rho
from .posterior import DiscreteDist, _check_population, _exact_limit, _log_of, upper_half

logger = logging.getLogger(__name__)

DEFAULT_DIRECT_LIMIT = 200
DEFAULT_CHECK_TOL = 1e-12
MEAN_CHECK_TOL = 1e-10
BOUND_SLACK = 1e-12


def _direct_limit() -> int:
    return int(config_loader.get('hitting', 'direct_limit', DEFAULT_DIRECT_LIMIT))


def _check_tol() -> float:
    return float(config_loader.get('hitting', 'check_tol', DEFAULT_CHECK_TOL))


def _check_u(u) -> float:
    if isinstance(u, bool) or not 0 < u < 1:
        raise InvalidParameterError(f"u must lie in (0, 1), got {u}")
    return float(u)


def _signed_power(u: float, k: int) -> float:
    """(-u)^k with the sign tracked separately from the magnitude."""
    magnitude = u ** k
    return -magnitude if k % 2 else magnitude


@dataclass(frozen=True, eq=False)
class HittingDist:
    """Law of eta_x together with P(H_x)."""
    x: int
    u: float
    dist: DiscreteDist
    hitting_prob: float

    @property
    def lo(self) -> int:
        return self.dist.lo

    @property
    def hi(self) -> int:
        return self.dist.hi

    @property
    def support(self) -> range:
        return self.dist.support

    @property
    def probs(self) -> np.ndarray:
        return self.dist.probs

    def mean(self) -> float:
        return self.dist.mean()

    def to_dict(self) -> Dict[str, Any]:
        payload = self.dist.to_dict()
        payload['hitting_prob'] = self.hitting_prob
        return payload


def log_sigma_pmf(y, x: int, u: float):
    """log P(sigma_y = x), vectorized over y >= 0; -inf outside y <= x <= 2y."""
    u = _check_u(u)
    y_arr = np.asarray(y, dtype=float)
    births = x - y_arr
    survivors = 2.0 * y_arr - x
    valid = (births >= 0) & (survivors >= 0)
    with np.errstate(invalid='ignore'):
        values = (np.asarray(log_binomial(y_arr, births), dtype=float)
                  + np.where(valid, births, 0.0) * math.log(u)
                  + np.where(valid, survivors, 0.0) * math.log1p(-u))
    result = np.where(valid, values, -np.inf)
    if result.ndim == 0:
        return float(result)
    return result


def sigma_pmf(y: int, x: int, u: float) -> float:
    """
    P(sigma_y = x) = binom(y, x - y) u^(x - y) (1 - u)^(2y - x) for y <= x <= 2y, else 0.

    y = 0 is accepted (sigma_0 = 0).
    """
    u = _check_u(u)
    if y < 0:
        raise InvalidParameterError(f"sigma_pmf needs y >= 0, got {y}")
    if not y <= x <= 2 * y:
        return 0.0
    if x <= _direct_limit():
        return float(binomial(y, x - y)) * u ** (x - y) * (1.0 - u) ** (2 * y - x)
    return math.exp(log_sigma_pmf(y, x, u))


def hitting_prob(x: int, u: float) -> float:
    """P(H_x) = (1 - (-u)^(x+1)) / (1 + u)."""
    x = _check_population(x)
    u = _check_u(u)
    return (1.0 - _signed_power(u, x + 1)) / (1.0 + u)


@with_error_handling
def eta_limit_dist(r: Real, x: int) -> DiscreteDist:
    """
    mu_eta(r, x), the normalization of sum_y binom(y, x - y) 4^y r^y delta_y.

    r = +inf gives the Dirac mass at x and r = 0 the Dirac mass at h(x).
    """
    x = _check_population(x)
    if isinstance(r, bool) or not r >= 0:
        raise InvalidParameterError(f"r must lie in [0, +inf], got {r}")
    lo = upper_half(x)
    if r == math.inf:
        logger.warning(f"eta_limit_dist: r=+inf maps to the Dirac mass at x={x}")
        return DiscreteDist.dirac(x)
    if r == 0:
        logger.warning(f"eta_limit_dist: r=0 maps to the Dirac mass at h(x)={lo}")
        return DiscreteDist.dirac(lo)

    if is_exact(r) and x <= _exact_limit():
        r = Fraction(r)
        weights = [binomial(y, x - y) * (4 * r) ** y for y in range(lo, x + 1)]
        return DiscreteDist.from_log_weights(lo, [_log_of(w) for w in weights], weights)

    y = np.arange(lo, x + 1, dtype=float)
    log_weights = log_binomial(y, x - y) + y * math.log(4.0 * float(r))
    return DiscreteDist.from_log_weights(lo, log_weights)


@with_error_handling
def eta_dist(x: int, u: float) -> HittingDist:
    """
    Law of eta_x: P(eta_x = y) = P(sigma_y = x) / P(H_x) on y = h(x)..x.

    Up to hitting.direct_limit the direct ratio and the normalized
    mu_eta(rho(u), x) are both cross-checked against the log-space weights.

    Raises:
        ConsistencyCheckError: If the routes differ by more than hitting.check_tol.
    """
    x = _check_population(x)
    u_value = _check_u(u)
    lo = upper_half(x)
    ys = np.arange(lo, x + 1)
    dist = DiscreteDist.from_log_weights(lo, log_sigma_pmf(ys, x, u_value))
    p_hit = hitting_prob(x, u_value)

    if x <= _direct_limit():
        tol = _check_tol()
        direct = np.array([sigma_pmf(int(y), x, u_value) for y in ys]) / p_hit
        tilted = eta_limit_dist(rho(u), x)
        direct_gap = float(np.max(np.abs(direct - dist.probs)))
        tilted_gap = float(np.max(np.abs(tilted.probs - dist.probs)))
        if direct_gap > tol or tilted_gap > tol:
            raise ConsistencyCheckError(
                f"eta_dist(x={x}, u={u}): direct gap {direct_gap:.3g}, tilted gap {tilted_gap:.3g} exceed {tol}"
            )

    return HittingDist(x=x, u=u_value, dist=dist, hitting_prob=p_hit)


def zeta_pmf(x: int, y: int, u: float) -> float:
    """P(zeta_x = y) = P(sigma_(y-1) = x - 1) + u P(sigma_(y-1) = x - 2)."""
    x = _check_population(x)
    y = _check_population(y, "y")
    u = _check_u(u)
    return sigma_pmf(y - 1, x - 1, u) + u * sigma_pmf(y - 1, x - 2, u)


def zeta_dist(x: int, u: float) -> DiscreteDist:
    """Law of zeta_x on h(x)..x in log-space."""
    x = _check_population(x)
    u = _check_u(u)
    lo = upper_half(x)
    parents = np.arange(lo, x + 1) - 1
    log_weights = np.logaddexp(log_sigma_pmf(parents, x - 1, u),
                               math.log(u) + log_sigma_pmf(parents, x - 2, u))
    return DiscreteDist.from_log_weights(lo, log_weights)


def eta_alternating_identity_check(x: int, u: float) -> float:
    """
    Maximum deviation between P(eta_x = y) and
    (1 + u) / (1 - (-u)^(x+1)) sum_{z=0}^{x-1} (-u)^z P(zeta_(x+1-z) = y + 1).
    """
    x = _check_population(x)
    u_value = _check_u(u)
    law = eta_dist(x, u_value)
    scale = (1.0 + u_value) / (1.0 - _signed_power(u_value, x + 1))

    deviation = 0.0
    for y in law.support:
        alternating = sum(_signed_power(u_value, z) * zeta_pmf(x + 1 - z, y + 1, u_value) for z in range(x))
        deviation = max(deviation, abs(law.dist.prob(y) - scale * alternating))
    return deviation


def eta_mean_exact(x: int, u: float) -> float:
    """
    E(eta_x) = (x + 1)/(1 + u) (1 + (-u)^(x+2)) / (1 - (-u)^(x+1)) - (1 + u^2)/(1 + u)^2.

    Cross-asserted against the direct expectation up to hitting.direct_limit.
    """
    x = _check_population(x)
    u = _check_u(u)
    closed = ((x + 1) / (1.0 + u) * (1.0 + _signed_power(u, x + 2)) / (1.0 - _signed_power(u, x + 1))
              - (1.0 + u * u) / (1.0 + u) ** 2)
    if x <= _direct_limit():
        direct = eta_dist(x, u).mean()
        if abs(direct - closed) > MEAN_CHECK_TOL * max(1.0, x):
            raise ConsistencyCheckError(f"E(eta_{x}) at u={u}: closed {closed!r} vs direct {direct!r}")
    return closed


def eta_mean_bounds(x: int, u: float) -> Tuple[float, float, bool]:
    """
    General bounds x/(1+u) - 2u^2/(1+u)^2 <= E(eta_x) <= x/(1+u) + 2u/(1+u)^2 and
    the parity check: E(eta_x) >= x/(1+u) for odd x,
    E(eta_x) <= x/(1+u) + u(1-u)/(1+u) for even x.
    """
    x = _check_population(x)
    u = _check_u(u)
    centre = x / (1.0 + u)
    lower = centre - 2.0 * u * u / (1.0 + u) ** 2
    upper = centre + 2.0 * u / (1.0 + u) ** 2

    mean = eta_mean_exact(x, u)
    if x % 2:
        parity_ok = mean >= centre - BOUND_SLACK
    else:
        parity_ok = mean <= centre + u * (1.0 - u) / (1.0 + u) + BOUND_SLACK
    return lower, upper, parity_ok


def g_closed_form(r: Real, x: int) -> float:
    """
    g_x(r) = gamma gamma2 / (gamma + gamma2) (gamma^-(x+1) - (-gamma2)^-(x+1)), gamma2 = gamma + 1.

    Equal to the coefficient c_1(r, x).
    """
    if isinstance(x, bool) or int(x) != x or x < 0:
        raise InvalidParameterError(f"x must be a nonnegative integer, got {x}")
    gamma = gamma_of_r(r)
    x = int(x)
    ratio = gamma / (1.0 + gamma)
    prefactor = gamma * (1.0 + gamma) / (1.0 + 2.0 * gamma)
    log_value = (math.log(prefactor) - (x + 1) * math.log(gamma)
                 + math.log1p(-_signed_power(ratio, x + 1)))
    if log_value > 709.0:
        raise NumericalError(f"g_x(r) overflows for r={r}, x={x}")
    return math.exp(log_value)


def g_direct(r: Real, x: int) -> Union[Fraction, float]:
    """Direct sum g_x(r) = sum_y binom(y, x - y) 4^y r^y; exact for rational r."""
    if isinstance(x, bool) or int(x) != x or x < 0:
        raise InvalidParameterError(f"x must be a nonnegative integer, got {x}")
    x = int(x)
    if x == 0:
        return Fraction(1) if is_exact(r) else 1.0
    lo = upper_half(x)
    if is_exact(r):
        r = Fraction(r)
        return sum((binomial(y, x - y) * (4 * r) ** y for y in range(lo, x + 1)), Fraction(0))
    r = float(r)
    return float(sum(binomial(y, x - y) * (4.0 * r) ** y for y in range(lo, x + 1)))


def eta_mean_generating(r: Real, x: int) -> float:
    """
    E(eta_x) = r g_x'(r) / g_x(r), differentiated through the closed form of g_x.

    With rho = gamma/(gamma+1) and q = (-rho)^(x+1),
    d log g / d log gamma = 1 + rho - 2 gamma/(1 + 2 gamma) - (x + 1) - (x + 1) q / ((1 + gamma)(1 - q)),
    and d log gamma / d log r = -m(r).
    """
    x = _check_population(x)
    gamma = gamma_of_r(r)
    ratio = gamma / (1.0 + gamma)
    q = _signed_power(ratio, x + 1)
    slope = (1.0 + ratio - 2.0 * gamma / (1.0 + 2.0 * gamma) - (x + 1)
             - (x + 1) * q / ((1.0 + gamma) * (1.0 - q)))
    return -m_of_r(r) * slope
