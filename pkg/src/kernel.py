"""
Exact and log-space combinatorial primitives.

Houses exact binomial coefficients, a stable log-sum-exp, the coefficients
d_lambda(x) of (1 - z)^(-lambda) and the coefficient engine for

    C_lambda(r, z) = (1 - 4 r z (1 + z))^(-lambda) = sum_x c_lambda(r, x) z^x,

together with the scalars gamma(r), m(r) and sigma^2 attached to an
offspring parameter u through r = rho(u) = (1 - u)^2 / (4 u).

Weights are carried either as exact rationals (fractions.Fraction, used as
oracles for small populations) or as natural logarithms (LogReal, -inf for
a zero weight).
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, List, Sequence, Union

import numpy as np
from scipy.special import gammaln, logsumexp, poch

from .config_loader import config_loader
from .decorators import check_close
from .exceptions import InvalidParameterError, NumericalError

logger = logging.getLogger(__name__)

Real = Union[int, float, Fraction]
LogReal = float

DEFAULT_DIRECT_PRODUCT_LIMIT = 64
SCALAR_CHECK_REL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CoefTable:
    """Coefficients c_lambda(r, x) for x = 0..x_max, stored as logarithms."""
    lambda_: float
    r: float
    log_coeffs: np.ndarray

    @property
    def x_max(self) -> int:
        return len(self.log_coeffs) - 1

    @property
    def coeffs(self) -> np.ndarray:
        return np.exp(self.log_coeffs)

    def coefficient(self, x: int) -> float:
        return float(math.exp(self.log_coeffs[x]))


@dataclass(frozen=True)
class ScalarBundle:
    """Asymptotic scalars for one offspring parameter u."""
    u: float
    r: float
    gamma: float
    gamma2: float
    m: float
    sigma2: float
    degenerate: bool = False


def is_exact(value) -> bool:
    """True for values carried as exact rationals (int or Fraction, not bool)."""
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


def binomial(n: int, k: int) -> int:
    """
    Exact binomial coefficient C(n, k).

    Returns 0 when k < 0 or k > n.
    """
    if n < 0:
        raise InvalidParameterError(f"binomial needs n >= 0, got n={n}")
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


def log_binomial(n, k):
    """
    log C(n, k) through log-gamma, vectorized over numpy arrays.

    Entries with k < 0 or k > n map to -inf.
    """
    n_arr = np.asarray(n, dtype=float)
    k_arr = np.asarray(k, dtype=float)
    valid = (k_arr >= 0) & (k_arr <= n_arr)
    with np.errstate(invalid='ignore', divide='ignore'):
        safe_k = np.where(valid, k_arr, 0.0)
        safe_n = np.where(valid, n_arr, 0.0)
        values = gammaln(safe_n + 1.0) - gammaln(safe_k + 1.0) - gammaln(safe_n - safe_k + 1.0)
    result = np.where(valid, values, -np.inf)
    if result.ndim == 0:
        return float(result)
    return result


def log_sum_exp(values: Iterable[LogReal]) -> LogReal:
    """
    log(sum(exp(v))) computed without overflow.

    Returns exactly -inf when every input is -inf.

    Raises:
        InvalidParameterError: If the list is empty or contains NaN.
    """
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise InvalidParameterError("log_sum_exp needs at least one value")
    if np.any(np.isnan(arr)):
        raise InvalidParameterError("log_sum_exp received NaN")
    if np.all(np.isneginf(arr)):
        return -math.inf
    return float(logsumexp(arr))


def _direct_product_limit() -> int:
    return int(config_loader.get('kernel', 'direct_product_limit', DEFAULT_DIRECT_PRODUCT_LIMIT))


def _check_lambda(lambda_: float) -> float:
    lambda_ = float(lambda_)
    if not lambda_ > 0 or math.isinf(lambda_):
        raise InvalidParameterError(f"lambda must be a positive real, got {lambda_}")
    return lambda_


def d_lambda(lambda_: float, x: int) -> float:
    """
    Coefficient of z^x in (1 - z)^(-lambda): Gamma(x + lambda) / (Gamma(x + 1) Gamma(lambda)).

    Iterated products up to the direct-product limit, Pochhammer ratios beyond.
    """
    lambda_ = _check_lambda(lambda_)
    if x < 0:
        raise InvalidParameterError(f"d_lambda needs x >= 0, got {x}")

    if x <= _direct_product_limit():
        value = 1.0
        for k in range(1, x + 1):
            value *= (k - 1 + lambda_) / k
        return value

    # poch(x + 1, lambda - 1) = Gamma(x + lambda) / Gamma(x + 1)
    return float(poch(x + 1.0, lambda_ - 1.0) / math.gamma(lambda_))


@lru_cache(maxsize=64)
def _log_d_table(lambda_: float, x_max: int) -> np.ndarray:
    k = np.arange(x_max + 1, dtype=float)
    table = gammaln(k + lambda_) - gammaln(k + 1.0) - gammaln(lambda_)
    head = min(x_max, _direct_product_limit())
    j = np.arange(1, head + 1, dtype=float)
    table[:head + 1] = np.concatenate(([0.0], np.cumsum(np.log((j - 1.0 + lambda_) / j))))
    table.setflags(write=False)
    return table


def log_d_table(lambda_: float, x_max: int) -> np.ndarray:
    """log d_lambda(k) for k = 0..x_max (read-only array)."""
    return _log_d_table(_check_lambda(lambda_), int(x_max))


def rho(u: Real) -> Real:
    """
    Renormalized index rho(u) = (1 - u)^2 / (4 u).

    rho(0) = +inf and rho(1) = 0. Exact rationals in, exact rationals out.
    """
    if isinstance(u, bool) or not 0 <= u <= 1:
        raise InvalidParameterError(f"u must lie in [0, 1], got {u}")
    if u == 0:
        return math.inf
    if is_exact(u):
        u = Fraction(u)
        return (1 - u) ** 2 / (4 * u)
    u = float(u)
    return (1.0 - u) ** 2 / (4.0 * u)


def rho_inverse(r: Real) -> float:
    """Inverse of rho on [0, +inf]: u = (sqrt(1 + r) - sqrt(r))^2."""
    if isinstance(r, bool) or not r >= 0:
        raise InvalidParameterError(f"r must lie in [0, +inf], got {r}")
    r = float(r)
    if math.isinf(r):
        return 0.0
    if r == 0:
        return 1.0
    return 1.0 / (math.sqrt(1.0 + r) + math.sqrt(r)) ** 2


def _check_r(r: Real) -> float:
    if isinstance(r, bool) or not r > 0 or math.isinf(float(r)):
        raise InvalidParameterError(f"r must be a positive real, got {r}")
    return float(r)


def gamma_of_r(r: Real) -> float:
    """gamma(r) = (sqrt((1 + r) / r) - 1) / 2, written without cancellation for large r."""
    r = _check_r(r)
    return 1.0 / (2.0 * r * (math.sqrt(1.0 + 1.0 / r) + 1.0))


def m_of_r(r: Real) -> float:
    """m(r) = (1 + sqrt(r / (1 + r))) / 2."""
    r = _check_r(r)
    return 0.5 * (1.0 + math.sqrt(r / (1.0 + r)))


def sigma2_of_r(r: Real) -> float:
    """sigma^2(r) = sqrt(r / (1 + r)^3) / 4 = r m'(r)."""
    r = _check_r(r)
    return 0.25 * math.sqrt(r / (1.0 + r)) / (1.0 + r)


def r_scalars(u: Real) -> ScalarBundle:
    """
    Scalars (r, gamma, gamma + 1, m, sigma^2) for the offspring parameter u.

    Inside (0, 1) the r-formulas and the u-identities are both evaluated and
    cross-asserted. The endpoints give a degenerate bundle (Dirac limits).
    """
    if isinstance(u, bool) or not 0 <= u <= 1:
        raise InvalidParameterError(f"u must lie in [0, 1], got {u}")
    u = float(u)

    if u == 0.0:
        logger.debug("r_scalars: u=0 gives the degenerate bundle r=+inf")
        return ScalarBundle(u=0.0, r=math.inf, gamma=0.0, gamma2=1.0, m=1.0, sigma2=0.0, degenerate=True)
    if u == 1.0:
        logger.debug("r_scalars: u=1 gives the degenerate bundle r=0")
        return ScalarBundle(u=1.0, r=0.0, gamma=math.inf, gamma2=math.inf, m=0.5, sigma2=0.0, degenerate=True)

    r = float(rho(u))
    gamma = gamma_of_r(r)
    m = 1.0 / (1.0 + u)
    sigma2 = u * (1.0 - u) / (1.0 + u) ** 3

    check_close("gamma(rho(u)) vs u/(1-u)", gamma, u / (1.0 - u), rel_tol=SCALAR_CHECK_REL_TOL)
    check_close("m(rho(u)) vs 1/(1+u)", m_of_r(r), m, rel_tol=SCALAR_CHECK_REL_TOL)
    check_close("sigma2(rho(u)) vs u(1-u)/(1+u)^3", sigma2_of_r(r), sigma2, rel_tol=SCALAR_CHECK_REL_TOL)

    return ScalarBundle(u=u, r=r, gamma=gamma, gamma2=gamma + 1.0, m=m, sigma2=sigma2)


def _log_c_from(log_d: np.ndarray, log_gamma: float, log_ratio: float, x: int) -> LogReal:
    """
    log c_lambda(r, x) from the Cauchy product of the two one-pole expansions:

        c(x) = d(x) gamma^-x  sum_y (-gamma/(gamma+1))^y d(y) d(x-y) / d(x).

    The alternating inner sum is accumulated in ordinary space after factoring
    out its largest term.
    """
    y = np.arange(x + 1)
    log_mag = log_d[x - y] + log_d[y] - log_d[x] + y * log_ratio
    signs = np.where(y % 2 == 0, 1.0, -1.0)
    shift = float(np.max(log_mag))
    inner = float(np.sum(signs * np.exp(log_mag - shift)))
    if not inner > 0:
        raise NumericalError(f"Alternating coefficient sum lost positivity at x={x} (inner={inner})")
    return float(log_d[x]) - x * log_gamma + shift + math.log(inner)


def log_c_lambda_many(lambda_: float, r: Real, xs: Sequence[int]) -> List[LogReal]:
    """log c_lambda(r, x) for several x; negative x give -inf (zero coefficient)."""
    lambda_ = _check_lambda(lambda_)
    gamma = gamma_of_r(r)
    log_gamma = math.log(gamma)
    log_ratio = log_gamma - math.log1p(gamma)
    x_top = max([int(x) for x in xs] + [0])
    log_d = log_d_table(lambda_, x_top)
    return [(-math.inf if x < 0 else _log_c_from(log_d, log_gamma, log_ratio, int(x))) for x in xs]


def log_c_lambda(lambda_: float, r: Real, x: int) -> LogReal:
    """log c_lambda(r, x) in O(x) operations."""
    return log_c_lambda_many(lambda_, r, [x])[0]


def c_lambda_table(lambda_: float, r: Real, x_max: int) -> CoefTable:
    """
    Table of c_lambda(r, x) for x = 0..x_max, in log-space.

    Raises:
        InvalidParameterError: If lambda <= 0, r <= 0 or x_max < 0.
    """
    lambda_ = _check_lambda(lambda_)
    r_value = _check_r(r)
    if x_max < 0:
        raise InvalidParameterError(f"x_max must be nonnegative, got {x_max}")

    gamma = gamma_of_r(r_value)
    log_gamma = math.log(gamma)
    log_ratio = log_gamma - math.log1p(gamma)
    log_d = log_d_table(lambda_, x_max)
    log_coeffs = np.array([_log_c_from(log_d, log_gamma, log_ratio, x) for x in range(x_max + 1)])
    return CoefTable(lambda_=lambda_, r=r_value, log_coeffs=log_coeffs)
