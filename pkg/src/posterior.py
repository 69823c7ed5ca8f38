"""
Posterior distributions of the initial population and offspring parameter.

Covers the Jeffreys priors, the finite-n joint posterior of (X0, U) given
the observations x_1..x_n, the limit posterior mu(r, x), its moments, mode
and moment generating function, stochastic ordering of discrete laws and
the comparison with the naive estimator x / (1 + u).
"""

import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .branching import Path, validate_admissible
from .config_loader import config_loader
from .decorators import check_close, with_error_handling
from .exceptions import (
    InadmissiblePathError,
    InvalidParameterError,
    NumericalError,
    PathTooShortError,
)
from .kernel import (
    Real,
    binomial,
    d_lambda,
    is_exact,
    log_binomial,
    log_c_lambda,
    log_c_lambda_many,
    log_d_table,
    log_sum_exp,
    m_of_r,
    rho,
)
from .quadrature import PeakIntegral, integrate_peaked
from .workers import ordered_map

logger = logging.getLogger(__name__)

DEFAULT_EXACT_LIMIT = 30
DEFAULT_IDENTITY_REL_TOL = 1e-9
DEFAULT_COARSE_GRID_NODES = 401
DEFAULT_DENSE_GRID_NODES = 801
DEFAULT_PEAK_WIDTHS = 12
ORDER_TOL = 1e-12
MGF_T_RANGE = 3.0
LOG_2 = math.log(2.0)
HALF_PI = math.pi / 2.0
FLOAT_EPS = float(np.finfo(float).eps)
# rounding noise of the peak-relative integrand, in ulps per unit of sqrt(a + b)
ROUNDING_ULPS = 64.0


def _exact_limit() -> int:
    return int(config_loader.get('kernel', 'exact_limit', DEFAULT_EXACT_LIMIT))


def _identity_rel_tol() -> float:
    return float(config_loader.get('kernel', 'identity_rel_tol', DEFAULT_IDENTITY_REL_TOL))


def _check_population(x: int, name: str = "x") -> int:
    if isinstance(x, bool) or int(x) != x or x < 1:
        raise InvalidParameterError(f"{name} must be a positive integer, got {x}")
    return int(x)


def _log_of(value: Union[int, Fraction]) -> float:
    """Natural log of a positive exact rational, safe for huge numerators."""
    value = Fraction(value)
    return math.log(value.numerator) - math.log(value.denominator)


@dataclass(frozen=True, eq=False)
class DiscreteDist:
    """
    Finite distribution on the integer range [lo, hi].

    log_weights are unnormalized natural logs; probs are normalized. In exact
    mode exact_weights carries the same weights as Fractions.
    """
    lo: int
    log_weights: np.ndarray
    probs: np.ndarray
    exact_weights: Optional[Tuple[Fraction, ...]] = None

    @classmethod
    def from_log_weights(cls, lo: int, log_weights, exact_weights: Optional[Sequence[Fraction]] = None) -> 'DiscreteDist':
        log_weights = np.asarray(log_weights, dtype=float)
        if exact_weights is not None:
            exact_weights = tuple(Fraction(w) for w in exact_weights)
            total = sum(exact_weights)
            probs = np.array([float(w / total) for w in exact_weights])
        else:
            log_total = log_sum_exp(log_weights)
            if not math.isfinite(log_total):
                raise NumericalError(f"Distribution weights have no finite total (log total={log_total})")
            probs = np.exp(log_weights - log_total)
        probs = probs / probs.sum()
        return cls(lo=int(lo), log_weights=log_weights, probs=probs, exact_weights=exact_weights)

    @classmethod
    def dirac(cls, point: int) -> 'DiscreteDist':
        return cls(lo=int(point), log_weights=np.zeros(1), probs=np.ones(1), exact_weights=(Fraction(1),))

    @property
    def hi(self) -> int:
        return self.lo + len(self.probs) - 1

    @property
    def support(self) -> range:
        return range(self.lo, self.hi + 1)

    @property
    def is_exact(self) -> bool:
        return self.exact_weights is not None

    def prob(self, y: int) -> float:
        if y < self.lo or y > self.hi:
            return 0.0
        return float(self.probs[y - self.lo])

    def exact_probs(self) -> Optional[Tuple[Fraction, ...]]:
        if self.exact_weights is None:
            return None
        total = sum(self.exact_weights)
        return tuple(w / total for w in self.exact_weights)

    def mean(self) -> float:
        return float(np.dot(np.arange(self.lo, self.hi + 1, dtype=float), self.probs))

    def variance(self) -> float:
        # centered at lo to keep the subtraction well conditioned
        offsets = np.arange(len(self.probs), dtype=float)
        first = float(np.dot(offsets, self.probs))
        second = float(np.dot(offsets * offsets, self.probs))
        return max(second - first * first, 0.0)

    def survival(self, z: int) -> float:
        """P(Y >= z)."""
        if z <= self.lo:
            return 1.0
        if z > self.hi:
            return 0.0
        return float(np.sum(self.probs[z - self.lo:]))

    def exact_survival(self, z: int) -> Fraction:
        probs = self.exact_probs()
        if probs is None:
            raise InvalidParameterError("exact_survival needs exact weights")
        if z <= self.lo:
            return Fraction(1)
        if z > self.hi:
            return Fraction(0)
        return sum(probs[z - self.lo:], Fraction(0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'support': [self.lo, self.hi],
            'probs': [float(p) for p in self.probs],
            'log_weights': [float(w) for w in self.log_weights],
        }


@dataclass(frozen=True)
class PriorSpec:
    """Jeffreys priors: d(lambda)/sqrt(lambda) for the mean initial population and pi_n for U."""
    n: int
    lambda_prior: str = "improper d(lambda)/sqrt(lambda)"

    def log_u_density(self, u) -> Union[float, np.ndarray]:
        return log_jeffreys_pi_n(self.n, u)


@dataclass(frozen=True, eq=False)
class JointPosterior:
    """Finite-n posterior of (X0, U) given x_1..x_n."""
    x1: int
    xn: int
    sn: int
    n: int
    x0_support: Tuple[int, ...]
    x0_weights: np.ndarray
    log_x0_weights: np.ndarray
    u_grid: np.ndarray
    u_weights: np.ndarray
    u_conditional: np.ndarray
    u_marginal_mean: float
    u_marginal_sd: float
    integrals: Tuple[PeakIntegral, ...] = field(default=(), repr=False)

    def x0_dist(self) -> DiscreteDist:
        return DiscreteDist.from_log_weights(self.x0_support[0], self.log_x0_weights)

    def u_marginal_density(self) -> np.ndarray:
        return self.x0_weights @ self.u_conditional

    def u_conditional_mean(self, x0: int) -> float:
        row = self.u_conditional[x0 - self.x0_support[0]]
        return float(np.sum(self.u_weights * row * self.u_grid))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'x1': self.x1,
            'xn': self.xn,
            'sn': self.sn,
            'n': self.n,
            'x0_probs': {str(x0): float(p) for x0, p in zip(self.x0_support, self.x0_weights)},
            'u_mean': self.u_marginal_mean,
            'u_sd': self.u_marginal_sd,
            'u_grid': [float(u) for u in self.u_grid],
            'u_density': [float(p) for p in self.u_marginal_density()],
        }


def upper_half(x: int) -> int:
    """Smallest integer h with 2h >= x."""
    x = _check_population(x)
    return (x + 1) // 2


@with_error_handling
def limit_posterior(r: Real, x: int) -> DiscreteDist:
    """
    Limit posterior mu(r, x) of the initial population.

    Weights binom(2y, y) binom(y, x - y) r^y on y = h(x)..x. r = +inf gives
    the Dirac mass at x and r = 0 the Dirac mass at h(x). Exact rational
    weights are kept when r is an int or Fraction and x <= kernel.exact_limit.
    """
    x = _check_population(x)
    if isinstance(r, bool) or not r >= 0:
        raise InvalidParameterError(f"r must lie in [0, +inf], got {r}")
    lo = upper_half(x)
    if r == math.inf:
        logger.warning(f"limit_posterior: r=+inf maps to the Dirac mass at x={x}")
        return DiscreteDist.dirac(x)
    if r == 0:
        logger.warning(f"limit_posterior: r=0 maps to the Dirac mass at h(x)={lo}")
        return DiscreteDist.dirac(lo)

    if is_exact(r) and x <= _exact_limit():
        r = Fraction(r)
        weights = [binomial(2 * y, y) * binomial(y, x - y) * r ** y for y in range(lo, x + 1)]
        return DiscreteDist.from_log_weights(lo, [_log_of(w) for w in weights], weights)

    y = np.arange(lo, x + 1, dtype=float)
    log_weights = log_binomial(2 * y, y) + log_binomial(y, x - y) + y * math.log(float(r))
    return DiscreteDist.from_log_weights(lo, log_weights)


def limit_mass_exact(r: Real, x: int) -> Union[Fraction, float]:
    """Total mass B(r, x) = sum_y binom(2y, y) binom(y, x - y) r^y as a direct double sum."""
    x = _check_population(x)
    lo = upper_half(x)
    if is_exact(r):
        r = Fraction(r)
        return sum((binomial(2 * y, y) * binomial(y, x - y) * r ** y for y in range(lo, x + 1)), Fraction(0))
    return float(sum(binomial(2 * y, y) * binomial(y, x - y) * float(r) ** y for y in range(lo, x + 1)))


@with_error_handling
def limit_moments(r: Real, x: int) -> Tuple[float, float]:
    """
    Mean and variance of mu(r, x).

    The mean is computed from the normalized weights and again as
    A(r, x) / B(r, x) with A = 2r (c_{3/2}(r, x-1) + c_{3/2}(r, x-2)) and
    B = c_{1/2}(r, x); the two are cross-asserted.

    Raises:
        ConsistencyCheckError: If the two routes to the mean disagree.
    """
    x = _check_population(x)
    if isinstance(r, bool) or not r > 0 or r == math.inf:
        raise InvalidParameterError(f"limit_moments needs a positive finite r, got {r}")

    dist = limit_posterior(r, x)
    mean = dist.mean()
    variance = dist.variance()

    r_float = float(r)
    log_c32 = log_c_lambda_many(1.5, r_float, [x - 1, x - 2])
    log_a = math.log(2.0 * r_float) + float(np.logaddexp(log_c32[0], log_c32[1]))
    log_b = log_c_lambda(0.5, r_float, x)
    check_close("limit mean: direct vs A/B", mean, math.exp(log_a - log_b), rel_tol=_identity_rel_tol())
    return mean, variance


def limit_mode(r: Real, x: int) -> int:
    """
    Smallest maximizer of the weights of mu(r, x).

    Walks up from h(x) while the weight ratio
    (y + 1/2)(x - y) r / ((y + 1 - x/2)(y + 1/2 - x/2)) exceeds 1.
    """
    x = _check_population(x)
    if isinstance(r, bool) or not r > 0:
        raise InvalidParameterError(f"limit_mode needs r > 0, got {r}")
    if r == math.inf:
        return x

    if is_exact(r):
        r, half, one = Fraction(r), Fraction(1, 2), Fraction(1)
    else:
        r, half, one = float(r), 0.5, 1.0
    mid = x * half

    y = upper_half(x)
    while y < x:
        ratio = (y + half) * (x - y) * r / ((y + one - mid) * (y + half - mid))
        if ratio <= 1:
            break
        y += 1
    return y


def total_variation(d1: DiscreteDist, d2: DiscreteDist) -> float:
    """Half the sum of absolute probability differences over the union support."""
    lo = min(d1.lo, d2.lo)
    hi = max(d1.hi, d2.hi)
    return 0.5 * sum(abs(d1.prob(y) - d2.prob(y)) for y in range(lo, hi + 1))


def stochastic_leq(d1: DiscreteDist, d2: DiscreteDist) -> bool:
    """
    True iff P_d1(Y >= z) <= P_d2(Y >= z) at every integer z.

    Exact comparison when both laws carry exact weights, otherwise within 1e-12.
    """
    lo = min(d1.lo, d2.lo)
    hi = max(d1.hi, d2.hi)
    if d1.is_exact and d2.is_exact:
        return all(d1.exact_survival(z) <= d2.exact_survival(z) for z in range(lo, hi + 1))
    return all(d1.survival(z) <= d2.survival(z) + ORDER_TOL for z in range(lo, hi + 1))


def _check_open_u(u) -> None:
    if isinstance(u, bool) or not 0 < u < 1:
        raise InvalidParameterError(f"u must lie in (0, 1), got {u}")


@with_error_handling
def naive_ratio(u: Real) -> Union[Fraction, float]:
    """
    E_u(xi_2) / N_u(2), the Bayesian mean at x = 2 over the naive estimate 2 / (1 + u).

    Closed form (4u + 6(1-u)^2)(1+u) / (2 (4u + 3(1-u)^2)); exact for rational u.
    Cross-asserted against limit_moments(rho(u), 2).
    """
    _check_open_u(u)
    if is_exact(u):
        u = Fraction(u)
    closed = (4 * u + 6 * (1 - u) ** 2) * (1 + u) / (2 * (4 * u + 3 * (1 - u) ** 2))

    mean, _ = limit_moments(rho(u), 2)
    check_close("naive ratio: closed form vs limit mean", float(closed),
                mean / (2.0 / (1.0 + float(u))), rel_tol=1e-12)
    return closed


@with_error_handling
def standardized_mgf(u: float, x: int, t: float) -> float:
    """
    F_x(t) = exp(-t sqrt(x) m) B(r exp(t / sqrt(x)), x) / B(r, x), r = rho(u).

    Tends to exp(sigma^2 t^2 / 2) as x grows.
    """
    _check_open_u(u)
    x = _check_population(x)
    if abs(t) > MGF_T_RANGE:
        raise InvalidParameterError(f"standardized_mgf supports |t| <= {MGF_T_RANGE}, got {t}")
    if t == 0:
        return 1.0

    r = float(rho(float(u)))
    root = math.sqrt(x)
    tilted = r * math.exp(t / root)
    if not math.isfinite(tilted):
        raise NumericalError(f"Tilted r overflowed for u={u}, x={x}, t={t}")

    log_value = -t * root * m_of_r(r) + log_c_lambda(0.5, tilted, x) - log_c_lambda(0.5, r, x)
    if log_value > 709.0:
        raise NumericalError(f"standardized_mgf overflows for u={u}, x={x}, t={t}")
    return math.exp(log_value)


def log_jeffreys_pi_n(n: int, u):
    """log pi_n(u) = (log((1 + u)^n - 1) - 2 log u - log(1 - u)) / 2, vectorized over u in (0, 1)."""
    u_arr = np.asarray(u, dtype=float)
    t = n * np.log1p(u_arr)
    with np.errstate(divide='ignore', invalid='ignore'):
        log_excess = t + np.log(-np.expm1(-t))
        result = 0.5 * (log_excess - 2.0 * np.log(u_arr) - np.log1p(-u_arr))
    if result.ndim == 0:
        return float(result)
    return result


def jeffreys_pi_n(n: int, u: float) -> float:
    """
    Unnormalized Jeffreys density of U for n observed generations.

    pi_n(u) = sqrt(((1 + u)^n - 1) / (u^2 (1 - u))). The endpoints are
    singular and return +inf.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidParameterError(f"n must be a positive integer, got {n}")
    if isinstance(u, bool) or not 0 <= u <= 1:
        raise InvalidParameterError(f"u must lie in [0, 1], got {u}")
    if u == 0 or u == 1:
        logger.warning(f"jeffreys_pi_n: u={u} is a singular endpoint")
        return math.inf
    return math.exp(log_jeffreys_pi_n(int(n), float(u)))


def marginal_x0_weight(x: int) -> float:
    """Weight 2^(-2x) binom(2x, x) = d_{1/2}(x) left once the mean initial population is integrated out."""
    return d_lambda(0.5, _check_population(x))


def _log_ratio(relative_change: float) -> float:
    """log(1 + relative_change), -inf once the ratio reaches zero."""
    return math.log1p(relative_change) if relative_change > -1.0 else -math.inf


def _theta_log_integrand(a: int, b: int, n: int) -> Tuple[float, Callable[[float], float]]:
    """
    log of u^a (1-u)^b pi_n(u) du/dtheta with u = sin^2(theta), split as
    offset + log_f(theta).

    The integrand equals 2 sin^(2a) cos^(2b) g(u) with
    g(u) = sqrt(((1 + u)^n - 1) / u), bounded on [0, 1]. The offset is the
    log of sin^(2a) cos^(2b) at its maximizer theta_ref; log_f carries the
    rest, with log(sin / sin(theta_ref)) and log(cos / cos(theta_ref)) taken
    through log1p of sum-to-product differences. log_f stays of order one
    near the peak whatever the size of a and b.
    """
    theta_ref = math.atan2(math.sqrt(a), math.sqrt(b))
    s_ref = math.sin(theta_ref)
    c_ref = math.cos(theta_ref)
    offset = (2.0 * a * math.log(s_ref) if a else 0.0) + (2.0 * b * math.log(c_ref) if b else 0.0)
    half_log_n = 0.5 * math.log(n)

    def log_f(theta: float) -> float:
        s = math.sin(theta)
        if a and s <= 0.0:
            return -math.inf
        half_sum = 0.5 * (theta + theta_ref)
        half_diff = math.sin(0.5 * (theta - theta_ref))
        value = LOG_2
        if a:
            value += 2.0 * a * _log_ratio(2.0 * math.cos(half_sum) * half_diff / s_ref)
        if b:
            value += 2.0 * b * _log_ratio(-2.0 * math.sin(half_sum) * half_diff / c_ref)
        u = s * s
        if u <= 0.0:
            return value + half_log_n
        t = n * math.log1p(u)
        return value + 0.5 * (math.log(math.expm1(t)) - math.log(u))

    return offset, log_f


def _theta_grid(integrals: Sequence[PeakIntegral], peak_widths: float) -> Tuple[np.ndarray, np.ndarray]:
    """Interior nodes of (0, pi/2), coarse everywhere and dense around the peaks, with cell weights."""
    settings = config_loader.get_quadrature_config()
    coarse_nodes = int(settings.get('coarse_grid_nodes', DEFAULT_COARSE_GRID_NODES))
    dense_nodes = int(settings.get('dense_grid_nodes', DEFAULT_DENSE_GRID_NODES))

    window_lo = max(0.0, min(item.peak - peak_widths * item.width for item in integrals))
    window_hi = min(HALF_PI, max(item.peak + peak_widths * item.width for item in integrals))

    coarse = (np.arange(coarse_nodes) + 0.5) * (HALF_PI / coarse_nodes)
    dense = window_lo + (np.arange(dense_nodes) + 0.5) * ((window_hi - window_lo) / dense_nodes)
    theta = np.unique(np.concatenate([coarse, dense]))

    edges = np.concatenate(([0.0], 0.5 * (theta[1:] + theta[:-1]), [HALF_PI]))
    return theta, np.diff(edges)


@with_error_handling
def joint_posterior(path: Path, workers: Optional[int] = None) -> JointPosterior:
    """
    Finite-n joint posterior of (X0, U) given the observations x_1..x_n.

    For each x0 in h(x1)..x1 the weight is
    d_{1/2}(x0) binom(x0, x1 - x0) times the integral over u of
    u^(xn - x0) (1 - u)^(sn - 2xn + 2x0) pi_n(u), computed by peaked adaptive
    quadrature in theta with u = sin^2(theta). Conditional densities of U are
    tabulated on a common grid and normalized per x0.

    Args:
        path: Observed path. When it carries its origin, the origin is dropped.
        workers: Worker threads for the per-x0 integrals.

    Raises:
        PathTooShortError: If fewer than two observations are available.
        InadmissiblePathError: If the observations are not admissible.
        QuadratureError: If an integral does not converge.
    """
    observed = path.observed
    if len(observed) < 2:
        raise PathTooShortError(f"joint_posterior needs n >= 2 observations, got {len(observed)}")
    if not validate_admissible(path.values):
        raise InadmissiblePathError(f"Path is not admissible: {list(path.values)}")

    x1, xn, sn, n = observed[0], observed[-1], sum(observed), len(observed)
    support = tuple(range(upper_half(x1), x1 + 1))
    exponents = []
    for x0 in support:
        a, b = xn - x0, sn - 2 * xn + 2 * x0
        if a < 0 or b < 0:
            raise InadmissiblePathError(f"Negative exponent for x0={x0}: a={a}, b={b}")
        exponents.append((a, b))

    peak_widths = float(config_loader.get('quadrature', 'peak_widths', DEFAULT_PEAK_WIDTHS))

    def integrate(exponent: Tuple[int, int]) -> PeakIntegral:
        a, b = exponent
        offset, log_f = _theta_log_integrand(a, b, n)
        scale = math.sqrt(a + b + 1.0)
        item = integrate_peaked(log_f, 0.0, HALF_PI, width=0.5 / scale, peak_widths=peak_widths,
                                noise_floor=ROUNDING_ULPS * FLOAT_EPS * scale)
        return replace(item, log_value=item.log_value + offset, log_peak_value=item.log_peak_value + offset)

    integrals = ordered_map(integrate, exponents, workers)

    log_d = log_d_table(0.5, x1)
    log_x0 = np.array([
        float(log_d[x0]) + log_binomial(x0, x1 - x0) + item.log_value
        for x0, item in zip(support, integrals)
    ])
    x0_probs = np.exp(log_x0 - log_sum_exp(log_x0))
    x0_probs = x0_probs / x0_probs.sum()

    theta, theta_weights = _theta_grid(integrals, peak_widths)
    u_grid = np.sin(theta) ** 2
    jacobian = np.sin(2.0 * theta)
    u_weights = theta_weights * jacobian

    rows = []
    for (a, b), item in zip(exponents, integrals):
        offset, log_f = _theta_log_integrand(a, b, n)
        log_values = np.fromiter((log_f(float(t)) for t in theta), dtype=float, count=len(theta))
        log_grid_total = log_sum_exp(log_values + np.log(theta_weights))
        logger.debug(f"x0 grid vs adaptive log-integral: {offset + log_grid_total:.10g} vs {item.log_value:.10g}")
        rows.append(np.exp(log_values - np.log(jacobian) - log_grid_total))
    u_conditional = np.vstack(rows)

    marginal = x0_probs @ u_conditional
    u_mean = float(np.sum(u_weights * marginal * u_grid))
    u_second = float(np.sum(u_weights * marginal * u_grid * u_grid))
    u_sd = math.sqrt(max(u_second - u_mean * u_mean, 0.0))

    logger.info(f"joint_posterior: x1={x1}, xn={xn}, sn={sn}, n={n}, "
                f"support={support[0]}..{support[-1]}, u_mean={u_mean:.6g}, u_sd={u_sd:.3g}")
    return JointPosterior(
        x1=x1,
        xn=xn,
        sn=sn,
        n=n,
        x0_support=support,
        x0_weights=x0_probs,
        log_x0_weights=log_x0,
        u_grid=u_grid,
        u_weights=u_weights,
        u_conditional=u_conditional,
        u_marginal_mean=u_mean,
        u_marginal_sd=u_sd,
        integrals=tuple(integrals),
    )
