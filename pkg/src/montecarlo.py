"""
Seeded sampling, test statistics and the verification experiments.

Every stochastic quantity is a pure function of (parameters, seed): samples
are drawn in fixed chunks, chunk i from the generator seeded by
(seed, i), and chunk results are combined in chunk order whatever the
number of worker threads.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import chi2, kstest

from .branching import Path, simulate_path
from .config_loader import config_loader
from .decorators import with_error_handling
from .exceptions import InvalidParameterError
from .hitting import eta_dist, zeta_dist
from .kernel import is_exact, r_scalars, rho
from .posterior import DiscreteDist, jeffreys_pi_n, joint_posterior, limit_posterior, total_variation
from .workers import derive_seed, make_rng, ordered_map

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 65536
DESK_SCALE_NOTE = "desk-scale tolerance"
CLT_MIN_X = 64
CHI_SQUARE_LEVEL = 0.999
CLT_KINDS = ("xi", "eta", "zeta")
RENEWAL_BLOCK = 64

DEFAULT_THRESHOLDS = {
    'ks_threshold': 0.05,
    'tv_threshold': 0.1,
    'u_sd_threshold': 0.05,
    'fisher_threshold': 0.02,
    'variance_threshold': 0.05,
    'renewal_threshold': 0.01,
}


@dataclass
class ExperimentReport:
    """Outcome of one seeded experiment; passed is statistic <= threshold."""
    name: str
    params: Dict[str, Any]
    statistic: float
    threshold: float
    n_samples: int
    seed: int
    passed: bool = field(init=False)
    note: str = DESK_SCALE_NOTE

    def __post_init__(self):
        self.statistic = float(self.statistic)
        self.threshold = float(self.threshold)
        self.passed = bool(self.statistic <= self.threshold)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=str)


def _threshold(key: str) -> float:
    return float(config_loader.get('experiments', key, DEFAULT_THRESHOLDS[key]))


def _chunk_size() -> int:
    return max(1, int(config_loader.get('montecarlo', 'chunk_size', DEFAULT_CHUNK_SIZE)))


def _chunks(n: int) -> List[Tuple[int, int]]:
    """(chunk index, chunk length) pairs covering n draws; independent of the worker count."""
    size = _chunk_size()
    return [(index, min(size, n - start)) for index, start in enumerate(range(0, n, size))]


def _check_count(n: int, name: str = "n") -> int:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidParameterError(f"{name} must be a positive integer, got {n}")
    return int(n)


def _check_open_u(u) -> float:
    if isinstance(u, bool) or not 0 < u < 1:
        raise InvalidParameterError(f"u must lie in (0, 1), got {u}")
    return float(u)


def _chunked(draw: Callable[[np.random.Generator, int], np.ndarray], n: int, seed: int,
             workers: Optional[int] = None) -> List[Any]:
    def run(chunk: Tuple[int, int]):
        index, size = chunk
        return draw(make_rng(seed, index), size)

    return ordered_map(run, _chunks(n), workers)


def sample_discrete(dist: DiscreteDist, n: int, seed: int, workers: Optional[int] = None) -> np.ndarray:
    """
    n i.i.d. draws from dist by inversion of its cumulative table.

    Points of zero probability are never drawn.
    """
    n = _check_count(n)
    cdf = np.cumsum(dist.probs)
    cdf[-1] = 1.0

    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        return dist.lo + np.searchsorted(cdf, rng.random(size), side='right')

    return np.concatenate(_chunked(draw, n, seed, workers)).astype(np.int64)


def ks_distance(samples: Sequence[float], mean: float, variance: float) -> float:
    """
    Sup distance between the empirical CDF of (s - mean) / sqrt(variance)
    and the standard Gaussian CDF.
    """
    if not variance > 0:
        raise InvalidParameterError(f"ks_distance needs a positive variance, got {variance}")
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise InvalidParameterError("ks_distance needs at least one sample")

    z = (values - mean) / math.sqrt(variance)
    # p-value unused
    return float(kstest(z, 'norm', method='asymp').statistic)


def chi_square_statistic(samples: Sequence[int], dist: DiscreteDist) -> Tuple[float, int]:
    """Pearson statistic of the sample counts against dist, and its degrees of freedom."""
    values = np.asarray(samples, dtype=np.int64)
    if values.size == 0:
        raise InvalidParameterError("chi_square_statistic needs at least one sample")
    if values.min() < dist.lo or values.max() > dist.hi:
        raise InvalidParameterError("Samples fall outside the support of the distribution")

    observed = np.bincount(values - dist.lo, minlength=len(dist.probs)).astype(float)
    expected = values.size * dist.probs
    cells = expected > 0
    statistic = float(np.sum((observed[cells] - expected[cells]) ** 2 / expected[cells]))
    return statistic, int(np.count_nonzero(cells)) - 1


def _distribution_for(kind: str, u: float, x: int) -> DiscreteDist:
    if kind == "xi":
        return limit_posterior(rho(u), x)
    if kind == "eta":
        return eta_dist(x, u).dist
    if kind == "zeta":
        return zeta_dist(x, u)
    raise InvalidParameterError(f"Unknown distribution kind {kind!r}; expected one of {CLT_KINDS}")


@with_error_handling
def chi_square_experiment(dist: DiscreteDist, n: int, seed: int, workers: Optional[int] = None) -> ExperimentReport:
    """Goodness of fit of sample_discrete: statistic against the 99.9% chi-square quantile."""
    n = _check_count(n)
    statistic, dof = chi_square_statistic(sample_discrete(dist, n, seed, workers), dist)
    threshold = float(chi2.ppf(CHI_SQUARE_LEVEL, dof)) if dof > 0 else 0.0
    return ExperimentReport(
        name="chi_square",
        params={'support': [dist.lo, dist.hi], 'dof': dof, 'level': CHI_SQUARE_LEVEL},
        statistic=statistic,
        threshold=threshold,
        n_samples=n,
        seed=seed,
        note="99.9% chi-square quantile",
    )


@with_error_handling
def clt_experiment(kind: str, u: float, x: int, n: int, seed: int,
                   workers: Optional[int] = None) -> ExperimentReport:
    """
    KS distance of xi_x, eta_x or zeta_x to N(m_u x, sigma_u^2 x).

    Raises:
        InvalidParameterError: If x < 64 or kind is unknown.
    """
    u = _check_open_u(u)
    n = _check_count(n)
    if x < CLT_MIN_X:
        raise InvalidParameterError(f"clt_experiment needs x >= {CLT_MIN_X}, got {x}")

    logger.info(f"clt_experiment: kind={kind}, u={u}, x={x}, n={n}, seed={seed}")
    dist = _distribution_for(kind, u, x)
    bundle = r_scalars(u)
    samples = sample_discrete(dist, n, seed, workers)
    statistic = ks_distance(samples, bundle.m * x, bundle.sigma2 * x)
    return ExperimentReport(
        name=f"clt_{kind}",
        params={'kind': kind, 'u': u, 'x': x},
        statistic=statistic,
        threshold=_threshold('ks_threshold'),
        n_samples=n,
        seed=seed,
    )


@with_error_handling
def posterior_consistency_experiment(u: Union[float, Fraction], x0: int, n_list: Sequence[int], seed: int,
                                     workers: Optional[int] = None) -> List[ExperimentReport]:
    """
    Finite-n posteriors along one simulated path against their limits.

    For each n in n_list two reports are produced: the total variation between
    the X0 marginal and mu(rho(u), x1) ("consistency_tv") and the posterior
    standard deviation of U ("consistency_u_sd").

    At u = 0 the path is constant and the limit is the Dirac mass at x1, but
    for x1 > 1 the finite-n X0 marginal still puts mass of order 1/n on
    x0 < x1, so the total variation shrinks with n without being zero.
    """
    if isinstance(u, bool) or not 0 <= u < 1:
        raise InvalidParameterError(f"u must lie in [0, 1), got {u}")
    n_values = sorted(int(n) for n in n_list)
    if not n_values or n_values[0] < 5:
        raise InvalidParameterError(f"Every n must be >= 5, got {list(n_list)}")

    path = simulate_path(x0, float(u), n_values[-1], seed)
    x1 = path.values[1]
    limit = limit_posterior(rho(u), x1)
    u_label = float(u)
    logger.info(f"posterior_consistency_experiment: u={u_label}, x0={x0}, x1={x1}, n={n_values}, seed={seed}")

    reports = []
    for n in n_values:
        posterior = joint_posterior(Path(path.values[1:n + 1], origin_included=False), workers)
        params = {'u': u_label, 'x0': x0, 'x1': x1, 'n': n, 'xn': posterior.xn, 'sn': posterior.sn}
        reports.append(ExperimentReport(
            name="consistency_tv",
            params=dict(params),
            statistic=total_variation(posterior.x0_dist(), limit),
            threshold=_threshold('tv_threshold'),
            n_samples=n,
            seed=seed,
        ))
        reports.append(ExperimentReport(
            name="consistency_u_sd",
            params=dict(params, u_mean=posterior.u_marginal_mean),
            statistic=posterior.u_marginal_sd,
            threshold=_threshold('u_sd_threshold'),
            n_samples=n,
            seed=seed,
        ))
    return reports


def fisher_info_analytic(u: Union[float, Fraction], n: int) -> Union[Fraction, float]:
    """
    Relative gap between J_n(u) / E(X0), built from the geometric sums
    E(X_k) = (1 + u)^k E(X0), and pi_n(u)^2. Exactly 0 for rational u.
    """
    if isinstance(u, bool) or not 0 < u < 1:
        raise InvalidParameterError(f"u must lie in (0, 1), got {u}")
    n = _check_count(n)
    if is_exact(u):
        u = Fraction(u)
        growth = [(1 + u) ** k for k in range(n + 1)]
        target = ((1 + u) ** n - 1) / (u * u * (1 - u))
    else:
        u = float(u)
        growth = [(1.0 + u) ** k for k in range(n + 1)]
        target = jeffreys_pi_n(n, u) ** 2

    births = growth[n] - 1
    survivors = sum(growth[1:]) - 2 * growth[n] + 2
    information = births / (u * u) + survivors / ((1 - u) ** 2)
    return abs(information - target) / target


@with_error_handling
def fisher_info_experiment(u: float, n: int, lambda0: float, m: int, seed: int,
                           workers: Optional[int] = None) -> ExperimentReport:
    """
    Monte Carlo check of J_n(u) = E(X0) pi_n(u)^2 with X0 ~ Poisson(lambda0).

    Each of the m paths contributes (X_n - X_0)/u^2 + (S_n - 2X_n + 2X_0)/(1 - u)^2.
    """
    u = _check_open_u(u)
    n = _check_count(n)
    m = _check_count(m, "m")
    if not lambda0 > 0:
        raise InvalidParameterError(f"lambda0 must be positive, got {lambda0}")

    def draw(rng: np.random.Generator, size: int) -> float:
        x0 = rng.poisson(lambda0, size).astype(np.int64)
        current = x0.copy()
        total = np.zeros(size, dtype=np.int64)
        for _ in range(n):
            current = current + rng.binomial(current, u)
            total += current
        score = (current - x0) / u ** 2 + (total - 2 * current + 2 * x0) / (1.0 - u) ** 2
        return float(np.sum(score))

    logger.info(f"fisher_info_experiment: u={u}, n={n}, lambda0={lambda0}, m={m}, seed={seed}")
    empirical = sum(_chunked(draw, m, seed, workers)) / m
    target = lambda0 * jeffreys_pi_n(n, u) ** 2
    return ExperimentReport(
        name="fisher_information",
        params={'u': u, 'n': n, 'lambda0': lambda0, 'empirical': empirical, 'target': target},
        statistic=abs(empirical - target) / target,
        threshold=_threshold('fisher_threshold'),
        n_samples=m,
        seed=seed,
    )


def simulate_renewal(x: int, u: float, n: int, seed: int, workers: Optional[int] = None) -> np.ndarray:
    """
    n draws of zeta_x, the first y with (1 or 2) + ... + (1 or 2) over y steps reaching x.

    No walk reaches x within its first (x - 1) // 2 steps, so their sum is drawn
    as one binomial. The walks then advance RENEWAL_BLOCK steps at a time,
    and finished walks drop out; memory stays O(chunk size * RENEWAL_BLOCK).
    """
    u = _check_open_u(u)
    n = _check_count(n)
    if isinstance(x, bool) or int(x) != x or x < 1:
        raise InvalidParameterError(f"x must be a positive integer, got {x}")
    x = int(x)
    head = (x - 1) // 2

    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        position = head + rng.binomial(head, u, size).astype(np.int64)
        passage = np.zeros(size, dtype=np.int64)
        active = np.arange(size)
        taken = head
        while active.size:
            # every walk has reached x after x steps
            block = min(RENEWAL_BLOCK, x - taken)
            steps = 1 + (rng.random((active.size, block)) < u).astype(np.int64)
            walk = position[active, None] + np.cumsum(steps, axis=1)
            reached = walk >= x
            hit = reached.any(axis=1)
            passage[active[hit]] = taken + np.argmax(reached[hit], axis=1) + 1
            position[active] = walk[:, -1]
            active = active[~hit]
            taken += block
        return passage

    return np.concatenate(_chunked(draw, n, seed, workers)).astype(np.int64)


@with_error_handling
def renewal_experiment(x: int, u: float, n: int, seed: int, workers: Optional[int] = None) -> ExperimentReport:
    """Total variation between simulated renewal passages and zeta_dist(x, u)."""
    u = _check_open_u(u)
    n = _check_count(n)
    exact = zeta_dist(x, u)
    samples = simulate_renewal(x, u, n, seed, workers)
    counts = np.bincount(samples - exact.lo, minlength=len(exact.probs))
    empirical = DiscreteDist.from_log_weights(exact.lo, np.log(np.maximum(counts, 1e-300)))
    return ExperimentReport(
        name="renewal_zeta",
        params={'u': u, 'x': x},
        statistic=total_variation(empirical, exact),
        threshold=_threshold('renewal_threshold'),
        n_samples=n,
        seed=seed,
    )


@with_error_handling
def variance_agreement_experiment(u: float, x: int, n: int, seed: int,
                                  workers: Optional[int] = None) -> ExperimentReport:
    """Largest relative gap between Var(K)/x for K in (xi_x, eta_x, zeta_x) and sigma_u^2."""
    u = _check_open_u(u)
    n = _check_count(n)
    sigma2 = r_scalars(u).sigma2

    gaps = {}
    for index, kind in enumerate(CLT_KINDS):
        samples = sample_discrete(_distribution_for(kind, u, x), n, derive_seed(seed, index), workers)
        gaps[kind] = abs(float(np.var(samples.astype(float))) / x - sigma2) / sigma2

    return ExperimentReport(
        name="variance_agreement",
        params={'u': u, 'x': x, 'sigma2': sigma2, **{f"gap_{kind}": gap for kind, gap in gaps.items()}},
        statistic=max(gaps.values()),
        threshold=_threshold('variance_threshold'),
        n_samples=n,
        seed=seed,
    )
