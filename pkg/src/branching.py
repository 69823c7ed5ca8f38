"""
Binary branching paths: simulation, admissibility and index estimators.

Each individual of generation k is replaced by one individual (probability
1 - u) or two individuals (probability u), so X_{k+1} = X_k + Binomial(X_k, u).
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Sequence, Tuple, Union

import numpy as np

from .decorators import with_error_handling
from .exceptions import InvalidParameterError, PathTooShortError, PopulationOverflowError
from .kernel import is_exact, log_binomial
from .workers import make_rng

logger = logging.getLogger(__name__)

POPULATION_CAP = 2 ** 63 - 1


@dataclass(frozen=True)
class Path:
    """
    An observed branching trajectory.

    values holds x_0..x_n when origin_included is set, otherwise x_1..x_n.
    """
    values: Tuple[int, ...]
    origin_included: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'values', tuple(int(v) for v in self.values))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def observed(self) -> Tuple[int, ...]:
        """The observations x_1..x_n (the origin dropped when present)."""
        return self.values[1:] if self.origin_included else self.values

    @property
    def admissible(self) -> bool:
        return validate_admissible(self.values)

    def to_dict(self) -> dict:
        return {'path': list(self.values), 'origin_included': self.origin_included}


@dataclass(frozen=True)
class PathStats:
    """Summary statistics of the observed part x_1..x_n of a path."""
    x1: int
    xn: int
    sn: int
    n: int
    b_hat: float
    r_hat: float
    exact: Tuple[Fraction, Fraction] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            'x1': self.x1,
            'xn': self.xn,
            'sn': self.sn,
            'n': self.n,
            'b_hat': self.b_hat,
            'r_hat': self.r_hat,
        }


def _check_u(u) -> float:
    if isinstance(u, bool) or not 0 <= u <= 1:
        raise InvalidParameterError(f"u must lie in [0, 1], got {u}")
    return float(u)


@with_error_handling
def simulate_path(x0: int, u: float, n: int, seed: int) -> Path:
    """
    Simulate generations x_0..x_n of the binary branching process.

    Args:
        x0: Initial population (>= 1).
        u: Probability that an individual leaves two offspring.
        n: Number of generations to simulate.
        seed: Seed of the generator owned by this call.

    Returns:
        A Path with the origin included.

    Raises:
        InvalidParameterError: If x0 < 1, n < 0 or u lies outside [0, 1].
        PopulationOverflowError: If a generation exceeds 2^63 - 1.
    """
    u = _check_u(u)
    if int(x0) < 1:
        raise InvalidParameterError(f"x0 must be a positive integer, got {x0}")
    if int(n) < 0:
        raise InvalidParameterError(f"n must be nonnegative, got {n}")

    rng = make_rng(seed)
    current = int(x0)
    values = [current]
    for k in range(int(n)):
        if u == 0.0:
            births = 0
        elif u == 1.0:
            births = current
        else:
            # numpy uses inversion for small means and BTPE otherwise, both exact
            births = int(rng.binomial(current, u))
        current = current + births
        if current > POPULATION_CAP:
            raise PopulationOverflowError(
                f"Population exceeded 2^63 - 1 at generation {k + 1} (x0={x0}, u={u})"
            )
        values.append(current)

    logger.debug(f"Simulated path x0={x0}, u={u}, n={n}, seed={seed}: x_n={current}")
    return Path(tuple(values), origin_included=True)


def validate_admissible(values: Sequence[int]) -> bool:
    """True iff all entries are >= 1 and x <= y <= 2x for every consecutive pair."""
    values = list(values)
    if any(v < 1 for v in values):
        return False
    return all(a <= b <= 2 * a for a, b in zip(values, values[1:]))


def index_estimates(xn: int, s_prev: int) -> Tuple[Union[Fraction, float], Union[Fraction, float]]:
    """
    Binary-index and renormalized-index estimates from x_n and s_{n-1}.

    Integer inputs give exact Fractions, for which r_hat == rho(b_hat) holds exactly.
    """
    if not s_prev > 0 or not xn > 0:
        raise InvalidParameterError(f"index estimates need x_n > 0 and s_(n-1) > 0, got {xn}, {s_prev}")
    if is_exact(xn) and is_exact(s_prev):
        b_hat = Fraction(xn, s_prev)
        r_hat = Fraction((s_prev - xn) ** 2, 4 * xn * s_prev)
        return b_hat, r_hat
    xn, s_prev = float(xn), float(s_prev)
    return xn / s_prev, (s_prev - xn) ** 2 / (4.0 * xn * s_prev)


def path_stats(path: Path) -> PathStats:
    """
    Statistics (x1, xn, sn, n, b_hat, r_hat) of the observed values.

    b_hat = x_n / s_(n-1) and r_hat = (s_(n-1) - x_n)^2 / (4 x_n s_(n-1)).
    On short doubling paths b_hat exceeds 1 (2^(n-1) / (2^(n-1) - 1) for n observations).

    Raises:
        PathTooShortError: If fewer than two observations are available.
    """
    observed = path.observed
    if len(observed) < 2:
        raise PathTooShortError(f"path_stats needs at least 2 observed generations, got {len(observed)}")

    xn = observed[-1]
    sn = sum(observed)
    b_hat, r_hat = index_estimates(xn, sn - xn)
    return PathStats(
        x1=observed[0],
        xn=xn,
        sn=sn,
        n=len(observed),
        b_hat=float(b_hat),
        r_hat=float(r_hat),
        exact=(b_hat, r_hat),
    )


def index_sequence(path: Path) -> List[float]:
    """b_hat over the prefixes x_1..x_k for k = 2..n, for judging regularity by eye."""
    observed = path.observed
    if len(observed) < 2:
        raise PathTooShortError("index_sequence needs at least 2 observed generations")
    partial = np.cumsum(np.asarray(observed, dtype=float))
    return [float(observed[k] / partial[k - 1]) for k in range(1, len(observed))]


def transition_log_likelihood(path: Path, u: float) -> float:
    """
    Log-probability of the transitions x_0 -> x_1 -> ... -> x_n under parameter u.

    Returns -inf for an inadmissible path.
    """
    if not path.origin_included:
        raise InvalidParameterError("transition_log_likelihood needs a path with its origin")
    if isinstance(u, bool) or not 0 < u < 1:
        raise InvalidParameterError(f"u must lie in (0, 1), got {u}")
    if not validate_admissible(path.values):
        return -math.inf
    if len(path.values) < 2:
        return 0.0

    u = float(u)
    parents = np.asarray(path.values[:-1], dtype=float)
    children = np.asarray(path.values[1:], dtype=float)
    births = children - parents
    survivors = 2.0 * parents - children
    log_choose = np.asarray(log_binomial(parents, births), dtype=float)
    return float(np.sum(log_choose) + births.sum() * math.log(u) + survivors.sum() * math.log1p(-u))
