"""
Worker-count resolution, order-preserving parallel map and seeded streams.

Results never depend on the number of workers: work items are fixed before
dispatch and results are returned in input order.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

import numpy as np

from .config_loader import config_loader

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "BRANCH_BAYES_THREADS"
DEFAULT_THREADS = 1
SEED_MASK = (1 << 64) - 1

T = TypeVar('T')
R = TypeVar('R')


def resolve_worker_count(requested: Optional[int] = None) -> int:
    """
    Resolve the number of worker threads.

    Precedence: explicit argument, then the BRANCH_BAYES_THREADS environment
    variable, then montecarlo.default_threads from the configuration.
    """
    if requested is not None:
        return max(1, int(requested))

    env_value = os.getenv(THREADS_ENV_VAR)
    if env_value:
        try:
            return max(1, int(env_value))
        except ValueError:
            logger.warning(f"Ignoring non-integer {THREADS_ENV_VAR}={env_value!r}")

    return max(1, int(config_loader.get('montecarlo', 'default_threads', DEFAULT_THREADS)))


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """Apply fn to every item, possibly in parallel, returning results in input order."""
    items = list(items)
    count = min(resolve_worker_count(workers), max(1, len(items)))
    if count == 1:
        return [fn(item) for item in items]

    logger.debug(f"Dispatching {len(items)} work items to {count} threads")
    with ThreadPoolExecutor(max_workers=count) as executor:
        return list(executor.map(fn, items))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    Deterministic generator for (seed, stream...).

    Negative seeds are folded into the unsigned 64-bit range.
    """
    entropy = [int(seed) & SEED_MASK] + [int(key) & SEED_MASK for key in stream]
    return np.random.default_rng(entropy)


def derive_seed(seed: int, *keys: int) -> int:
    """Independent child seed for a named sub-stream of a run."""
    sequence = np.random.SeedSequence([int(seed) & SEED_MASK] + [int(key) & SEED_MASK for key in keys])
    return int(sequence.generate_state(1, np.uint64)[0])
