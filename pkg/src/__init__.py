# src/__init__.py

"""
branch-bayes package.

Bayesian and hitting-time estimation of the initial population and offspring
parameter of binary branching processes, with exact-rational oracles,
log-space numerics and seeded Monte Carlo verification.
"""

from .branching import Path, simulate_path
from .posterior import joint_posterior, limit_posterior
from .hitting import eta_dist

__all__ = ['Path', 'simulate_path', 'joint_posterior', 'limit_posterior', 'eta_dist']
