"""
Numerical and experiment settings for branch-bayes.

Settings live in `config.yaml` at the project root, grouped by concern
(kernel, quadrature, hitting, montecarlo, experiments, logging). Every
consumer passes its own default, so a partial file is valid; keys that set
tolerances, node budgets or sizes must be positive.
"""

import logging
import os
from numbers import Real
from typing import Any, Dict, Optional

import yaml

from .exceptions import InvalidParameterError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'config.yaml')

POSITIVE_KEYS = {
    'kernel': ('exact_limit', 'direct_product_limit', 'identity_rel_tol'),
    'quadrature': ('rel_tol', 'max_nodes', 'peak_widths', 'coarse_grid_nodes', 'dense_grid_nodes'),
    'hitting': ('direct_limit', 'check_tol'),
    'montecarlo': ('chunk_size', 'default_threads'),
    'experiments': ('ks_threshold', 'tv_threshold', 'u_sd_threshold', 'fisher_threshold',
                    'variance_threshold', 'renewal_threshold'),
}


def _validate(config: Dict[str, Any], source: str) -> None:
    for section, values in config.items():
        if values is not None and not isinstance(values, dict):
            raise InvalidParameterError(f"Section '{section}' in {source} must be a mapping")
    for section, keys in POSITIVE_KEYS.items():
        values = config.get(section) or {}
        for key in keys:
            if key not in values:
                continue
            value = values[key]
            if isinstance(value, bool) or not isinstance(value, Real) or value <= 0:
                raise InvalidParameterError(f"{section}.{key} in {source} must be a positive number, got {value!r}")


class ConfigLoader:
    """Reads `config.yaml` and serves its sections to the numerical modules."""

    def __init__(self, config_path: Optional[str] = None):
        self.config_path = config_path or DEFAULT_CONFIG_PATH
        self.config = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        """
        Parse and validate the YAML file at `config_path`.

        Raises:
            FileNotFoundError: If the file does not exist.
            InvalidParameterError: On a YAML syntax error, a non-mapping root
                or section, or a non-positive tolerance or size.
        """
        if not os.path.exists(self.config_path):
            raise FileNotFoundError(f"Configuration file not found: {self.config_path}")

        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                config = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise InvalidParameterError(f"Error parsing YAML configuration {self.config_path}: {e}") from e

        if config is None:
            logger.warning(f"Configuration file {self.config_path} is empty; using built-in defaults")
            return {}
        if not isinstance(config, dict):
            raise InvalidParameterError(f"Configuration root must be a mapping: {self.config_path}")
        _validate(config, self.config_path)
        logger.debug(f"Loaded configuration sections {sorted(config)} from {self.config_path}")
        return config

    def load(self, config_path: str) -> None:
        """Replace the current settings with those of another YAML file."""
        self.config_path = config_path
        self.config = self._load_config()
        logger.info(f"Configuration switched to {config_path}")

    def get_section(self, section: str) -> Dict[str, Any]:
        """A section as a dict; empty when absent."""
        return self.config.get(section) or {}

    def get(self, section: str, key: str, default: Any = None) -> Any:
        return self.get_section(section).get(key, default)

    def get_quadrature_config(self) -> Dict[str, Any]:
        return self.get_section('quadrature')

    def get_montecarlo_config(self) -> Dict[str, Any]:
        return self.get_section('montecarlo')

    def get_experiments_config(self) -> Dict[str, Any]:
        return self.get_section('experiments')

    def get_logging_config(self) -> Dict[str, Any]:
        return self.get_section('logging')


# Shared by every module; `--config` swaps its contents through load().
config_loader = ConfigLoader()
