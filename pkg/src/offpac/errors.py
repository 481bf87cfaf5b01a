"""
Exceptions and weight guards shared by the learners and the harness.
"""

import logging
from typing import Optional

import numpy as np


logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e10


class OffPacError(Exception):
    """Base exception for the offpac package."""
    pass


class ConfigurationError(OffPacError):
    """Invalid configuration, dimension mismatch or bad argument."""
    pass


class OracleError(OffPacError):
    """Exact tabular computation could not be carried out."""
    pass


class DivergenceError(OffPacError):
    """A learner produced non-finite or exploding weights."""

    def __init__(self, name: str, value: float):
        super().__init__(f"weights '{name}' diverged (offending value {value!r})")
        self.name = name
        self.value = value


def ensure_finite(name: str, weights: np.ndarray, indices: Optional[np.ndarray] = None,
                  limit: float = DIVERGENCE_LIMIT) -> None:
    """
    Raise DivergenceError if any checked weight is non-finite or exceeds ``limit``.

    Args:
        name: Vector name reported in the error
        weights: Dense weight vector
        indices: Only these entries are checked (all entries when None)
    """
    touched = weights if indices is None else weights[indices]
    if touched.size == 0:
        return
    worst = np.max(np.abs(touched))
    if not np.isfinite(worst) or worst > limit:
        logger.debug(f"Divergence detected in {name}: {worst}")
        raise DivergenceError(name, float(worst))
