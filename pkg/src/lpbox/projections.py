"""
Projections onto the box [-1, 1] and onto the lp-sphere of radius (MN)^(1/p).

Binary matrices lie on both sets, and the intersection of the two is exactly
the set of binary matrices.
"""

from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)


class SingularProjectionError(ValueError):
    """The sphere projection was asked to scale a zero matrix."""


def project_box(x):
    """Entrywise clamp to [-1, 1]."""
    return np.clip(x, -1.0, 1.0)


def lp_norm(x, p: float) -> float:
    """Entrywise p-norm over all entries."""
    a = np.abs(np.asarray(x, dtype=float)).ravel()
    if p == 2:
        return float(np.sqrt(a @ a))
    return float(np.sum(a ** p) ** (1.0 / p))


def project_lp_sphere(x, p: float = 2.0, rng: np.random.Generator | None = None):
    """
    Radial scaling onto ``{X : ||X||_p^p = MN}``.

    Parameters
    ----------
    x : ndarray
        Nonzero input.
    p : float
        Sphere exponent, p > 0.
    rng : Generator, optional
        If given, a zero input is replaced by a random +-1 matrix drawn from
        it (with a warning) instead of raising.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    x = np.asarray(x, dtype=float)
    size = x.size
    norm = lp_norm(x, p)
    if norm == 0.0:
        if rng is None:
            raise SingularProjectionError("cannot project the zero matrix onto the sphere")
        log.warning("zero input to sphere projection; substituting a random binary matrix")
        return rng.integers(0, 2, size=x.shape) * 2.0 - 1.0
    return x * (size ** (1.0 / p) / norm)
