"""Smooth compactly supported cutoffs shared by symbols and the scale split.

The basic shape is the classical exponential-bump quotient

    f(s) = h(2 - s) / (h(2 - s) + h(s - 1)),   h(s) = exp(-1/s) for s > 0,

restricted to s = |x|: it equals 1 on [0, 1], vanishes beyond 2, is strictly
decreasing in between, and is smooth to all orders.  ``phi`` is its radial
version on wave vectors; ``phi_tilde = 1 - phi`` opens up away from the
origin and saturates at 1.
"""

from __future__ import annotations

import numpy as np


def bump_h(s: np.ndarray) -> np.ndarray:
    """``exp(-1/s)`` for s > 0, zero otherwise (smooth at 0)."""
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    pos = s > 0.0
    with np.errstate(divide="ignore"):
        out[pos] = np.exp(-1.0 / s[pos])
    return out


def step_down(s) -> np.ndarray:
    """The profile f: 1 on [0,1], 0 on [2,inf), strictly decreasing between.

    Even in s, so callers may pass signed values.
    """
    s = np.abs(np.asarray(s, dtype=np.float64))
    up = bump_h(2.0 - s)
    denom = up + bump_h(s - 1.0)
    return np.divide(up, denom, out=np.zeros_like(up), where=denom > 0.0)


def phi(k: np.ndarray) -> np.ndarray:
    """Radial cutoff ``f(|k|)`` for k of shape (..., 3): 1 inside the unit
    ball, 0 outside radius 2."""
    k = np.asarray(k, dtype=np.float64)
    return step_down(np.linalg.norm(k, axis=-1))


def phi_radius(r) -> np.ndarray:
    """``f(r)`` on precomputed radii (saves the norm when callers have it)."""
    return step_down(r)


def phi_tilde_radius(r) -> np.ndarray:
    """``1 - f(r)``: 0 near the origin, 1 from radius 2 on."""
    return 1.0 - step_down(r)


def ramp_eta(r, R0: float) -> np.ndarray:
    """Radial ramp that is 0 for ``r <= R0/2`` and 1 for ``r >= R0``.

    Used as the ``eta(|q|)`` factor of direction symbols: it removes the
    origin (where directions are undefined) and is exactly 1 outside the
    ball of radius R0, which is what makes radial limits exact there.
    """
    if R0 <= 0.0:
        raise ValueError("R0 must be positive")
    return 1.0 - step_down(2.0 * np.asarray(r, dtype=np.float64) / R0)
