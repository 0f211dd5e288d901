"""Cancellation-free pieces of ``Ent(f^2)``."""
from __future__ import annotations

import numpy as np


def excess_xlogx(z) -> np.ndarray:
    """``r log r - r + 1`` at ``r = e^z`` (non-negative; equals 1 at ``z = -inf``).

    With ``r = f^2/mu(f^2)``, ``Ent(f^2) = mu(f^2) * mu(excess_xlogx(log r))``: a sum of
    non-negative terms, accurate when ``f`` is nearly constant.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-2
    zs = z[small]
    out[small] = zs**2 * (0.5 + zs * (1 / 3 + zs * (1 / 8 + zs * (1 / 30 + zs / 144))))
    zb = z[~small]
    with np.errstate(invalid="ignore", over="ignore"):
        out[~small] = np.where(np.isneginf(zb), 1.0, np.exp(zb) * (zb - 1.0) + 1.0)
    return out
