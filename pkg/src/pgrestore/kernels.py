"""Standard blur and anti-aliasing kernel constructors."""

from __future__ import annotations

import numpy as np

__all__ = ["delta_kernel", "gaussian_kernel", "bicubic_kernel"]


def delta_kernel(size: int = 1) -> np.ndarray:
    """Centered unit impulse; circular convolution with it is the identity."""
    if size < 1 or size % 2 == 0:
        raise ValueError("size must be a positive odd integer")
    k = np.zeros((size, size))
    k[size // 2, size // 2] = 1.0
    return k


def gaussian_kernel(size: int, std: float, normalize: bool = True) -> np.ndarray:
    """Isotropic Gaussian taps on a size x size grid, clipped to the grid.

    Clipping truncates the tails, so by default the taps are renormalized
    to sum to 1 (keeps the blur mean-preserving).
    """
    if size < 1 or size % 2 == 0:
        raise ValueError("size must be a positive odd integer")
    if std <= 0:
        raise ValueError("std must be positive")
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * std**2))
    if normalize:
        g /= g.sum()
    return g


def _keys_cubic(x: np.ndarray, a: float) -> np.ndarray:
    x = np.abs(x)
    out = np.zeros_like(x)
    near = x <= 1
    out[near] = (a + 2) * x[near] ** 3 - (a + 3) * x[near] ** 2 + 1
    mid = (x > 1) & (x < 2)
    out[mid] = a * x[mid] ** 3 - 5 * a * x[mid] ** 2 + 8 * a * x[mid] - 4 * a
    return out


def bicubic_kernel(scale: int, a: float = -0.5) -> np.ndarray:
    """Separable bicubic anti-aliasing taps for integer downsampling.

    Support is 4*scale taps per axis (the cubic's (-2, 2) footprint
    stretched by the scale factor), sampled symmetrically about the
    geometric center and normalized to unit sum.
    """
    scale = int(scale)
    if scale < 1:
        raise ValueError("scale must be a positive integer")
    size = 4 * scale
    offsets = (np.arange(size) - (size - 1) / 2.0) / scale
    taps = _keys_cubic(offsets, a)
    k = np.outer(taps, taps)
    return k / k.sum()
