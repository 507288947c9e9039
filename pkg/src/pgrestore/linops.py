"""Linear observation operators with FFT fast paths.

Every operator ``A`` maps an image-shaped array to a measurement-shaped
array and exposes the primitives that the guidance and restoration code
builds on:

    apply(x)               -> A x
    apply_adjoint(r)       -> A^T r
    solve_gram(r, eta)     -> (A A^T + eta I)^-1 r
    apply_reg_pinv(z, eta) -> A^T (A A^T + eta I)^-1 z

Circular convolution and downsample+convolution invert their Gram
operator with closed-form frequency-domain divisions, masks are tight
frames (A A^T = I, so the pseudoinverse is the adjoint), and dense
matrices use direct solves and exist for oracle-scale testing.

Boundary handling is circular everywhere. Operators act channel-wise on
(channels, height, width) arrays, are immutable after construction, and
never mutate their inputs, so instances can be shared across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "ShapeMismatchError",
    "SingularOperatorError",
    "NumericalError",
    "LinearOperator",
    "CircularConvolution",
    "DownsampleConvolution",
    "Mask",
    "DenseOperator",
    "CGResult",
    "cg_solve",
    "estimate_spectral_norm",
    "as_image",
    "SPECTRAL_ZERO_TOL",
    "DENSE_SIZE_CAP",
]

# Squared spectral magnitudes below this are treated as exact zeros when
# inverting the Gram operator with eta = 0 (double-precision noise floor).
SPECTRAL_ZERO_TOL = 1e-12

# Dense operators exist for oracle-scale tests only.
DENSE_SIZE_CAP = 4096


class ShapeMismatchError(ValueError):
    """An array does not match the shape the operator expects."""


class SingularOperatorError(ValueError):
    """The Gram operator A A^T cannot be inverted with eta = 0."""


class NumericalError(RuntimeError):
    """Non-finite values appeared during an iterative solve."""


def as_image(x, shape=None) -> np.ndarray:
    """Coerce to a float (channels, height, width) array and validate it.

    Checks the invariants every image-shaped array must satisfy: three
    strictly positive dimensions and no NaN/Inf entries.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise ShapeMismatchError(
            f"expected a (channels, height, width) array, got shape {arr.shape}"
        )
    if shape is not None and tuple(arr.shape) != tuple(shape):
        raise ShapeMismatchError(f"expected shape {tuple(shape)}, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("image contains non-finite entries")
    return arr


def _check_shape(name: str, arr: np.ndarray, expected) -> None:
    if tuple(arr.shape) != tuple(expected):
        raise ShapeMismatchError(
            f"{name} has shape {tuple(arr.shape)}, expected {tuple(expected)}"
        )


def _kernel_response(kernel: np.ndarray, grid_shape) -> np.ndarray:
    """Frequency response of circular convolution with ``kernel``.

    The tap at the floor of the kernel's geometric center is circularly
    shifted to index (0, 0) before the FFT, so a centered delta kernel
    has an exactly flat unit response.
    """
    kh, kw = kernel.shape
    h, w = grid_shape
    if kh > h or kw > w:
        raise ValueError(f"kernel {kernel.shape} larger than grid {tuple(grid_shape)}")
    padded = np.zeros((h, w))
    padded[:kh, :kw] = kernel
    padded = np.roll(padded, ((-((kh - 1) // 2)), (-((kw - 1) // 2))), axis=(0, 1))
    return np.fft.fft2(padded)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class LinearOperator:
    """Base class: a linear map with adjoint and regularized pseudoinverse.

    Subclasses set ``input_shape``/``output_shape`` and implement
    ``_apply``, ``_apply_adjoint`` and ``_solve_gram``; the public
    methods add shape validation.
    """

    input_shape: tuple
    output_shape: tuple

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Forward map A x."""
        x = np.asarray(x, dtype=float)
        _check_shape("input", x, self.input_shape)
        return self._apply(x)

    def apply_adjoint(self, r: np.ndarray) -> np.ndarray:
        """Adjoint map A^T r, satisfying <A u, v> = <u, A^T v>."""
        r = np.asarray(r, dtype=float)
        _check_shape("measurement", r, self.output_shape)
        return self._apply_adjoint(r)

    def solve_gram(self, r: np.ndarray, eta: float) -> np.ndarray:
        """Measurement-space solve (A A^T + eta I)^-1 r."""
        r = np.asarray(r, dtype=float)
        _check_shape("measurement", r, self.output_shape)
        if eta < 0:
            raise ValueError(f"eta must be nonnegative, got {eta}")
        return self._solve_gram(r, float(eta))

    def apply_reg_pinv(self, z: np.ndarray, eta: float) -> np.ndarray:
        """Regularized pseudoinverse A^T (A A^T + eta I)^-1 z."""
        return self.apply_adjoint(self.solve_gram(z, eta))

    def gram(self, r: np.ndarray, eta: float = 0.0) -> np.ndarray:
        """(A A^T + eta I) r, the operator that ``cg_solve`` inverts."""
        out = self.apply(self.apply_adjoint(r))
        if eta != 0.0:
            out = out + eta * np.asarray(r, dtype=float)
        return out

    def _apply(self, x):
        raise NotImplementedError

    def _apply_adjoint(self, r):
        raise NotImplementedError

    def _solve_gram(self, r, eta):
        raise NotImplementedError


class CircularConvolution(LinearOperator):
    """Circular convolution with a 2-D kernel of odd side lengths.

    The operator is square: measurements have the image's shape. The
    Gram operator is diagonal in the Fourier basis, so the regularized
    pseudoinverse is a per-frequency division by |F(k)|^2 + eta.
    """

    def __init__(self, kernel, image_shape):
        kernel = np.array(kernel, dtype=float)
        if kernel.ndim != 2:
            raise ValueError("kernel must be 2-D")
        if kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
            raise ValueError(f"kernel sides must be odd, got {kernel.shape}")
        if not np.isfinite(kernel).all():
            raise ValueError("kernel contains non-finite entries")
        if len(image_shape) != 3:
            raise ValueError("image_shape must be (channels, height, width)")
        self.input_shape = tuple(int(s) for s in image_shape)
        self.output_shape = self.input_shape
        self.kernel = _freeze(kernel)
        self._response = _freeze(_kernel_response(kernel, self.input_shape[1:]))
        self._power = _freeze(np.abs(self._response) ** 2)

    @property
    def frequency_response(self) -> np.ndarray:
        return self._response

    def _apply(self, x):
        return np.fft.ifft2(np.fft.fft2(x, axes=(-2, -1)) * self._response,
                            axes=(-2, -1)).real

    def _apply_adjoint(self, r):
        return np.fft.ifft2(np.fft.fft2(r, axes=(-2, -1)) * np.conj(self._response),
                            axes=(-2, -1)).real

    def _check_invertible(self, eta):
        if eta == 0.0:
            bad = int(np.count_nonzero(self._power < SPECTRAL_ZERO_TOL))
            if bad:
                raise SingularOperatorError(
                    f"cannot invert with eta=0: kernel spectrum vanishes at "
                    f"{bad} of {self._power.size} frequencies"
                )

    def _solve_gram(self, r, eta):
        self._check_invertible(eta)
        return np.fft.ifft2(np.fft.fft2(r, axes=(-2, -1)) / (self._power + eta),
                            axes=(-2, -1)).real

    def apply_reg_pinv(self, z, eta):
        # Fused single-pass form: F^-1( conj(F(k)) F(z) / (|F(k)|^2 + eta) ).
        z = np.asarray(z, dtype=float)
        _check_shape("measurement", z, self.output_shape)
        if eta < 0:
            raise ValueError(f"eta must be nonnegative, got {eta}")
        self._check_invertible(float(eta))
        spectrum = np.conj(self._response) / (self._power + float(eta))
        return np.fft.ifft2(np.fft.fft2(z, axes=(-2, -1)) * spectrum,
                            axes=(-2, -1)).real


class DownsampleConvolution(LinearOperator):
    """Anti-aliasing convolution followed by subsampling with stride ``scale``.

    Keeps pixels at indices (0, s, 2s, ...) after circularly convolving
    with ``kernel``. The Gram operator A A^T is itself a circular
    convolution on the coarse grid with ``gram_kernel``, the
    stride-subsampled autocorrelation of the kernel, which makes the
    regularized pseudoinverse a coarse-grid division followed by
    zero-fill upsampling and adjoint filtering.
    """

    def __init__(self, kernel, scale, image_shape):
        kernel = np.array(kernel, dtype=float)
        if kernel.ndim != 2:
            raise ValueError("kernel must be 2-D")
        if not np.isfinite(kernel).all():
            raise ValueError("kernel contains non-finite entries")
        scale = int(scale)
        if scale < 1:
            raise ValueError(f"scale must be a positive integer, got {scale}")
        c, h, w = (int(s) for s in image_shape)
        if h % scale or w % scale:
            raise ValueError(
                f"image sides {(h, w)} must be divisible by scale {scale}"
            )
        self.input_shape = (c, h, w)
        self.output_shape = (c, h // scale, w // scale)
        self.scale = scale
        self.kernel = _freeze(kernel)
        self._response = _freeze(_kernel_response(kernel, (h, w)))
        # Autocorrelation of the kernel on the fine grid, subsampled at the
        # stride anchor: the coarse-grid convolution kernel of A A^T.
        autocorr = np.fft.ifft2(np.abs(self._response) ** 2).real
        self.gram_kernel = _freeze(autocorr[::scale, ::scale].copy())
        self._gram_response = _freeze(np.fft.fft2(self.gram_kernel).real)

    def _apply(self, x):
        full = np.fft.ifft2(np.fft.fft2(x, axes=(-2, -1)) * self._response,
                            axes=(-2, -1)).real
        return full[..., :: self.scale, :: self.scale]

    def _apply_adjoint(self, r):
        up = np.zeros(r.shape[:-2] + self.input_shape[1:])
        up[..., :: self.scale, :: self.scale] = r
        return np.fft.ifft2(np.fft.fft2(up, axes=(-2, -1)) * np.conj(self._response),
                            axes=(-2, -1)).real

    def _solve_gram(self, r, eta):
        if eta == 0.0:
            bad = int(np.count_nonzero(self._gram_response < SPECTRAL_ZERO_TOL))
            if bad:
                raise SingularOperatorError(
                    f"cannot invert with eta=0: Gram-kernel spectrum vanishes "
                    f"at {bad} of {self._gram_response.size} frequencies"
                )
        return np.fft.ifft2(np.fft.fft2(r, axes=(-2, -1)) / (self._gram_response + eta),
                            axes=(-2, -1)).real


class Mask(LinearOperator):
    """Pixel-subset sampling. A tight frame: A A^T = I, so A^+ = A^T.

    The same 2-D boolean mask is applied to every channel; measurements
    are (channels, kept) arrays in row-major pixel order.
    """

    def __init__(self, mask, image_shape):
        mask = np.array(mask, dtype=bool)
        if mask.ndim != 2:
            raise ValueError("mask must be 2-D")
        c, h, w = (int(s) for s in image_shape)
        if mask.shape != (h, w):
            raise ValueError(f"mask shape {mask.shape} does not match image {(h, w)}")
        kept = int(mask.sum())
        if kept == 0:
            raise ValueError("mask keeps no pixels")
        self.mask = _freeze(mask)
        self.kept = kept
        self.input_shape = (c, h, w)
        self.output_shape = (c, kept)

    def _apply(self, x):
        return x[:, self.mask]

    def _apply_adjoint(self, r):
        out = np.zeros(self.input_shape)
        out[:, self.mask] = r
        return out

    def _solve_gram(self, r, eta):
        return r / (1.0 + eta)

    def apply_reg_pinv(self, z, eta):
        # Tight-frame shortcut: A^T z / (1 + eta), exact.
        z = np.asarray(z, dtype=float)
        _check_shape("measurement", z, self.output_shape)
        if eta < 0:
            raise ValueError(f"eta must be nonnegative, got {eta}")
        return self._apply_adjoint(z) / (1.0 + eta)


class DenseOperator(LinearOperator):
    """Explicit m x n matrix, for small instances and test oracles.

    ``input_shape``/``output_shape`` default to flat vectors but can be
    any shapes with matching element counts.
    """

    def __init__(self, matrix, input_shape=None, output_shape=None):
        matrix = np.array(matrix, dtype=float)
        if matrix.ndim != 2:
            raise ValueError("matrix must be 2-D")
        if not np.isfinite(matrix).all():
            raise ValueError("matrix contains non-finite entries")
        m, n = matrix.shape
        if n > DENSE_SIZE_CAP:
            raise ValueError(f"dense operators are capped at n <= {DENSE_SIZE_CAP}")
        self.matrix = _freeze(matrix)
        self.input_shape = (n,) if input_shape is None else tuple(input_shape)
        self.output_shape = (m,) if output_shape is None else tuple(output_shape)
        if int(np.prod(self.input_shape)) != n or int(np.prod(self.output_shape)) != m:
            raise ValueError("shapes do not match the matrix dimensions")
        self._gram_matrix = None

    def _apply(self, x):
        return (self.matrix @ x.ravel()).reshape(self.output_shape)

    def _apply_adjoint(self, r):
        return (self.matrix.T @ r.ravel()).reshape(self.input_shape)

    def _gram(self):
        # Lazy and idempotent; safe under the GIL.
        if self._gram_matrix is None:
            self._gram_matrix = self.matrix @ self.matrix.T
        return self._gram_matrix

    def _solve_gram(self, r, eta):
        g = self._gram() + eta * np.eye(self.matrix.shape[0])
        if eta == 0.0:
            try:
                np.linalg.cholesky(g)
            except np.linalg.LinAlgError:
                raise SingularOperatorError(
                    "A A^T is not positive definite; eta=0 inversion is singular"
                ) from None
        return np.linalg.solve(g, r.ravel()).reshape(self.output_shape)


@dataclass(frozen=True)
class CGResult:
    """Outcome of a conjugate-gradient solve."""

    x: np.ndarray
    converged: bool
    iterations: int
    residual_norm: float


def cg_solve(gram: Callable[[np.ndarray], np.ndarray], b: np.ndarray,
             tol: float = 1e-10, max_iters: int | None = None) -> CGResult:
    """Solve gram(u) = b by conjugate gradients, matrix-free.

    ``gram`` must be symmetric positive definite (any A A^T + eta I with
    eta > 0 qualifies). Stops when the residual drops below tol * ||b||;
    if the iteration budget runs out, the best iterate seen is returned
    with ``converged=False`` rather than raising.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    b = np.asarray(b, dtype=float)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return CGResult(np.zeros_like(b), True, 0, 0.0)
    if max_iters is None:
        max_iters = b.size

    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(np.vdot(r, r))
    best_x, best_res = x.copy(), b_norm
    for k in range(1, max_iters + 1):
        gp = gram(p)
        if not np.isfinite(gp).all():
            raise NumericalError(f"non-finite values in gram application at iteration {k}")
        denom = float(np.vdot(p, gp))
        if denom <= 0 or not np.isfinite(denom):
            raise NumericalError(f"gram operator is not positive definite (p^T G p = {denom})")
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * gp
        rs_new = float(np.vdot(r, r))
        res = np.sqrt(rs_new)
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= tol * b_norm:
            return CGResult(x, True, k, res)
        p = r + (rs_new / rs) * p
        rs = rs_new
    return CGResult(best_x, False, max_iters, best_res)


def estimate_spectral_norm(op: LinearOperator, n_iters: int = 50, seed: int = 0) -> float:
    """Largest singular value of ``op`` by power iteration on A^T A."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.input_shape)
    v /= np.linalg.norm(v)
    for _ in range(n_iters):
        w = op.apply_adjoint(op.apply(v))
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
    return float(np.linalg.norm(op.apply(v)))
