"""Gaussian denoisers D(x, sigma) and the external file-protocol adapter.

The built-ins are classical and analytically tractable, which is what
the verification suite needs: ``WienerMMSE`` is the exact posterior mean
under a stationary Gaussian prior, so every claim about the surrounding
restoration pipeline can be checked in closed form. A denoiser is any
callable ``(x, sigma) -> x_estimate``; the classes here are plain
callables with no mutable state, so they are thread-safe. The external
adapter isolates each call in its own temporary workspace.
"""

from __future__ import annotations

import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .io import read_tensor, write_tensor

__all__ = [
    "Identity",
    "GaussianSmooth",
    "WienerPrior",
    "WienerMMSE",
    "ExternalDenoiser",
    "ExternalDenoiserError",
    "make_denoiser",
]


class ExternalDenoiserError(RuntimeError):
    """An external denoiser command failed or produced malformed output."""


class Identity:
    """Returns the input unchanged for every noise level."""

    def __call__(self, x: np.ndarray, sigma: float) -> np.ndarray:
        _check_sigma(sigma)
        return x


class GaussianSmooth:
    """Circular Gaussian smoothing with bandwidth h = kappa * sigma.

    A heuristic denoiser: the smoothing kernel is built on the full
    image grid with periodic distances and normalized to unit sum, so
    the mean pixel value is preserved.
    """

    def __init__(self, kappa: float = 1.0):
        if kappa <= 0:
            raise ValueError(f"kappa must be positive, got {kappa}")
        self.kappa = float(kappa)

    def __call__(self, x: np.ndarray, sigma: float) -> np.ndarray:
        _check_sigma(sigma)
        h = self.kappa * sigma
        if h < 1e-12:
            return x
        _, height, width = x.shape
        dy = np.minimum(np.arange(height), height - np.arange(height))
        dx = np.minimum(np.arange(width), width - np.arange(width))
        taps = np.exp(-(dy[:, None] ** 2 + dx[None, :] ** 2) / (2.0 * h**2))
        taps /= taps.sum()
        response = np.fft.fft2(taps)
        return np.fft.ifft2(np.fft.fft2(x, axes=(-2, -1)) * response, axes=(-2, -1)).real


@dataclass(frozen=True)
class WienerPrior:
    """Stationary Gaussian image prior: a power spectrum and a mean image.

    ``spectrum`` is a nonnegative (height, width) array over the FFT
    frequency grid and must be symmetric under frequency negation so
    that sampled images are real. ``mean`` may be a scalar or an image.
    """

    spectrum: np.ndarray
    mean: float | np.ndarray = 0.0

    def __post_init__(self):
        spec = np.asarray(self.spectrum, dtype=float)
        object.__setattr__(self, "spectrum", spec)
        if spec.ndim != 2:
            raise ValueError("spectrum must be a 2-D array")
        if np.any(spec < 0) or not np.isfinite(spec).all():
            raise ValueError("spectrum must be finite and nonnegative")
        flipped = spec[tuple(np.meshgrid(-np.arange(spec.shape[0]) % spec.shape[0],
                                         -np.arange(spec.shape[1]) % spec.shape[1],
                                         indexing="ij"))]
        if not np.allclose(spec, flipped, rtol=1e-10, atol=1e-12):
            raise ValueError("spectrum must be symmetric under frequency negation")

    @staticmethod
    def smooth_default(shape, amplitude: float = 1.0) -> "WienerPrior":
        """Prior with spectrum amplitude / (1 + |f|^2), f in integer cycles per image."""
        height, width = shape
        fy = np.fft.fftfreq(height, d=1.0 / height)
        fx = np.fft.fftfreq(width, d=1.0 / width)
        spectrum = amplitude / (1.0 + fy[:, None] ** 2 + fx[None, :] ** 2)
        return WienerPrior(spectrum=spectrum)

    def mean_image(self, channels: int) -> np.ndarray:
        shape = (channels,) + self.spectrum.shape
        return np.broadcast_to(np.asarray(self.mean, dtype=float), shape)

    def sample(self, rng: np.random.Generator, channels: int = 1) -> np.ndarray:
        """Draw an image from the prior (spectral coloring of white noise)."""
        white = rng.standard_normal((channels,) + self.spectrum.shape)
        colored = np.fft.ifft2(
            np.sqrt(self.spectrum) * np.fft.fft2(white, axes=(-2, -1)), axes=(-2, -1)
        ).real
        return self.mean_image(channels) + colored


class WienerMMSE:
    """Exact posterior-mean denoiser under a :class:`WienerPrior`.

    Per frequency f: mean(f) + p(f) / (p(f) + sigma^2) * (x(f) - mean(f)).
    With ``prior=None`` the smooth default prior for the input's grid is
    used. sigma = 0 returns the input untouched.
    """

    def __init__(self, prior: WienerPrior | None = None):
        self.prior = prior

    def __call__(self, x: np.ndarray, sigma: float) -> np.ndarray:
        _check_sigma(sigma)
        if sigma == 0.0:
            return x
        prior = self.prior if self.prior is not None else WienerPrior.smooth_default(x.shape[1:])
        if prior.spectrum.shape != x.shape[1:]:
            raise ValueError(
                f"prior grid {prior.spectrum.shape} does not match image {x.shape[1:]}"
            )
        mean = prior.mean_image(x.shape[0])
        shrink = prior.spectrum / (prior.spectrum + sigma**2)
        centered = np.fft.fft2(x - mean, axes=(-2, -1))
        return mean + np.fft.ifft2(shrink * centered, axes=(-2, -1)).real


class ExternalDenoiser:
    """Runs ``<cmd> <input.pgt> <output.pgt> <sigma>`` in a private workspace.

    The input tensor is written to a fresh temporary directory, the
    command is invoked with the two file paths and the noise level
    appended, and the output tensor is read back and shape-checked.
    Unique directories keep concurrent calls isolated.
    """

    def __init__(self, cmd, timeout: float = 120.0):
        if isinstance(cmd, str):
            cmd = shlex.split(cmd)
        self.cmd = tuple(str(part) for part in cmd)
        if not self.cmd:
            raise ValueError("external denoiser command is empty")
        self.timeout = timeout

    def __call__(self, x: np.ndarray, sigma: float) -> np.ndarray:
        _check_sigma(sigma)
        workspace = Path(tempfile.mkdtemp(prefix="pgrestore-denoise-"))
        try:
            in_path = workspace / "input.pgt"
            out_path = workspace / "output.pgt"
            write_tensor(in_path, x)
            argv = list(self.cmd) + [str(in_path), str(out_path), repr(float(sigma))]
            try:
                proc = subprocess.run(
                    argv, capture_output=True, text=True, timeout=self.timeout
                )
            except OSError as exc:
                raise ExternalDenoiserError(f"could not launch {argv[0]!r}: {exc}") from exc
            except subprocess.TimeoutExpired as exc:
                raise ExternalDenoiserError(f"{argv[0]!r} timed out after {self.timeout}s") from exc
            if proc.returncode != 0:
                raise ExternalDenoiserError(
                    f"{argv[0]!r} exited with status {proc.returncode}; "
                    f"stderr: {proc.stderr.strip()[:500]}"
                )
            try:
                out = read_tensor(out_path)
            except (OSError, ValueError) as exc:
                raise ExternalDenoiserError(f"malformed denoiser output: {exc}") from exc
            if out.shape != x.shape:
                raise ExternalDenoiserError(
                    f"denoiser returned shape {out.shape}, expected {x.shape}"
                )
            return out
        finally:
            shutil.rmtree(workspace, ignore_errors=True)


def _check_sigma(sigma: float) -> None:
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")


def make_denoiser(spec: str, prior: WienerPrior | None = None):
    """Build a denoiser from a CLI-style spec string.

    Accepted forms: "identity", "wiener", "gauss", "gauss:<kappa>",
    "external:<command line>".
    """
    if spec == "identity":
        return Identity()
    if spec == "wiener":
        return WienerMMSE(prior)
    if spec == "gauss":
        return GaussianSmooth()
    if spec.startswith("gauss:"):
        return GaussianSmooth(kappa=float(spec.split(":", 1)[1]))
    if spec.startswith("external:"):
        return ExternalDenoiser(spec.split(":", 1)[1])
    raise ValueError(f"unknown denoiser spec {spec!r}")
