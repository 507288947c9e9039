"""Data-fidelity guidance directions and their schedules.

The restoration loops steer each denoised estimate with a direction that
is a convex combination of two endpoints:

    g_bp(x) = A^T (A A^T + eta I)^-1 (A x - y)   back-projection
    g_ls(x) = c A^T (A x - y)                    least squares
    g_delta = (1 - delta) g_bp + delta g_ls

``delta`` moves from ~0 early in a run (BP: strong data consistency,
fast progress) to ~1 at the end (LS: robust to measurement noise).
``g_delta`` is the exact gradient of a weighted least-squares term whose
weight interpolates between the Gram inverse and a scaled identity;
``wls_objective`` evaluates that term without forming matrix square
roots.

All functions are pure and safe for concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linops import LinearOperator, estimate_spectral_norm

__all__ = [
    "ETA_FLOOR",
    "GuidanceConfig",
    "g_bp",
    "g_ls",
    "g_delta",
    "wls_objective",
    "delta_schedule",
    "eta_from_noise",
    "mu_schedule",
    "default_ls_scale",
]

# Lower bound applied to the BP regularizer derived from the noise level.
ETA_FLOOR = 1e-4

_MONOTONE_SLACK = 1e-12


@dataclass(frozen=True)
class GuidanceConfig:
    """Per-run guidance scalars and schedules.

    ``mu`` and ``delta`` are arrays of length T; entry i applies at
    iteration t = i + 1, so both run from the end of the scheme (t = 1)
    to its start (t = T). ``delta`` must be non-increasing along t,
    i.e. the mix moves monotonically from BP toward LS as t decreases.
    """

    eta: float
    c: float
    mu: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "delta", np.asarray(self.delta, dtype=float))
        if self.eta < 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if self.c <= 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.mu.ndim != 1 or self.delta.ndim != 1 or len(self.mu) != len(self.delta):
            raise ValueError("mu and delta must be 1-D arrays of equal length")
        # The ddim-ratio policy yields mu = 0 at t = 1, so zero is allowed.
        if np.any(self.mu < 0):
            raise ValueError("step sizes must be nonnegative")
        if np.any(self.delta < 0) or np.any(self.delta > 1):
            raise ValueError("delta values must lie in [0, 1]")
        if np.any(np.diff(self.delta) > _MONOTONE_SLACK):
            raise ValueError("delta must be non-increasing in t")

    @property
    def steps(self) -> int:
        return len(self.delta)


def _residual(op: LinearOperator, x, y):
    return op.apply(x) - np.asarray(y, dtype=float)


def g_bp(op: LinearOperator, x, y, eta: float) -> np.ndarray:
    """Back-projection direction A^T (A A^T + eta I)^-1 (A x - y)."""
    return op.apply_reg_pinv(_residual(op, x, y), eta)


def g_ls(op: LinearOperator, x, y, c: float) -> np.ndarray:
    """Scaled least-squares gradient c A^T (A x - y)."""
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    return c * op.apply_adjoint(_residual(op, x, y))


def g_delta(op: LinearOperator, x, y, delta: float, eta: float, c: float) -> np.ndarray:
    """Convex combination (1 - delta) g_bp + delta g_ls."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    if delta == 0.0:
        return g_bp(op, x, y, eta)
    if delta == 1.0:
        return g_ls(op, x, y, c)
    r = _residual(op, x, y)
    bp = op.apply_reg_pinv(r, eta)
    ls = c * op.apply_adjoint(r)
    return (1.0 - delta) * bp + delta * ls


def wls_objective(op: LinearOperator, x, y, delta: float, eta: float, c: float) -> float:
    """Weighted least-squares data term whose gradient is ``g_delta``.

    With r = A x - y and W = (1 - delta)(A A^T + eta I)^-1 + delta c I,
    returns (1/2) r^T W r, evaluated as a pair of inner products rather
    than through a matrix square root.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    r = _residual(op, x, y)
    rr = float(np.vdot(r, r))
    quad_bp = 0.0 if delta == 1.0 else float(np.vdot(r, op.solve_gram(r, eta)))
    return 0.5 * ((1.0 - delta) * quad_bp + delta * c * rr)


def delta_schedule(alpha_bar, gamma: float, sigma_e: float):
    """BP-to-LS mixing weights and noise-injection weights per iteration.

    For noisy observations, delta_t = alpha_bar_t ** gamma and the
    effective-noise weight w_t equals delta_t; without observation noise
    the mix stays at pure BP (delta = 0) and w = 1. The power is clamped
    to [0, 1] to absorb floating-point drift.
    """
    alpha_bar = np.asarray(alpha_bar, dtype=float)
    if np.any(alpha_bar <= 0) or np.any(alpha_bar > 1):
        raise ValueError("alpha_bar values must lie in (0, 1]")
    if np.any(np.diff(alpha_bar) > 0):
        raise ValueError("alpha_bar must be non-increasing in t")
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    if sigma_e < 0:
        raise ValueError(f"sigma_e must be nonnegative, got {sigma_e}")
    if sigma_e > 0:
        delta = np.clip(alpha_bar**gamma, 0.0, 1.0)
        return delta, delta.copy()
    return np.zeros_like(alpha_bar), np.ones_like(alpha_bar)


def eta_from_noise(sigma_e: float, eta_tilde: float) -> float:
    """BP regularizer scaled by the observation noise: max(1e-4, (2 sigma_e)^2 eta_tilde)."""
    if sigma_e < 0 or eta_tilde < 0:
        raise ValueError("sigma_e and eta_tilde must be nonnegative")
    return max(ETA_FLOOR, (2.0 * sigma_e) ** 2 * eta_tilde)


def mu_schedule(alpha_bar_full, policy: str) -> np.ndarray:
    """Step sizes per iteration for a named policy.

    ``alpha_bar_full`` is the length T+1 array with entry 0 equal to 1.
    "unit" returns mu_t = 1; "ddim-ratio" returns
    mu_t = (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t), which stays near 1
    and drops to 0 at the final step.
    """
    abar = np.asarray(alpha_bar_full, dtype=float)
    steps = len(abar) - 1
    if steps < 1:
        raise ValueError("need at least one step")
    if policy == "unit":
        return np.ones(steps)
    if policy == "ddim-ratio":
        return (1.0 - abar[:-1]) / (1.0 - abar[1:])
    raise ValueError(f"unknown step-size policy {policy!r}")


def default_ls_scale(op: LinearOperator, n_iters: int = 50, seed: int = 0) -> float:
    """LS scale c guaranteeing single-step descent: 1 when ||A|| <= 1, else 1/||A||^2."""
    lam1 = estimate_spectral_norm(op, n_iters=n_iters, seed=seed)
    if lam1 <= 1.0 + 1e-9:
        return 1.0
    return 1.0 / lam1**2
