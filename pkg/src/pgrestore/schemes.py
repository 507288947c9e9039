"""Restoration loops: deterministic IDPG and its sampling variant DDPG.

Both loops alternate a Gaussian denoiser with a guidance step whose
direction moves from back-projection to least squares as iterations
proceed (see :mod:`pgrestore.guidance`). IDPG is fully deterministic;
its endpoint configurations reproduce IDBP (pure BP, delta = 0) and a
plain proximal-gradient LS scheme (delta = 1). DDPG re-noises each
guided estimate with a seeded mix of the effective predicted noise and
fresh Gaussian noise.

Conventions baked in here and surfaced in the docstrings:

* Iterations count t = T, ..., 1; schedule arrays of length T are
  indexed by t - 1 and ``alpha_bar`` has length T + 1 with entry 0
  equal to exactly 1.
* IDPG starts from the regularized back-projection of the measurement
  and hands the denoiser noise levels sqrt(1 - abar_t) / sqrt(abar_t)
  (the schedule's noise-to-signal ratio, keeping it scale-free).
* DDPG calls the denoiser on x_t / sqrt(abar_t) at that same level,
  which matches estimating the injected noise and converting it to a
  clean-image estimate.
* Intermediate estimates are never clamped; clamping to [0, 1] is left
  to image export. The effective predicted noise is likewise computed
  from the unclamped guided estimate.
* One seeded random stream per run, consumed in a fixed order: the
  initial draw first, then one fresh-noise draw per iteration (drawn
  even when its weight is zero), so runs are reproducible bit for bit.

A single run is sequential; concurrent runs share nothing mutable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .guidance import (
    GuidanceConfig,
    delta_schedule,
    eta_from_noise,
    g_delta,
    mu_schedule,
    wls_objective,
)
from .linops import LinearOperator

__all__ = [
    "DiffusionSchedule",
    "make_ddpm_schedule",
    "x0_from_eps",
    "eps_effective",
    "SchemeConfig",
    "make_scheme_config",
    "RunTrace",
    "idpg_run",
    "ddpg_run",
    "run_scheme",
    "METHODS",
    "Denoiser",
]

METHODS = ("idpg", "idbp", "pgm_ls", "ddpg")

# A denoiser is any callable D(x, sigma) -> estimate of the clean image.
Denoiser = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class DiffusionSchedule:
    """Noise schedule: per-step beta and the cumulative products alpha_bar.

    ``beta[i]`` is the step-t = i + 1 variance increment;
    ``alpha_bar[t]`` equals prod_{s<=t}(1 - beta_s) with alpha_bar[0] = 1.
    """

    beta: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        abar = np.asarray(self.alpha_bar, dtype=float)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha_bar", abar)
        if beta.ndim != 1 or len(beta) < 1:
            raise ValueError("beta must be a non-empty 1-D array")
        if np.any(beta <= 0) or np.any(beta > 1):
            raise ValueError("beta values must lie in (0, 1]")
        if np.any(np.diff(beta) < 0):
            raise ValueError("beta must be non-decreasing")
        if len(abar) != len(beta) + 1 or abar[0] != 1.0:
            raise ValueError("alpha_bar must have length T + 1 and start at 1")
        if np.any(np.diff(abar) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        expected = np.concatenate(([1.0], np.cumprod(1.0 - beta)))
        if not np.allclose(abar, expected, rtol=1e-12, atol=0):
            raise ValueError("alpha_bar is inconsistent with beta")

    @property
    def T(self) -> int:
        return len(self.beta)

    @property
    def sigma(self) -> np.ndarray:
        """Noise levels sqrt(1 - alpha_bar_t), t = 0..T."""
        return np.sqrt(1.0 - self.alpha_bar)


def make_ddpm_schedule(T: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> DiffusionSchedule:
    """Linearly spaced beta schedule (inclusive endpoints) and its alpha_bar."""
    if T < 1:
        raise ValueError(f"T must be at least 1, got {T}")
    if not 0 < beta_start <= beta_end <= 1:
        raise ValueError(f"need 0 < beta_start <= beta_end <= 1, got {(beta_start, beta_end)}")
    beta = np.linspace(beta_start, beta_end, T)
    alpha_bar = np.concatenate(([1.0], np.cumprod(1.0 - beta)))
    return DiffusionSchedule(beta=beta, alpha_bar=alpha_bar)


def x0_from_eps(x_t: np.ndarray, eps: np.ndarray, alpha_bar_t: float) -> np.ndarray:
    """Clean-image estimate (x_t - sqrt(1 - abar) eps) / sqrt(abar)."""
    if not 0.0 < alpha_bar_t <= 1.0:
        raise ValueError(f"alpha_bar_t must lie in (0, 1], got {alpha_bar_t}")
    return (x_t - np.sqrt(1.0 - alpha_bar_t) * eps) / np.sqrt(alpha_bar_t)


def eps_effective(x_t: np.ndarray, x_clean: np.ndarray, alpha_bar_t: float) -> np.ndarray:
    """Noise implied by a clean estimate: (x_t - sqrt(abar) x_clean) / sqrt(1 - abar)."""
    if not 0.0 < alpha_bar_t < 1.0:
        raise ValueError(
            f"alpha_bar_t must lie strictly inside (0, 1), got {alpha_bar_t}"
        )
    return (x_t - np.sqrt(alpha_bar_t) * x_clean) / np.sqrt(1.0 - alpha_bar_t)


@dataclass(frozen=True)
class SchemeConfig:
    """Everything a restoration run needs besides the operator and denoiser."""

    method: str
    schedule: DiffusionSchedule
    guidance: GuidanceConfig
    w: np.ndarray
    zeta: float = 0.5
    seed: int = 0
    gamma: float | None = None
    step_size_policy: str = "unit"

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError(f"zeta must lie in [0, 1], got {self.zeta}")
        if self.guidance.steps != self.schedule.T or len(self.w) != self.schedule.T:
            raise ValueError("schedule, guidance and w lengths disagree")
        if self.method == "idbp" and np.any(self.guidance.delta != 0.0):
            raise ValueError("idbp requires delta identically 0")
        if self.method == "pgm_ls" and np.any(self.guidance.delta != 1.0):
            raise ValueError("pgm_ls requires delta identically 1")

    @property
    def T(self) -> int:
        return self.schedule.T


def make_scheme_config(
    method: str,
    schedule: DiffusionSchedule,
    sigma_e: float,
    *,
    gamma: float = 8.0,
    eta_tilde: float = 0.7,
    eta: float | None = None,
    c: float = 1.0,
    zeta: float = 0.5,
    seed: int = 0,
    step_size_policy: str = "unit",
) -> SchemeConfig:
    """Assemble a SchemeConfig, deriving the schedules a method implies.

    idpg/ddpg mix BP and LS with delta_t = alpha_bar_t ** gamma when
    sigma_e > 0 (delta = 0, w = 1 otherwise); idbp pins delta = 0 and
    pgm_ls pins delta = 1. The BP regularizer defaults to the noise
    scaling max(1e-4, (2 sigma_e)^2 eta_tilde) unless ``eta`` is given.
    """
    T = schedule.T
    if method == "idbp":
        delta, w = np.zeros(T), np.ones(T)
    elif method == "pgm_ls":
        delta, w = np.ones(T), np.ones(T)
    elif method in ("idpg", "ddpg"):
        delta, w = delta_schedule(schedule.alpha_bar[1:], gamma, sigma_e)
    else:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if eta is None:
        eta = eta_from_noise(sigma_e, eta_tilde)
    mu = mu_schedule(schedule.alpha_bar, step_size_policy)
    guidance = GuidanceConfig(eta=float(eta), c=float(c), mu=mu, delta=delta)
    return SchemeConfig(
        method=method,
        schedule=schedule,
        guidance=guidance,
        w=w,
        zeta=float(zeta),
        seed=int(seed),
        gamma=float(gamma),
        step_size_policy=step_size_policy,
    )


@dataclass
class RunTrace:
    """Per-iteration diagnostics, recorded in loop order t = T, ..., 1.

    ``objective``/``residual`` are evaluated at the denoised estimate
    x_{0|t}; the ``*_after`` fields at the guided estimate that follows.
    """

    t: np.ndarray
    delta: np.ndarray
    objective: np.ndarray
    residual: np.ndarray
    objective_after: np.ndarray
    residual_after: np.ndarray
    final_estimate: np.ndarray = field(repr=False, default=None)

    def lines(self) -> list[str]:
        return [
            f"{int(t)} {d:.12g} {o:.12g} {r:.12g}"
            for t, d, o, r in zip(self.t, self.delta, self.objective, self.residual)
        ]

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.lines()) + "\n")


class _TraceBuilder:
    def __init__(self, op, y, cfg):
        self.op, self.y, self.g = op, y, cfg.guidance
        self.rows = []

    def record(self, t, delta_t, x_before, x_after):
        obj = wls_objective(self.op, x_before, self.y, delta_t, self.g.eta, self.g.c)
        res = float(np.linalg.norm(self.op.apply(x_before) - self.y))
        obj_after = wls_objective(self.op, x_after, self.y, delta_t, self.g.eta, self.g.c)
        res_after = float(np.linalg.norm(self.op.apply(x_after) - self.y))
        self.rows.append((t, delta_t, obj, res, obj_after, res_after))

    def build(self, final) -> RunTrace:
        cols = list(zip(*self.rows))
        return RunTrace(
            t=np.array(cols[0], dtype=int),
            delta=np.array(cols[1]),
            objective=np.array(cols[2]),
            residual=np.array(cols[3]),
            objective_after=np.array(cols[4]),
            residual_after=np.array(cols[5]),
            final_estimate=final,
        )


def _denoiser_step(denoiser, x, sigma, t):
    try:
        return np.asarray(denoiser(x, sigma), dtype=float)
    except Exception as exc:
        raise RuntimeError(f"denoiser failed at iteration t={t}: {exc}") from exc


def idpg_run(denoiser: Denoiser, op: LinearOperator, y, cfg: SchemeConfig):
    """Deterministic denoise-then-guide loop; also runs idbp and pgm_ls.

    Starts from the regularized back-projection of ``y`` and returns the
    guided estimate produced by the final (t = 1) iteration, together
    with the run trace. Deterministic given its arguments.
    """
    y = np.asarray(y, dtype=float)
    sched, g = cfg.schedule, cfg.guidance
    x = op.apply_reg_pinv(y, g.eta)
    tracer = _TraceBuilder(op, y, cfg)
    for t in range(sched.T, 0, -1):
        abar = sched.alpha_bar[t]
        sigma_t = float(np.sqrt((1.0 - abar) / abar))
        x0 = _denoiser_step(denoiser, x, sigma_t, t)
        delta_t = float(g.delta[t - 1])
        x = x0 - g.mu[t - 1] * g_delta(op, x0, y, delta_t, g.eta, g.c)
        tracer.record(t, delta_t, x0, x)
    return x, tracer.build(x)


def ddpg_run(denoiser: Denoiser, op: LinearOperator, y, cfg: SchemeConfig):
    """Sampling loop: guided denoising with seeded re-noising.

    Per iteration, the clean estimate from the denoiser is guided as in
    IDPG, the effective predicted noise is recomputed from the guided
    estimate, and the next iterate blends signal and a
    w_t sqrt(1 - zeta) / sqrt(zeta) mix of effective and fresh noise.
    The random stream (initial draw, then one draw per iteration) is the
    only source of randomness, so equal seeds give bit-identical runs.
    """
    y = np.asarray(y, dtype=float)
    sched, g = cfg.schedule, cfg.guidance
    rng = np.random.default_rng(cfg.seed)
    x = rng.standard_normal(op.input_shape)
    sqrt_keep = np.sqrt(1.0 - cfg.zeta)
    sqrt_fresh = np.sqrt(cfg.zeta)
    tracer = _TraceBuilder(op, y, cfg)
    for t in range(sched.T, 0, -1):
        abar = sched.alpha_bar[t]
        abar_prev = sched.alpha_bar[t - 1]
        sigma_t = float(np.sqrt((1.0 - abar) / abar))
        x0 = _denoiser_step(denoiser, x / np.sqrt(abar), sigma_t, t)
        delta_t = float(g.delta[t - 1])
        x_guided = x0 - g.mu[t - 1] * g_delta(op, x0, y, delta_t, g.eta, g.c)
        eps_hat = eps_effective(x, x_guided, abar)
        eps = rng.standard_normal(op.input_shape)
        noise = cfg.w[t - 1] * sqrt_keep * eps_hat + sqrt_fresh * eps
        tracer.record(t, delta_t, x0, x_guided)
        x = np.sqrt(abar_prev) * x_guided + np.sqrt(1.0 - abar_prev) * noise
    return x, tracer.build(x)


def run_scheme(denoiser: Denoiser, op: LinearOperator, y, cfg: SchemeConfig):
    """Dispatch on cfg.method; idbp and pgm_ls are IDPG endpoint configs."""
    if cfg.method == "ddpg":
        return ddpg_run(denoiser, op, y, cfg)
    return idpg_run(denoiser, op, y, cfg)
