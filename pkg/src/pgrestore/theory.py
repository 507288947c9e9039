"""Closed-form Tikhonov analysis and numerical verification of the
mathematical properties the guidance design rests on.

Small dense problems with a quadratic prior admit exact estimators and
exact bias/variance decompositions in the shared eigenbasis of A^T A and
D^T D. This module evaluates those spectral formulas, cross-checks them
with Monte-Carlo draws through the estimator itself, and packages the
individual properties (gradient zero-set equivalence, preconditioner
factorization, single-step descent, Hessian conditioning, and the
bias/variance orderings) as a battery the CLI ``verify`` subcommand and
the test suite both run.

All computations are pure; Monte-Carlo draws use isolated seeded
generators.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .guidance import g_delta, g_ls, wls_objective
from .linops import DenseOperator

__all__ = [
    "TikhonovProblem",
    "random_conforming_problem",
    "data_weight_matrix",
    "tikhonov_estimate",
    "bias_variance_closed_form",
    "MCBiasVariance",
    "mc_bias_variance",
    "TheoremReport",
    "verify_theorem1",
    "condition_numbers",
    "Claim2Result",
    "verify_claim2",
    "CheckResult",
    "claim1_check",
    "claim2_check",
    "claim3_check",
    "claim4_check",
    "theorem1_check",
    "run_verifier_battery",
    "BATTERY_CHECKS",
]

_MODES = ("ls", "bp", "wls")
_EIGENBASIS_TOL = 1e-8


@dataclass(frozen=True)
class TikhonovProblem:
    """A small dense estimation instance with quadratic prior.

    The estimator minimizes 0.5 ||W^(1/2)(A x - y)||^2 +
    (beta_prior / 2) ||D x||^2, with W chosen per data-fidelity mode.
    ``delta`` and ``c`` parameterize the WLS weight; ``eta`` regularizes
    the Gram inverse inside the BP/WLS weights (0 for the theorem
    setting). ``beta_prior`` is the prior weight, unrelated to the
    diffusion schedule's beta.
    """

    a_matrix: np.ndarray
    d_matrix: np.ndarray
    beta_prior: float
    sigma_e: float
    x_star: np.ndarray
    delta: float
    eta: float = 0.0
    c: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.a_matrix, dtype=float)
        d = np.asarray(self.d_matrix, dtype=float)
        x = np.asarray(self.x_star, dtype=float)
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "d_matrix", d)
        object.__setattr__(self, "x_star", x)
        if a.ndim != 2 or a.shape[0] > a.shape[1]:
            raise ValueError("A must be m x n with m <= n")
        m, n = a.shape
        if d.shape != (n, n):
            raise ValueError(f"D must be {n} x {n}, got {d.shape}")
        if x.shape != (n,):
            raise ValueError(f"x_star must have shape ({n},), got {x.shape}")
        if self.beta_prior <= 0:
            raise ValueError("beta_prior must be positive")
        if self.sigma_e < 0 or self.eta < 0 or self.c <= 0:
            raise ValueError("sigma_e, eta must be nonnegative and c positive")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        dtd = d.T @ d
        if np.linalg.eigvalsh(dtd).min() <= 1e-12:
            raise ValueError("D^T D must be positive definite")
        ata = a.T @ a
        commutator = ata @ dtd - dtd @ ata
        scale = np.linalg.norm(ata) * np.linalg.norm(dtd)
        if np.linalg.norm(commutator) > _EIGENBASIS_TOL * max(scale, 1e-30):
            raise ValueError("A^T A and D^T D do not share an eigenbasis")

    @property
    def shape(self) -> tuple[int, int]:
        return self.a_matrix.shape


def random_conforming_problem(
    rng: np.random.Generator,
    m: int | None = None,
    n: int | None = None,
    delta: float | None = None,
    sigma_e: float | None = None,
) -> TikhonovProblem:
    """Draw an instance satisfying the theorem assumptions by construction.

    A = U diag(lambda) V^T with random orthogonal factors and singular
    values uniform in [0.1, 1] (resampled until they spread by at least
    0.05); D = V diag(gamma) V^T with gamma uniform in [0.5, 2], so
    D^T D shares A's right eigenbasis and is positive definite.
    """
    if m is None:
        m = int(rng.integers(3, 9))
    if n is None:
        n = int(rng.integers(m, 13))
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got {(m, n)}")
    u, _ = np.linalg.qr(rng.standard_normal((m, m)))
    v, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = rng.uniform(0.1, 1.0, size=m)
    while m > 1 and lam.max() - lam.min() < 0.05:
        lam = rng.uniform(0.1, 1.0, size=m)
    a = u @ np.diag(lam) @ v[:, :m].T
    gamma = rng.uniform(0.5, 2.0, size=n)
    d = v @ np.diag(gamma) @ v.T
    return TikhonovProblem(
        a_matrix=a,
        d_matrix=d,
        beta_prior=float(rng.uniform(0.1, 1.0)),
        sigma_e=float(rng.uniform(0.02, 0.3)) if sigma_e is None else float(sigma_e),
        x_star=rng.standard_normal(n),
        delta=float(rng.uniform(0.1, 0.9)) if delta is None else float(delta),
    )


def _normalize_mode(mode: str) -> str:
    key = mode.lower()
    if key not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    return key


def data_weight_matrix(p: TikhonovProblem, mode: str) -> np.ndarray:
    """The data-term weight W: I (ls), regularized Gram inverse (bp),
    or their delta/c convex combination (wls)."""
    mode = _normalize_mode(mode)
    m = p.shape[0]
    if mode == "ls":
        return np.eye(m)
    gram = p.a_matrix @ p.a_matrix.T + p.eta * np.eye(m)
    gram_inv = np.linalg.inv(gram)
    if mode == "bp":
        return gram_inv
    return (1.0 - p.delta) * gram_inv + p.delta * p.c * np.eye(m)


def tikhonov_estimate(p: TikhonovProblem, mode: str, y: np.ndarray) -> np.ndarray:
    """Exact minimizer (A^T W A + beta D^T D)^-1 A^T W y."""
    w = data_weight_matrix(p, mode)
    hessian = p.a_matrix.T @ w @ p.a_matrix + p.beta_prior * p.d_matrix.T @ p.d_matrix
    y = np.asarray(y, dtype=float)
    if y.shape[0] != p.shape[0]:
        raise ValueError(f"y must have {p.shape[0]} rows, got shape {y.shape}")
    return np.linalg.solve(hessian, p.a_matrix.T @ w @ y)


def _spectral_data(p: TikhonovProblem):
    """Singular values, prior eigenvalues paired in A's right basis, and V.

    Within a group of (numerically) equal singular values the SVD basis
    is arbitrary, so the row-space blocks are rotated to diagonalize
    D^T D there; the null-space modes never need per-mode prior
    eigenvalues.
    """
    _, lam, vt = np.linalg.svd(p.a_matrix)
    v = vt.T.copy()
    dtd = p.d_matrix.T @ p.d_matrix
    m = p.shape[0]
    start = 0
    while start < m:
        stop = start + 1
        while stop < m and abs(lam[stop] - lam[start]) <= 1e-9 * max(1.0, lam[start]):
            stop += 1
        if stop - start > 1:
            block = v[:, start:stop].T @ dtd @ v[:, start:stop]
            _, rotation = np.linalg.eigh(block)
            v[:, start:stop] = v[:, start:stop] @ rotation
        start = stop
    gamma2 = np.einsum("ji,jk,ki->i", v[:, :m], dtd, v[:, :m])
    leak = dtd @ v[:, :m] - v[:, :m] * gamma2
    if np.linalg.norm(leak) > _EIGENBASIS_TOL * max(np.linalg.norm(dtd), 1e-30):
        raise ValueError("eigenbasis mismatch: D^T D is not diagonal on A's right singular vectors")
    return lam, gamma2, v


def _mode_weights(mode: str, lam: np.ndarray, delta: float, c: float) -> np.ndarray:
    """Eigenvalues s_i of W on A's left singular basis (eta = 0 forms)."""
    if mode == "ls":
        return np.ones_like(lam)
    if mode == "bp":
        return 1.0 / lam**2
    return (1.0 - delta) / lam**2 + delta * c


def bias_variance_closed_form(p: TikhonovProblem, mode: str) -> tuple[float, float]:
    """Exact squared bias and variance of the mode's estimator.

    Spectral sums in the shared eigenbasis: with s_i the weight
    eigenvalues and coordinates z = V^T x*,

        b^2 = sum_i (beta g_i^2 / (l_i^2 s_i + beta g_i^2))^2 z_i^2
              + ||null-space part of x*||^2
        v   = sigma_e^2 sum_i l_i^2 s_i^2 / (l_i^2 s_i + beta g_i^2)^2

    The null-space bias term counts the energy of x* that no data term
    can see. Uses the eta = 0 weight forms, matching the theorem.
    """
    mode = _normalize_mode(mode)
    lam, gamma2, v = _spectral_data(p)
    m = p.shape[0]
    s = _mode_weights(mode, lam, p.delta, p.c)
    coeffs = p.beta_prior * gamma2 / (lam**2 * s + p.beta_prior * gamma2)
    z_range = v[:, :m].T @ p.x_star
    null_energy = float(p.x_star @ p.x_star - z_range @ z_range)
    bias_sq = float(np.sum(coeffs**2 * z_range**2)) + max(null_energy, 0.0)
    var = float(
        p.sigma_e**2
        * np.sum(lam**2 * s**2 / (lam**2 * s + p.beta_prior * gamma2) ** 2)
    )
    return bias_sq, var


@dataclass(frozen=True)
class MCBiasVariance:
    """Monte-Carlo bias/variance estimates with delta-method standard errors."""

    bias_sq: float
    var: float
    mse: float
    se_bias_sq: float
    se_var: float
    se_mse: float
    n_draws: int


def mc_bias_variance(
    p: TikhonovProblem, mode: str, n_draws: int = 20000, seed: int = 0
) -> MCBiasVariance:
    """Estimate bias^2 and variance by running the estimator on noisy draws.

    Independent of the closed-form path: estimates come from batched
    calls through the estimator formula on y = A x* + e. The bias^2
    estimate subtracts the v/N inflation of the sample-mean distance,
    and standard errors come from per-draw statistics (delta method for
    the bias term), floored at a small relative value so exact matches
    with sigma_e = 0 remain comparable.
    """
    mode = _normalize_mode(mode)
    rng = np.random.default_rng(seed)
    w = data_weight_matrix(p, mode)
    hessian = p.a_matrix.T @ w @ p.a_matrix + p.beta_prior * p.d_matrix.T @ p.d_matrix
    backproject = np.linalg.solve(hessian, p.a_matrix.T @ w)  # n x m estimator matrix
    m = p.shape[0]
    y_clean = p.a_matrix @ p.x_star
    noise = p.sigma_e * rng.standard_normal((n_draws, m))
    estimates = (y_clean + noise) @ backproject.T  # n_draws x n
    center = estimates.mean(axis=0)
    deviations = estimates - center
    dev_sq = np.einsum("ij,ij->i", deviations, deviations)
    var_hat = float(dev_sq.sum() / max(n_draws - 1, 1))
    se_var = float(dev_sq.std(ddof=1) / np.sqrt(n_draws)) if n_draws > 1 else 0.0
    mean_err = center - p.x_star
    bias_sq_hat = float(mean_err @ mean_err) - var_hat / n_draws
    q = deviations @ mean_err
    se_bias = float(2.0 * q.std(ddof=1) / np.sqrt(n_draws)) if n_draws > 1 else 0.0
    err = estimates - p.x_star
    err_sq = np.einsum("ij,ij->i", err, err)
    mse_hat = float(err_sq.mean())
    se_mse = float(err_sq.std(ddof=1) / np.sqrt(n_draws)) if n_draws > 1 else 0.0
    floor = 1e-9
    return MCBiasVariance(
        bias_sq=bias_sq_hat,
        var=var_hat,
        mse=mse_hat,
        se_bias_sq=max(se_bias, floor * (1.0 + abs(bias_sq_hat))),
        se_var=max(se_var, floor * (1.0 + abs(var_hat))),
        se_mse=max(se_mse, floor * (1.0 + abs(mse_hat))),
        n_draws=n_draws,
    )


@dataclass(frozen=True)
class TheoremReport:
    """The six closed-form numbers and the two strict orderings."""

    bias_sq_bp: float
    bias_sq_wls: float
    bias_sq_ls: float
    var_bp: float
    var_wls: float
    var_ls: float
    bias_ordering: bool
    var_ordering: bool

    @property
    def passed(self) -> bool:
        return self.bias_ordering and self.var_ordering


def verify_theorem1(p: TikhonovProblem) -> TheoremReport:
    """Evaluate the bias/variance orderings b_BP < b_WLS < b_LS and
    v_LS < v_WLS < v_BP on a conforming instance.

    Raises ValueError naming the violated assumption when the instance
    does not satisfy them: (a) shared eigenbasis with D^T D positive
    definite (checked at construction), (b) singular values in (0, 1]
    and not all equal, (c) eta = 0 and c = 1; delta must lie strictly
    inside (0, 1) for strict orderings.
    """
    lam = np.linalg.svd(p.a_matrix, compute_uv=False)
    if np.any(lam <= 0) or np.any(lam > 1.0 + 1e-12):
        raise ValueError("assumption (b) violated: singular values must lie in (0, 1]")
    if lam.max() - lam.min() < 1e-12:
        raise ValueError("assumption (b) violated: singular values must not all be equal")
    if p.eta != 0.0:
        raise ValueError("assumption (c) violated: eta must be 0")
    if p.c != 1.0:
        raise ValueError("assumption (c) violated: c must be 1")
    if not 0.0 < p.delta < 1.0:
        raise ValueError("delta must lie strictly inside (0, 1)")
    b2_bp, v_bp = bias_variance_closed_form(p, "bp")
    b2_wls, v_wls = bias_variance_closed_form(p, "wls")
    b2_ls, v_ls = bias_variance_closed_form(p, "ls")
    return TheoremReport(
        bias_sq_bp=b2_bp,
        bias_sq_wls=b2_wls,
        bias_sq_ls=b2_ls,
        var_bp=v_bp,
        var_wls=v_wls,
        var_ls=v_ls,
        bias_ordering=b2_bp < b2_wls < b2_ls,
        var_ordering=v_ls < v_wls < v_bp,
    )


def condition_numbers(lam, delta: float, c: float) -> tuple[float, float, float]:
    """Condition numbers of the three data-term Hessians on A's row range.

    kappa_BP = 1, kappa_LS = l_1^2 / l_m^2, and
    kappa_WLS = ((1-delta) + delta c l_1^2) / ((1-delta) + delta c l_m^2).
    The ordering kappa_BP < kappa_WLS < kappa_LS is strict for delta
    strictly inside (0, 1); the formulas themselves accept the endpoint
    values, where WLS collapses onto BP or LS.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 1 or len(lam) < 2:
        raise ValueError("need at least two singular values")
    if np.any(lam <= 0):
        raise ValueError("degenerate singular values: all must be positive")
    if np.any(np.diff(lam) > 0):
        raise ValueError("singular values must be sorted in decreasing order")
    if lam[0] - lam[-1] < 1e-15:
        raise ValueError("degenerate singular values: must not all be equal")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    kappa_ls = float(lam[0] ** 2 / lam[-1] ** 2)
    kappa_wls = float(
        ((1.0 - delta) + delta * c * lam[0] ** 2)
        / ((1.0 - delta) + delta * c * lam[-1] ** 2)
    )
    return 1.0, kappa_wls, kappa_ls


@dataclass(frozen=True)
class Claim2Result:
    """Constructive preconditioner factorization residuals."""

    residual: float
    relative_residual: float
    p_matrix: np.ndarray


def verify_claim2(a_matrix, w_matrix) -> Claim2Result:
    """Construct P with A^T W A = P^(1/2) A^T A P^(1/2) and measure the residual.

    P extends W's eigenvalues (expressed on A's left singular basis) by
    ones on the null-space modes: P = V diag(w_eigs, 1, ..., 1) V^T.
    Requires W positive definite and commuting with A A^T.
    """
    a = np.asarray(a_matrix, dtype=float)
    w = np.asarray(w_matrix, dtype=float)
    m, n = a.shape
    if w.shape != (m, m):
        raise ValueError(f"W must be {m} x {m}, got {w.shape}")
    u, _, vt = np.linalg.svd(a)
    v = vt.T
    w_on_u = u.T @ w @ u
    off = w_on_u - np.diag(np.diag(w_on_u))
    if np.linalg.norm(off) > _EIGENBASIS_TOL * max(np.linalg.norm(w_on_u), 1e-30):
        raise ValueError("W does not commute with A A^T (beyond tolerance 1e-8)")
    w_eigs = np.diag(w_on_u)
    if np.any(w_eigs <= 0):
        raise ValueError("W must be positive definite")
    extended = np.concatenate([w_eigs, np.ones(n - m)])
    p_half = v @ np.diag(np.sqrt(extended)) @ v.T
    target = a.T @ w @ a
    residual = float(np.linalg.norm(target - p_half @ (a.T @ a) @ p_half))
    target_norm = float(np.linalg.norm(target))
    p_matrix = v @ np.diag(extended) @ v.T
    return Claim2Result(
        residual=residual,
        relative_residual=residual / max(target_norm, 1e-30),
        p_matrix=p_matrix,
    )


@dataclass(frozen=True)
class CheckResult:
    """One line of the verification report."""

    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name}: {status} ({self.detail})"


def _random_full_rank(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    a = rng.standard_normal((m, n))
    while np.linalg.svd(a, compute_uv=False).min() < 1e-3:
        a = rng.standard_normal((m, n))
    return a


def claim1_check(n_instances: int = 25, seed: int = 1100) -> CheckResult:
    """Zero sets of the preconditioned and plain gradients coincide."""
    tol = 1e-10
    for i in range(n_instances):
        rng = np.random.default_rng(seed + i)
        m = int(rng.integers(2, 7))
        n = int(rng.integers(m, 11))
        op = DenseOperator(_random_full_rank(rng, m, n))
        delta = float(rng.uniform(0.05, 0.95))
        eta = float(rng.choice([0.0, 0.1]))
        x_sol = rng.standard_normal(n)
        y = op.apply(x_sol)
        at_sol = [np.linalg.norm(g_delta(op, x_sol, y, delta, eta, 1.0)),
                  np.linalg.norm(g_ls(op, x_sol, y, 1.0))]
        x_off = x_sol + rng.standard_normal(n)
        off_sol = [np.linalg.norm(g_delta(op, x_off, y, delta, eta, 1.0)),
                   np.linalg.norm(g_ls(op, x_off, y, 1.0))]
        if max(at_sol) > tol or min(off_sol) <= tol:
            return CheckResult(
                "claim1", False,
                f"zero-set mismatch at instance seed {seed + i}: "
                f"at-solution norms {at_sol}, perturbed norms {off_sol}",
            )
    return CheckResult(
        "claim1", True,
        f"{n_instances}/{n_instances} instances: both gradients vanish exactly at "
        f"solutions and are nonzero at perturbed points (threshold {tol:g})",
    )


def claim2_check(n_pairs: int = 50, seed: int = 1200) -> CheckResult:
    """Constructive P reproduces A^T W A to relative 1e-8."""
    worst = 0.0
    for i in range(n_pairs):
        rng = np.random.default_rng(seed + i)
        m = int(rng.integers(2, 7))
        n = int(rng.integers(m, 11))
        a = _random_full_rank(rng, m, n)
        u, _, _ = np.linalg.svd(a)
        kind = i % 3
        if kind == 0:
            w = u @ np.diag(rng.uniform(0.2, 3.0, size=m)) @ u.T
        elif kind == 1:
            w = np.linalg.inv(a @ a.T)
        else:
            w = 2.0 * np.eye(m)
        rel = verify_claim2(a, w).relative_residual
        worst = max(worst, rel)
        if rel > 1e-8:
            return CheckResult(
                "claim2", False,
                f"relative residual {rel:.3e} > 1e-8 at instance seed {seed + i}",
            )
    return CheckResult(
        "claim2", True, f"{n_pairs}/{n_pairs} pairs, worst relative residual {worst:.3e}"
    )


def claim3_check(
    n_instances: int = 50, deltas=(0.0, 0.25, 0.5, 0.75, 1.0), seed: int = 1300
) -> CheckResult:
    """One guided step with mu = 1, c = 1/l_1^2 strictly reduces the WLS term."""
    checked = 0
    for i in range(n_instances):
        rng = np.random.default_rng(seed + i)
        m = int(rng.integers(2, 7))
        n = int(rng.integers(m, 11))
        op = DenseOperator(_random_full_rank(rng, m, n))
        lam1 = np.linalg.svd(op.matrix, compute_uv=False).max()
        c = 1.0 / lam1**2
        eta = float(rng.uniform(0.0, 0.5))
        x = rng.standard_normal(n)
        y = rng.standard_normal(m)
        for delta in deltas:
            before = wls_objective(op, x, y, delta, eta, c)
            step = g_delta(op, x, y, delta, eta, c)
            after = wls_objective(op, x - step, y, delta, eta, c)
            checked += 1
            if not after < before:
                return CheckResult(
                    "claim3", False,
                    f"no descent at instance seed {seed + i}, delta={delta}: "
                    f"{before:.6e} -> {after:.6e}",
                )
    return CheckResult(
        "claim3", True,
        f"strict descent in {checked}/{checked} steps "
        f"({n_instances} instances x {len(deltas)} delta values)",
    )


def claim4_check(n_instances: int = 50, seed: int = 1400) -> CheckResult:
    """Condition-number formula matches dense eigendecomposition; ordering strict."""
    worst = 0.0
    for i in range(n_instances):
        rng = np.random.default_rng(seed + i)
        m = int(rng.integers(2, 7))
        n = int(rng.integers(m, 11))
        lam = np.sort(rng.uniform(0.2, 2.0, size=m))[::-1]
        while lam[0] - lam[-1] < 0.05:
            lam = np.sort(rng.uniform(0.2, 2.0, size=m))[::-1]
        delta = float(rng.uniform(0.1, 0.9))
        c = float(rng.uniform(0.5, 2.0))
        k_bp, k_wls, k_ls = condition_numbers(lam, delta, c)
        if not (k_bp == 1.0 and k_bp < k_wls < k_ls):
            return CheckResult(
                "claim4", False,
                f"ordering violated at instance seed {seed + i}: "
                f"({k_bp}, {k_wls}, {k_ls})",
            )
        u, _ = np.linalg.qr(rng.standard_normal((m, m)))
        v, _ = np.linalg.qr(rng.standard_normal((n, n)))
        a = u @ np.diag(lam) @ v[:, :m].T
        w = (1.0 - delta) * np.linalg.inv(a @ a.T) + delta * c * np.eye(m)
        hessian = a.T @ w @ a
        restricted = v[:, :m].T @ hessian @ v[:, :m]
        eigs = np.linalg.eigvalsh(restricted)
        rel = abs(eigs.max() / eigs.min() - k_wls) / k_wls
        worst = max(worst, rel)
        if rel > 1e-8:
            return CheckResult(
                "claim4", False,
                f"formula mismatch {rel:.3e} > 1e-8 at instance seed {seed + i}",
            )
    return CheckResult(
        "claim4", True,
        f"{n_instances}/{n_instances} instances, kappa_BP = 1, ordering strict, "
        f"worst formula error {worst:.3e}",
    )


def theorem1_check(
    n_instances: int = 100,
    seed: int = 200000,
    mc_draws: int = 20000,
    mc_instances: int | None = None,
) -> CheckResult:
    """Strict orderings on every conforming instance, plus Monte-Carlo
    agreement of the closed forms within 3 standard errors."""
    if mc_instances is None:
        mc_instances = n_instances
    worst_z = 0.0
    start = time.perf_counter()
    for i in range(n_instances):
        rng = np.random.default_rng(seed + i)
        p = random_conforming_problem(rng)
        report = verify_theorem1(p)
        if not report.passed:
            return CheckResult(
                "theorem1", False,
                f"ordering violated at instance seed {seed + i}: {report}",
            )
        if i < mc_instances:
            for mode in _MODES:
                closed_b2, closed_v = bias_variance_closed_form(p, mode)
                mc = mc_bias_variance(p, mode, n_draws=mc_draws, seed=seed + 7919 + i)
                z_b = abs(mc.bias_sq - closed_b2) / mc.se_bias_sq
                z_v = abs(mc.var - closed_v) / mc.se_var
                z_mse = abs(mc.mse - (closed_b2 + closed_v)) / mc.se_mse
                worst_z = max(worst_z, z_b, z_v, z_mse)
                if max(z_b, z_v, z_mse) > 3.0:
                    return CheckResult(
                        "theorem1", False,
                        f"Monte-Carlo disagreement at instance seed {seed + i} "
                        f"({mode}): z-scores bias {z_b:.2f}, var {z_v:.2f}, "
                        f"mse {z_mse:.2f}",
                    )
    elapsed = time.perf_counter() - start
    return CheckResult(
        "theorem1", True,
        f"orderings {n_instances}/{n_instances}, Monte-Carlo agreement on "
        f"{min(mc_instances, n_instances)} instances x 3 modes "
        f"(worst |z| = {worst_z:.2f}, {mc_draws} draws, {elapsed:.1f}s)",
    )


BATTERY_CHECKS = {
    "claim1": claim1_check,
    "claim2": claim2_check,
    "claim3": claim3_check,
    "claim4": claim4_check,
    "theorem1": theorem1_check,
}


def run_verifier_battery(selection=None, **overrides) -> list[CheckResult]:
    """Run the named checks (all of them by default) with fixed seeds."""
    names = list(BATTERY_CHECKS) if selection is None else list(selection)
    results = []
    for name in names:
        if name not in BATTERY_CHECKS:
            raise ValueError(f"unknown check {name!r}; choose from {sorted(BATTERY_CHECKS)}")
        results.append(BATTERY_CHECKS[name](**overrides.get(name, {})))
    return results
