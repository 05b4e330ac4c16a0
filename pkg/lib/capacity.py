"""
Empirical capacity of the kernel space on a p-sample.

With A = K / N the normalized Gram matrix:

    pointwise capacity  n_x(alpha)   = [(alpha I + A)^{-1} K]_ii
    effective dimension n(alpha)     = sum_k lambda_k / (lambda_k + alpha)
    uniform capacity    n_inf(alpha) = max_i n_x_i(alpha)

The population sup in n_inf is approximated by the max over the sample and
the integral in n(alpha) by the sample mean; the eigenvalue route and the
diagonal-mean route are kept as two independent computations of n(alpha).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import BracketError, ConvergenceError
from .kernels import KernelSpec, PointsLike, gram
from .linalg import EigenDecomposition, SpdSystem, eigh, solve_spd

logger = logging.getLogger(__name__)

ALPHA_STAR_LOWER = 1e-12
ALPHA_STAR_RTOL = 1e-10
MAX_BRACKET_DOUBLINGS = 200


def _check_alpha(alpha: float) -> None:
    if not (np.isfinite(alpha) and alpha > 0):
        raise ValueError(f"alpha must be positive, got {alpha}")


def capacity_diag_from_gram(K: np.ndarray, alpha: float) -> np.ndarray:
    """Diagonal of (alpha I + K/N)^{-1} K via one factorization and N solves."""
    _check_alpha(alpha)
    n = K.shape[0]
    X = solve_spd(SpdSystem(K / n, alpha), K)
    return np.diag(X).copy()


def capacity_diag(kernel: KernelSpec, xp: PointsLike, alpha: float) -> np.ndarray:
    """Per-point empirical capacity n_{x_i}(alpha)."""
    return capacity_diag_from_gram(gram(kernel, xp), alpha)


def spectrum(K: np.ndarray) -> np.ndarray:
    """Eigenvalues of K/N, descending, clipped at zero."""
    n = K.shape[0]
    return np.clip(eigh(K / n).eigenvalues, 0.0, None)


def effective_dimension_from_spectrum(eigenvalues: np.ndarray, alpha: float) -> float:
    _check_alpha(alpha)
    lam = np.asarray(eigenvalues, dtype=np.float64)
    return float(np.sum(lam / (lam + alpha)))


def effective_dimension_from_gram(K: np.ndarray, alpha: float) -> float:
    return effective_dimension_from_spectrum(spectrum(K), alpha)


def effective_dimension(kernel: KernelSpec, xp: PointsLike, alpha: float) -> float:
    """n(alpha) = trace((alpha I + K/N)^{-1} K/N) through the eigenvalues of K/N."""
    return effective_dimension_from_gram(gram(kernel, xp), alpha)


def capacity_sup(kernel: KernelSpec, xp: PointsLike, alpha: float) -> float:
    """n_inf(alpha) approximated by the max over the observed sample."""
    return float(np.max(capacity_diag(kernel, xp, alpha)))


def alpha_star_from_spectrum(eigenvalues: np.ndarray, n: int) -> float:
    """
    Root of n(alpha) / alpha = N by bisection.

    The bracket is [1e-12, trace(K/N)], widened by doubling when the upper
    end does not yet fall below N.

    Raises:
        BracketError: If the spectrum is zero (no root exists)
        ConvergenceError: If bisection exhausts its iteration budget
    """
    lam = np.clip(np.asarray(eigenvalues, dtype=np.float64), 0.0, None)
    trace = float(np.sum(lam))
    if not trace > 0:
        raise BracketError("alpha* is not bracketed: the Gram matrix is zero")

    def excess(alpha: float) -> float:
        return effective_dimension_from_spectrum(lam, alpha) / alpha - n

    lo, hi = ALPHA_STAR_LOWER, trace
    if excess(lo) <= 0:
        raise BracketError(f"alpha* is not bracketed: n(alpha)/alpha <= N already at alpha={lo:g}")
    doublings = 0
    while excess(hi) >= 0:
        if doublings >= MAX_BRACKET_DOUBLINGS:
            raise BracketError(f"alpha* is not bracketed below {hi:g}")
        hi *= 2.0
        doublings += 1
    if doublings:
        logger.warning(f"alpha* bracket widened {doublings} time(s) to [{lo:g}, {hi:g}]")

    try:
        root, result = optimize.bisect(
            excess, lo, hi, xtol=1e-300, rtol=ALPHA_STAR_RTOL, maxiter=2000, full_output=True, disp=False
        )
    except RuntimeError as e:
        raise ConvergenceError(f"alpha* bisection failed: {e}", iterations=2000)
    if not result.converged:
        raise ConvergenceError("alpha* bisection did not converge", iterations=result.iterations)
    return float(root)


def alpha_star(kernel: KernelSpec, xp: PointsLike) -> float:
    """The threshold alpha* with n(alpha*) / alpha* = N."""
    K = gram(kernel, xp)
    return alpha_star_from_spectrum(spectrum(K), K.shape[0])


@dataclass
class CapacityProfile:
    """n(alpha) and n_inf(alpha) over an alpha grid, plus alpha*."""

    alphas: np.ndarray
    n_eff: np.ndarray
    n_inf: np.ndarray
    alpha_star: float
    n_points: int
    ninf_ratio: np.ndarray = field(default_factory=lambda: np.empty(0))

    def rows(self) -> list[dict[str, float]]:
        out = []
        for i, a in enumerate(self.alphas):
            row = {"alpha": float(a), "n_eff": float(self.n_eff[i]), "n_inf": float(self.n_inf[i])}
            if self.ninf_ratio.size:
                row["ninf_ratio"] = float(self.ninf_ratio[i])
            out.append(row)
        return out


def _diag_capacities(decomp: EigenDecomposition, n: int, alpha: float) -> np.ndarray:
    """n_{x_i}(alpha) = N sum_k V_ik^2 lambda_k / (lambda_k + alpha)."""
    lam = np.clip(decomp.eigenvalues, 0.0, None)
    return n * (decomp.eigenvectors**2) @ (lam / (lam + alpha))


def capacity_profile(
    kernel: KernelSpec,
    xp: PointsLike,
    alphas: np.ndarray | None = None,
    grid_points: int = 20,
    r: float | None = None,
) -> CapacityProfile:
    """
    Capacity over a log-spaced alpha grid (default alpha*/10 .. 1).

    When r is given, ninf_ratio reports n_inf(alpha) * alpha / zeta(alpha)^2
    with zeta(t) = t^r, the quantity bounded by a constant under the
    kernel-section source condition.
    """
    K = gram(kernel, xp)
    n = K.shape[0]
    decomp = eigh(K / n)
    lam = np.clip(decomp.eigenvalues, 0.0, None)
    a_star = alpha_star_from_spectrum(lam, n)

    if alphas is None:
        lower = a_star / 10.0
        upper = max(1.0, 10.0 * lower)
        alphas = np.logspace(np.log10(lower), np.log10(upper), grid_points)
    alphas = np.asarray(alphas, dtype=np.float64)

    n_eff = np.array([effective_dimension_from_spectrum(lam, a) for a in alphas])
    n_inf = np.array([float(np.max(_diag_capacities(decomp, n, a))) for a in alphas])
    # max >= mean; equal-diagonal samples can otherwise differ in the last ulp
    n_inf = np.maximum(n_inf, n_eff)
    ratio = alphas * n_inf / alphas ** (2 * r) if r is not None else np.empty(0)
    logger.info(f"Capacity profile: N={n}, alpha*={a_star:.6g}, grid={alphas.size}")
    return CapacityProfile(
        alphas=alphas,
        n_eff=n_eff,
        n_inf=n_inf,
        alpha_star=a_star,
        n_points=n,
        ninf_ratio=ratio,
    )
