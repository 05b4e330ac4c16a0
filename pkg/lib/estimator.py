"""
Tikhonov density-ratio estimator, full-sample and Nystrom-subsampled.

The fitted function is the kernel expansion

    beta(t) = sum_i c_i k(t, x_i) + sum_j c'_j k(t, x'_j)

with c'_j = 1 / (alpha M) and c the solution of

    (alpha I + K_pp / N) c = -(1 / (alpha M N)) K_pq 1

over the chosen centers. The Nystrom fit restricts both center sets to an
m-point subsample; with weighting="sample" the system keeps the full-sample
N and M in its scalings, with weighting="subsample" they are replaced by m.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import KernelError, PlanError
from .kernels import KernelSpec, PointsLike, Sample, as_points, cross_gram, gram
from .linalg import CostLedger, SpdSystem, solve_spd

logger = logging.getLogger(__name__)

FIT_MODES = ("full", "nystrom")
WEIGHTINGS = ("sample", "subsample")
EVAL_CHUNK = 8192


@dataclass(frozen=True)
class NystromPlan:
    """Sorted, distinct row indices into the p- and q-samples."""

    m: int
    p_indices: np.ndarray
    q_indices: np.ndarray
    seed: int = 0

    def __post_init__(self):
        p = np.asarray(self.p_indices, dtype=np.intp)
        q = np.asarray(self.q_indices, dtype=np.intp)
        for name, idx in (("p", p), ("q", q)):
            if idx.ndim != 1 or idx.size != self.m:
                raise PlanError(f"{name}_indices must hold exactly m={self.m} indices")
            if idx.size > 1 and not np.all(np.diff(idx) > 0):
                raise PlanError(f"{name}_indices must be sorted and distinct")
        object.__setattr__(self, "p_indices", p)
        object.__setattr__(self, "q_indices", q)

    def validate_against(self, n_p: int, n_q: int) -> None:
        if not 1 <= self.m <= min(n_p, n_q):
            raise PlanError(f"Subsample size m={self.m} outside [1, min(N={n_p}, M={n_q})]")
        if self.p_indices[0] < 0 or self.p_indices[-1] >= n_p:
            raise PlanError(f"p_indices out of bounds for N={n_p}")
        if self.q_indices[0] < 0 or self.q_indices[-1] >= n_q:
            raise PlanError(f"q_indices out of bounds for M={n_q}")

    @classmethod
    def identity(cls, n: int) -> "NystromPlan":
        """The full subsample {0, ..., n-1} on both sides."""
        idx = np.arange(n)
        return cls(m=n, p_indices=idx, q_indices=idx.copy(), seed=0)


def subsample_plan(n: int, m_req: int, m: int, seed: int) -> NystromPlan:
    """
    Plain Nystrom plan: m indices drawn uniformly without replacement from
    each sample independently.

    Args:
        n: Size N of the p-sample
        m_req: Size M of the q-sample
        m: Subsample size |z|
        seed: 64-bit seed

    The generator is numpy's PCG64 seeded through SeedSequence(seed), spawned
    into one child stream per sample, so plans are reproducible across
    platforms and numpy versions that keep PCG64.
    """
    if not 1 <= m <= min(n, m_req):
        raise PlanError(f"Subsample size m={m} outside [1, min(N={n}, M={m_req})]")
    p_seq, q_seq = np.random.SeedSequence(int(seed)).spawn(2)
    p_rng = np.random.Generator(np.random.PCG64(p_seq))
    q_rng = np.random.Generator(np.random.PCG64(q_seq))
    p_idx = np.sort(p_rng.choice(n, size=m, replace=False))
    q_idx = np.sort(q_rng.choice(m_req, size=m, replace=False))
    return NystromPlan(m=m, p_indices=p_idx, q_indices=q_idx, seed=int(seed))


@dataclass(frozen=True)
class RatioModel:
    """A fitted density-ratio expansion; immutable and safe to share."""

    kernel: KernelSpec
    alpha: float
    p_centers: np.ndarray
    q_centers: np.ndarray
    c: np.ndarray
    c_prime: np.ndarray
    n_full: int
    m_full: int
    mode: str = "full"
    weighting: str = "sample"
    ledger: CostLedger = field(default_factory=CostLedger, compare=False)

    def __post_init__(self):
        if self.mode not in FIT_MODES:
            raise ValueError(f"Unknown fit mode '{self.mode}'")
        for name in ("p_centers", "q_centers", "c", "c_prime"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.p_centers.shape[0] != self.c.shape[0]:
            raise ValueError("c must hold one coefficient per p-center")
        if self.q_centers.shape[0] != self.c_prime.shape[0]:
            raise ValueError("c_prime must hold one coefficient per q-center")

    @property
    def c_prime_scalar(self) -> float:
        return float(self.c_prime[0]) if self.c_prime.size else 0.0

    @property
    def dim(self) -> int:
        return self.kernel.dim

    def __call__(self, t: PointsLike) -> np.ndarray:
        return evaluate(self, t)


def _scalings(weighting: str, n_full: int, m_full: int, m: int) -> tuple[int, int]:
    if weighting == "sample":
        return n_full, m_full
    if weighting == "subsample":
        return m, m
    raise ValueError(f"Unknown weighting '{weighting}'. Available: {', '.join(WEIGHTINGS)}")


def _fit(
    kernel: KernelSpec,
    p_pts: np.ndarray,
    q_pts: np.ndarray,
    alpha: float,
    n_scale: int,
    m_scale: int,
    ledger: CostLedger,
) -> tuple[np.ndarray, np.ndarray]:
    """Assemble and solve the coefficient system over the given centers."""
    K_pp = gram(kernel, p_pts, ledger=ledger)
    K_pq = cross_gram(kernel, p_pts, q_pts, ledger=ledger)
    rhs = -K_pq.sum(axis=1) / (alpha * m_scale * n_scale)
    c = solve_spd(SpdSystem(K_pp / n_scale, alpha), rhs, ledger=ledger)
    c_prime = np.full(q_pts.shape[0], 1.0 / (alpha * m_scale))
    return c, c_prime


def _check_inputs(kernel: KernelSpec, xp: PointsLike, xq: PointsLike, alpha: float):
    if not (np.isfinite(alpha) and alpha > 0):
        raise ValueError(f"Regularization alpha must be positive, got {alpha}")
    p_pts = as_points(xp, kernel.dim)
    q_pts = as_points(xq, kernel.dim)
    return p_pts, q_pts


def fit_full(kernel: KernelSpec, xp: PointsLike, xq: PointsLike, alpha: float) -> RatioModel:
    """Fit on all N p-points and M q-points (cost O(N^3))."""
    p_pts, q_pts = _check_inputs(kernel, xp, xq, alpha)
    n, m = p_pts.shape[0], q_pts.shape[0]
    ledger = CostLedger()
    c, c_prime = _fit(kernel, p_pts, q_pts, alpha, n, m, ledger)
    logger.info(f"Full fit: N={n}, M={m}, alpha={alpha:.4g}, flops={ledger.solver_flops}")
    return RatioModel(
        kernel=kernel,
        alpha=float(alpha),
        p_centers=p_pts,
        q_centers=q_pts,
        c=c,
        c_prime=c_prime,
        n_full=n,
        m_full=m,
        mode="full",
        ledger=ledger,
    )


def fit_nystrom(
    kernel: KernelSpec,
    xp: PointsLike,
    xq: PointsLike,
    alpha: float,
    plan: NystromPlan,
    weighting: str = "sample",
) -> RatioModel:
    """Fit on the m-point subsample chosen by plan (cost O(m^3))."""
    p_pts, q_pts = _check_inputs(kernel, xp, xq, alpha)
    n, m_full = p_pts.shape[0], q_pts.shape[0]
    plan.validate_against(n, m_full)
    n_scale, m_scale = _scalings(weighting, n, m_full, plan.m)

    p_sub = p_pts[plan.p_indices]
    q_sub = q_pts[plan.q_indices]
    ledger = CostLedger()
    c, c_prime = _fit(kernel, p_sub, q_sub, alpha, n_scale, m_scale, ledger)
    logger.info(
        f"Nystrom fit: N={n}, M={m_full}, m={plan.m}, alpha={alpha:.4g}, "
        f"weighting={weighting}, flops={ledger.solver_flops}"
    )
    return RatioModel(
        kernel=kernel,
        alpha=float(alpha),
        p_centers=p_sub,
        q_centers=q_sub,
        c=c,
        c_prime=c_prime,
        n_full=n,
        m_full=m_full,
        mode="nystrom",
        weighting=weighting,
        ledger=ledger,
    )


def evaluate(model: RatioModel, t: PointsLike) -> np.ndarray:
    """beta(t_k) for every row of t, evaluated in fixed-size row chunks."""
    pts = as_points(t, model.kernel.dim)
    out = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], EVAL_CHUNK):
        block = pts[start : start + EVAL_CHUNK]
        value = np.zeros(block.shape[0])
        if model.c.size:
            value += cross_gram(model.kernel, block, model.p_centers) @ model.c
        if model.c_prime.size:
            value += cross_gram(model.kernel, block, model.q_centers) @ model.c_prime
        out[start : start + EVAL_CHUNK] = value
    return out


def _merged_expansion(model: RatioModel) -> tuple[np.ndarray, np.ndarray]:
    """All centers of the expansion, p-part first, with their coefficients."""
    centers = np.vstack([model.p_centers, model.q_centers])
    coefs = np.concatenate([model.c, model.c_prime])
    return centers, coefs


def rkhs_distance(kernel: KernelSpec, f: RatioModel, g: RatioModel) -> float:
    """
    RKHS norm of f - g for two kernel expansions.

    Identical centers are merged first, so f == g yields exactly zero.
    """
    if f.kernel != kernel or g.kernel != kernel:
        raise KernelError("rkhs_distance requires both models to use the given kernel")
    f_centers, f_coefs = _merged_expansion(f)
    g_centers, g_coefs = _merged_expansion(g)
    centers = np.vstack([f_centers, g_centers])
    coefs = np.concatenate([f_coefs, -g_coefs])
    if centers.shape[0] == 0:
        return 0.0

    unique, inverse = np.unique(centers, axis=0, return_inverse=True)
    merged = np.zeros(unique.shape[0])
    np.add.at(merged, np.asarray(inverse).reshape(-1), coefs)
    keep = merged != 0.0
    if not np.any(keep):
        return 0.0
    unique, merged = unique[keep], merged[keep]
    sq = float(merged @ gram(kernel, unique) @ merged)
    return float(np.sqrt(max(sq, 0.0)))


def expansion(kernel: KernelSpec, centers: Any, coefs: Any) -> RatioModel:
    """A bare expansion sum_i a_i k(., u_i) wrapped as a model (q-part empty)."""
    pts = as_points(np.asarray(centers, dtype=np.float64), kernel.dim)
    return RatioModel(
        kernel=kernel,
        alpha=1.0,
        p_centers=pts,
        q_centers=np.empty((0, kernel.dim)),
        c=np.asarray(coefs, dtype=np.float64).reshape(-1),
        c_prime=np.empty(0),
        n_full=max(pts.shape[0], 1),
        m_full=1,
        mode="full",
    )


def fit(
    kernel: KernelSpec,
    xp: Sample,
    xq: Sample,
    alpha: float,
    mode: str = "nystrom",
    plan: NystromPlan | None = None,
    weighting: str = "sample",
) -> RatioModel:
    """Dispatch to fit_full or fit_nystrom."""
    if mode == "full":
        return fit_full(kernel, xp, xq, alpha)
    if mode == "nystrom":
        if plan is None:
            raise PlanError("Nystrom fit requires a subsample plan")
        return fit_nystrom(kernel, xp, xq, alpha, plan, weighting=weighting)
    raise ValueError(f"Unknown fit mode '{mode}'. Available: {', '.join(FIT_MODES)}")
