"""
Synthetic (p, q) pairs with a closed-form density ratio, sample generation
and Monte Carlo error metrics.

All densities are isotropic Gaussians N(mu, sigma^2 I) or finite mixtures of
them. The q-side is the numerator of beta = dq/dp, so boundedness of beta
needs every q-component to be narrower than p (or identical to it).

Normals are drawn with numpy's PCG64 generator and its ziggurat
standard_normal; Monte Carlo points come in fixed-size chunks, each with its
own SeedSequence([seed, chunk]) stream, so results do not depend on how many
workers evaluate them.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import optimize

from .errors import SampleError
from .estimator import RatioModel
from .kernels import Sample, as_points, gram

logger = logging.getLogger(__name__)

PAIR_FAMILIES = ("gauss_scale", "gauss_shift_scale", "mixture_vs_gauss")
MAX_DIM = 10
MC_CHUNK = 65536
EMBEDDED_MAX_T = 5000
MC_SEED_OFFSET = 0x9E3779B9

Reference = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GaussComponent:
    """One isotropic Gaussian N(mean, std^2 I) with a mixture weight."""

    mean: tuple[float, ...]
    std: float
    weight: float = 1.0

    def log_density(self, x: np.ndarray) -> np.ndarray:
        d = len(self.mean)
        diff = x - np.asarray(self.mean)
        sq = np.sum(diff * diff, axis=1)
        return -sq / (2.0 * self.std**2) - d * math.log(self.std) - 0.5 * d * math.log(2.0 * math.pi)


def _vector(value: Any, d: int, name: str) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(value, dtype=np.float64))
    if arr.size == 1:
        arr = np.full(d, float(arr[0]))
    if arr.shape != (d,):
        raise ValueError(f"{name} must be a scalar or a length-{d} list, got {value!r}")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class SyntheticPair:
    """
    A (p, q) pair with analytic beta = dq/dp.

    p is a single Gaussian; q is one Gaussian (gauss_scale, gauss_shift_scale)
    or a mixture (mixture_vs_gauss). b0 is the certified sup of beta, computed
    at construction.
    """

    family: str
    d: int
    p: GaussComponent
    q: tuple[GaussComponent, ...]
    b0: float = field(init=False)

    def __post_init__(self):
        if self.family not in PAIR_FAMILIES:
            raise ValueError(
                f"Unknown pair family '{self.family}'. Available: {', '.join(PAIR_FAMILIES)}"
            )
        if not 1 <= self.d <= MAX_DIM:
            raise ValueError(f"Pair dimension must lie in [1, {MAX_DIM}], got {self.d}")
        if not self.q:
            raise ValueError("q needs at least one component")
        if self.family != "mixture_vs_gauss" and len(self.q) != 1:
            raise ValueError(f"{self.family} takes exactly one q-component")

        weights = np.array([c.weight for c in self.q])
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"Mixture weights must be positive and sum to 1, got {weights.tolist()}")
        for comp in (self.p, *self.q):
            if len(comp.mean) != self.d:
                raise ValueError(f"Component mean {comp.mean} does not have dimension {self.d}")
            if not comp.std > 0:
                raise ValueError(f"Component std must be positive, got {comp.std}")
        for comp in self.q:
            same = comp.std == self.p.std and comp.mean == self.p.mean
            if not (comp.std < self.p.std or same):
                raise ValueError(
                    f"q-component N({comp.mean}, {comp.std}^2) must be narrower than "
                    f"p = N({self.p.mean}, {self.p.std}^2) for a bounded ratio"
                )
        if self.family == "gauss_scale" and self.q[0].mean != self.p.mean:
            raise ValueError("gauss_scale requires equal p and q means; use gauss_shift_scale")

        object.__setattr__(self, "b0", self._certified_sup())

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.q])

    def _component_peak(self, comp: GaussComponent) -> tuple[np.ndarray, float]:
        """Maximizer and maximum of q_k / p for a single q-component."""
        mu_p, mu_q = np.asarray(self.p.mean), np.asarray(comp.mean)
        scale = (self.p.std / comp.std) ** self.d
        if comp.std == self.p.std:
            return mu_p.copy(), 1.0
        a = 1.0 / (2.0 * comp.std**2)
        b = 1.0 / (2.0 * self.p.std**2)
        shift = float(np.sum((mu_q - mu_p) ** 2))
        x_star = (a * mu_q - b * mu_p) / (a - b)
        return x_star, scale * math.exp(a * b * shift / (a - b))

    def _certified_sup(self) -> float:
        if len(self.q) == 1:
            return self._component_peak(self.q[0])[1]

        def neg_log_ratio(x: np.ndarray) -> float:
            return -float(np.log(self.true_ratio(x.reshape(1, -1))[0]))

        best = 0.0
        for comp in self.q:
            start, _ = self._component_peak(comp)
            for x0 in (start, np.asarray(comp.mean)):
                res = optimize.minimize(
                    neg_log_ratio, x0, method="BFGS", options={"gtol": 1e-12, "maxiter": 500}
                )
                best = max(best, float(self.true_ratio(res.x.reshape(1, -1))[0]))
        logger.debug(f"Mixture b0 located numerically: {best:.12g}")
        return best

    def true_ratio(self, x: Any) -> np.ndarray:
        """beta(x) = q(x) / p(x), evaluated in log space per component."""
        pts = as_points(x, self.d)
        log_p = self.p.log_density(pts)
        out = np.zeros(pts.shape[0])
        for comp in self.q:
            out += comp.weight * np.exp(comp.log_density(pts) - log_p)
        return out

    def __call__(self, x: Any) -> np.ndarray:
        return self.true_ratio(x)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "family": self.family,
            "d": self.d,
            "p_mean": list(self.p.mean),
            "p_std": self.p.std,
        }
        if self.family == "mixture_vs_gauss":
            data["components"] = [
                {"weight": c.weight, "mean": list(c.mean), "std": c.std} for c in self.q
            ]
        else:
            data["q_mean"] = list(self.q[0].mean)
            data["q_std"] = self.q[0].std
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SyntheticPair":
        family = data.get("family", "gauss_scale")
        d = int(data.get("d", 1))
        p = GaussComponent(
            mean=_vector(data.get("p_mean", 0.0), d, "p_mean"), std=float(data.get("p_std", 1.0))
        )
        if family == "mixture_vs_gauss":
            components = data.get("components") or []
            q = tuple(
                GaussComponent(
                    mean=_vector(c.get("mean", 0.0), d, "component mean"),
                    std=float(c["std"]),
                    weight=float(c.get("weight", 1.0 / max(len(components), 1))),
                )
                for c in components
            )
        else:
            q_mean = data.get("q_mean", data.get("p_mean", 0.0))
            q = (GaussComponent(mean=_vector(q_mean, d, "q_mean"), std=float(data.get("q_std", 0.8))),)
        return cls(family=family, d=d, p=p, q=q)


def default_pair() -> SyntheticPair:
    """p = N(0, 1), q = N(0, 0.8^2) in d = 1; b0 = 1.25."""
    return SyntheticPair.from_dict({"family": "gauss_scale", "d": 1, "p_std": 1.0, "q_std": 0.8})


def shifted_pair() -> SyntheticPair:
    """p = N(0, 1), q = N(0.5, 0.8^2)."""
    return SyntheticPair.from_dict(
        {"family": "gauss_shift_scale", "d": 1, "p_std": 1.0, "q_mean": 0.5, "q_std": 0.8}
    )


def mixture_pair() -> SyntheticPair:
    """p = N(0, 1.5^2), q = 0.5 N(-1, 0.5^2) + 0.5 N(1, 0.5^2)."""
    return SyntheticPair.from_dict(
        {
            "family": "mixture_vs_gauss",
            "d": 1,
            "p_std": 1.5,
            "components": [
                {"weight": 0.5, "mean": -1.0, "std": 0.5},
                {"weight": 0.5, "mean": 1.0, "std": 0.5},
            ],
        }
    )


BUILTIN_PAIRS: dict[str, Callable[[], SyntheticPair]] = {
    "gauss_scale": default_pair,
    "gauss_shift_scale": shifted_pair,
    "mixture_vs_gauss": mixture_pair,
}


def _rng(seed: Any) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _draw_rows(pair: SyntheticPair, which: str, n: int, rng: np.random.Generator):
    if which == "p":
        comp = pair.p
        z = rng.standard_normal((n, pair.d))
        return np.asarray(comp.mean) + comp.std * z, np.zeros(n, dtype=np.intp)
    labels = rng.choice(len(pair.q), size=n, p=pair.weights) if len(pair.q) > 1 else np.zeros(n, dtype=np.intp)
    z = rng.standard_normal((n, pair.d))
    means = np.array([c.mean for c in pair.q])[labels]
    stds = np.array([c.std for c in pair.q])[labels]
    return means + stds[:, None] * z, labels


def draw_with_components(
    pair: SyntheticPair, which: str, n: int, seed: int
) -> tuple[Sample, np.ndarray]:
    """draw() plus the mixture component index of every row (categorical first, then component)."""
    if which not in ("p", "q"):
        raise SampleError(f"which must be 'p' or 'q', got '{which}'")
    if n < 1:
        raise SampleError(f"Sample size must be >= 1, got {n}")
    points, labels = _draw_rows(pair, which, n, _rng(int(seed)))
    return Sample(points, label=which), labels


def draw(pair: SyntheticPair, which: str, n: int, seed: int) -> Sample:
    """n i.i.d. points from p or q; deterministic given seed."""
    return draw_with_components(pair, which, n, seed)[0]


def mc_points(pair: SyntheticPair, t_count: int, seed: int) -> np.ndarray:
    """T points from p, generated in chunks with per-chunk streams."""
    if t_count < 1:
        raise ValueError(f"t_count must be >= 1, got {t_count}")
    chunks = []
    for k, start in enumerate(range(0, t_count, MC_CHUNK)):
        size = min(MC_CHUNK, t_count - start)
        chunks.append(_draw_rows(pair, "p", size, _rng([int(seed), k]))[0])
    return np.vstack(chunks)


def mc_seed(seed: int) -> int:
    """Error-evaluation seed derived from a training seed by a fixed offset."""
    return (int(seed) + MC_SEED_OFFSET) % 2**64


@dataclass
class ErrorReport:
    """Monte Carlo estimate of the L2(p) error."""

    l2p_error: float
    mc_points: int
    seed: int
    embedded_hk_error: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "l2p_error": self.l2p_error,
            "mc_points": self.mc_points,
            "seed": self.seed,
            "embedded_hk_error": self.embedded_hk_error,
        }


def _chunk_sq_error(pair: SyntheticPair, model: Any, reference: Reference, seed: int, k: int, size: int) -> float:
    t = _draw_rows(pair, "p", size, _rng([int(seed), k]))[0]
    diff = reference(t) - model(t)
    return float(np.sum(diff * diff))


def l2p_error(
    pair: SyntheticPair,
    model: RatioModel | Reference,
    t_count: int,
    seed: int,
    reference: RatioModel | Reference | None = None,
    workers: int = 1,
) -> ErrorReport:
    """
    sqrt((1/T) sum_i (beta(t_i) - model(t_i))^2) over t_i ~ p.

    reference defaults to the pair's true ratio; any model or callable works.
    Chunk sums are combined in chunk order whatever the worker count.
    """
    if t_count < 1:
        raise ValueError(f"t_count must be >= 1, got {t_count}")
    ref = reference if reference is not None else pair.true_ratio
    jobs = [(k, min(MC_CHUNK, t_count - start)) for k, start in enumerate(range(0, t_count, MC_CHUNK))]

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _chunk_sq_error(pair, model, ref, seed, *job), jobs))
    else:
        parts = [_chunk_sq_error(pair, model, ref, seed, k, size) for k, size in jobs]

    error = math.sqrt(math.fsum(parts) / t_count)
    return ErrorReport(l2p_error=error, mc_points=t_count, seed=int(seed))


def embedded_error(
    pair: SyntheticPair,
    model: RatioModel,
    t_count: int,
    seed: int,
    reference: RatioModel | Reference | None = None,
) -> float:
    """
    RKHS norm of the Monte Carlo embedding h = (1/T) sum_i k(., t_i) (beta - model)(t_i).

    ||h||^2 = w^T K w / T^2 with w the residuals; O(T^2) memory, so T <= 5000.
    """
    if not 1 <= t_count <= EMBEDDED_MAX_T:
        raise ValueError(f"t_count must lie in [1, {EMBEDDED_MAX_T}], got {t_count}")
    ref = reference if reference is not None else pair.true_ratio
    t = mc_points(pair, t_count, seed)
    w = ref(t) - model(t)
    if not np.any(w):
        return 0.0
    sq = float(w @ gram(model.kernel, t) @ w) / t_count**2
    return math.sqrt(max(sq, 0.0))
