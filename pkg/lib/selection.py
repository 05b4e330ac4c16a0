"""
A priori choice of the regularization parameter and the subsample size.

Index functions are power-scale: phi(t) = t^s (source condition of beta),
zeta(t) = t^r (source condition of the kernel sections), with s in (0, 1/2]
and r in [0, 1/2]; r = 0 is the constant zeta.

    theta(t)     = t phi(t) / zeta(t)       = t^(1 + s - r)
    theta_bar(t) = sqrt(t) phi(t) / zeta(t) = t^(1/2 + s - r)

alpha is theta^{-1}(u) (RKHS metric) or theta_bar^{-1}(u) (L2 metric), with
u = 1/sqrt(N) + 1/sqrt(M).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from scipy import interpolate, optimize

from .errors import ConvergenceError

logger = logging.getLogger(__name__)

REGIMES = ("in_rkhs", "out_of_rkhs")
RATE_METRICS = ("hk", "l2", "embedded_hk", "embedded_l2")
ALPHA_RULES = ("auto", "star")

# Unspecified constant of the admissible-range lower end, fixed at 1
PAR_CHOICE_C = 1.0


@dataclass(frozen=True)
class IndexFunctions:
    """Exponents of phi(t) = t^s and zeta(t) = t^r."""

    s: float = 0.5
    r: float = 0.5
    regime: str = "in_rkhs"

    def __post_init__(self):
        if not 0 < self.s <= 0.5:
            raise ValueError(f"s must lie in (0, 1/2], got {self.s}")
        if not 0 <= self.r <= 0.5:
            raise ValueError(f"r must lie in [0, 1/2], got {self.r}")
        if self.regime not in REGIMES:
            raise ValueError(f"Unknown regime '{self.regime}'. Available: {', '.join(REGIMES)}")

    @property
    def theta_exponent(self) -> float:
        return 1.0 + self.s - self.r

    @property
    def theta_bar_exponent(self) -> float:
        return 0.5 + self.s - self.r


@dataclass(frozen=True)
class SelectionPolicy:
    """Index functions plus the confidence delta and the subsample constant C."""

    idx: IndexFunctions = IndexFunctions()
    delta: float = 0.1
    c_subsample: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.c_subsample > 0:
            raise ValueError(f"c_subsample must be positive, got {self.c_subsample}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "s": self.idx.s,
            "r": self.idx.r,
            "regime": self.idx.regime,
            "delta": self.delta,
            "c_subsample": self.c_subsample,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SelectionPolicy":
        return cls(
            idx=IndexFunctions(
                s=float(data.get("s", 0.5)),
                r=float(data.get("r", 0.5)),
                regime=data.get("regime", "in_rkhs"),
            ),
            delta=float(data.get("delta", 0.1)),
            c_subsample=float(data.get("c_subsample", 1.0)),
        )


def _check_positive(t: float) -> None:
    if not t > 0:
        raise ValueError(f"Argument must be positive, got {t}")


def theta(idx: IndexFunctions, t: float) -> float:
    _check_positive(t)
    return t**idx.theta_exponent


def theta_inverse(idx: IndexFunctions, u: float) -> float:
    _check_positive(u)
    return u ** (1.0 / idx.theta_exponent)


def theta_bar(idx: IndexFunctions, t: float) -> float:
    _check_positive(t)
    return t**idx.theta_bar_exponent


def theta_bar_inverse(idx: IndexFunctions, u: float) -> float:
    _check_positive(u)
    return u ** (1.0 / idx.theta_bar_exponent)


def sample_scale(n: int, m: int) -> float:
    """u = 1/sqrt(N) + 1/sqrt(M)."""
    if n < 1 or m < 1:
        raise ValueError(f"Sample sizes must be >= 1, got N={n}, M={m}")
    return 1.0 / math.sqrt(n) + 1.0 / math.sqrt(m)


def admissible_lower(n: int, delta: float) -> float:
    """Lower end C N^{-1} log(N / delta) of the admissible alpha range, C = 1."""
    return PAR_CHOICE_C * math.log(n / delta) / n


def choose_alpha(policy: SelectionPolicy, n: int, m: int) -> float:
    """
    alpha = theta^{-1}(u) for the RKHS-metric rule (in_rkhs) or
    theta_bar^{-1}(u) for the L2-metric rule (out_of_rkhs).

    Values below the admissible lower end are raised to it with a warning.
    """
    u = sample_scale(n, m)
    if policy.idx.regime == "in_rkhs":
        alpha = theta_inverse(policy.idx, u)
    else:
        alpha = theta_bar_inverse(policy.idx, u)

    lower = admissible_lower(n, policy.delta)
    if alpha < lower:
        logger.warning(
            f"alpha={alpha:.4g} below the admissible lower end {lower:.4g} "
            f"for N={n}, delta={policy.delta}; clamping"
        )
        alpha = lower
    return alpha


def choose_subsample_size(
    policy: SelectionPolicy, n_inf_alpha: float, alpha: float, n: int, m: int
) -> int:
    """m = ceil(C n_inf(alpha) max(log(1/alpha), 1) log(1/delta)), clipped to [1, min(N, M)]."""
    _check_positive(alpha)
    _check_positive(n_inf_alpha)
    log_alpha = max(math.log(1.0 / alpha), 1.0)
    raw = math.ceil(policy.c_subsample * n_inf_alpha * log_alpha * math.log(1.0 / policy.delta))
    size = min(max(raw, 1), min(n, m))
    if size < raw:
        logger.warning(f"Subsample size {raw} clipped to min(N, M)={size}")
    return int(size)


def theory_rate_exponent(idx: IndexFunctions, metric: str) -> float:
    """Exponent kappa of the rate (1/sqrt(N) + 1/sqrt(M))^kappa."""
    s, r = idx.s, idx.r
    if metric == "hk":
        return s / (s + 1.0 - r)
    if metric == "l2":
        return (1.0 + 2.0 * s) / (2.0 * (s + 1.0 - r))
    if metric == "embedded_hk":
        return (1.0 + 2.0 * s) / (2.0 * (s - r + 1.0))
    if metric == "embedded_l2":
        return 2.0 * s / (2.0 * (s - r) + 1.0)
    raise ValueError(f"Unknown metric '{metric}'. Available: {', '.join(RATE_METRICS)}")


def _check_cost_params(s: float, gamma: float) -> None:
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if not 0 < s <= 1 - gamma:
        raise ValueError(f"s must lie in (0, 1 - gamma] = (0, {1 - gamma:g}], got {s}")


def cost_exponent(s: float, gamma: float) -> float:
    """
    Exponent of N in the Nystrom cost N^((3 + s - 2 gamma)/(s + 1)) log^2 N,
    for n(alpha) ~ alpha^-s and zeta(t) = t^(gamma/2).
    """
    _check_cost_params(s, gamma)
    return (3.0 + s - 2.0 * gamma) / (s + 1.0)


def is_subquadratic(s: float, gamma: float) -> bool:
    _check_cost_params(s, gamma)
    return 2.0 * gamma + s > 1.0


def subsample_schedule(n: int, s: float | None = None, gamma: float | None = None) -> int:
    """
    Benchmark subsample size.

    Without (s, gamma) this is ceil(sqrt(N) log N); with them it is
    ceil(N^((1 - gamma)/(s + 1)) log N). Clipped to [1, N].
    """
    if s is None or gamma is None:
        raw = math.sqrt(n) * math.log(n)
    else:
        _check_cost_params(s, gamma)
        raw = n ** ((1.0 - gamma) / (s + 1.0)) * math.log(n)
    return int(min(max(math.ceil(raw), 1), n))


class TabulatedIndexFunction:
    """
    A monotone index function given by samples (t_i, phi(t_i)); experimental.

    phi is interpolated piecewise-linearly (log-log), and theta^{-1} for
    theta(t) = t phi(t) / zeta(t) is found by bisection.
    """

    def __init__(self, t: Any, values: Any, r: float = 0.5):
        t = np.asarray(t, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        if t.ndim != 1 or t.shape != values.shape or t.size < 2:
            raise ValueError("Tabulated index function needs matching 1-d arrays of length >= 2")
        if np.any(t <= 0) or np.any(values <= 0):
            raise ValueError("Tabulated index function must be positive on its grid")
        if not (np.all(np.diff(t) > 0) and np.all(np.diff(values) > 0)):
            raise ValueError("Tabulated index function must be strictly increasing")
        self.t = t
        self.values = values
        self.r = r
        self._log_phi: Callable[[float], float] = interpolate.interp1d(
            np.log(t), np.log(values), kind="linear", fill_value="extrapolate"
        )

    def phi(self, t: float) -> float:
        _check_positive(t)
        return float(np.exp(self._log_phi(np.log(t))))

    def theta(self, t: float) -> float:
        return t * self.phi(t) / t**self.r

    def theta_inverse(self, u: float) -> float:
        _check_positive(u)
        lo, hi = self.t[0], self.t[-1]
        if not self.theta(lo) <= u <= self.theta(hi):
            raise ValueError(f"u={u} outside the tabulated range of theta")
        try:
            return float(optimize.bisect(lambda t: self.theta(t) - u, lo, hi, rtol=1e-12, maxiter=500))
        except RuntimeError as e:
            raise ConvergenceError(f"theta inverse bisection failed: {e}", iterations=500)
