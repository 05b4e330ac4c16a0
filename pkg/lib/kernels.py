"""
Kernel functions, samples and Gram matrix assembly.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import numpy as np

from .errors import KernelError, SampleError

logger = logging.getLogger(__name__)

KERNEL_FAMILIES = ("gaussian", "laplacian", "polynomial")
SAMPLE_LABELS = ("p", "q")
GRAM_BLOCK = 256


@dataclass(frozen=True)
class KernelSpec:
    """Symmetric positive-definite kernel with its parameters."""

    family: str = "gaussian"
    bandwidth: float = 1.0
    degree: int = 2
    offset: float = 1.0
    dim: int = 1
    domain_radius: float | None = None  # polynomial only: points with |x| > R are rejected

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise KernelError(
                f"Unknown kernel family '{self.family}'. "
                f"Available: {', '.join(KERNEL_FAMILIES)}"
            )
        if self.dim < 1:
            raise KernelError(f"Kernel dimension must be positive, got {self.dim}")
        if self.family in ("gaussian", "laplacian"):
            if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
                raise KernelError(f"Bandwidth must be positive, got {self.bandwidth}")
        else:
            if self.degree < 1:
                raise KernelError(f"Polynomial degree must be positive, got {self.degree}")
            if self.offset < 0:
                raise KernelError(f"Polynomial offset must be >= 0, got {self.offset}")
            if self.domain_radius is None or not self.domain_radius > 0:
                raise KernelError(
                    "Polynomial kernel requires a positive domain_radius "
                    "(the kernel is unbounded on an unbounded domain)"
                )

    @property
    def kappa(self) -> float:
        """Bound with k(x, x) <= kappa**2 on the admissible domain."""
        if self.family == "polynomial":
            return float(np.sqrt((self.domain_radius**2 + self.offset) ** self.degree))
        return 1.0

    def params(self) -> dict[str, Any]:
        if self.family == "polynomial":
            return {
                "degree": self.degree,
                "offset": self.offset,
                "domain_radius": self.domain_radius,
            }
        return {"bandwidth": self.bandwidth}

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "params": self.params(), "d": self.dim}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "KernelSpec":
        """Accept both the persisted layout ({family, params, d}) and the flat config layout."""
        params = dict(data.get("params", {}))
        for key in ("bandwidth", "degree", "offset", "domain_radius"):
            if key in data:
                params[key] = data[key]
        dim = data.get("d", data.get("dim", 1))
        return cls(
            family=data.get("family", "gaussian"),
            bandwidth=float(params.get("bandwidth", 1.0)),
            degree=int(params.get("degree", 2)),
            offset=float(params.get("offset", 1.0)),
            dim=int(dim),
            domain_radius=params.get("domain_radius"),
        )


@dataclass(frozen=True)
class Sample:
    """An i.i.d. sample: n rows of d finite coordinates."""

    points: np.ndarray
    label: str = "p"
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise SampleError(f"Sample must be a non-empty n x d matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise SampleError("Sample contains non-finite entries")
        if self.label not in SAMPLE_LABELS:
            raise SampleError(f"Sample label must be one of {SAMPLE_LABELS}, got '{self.label}'")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def take(self, indices: np.ndarray) -> "Sample":
        """Sub-sample by row indices."""
        return Sample(self.points[np.asarray(indices, dtype=np.intp)], label=self.label)


PointsLike = Union[Sample, np.ndarray]


def as_points(x: PointsLike, dim: int | None = None) -> np.ndarray:
    """Coerce a Sample, a point or a matrix to a finite (n, d) float array."""
    pts = x.points if isinstance(x, Sample) else np.asarray(x, dtype=np.float64)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        # A bare vector is one point when the kernel dimension says so
        pts = pts.reshape(1, -1) if dim is not None and dim > 1 else pts.reshape(-1, 1)
    if dim is not None and pts.shape[1] != dim:
        raise KernelError(f"Dimension mismatch: expected d={dim}, got d={pts.shape[1]}")
    if not np.all(np.isfinite(pts)):
        raise KernelError("Non-finite input to kernel")
    return pts


def _check_domain(spec: KernelSpec, pts: np.ndarray) -> None:
    if spec.family != "polynomial":
        return
    norms = np.sqrt(np.sum(pts * pts, axis=1))
    outside = np.flatnonzero(norms > spec.domain_radius)
    if outside.size:
        raise KernelError(
            f"{outside.size} point(s) outside the declared domain radius "
            f"{spec.domain_radius} (first at row {outside[0]})"
        )


def _pairwise(a: np.ndarray, b: np.ndarray, op: str) -> np.ndarray:
    """Entrywise pairwise sums over coordinates in a fixed order.

    Each entry is accumulated coordinate by coordinate, so entry (i, j) of
    (a, b) is bitwise equal to entry (j, i) of (b, a).
    """
    out = np.zeros((a.shape[0], b.shape[0]))
    for k in range(a.shape[1]):
        if op == "sqdist":
            diff = a[:, k, None] - b[None, :, k]
            out += diff * diff
        else:
            out += a[:, k, None] * b[None, :, k]
    return out


def _apply(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if spec.family == "gaussian":
        return np.exp(-_pairwise(a, b, "sqdist") / (2.0 * spec.bandwidth**2))
    if spec.family == "laplacian":
        return np.exp(-np.sqrt(_pairwise(a, b, "sqdist")) / spec.bandwidth)
    return (_pairwise(a, b, "dot") + spec.offset) ** spec.degree


def eval_kernel(spec: KernelSpec, x: Any, y: Any) -> float:
    """
    Evaluate k(x, y) for two single points.

    Gaussian and laplacian values lie in (0, 1] mathematically; in float64
    they underflow to exactly 0.0 once the exponent drops below about -745
    (a gaussian pair about 38.6 bandwidths apart).
    """
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64)).reshape(1, -1)
    ys = np.atleast_1d(np.asarray(y, dtype=np.float64)).reshape(1, -1)
    xs = as_points(xs, spec.dim)
    ys = as_points(ys, spec.dim)
    _check_domain(spec, xs)
    _check_domain(spec, ys)
    return float(_apply(spec, xs, ys)[0, 0])


def gram(spec: KernelSpec, a: PointsLike, ledger: Any | None = None) -> np.ndarray:
    """
    Gram matrix G[i, j] = k(a_i, a_j); exactly symmetric.

    Row blocks of GRAM_BLOCK are evaluated from the diagonal rightwards only,
    then the upper triangle is mirrored onto the lower one. The ledger is
    charged the nominal n * n.
    """
    pts = as_points(a, spec.dim)
    _check_domain(spec, pts)
    n = pts.shape[0]
    G = np.empty((n, n))
    for start in range(0, n, GRAM_BLOCK):
        stop = min(start + GRAM_BLOCK, n)
        G[start:stop, start:] = _apply(spec, pts[start:stop], pts[start:])
    lower = np.tril_indices(n, k=-1)
    G[lower] = G.T[lower]
    if ledger is not None:
        ledger.add_kernel_evals(n * n)
    return G


def cross_gram(
    spec: KernelSpec, a: PointsLike, b: PointsLike, ledger: Any | None = None
) -> np.ndarray:
    """Cross-Gram matrix M[i, j] = k(a_i, b_j)."""
    pa = as_points(a, spec.dim)
    pb = as_points(b, spec.dim)
    _check_domain(spec, pa)
    _check_domain(spec, pb)
    if ledger is not None:
        ledger.add_kernel_evals(pa.shape[0] * pb.shape[0])
    return _apply(spec, pa, pb)


def median_bandwidth(points: PointsLike, max_points: int = 1000, seed: int = 0) -> float:
    """Median pairwise distance; a convenience heuristic outside the estimation method."""
    pts = as_points(points)
    if pts.shape[0] > max_points:
        rng = np.random.Generator(np.random.PCG64(seed))
        pts = pts[np.sort(rng.choice(pts.shape[0], max_points, replace=False))]
    dist = np.sqrt(_pairwise(pts, pts, "sqdist"))
    upper = dist[np.triu_indices(pts.shape[0], k=1)]
    if upper.size == 0 or not np.any(upper > 0):
        logger.warning("Median heuristic degenerate (all points equal); using bandwidth 1.0")
        return 1.0
    return float(np.median(upper[upper > 0]))


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_sample_csv(path: Path, label: str = "p") -> Sample:
    """
    Load a sample from CSV: one point per row, d comma-separated columns.

    The first non-blank row is a header when its first token is non-numeric.

    Raises:
        FileNotFoundError: If the file does not exist
        SampleError: On ragged rows, non-numeric cells or an empty file
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Sample file not found: {path}")

    rows: list[list[float]] = []
    with open(path, newline="") as f:
        seen_row = False
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            first, seen_row = not seen_row, True
            if first and not _is_number(row[0].strip()):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise SampleError(f"{path}:{line_no}: non-numeric value in row {row}")
            if len(rows[-1]) != len(rows[0]):
                raise SampleError(
                    f"{path}:{line_no}: expected {len(rows[0])} columns, got {len(rows[-1])}"
                )

    if not rows:
        raise SampleError(f"{path}: no data rows")
    return Sample(np.array(rows), label=label, source=str(path))


def write_sample_csv(path: Path, sample: PointsLike) -> None:
    """Write points as CSV with an x0..x{d-1} header."""
    pts = as_points(sample)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([f"x{k}" for k in range(pts.shape[1])])
        for row in pts:
            writer.writerow([repr(float(v)) for v in row])
