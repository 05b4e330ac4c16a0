"""
Dense symmetric solves, eigendecomposition and a brute-force inverse oracle.

Cholesky work goes through LAPACK (scipy.linalg.lapack.dpotrf/dpotrs) so the
offending pivot of a failed factorization can be reported. No jitter is ever
added to the diagonal.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .errors import ConvergenceError, FactorizationError, SingularMatrixError

logger = logging.getLogger(__name__)

EIGH_MAX_N = 5000
BRUTE_MAX_N = 200
PIVOT_TOL = 1e-14


@dataclass
class CostLedger:
    """Deterministic operation counts for one fit."""

    kernel_evals: int = 0
    solver_flops: int = 0

    def add_kernel_evals(self, count: int) -> None:
        self.kernel_evals += int(count)

    def add_flops(self, count: int) -> None:
        self.solver_flops += int(count)

    @property
    def total(self) -> int:
        return self.kernel_evals + self.solver_flops

    def to_dict(self) -> dict[str, int]:
        return {
            "kernel_evals": self.kernel_evals,
            "solver_flops": self.solver_flops,
            "total": self.total,
        }


def cholesky_flops(n: int, nrhs: int = 1) -> int:
    """n^3/3 for the factorization plus n^2 per right-hand side."""
    return n**3 // 3 + n * n * nrhs


def eigh_flops(n: int) -> int:
    """Nominal 9 n^3 for a dense symmetric eigensolver."""
    return 9 * n**3


@dataclass(frozen=True)
class SpdSystem:
    """The shifted system (alpha I + A) x = b with A symmetric PSD."""

    matrix: np.ndarray
    shift: float

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"System matrix must be square, got shape {A.shape}")
        if not np.array_equal(A, A.T):
            raise ValueError("System matrix must be exactly symmetric")
        if not self.shift > 0:
            raise ValueError(f"Shift alpha must be positive, got {self.shift}")
        object.__setattr__(self, "matrix", A)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def shifted(self) -> np.ndarray:
        """alpha I + A as a fresh array."""
        M = self.matrix.copy()
        M[np.diag_indices_from(M)] += self.shift
        return M


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower Cholesky factor of alpha I + A; reusable across right-hand sides."""

    lower: np.ndarray

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve one or many right-hand sides, one column at a time."""
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.n:
            raise ValueError(f"Right-hand side has {b.shape[0]} rows, system has {self.n}")
        if b.ndim == 1:
            return self._solve_vector(b)
        out = np.empty_like(b)
        for j in range(b.shape[1]):
            out[:, j] = self._solve_vector(b[:, j])
        return out

    def _solve_vector(self, b: np.ndarray) -> np.ndarray:
        x, info = lapack.dpotrs(self.lower, np.ascontiguousarray(b), lower=1)
        if info != 0:
            raise ValueError(f"dpotrs rejected argument {-info}")
        return x


def factorize(system: SpdSystem) -> CholeskyFactor:
    """
    Cholesky-factorize alpha I + A without pivoting.

    Raises:
        FactorizationError: If a pivot is non-positive (matrix not PD)
    """
    c, info = lapack.dpotrf(system.shifted(), lower=1, clean=1)
    if info > 0:
        pivot = info - 1
        raise FactorizationError(
            f"Cholesky factorization failed at pivot {pivot}: "
            f"alpha I + A is not positive definite (alpha={system.shift})",
            pivot=pivot,
        )
    if info < 0:
        raise ValueError(f"dpotrf rejected argument {-info}")
    return CholeskyFactor(lower=c)


def solve_spd(
    system: SpdSystem, b: np.ndarray, ledger: CostLedger | None = None
) -> np.ndarray:
    """Solve (alpha I + A) x = b for a vector or a matrix of right-hand sides."""
    b = np.asarray(b, dtype=np.float64)
    factor = factorize(system)
    x = factor.solve(b)
    if ledger is not None:
        nrhs = 1 if b.ndim == 1 else b.shape[1]
        ledger.add_flops(cholesky_flops(system.n, nrhs))
    return x


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted descending with matching orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


def eigh(A: np.ndarray, max_n: int = EIGH_MAX_N, ledger: CostLedger | None = None) -> EigenDecomposition:
    """
    Symmetric eigendecomposition, eigenvalues in descending order.

    Raises:
        ValueError: If A is not square/symmetric or exceeds max_n
        ConvergenceError: If the LAPACK eigensolver fails to converge
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"eigh requires a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n > max_n:
        raise ValueError(f"Matrix size {n} exceeds the eigendecomposition cap {max_n}")
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * (1.0 + np.abs(A).max(initial=0.0))):
        raise ValueError("eigh requires a symmetric matrix")

    try:
        w, V = linalg.eigh(A)
    except linalg.LinAlgError as e:
        match = re.search(r"(\d+)", str(e))
        iterations = int(match.group(1)) if match else -1
        raise ConvergenceError(
            f"Symmetric eigensolver did not converge ({e})", iterations=iterations
        )

    if ledger is not None:
        ledger.add_flops(eigh_flops(n))
    return EigenDecomposition(eigenvalues=w[::-1].copy(), eigenvectors=V[:, ::-1].copy())


def brute_inverse(A: np.ndarray, max_n: int = BRUTE_MAX_N, tol: float = PIVOT_TOL) -> np.ndarray:
    """
    Gauss-Jordan inverse with partial pivoting; a test oracle, not a solver.

    Raises:
        ValueError: If A is not square or exceeds max_n
        SingularMatrixError: If a pivot falls below tol
    """
    A = np.array(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"brute_inverse requires a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n > max_n:
        raise ValueError(f"brute_inverse is limited to n <= {max_n}, got {n}")

    aug = np.hstack([A, np.eye(n)])
    for col in range(n):
        pivot_row = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[pivot_row, col]) < tol:
            raise SingularMatrixError(
                f"Matrix is singular: pivot {col} has magnitude "
                f"{abs(aug[pivot_row, col]):.3e} < {tol:g}"
            )
        if pivot_row != col:
            aug[[col, pivot_row]] = aug[[pivot_row, col]]
        aug[col] /= aug[col, col]
        others = np.arange(n) != col
        aug[others] -= np.outer(aug[others, col], aug[col])
    return aug[:, n:]
