"""Numerical kernels shared by the whitening, ICA, training and removal code.

All functions take float64 numpy arrays with signals on rows and time on
columns. Variances use the population divisor T throughout.
"""
from dataclasses import dataclass, field
import logging
from typing import Tuple

import numpy as np

from errors import DimensionError, InsufficientSamplesError, LengthMismatchError, NotSymmetricError, \
    ZeroVarianceError

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-9
JACOBI_TOLERANCE = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass
class SeededRng:
    """Seeded random stream.

    Wraps a numpy ``Generator`` over the PCG64 bit generator. Two instances
    built from the same seed produce identical streams on every platform.
    Normals come from ``Generator.standard_normal`` and fill arrays in
    row-major order, so drawing two n-entry matrices yields the same values as
    one 2n-entry draw.
    """
    seed: int = 0
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer, got {}".format(self.seed))
        self.seed = int(self.seed)
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    def derive(self, offset: int) -> 'SeededRng':
        """A new independent stream seeded with ``seed + offset`` (mod 2**64)."""
        return SeededRng((self.seed + int(offset)) % 2 ** 64)


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Validate and convert ``x`` to a finite 2-D float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError("dimension error: {} must be a non-empty 2-D array, got shape {}".format(
            name, arr.shape))
    if not np.all(np.isfinite(arr)):
        raise DimensionError("{} contains non-finite values".format(name))
    return arr


def covariance(X) -> np.ndarray:
    """Population covariance E{X̂X̂ᵀ} of the rows of ``X`` (divisor T).

    The result is made exactly symmetric.
    """
    X = as_matrix(X, "X")
    n_samples = X.shape[1]
    if n_samples < 2:
        raise InsufficientSamplesError("insufficient samples: covariance needs T >= 2, got {}".format(n_samples))
    centered = X - X.mean(axis=1, keepdims=True)
    cov = centered @ centered.T / n_samples
    return (cov + cov.T) / 2.0


def sym_eig(C) -> Tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(V, d)`` with orthogonal ``V`` whose columns are eigenvectors and
    eigenvalues ``d`` sorted in descending order, so that V·diag(d)·Vᵀ = C.
    Sweeps stop once the largest off-diagonal entry drops below
    ``JACOBI_TOLERANCE`` relative to the Frobenius norm of ``C``.
    """
    A = as_matrix(C, "C").copy()
    n = A.shape[0]
    if A.shape[1] != n:
        raise DimensionError("dimension error: sym_eig needs a square matrix, got {}".format(A.shape))
    scale = max(1.0, float(np.abs(A).max()))
    if np.abs(A - A.T).max() > SYMMETRY_TOLERANCE * scale:
        raise NotSymmetricError("not symmetric: max |C - Cᵀ| = {:.3g}".format(np.abs(A - A.T).max()))
    A = (A + A.T) / 2.0

    V = np.eye(n)
    threshold = JACOBI_TOLERANCE * max(np.linalg.norm(A), np.finfo(float).tiny)
    for sweep in range(JACOBI_MAX_SWEEPS):
        off_diagonal = np.abs(A - np.diag(np.diag(A)))
        if n < 2 or off_diagonal.max() < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < threshold * 1e-3:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                A[p, q] = A[q, p] = 0.0

                vec_p, vec_q = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vec_p - s * vec_q
                V[:, q] = s * vec_p + c * vec_q
    else:
        logger.warning("Jacobi eigensolver stopped after %d sweeps without reaching tolerance", JACOBI_MAX_SWEEPS)

    d = np.diag(A).copy()
    order = np.argsort(-d, kind="stable")
    return V[:, order], d[order]


def corrcoef(a, b) -> float:
    """Pearson correlation coefficient of two equal-length vectors."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise LengthMismatchError("length mismatch: {} vs {}".format(a.size, b.size))
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ZeroVarianceError("zero variance: correlation is undefined for a constant vector")
    a_c = a - a.mean()
    b_c = b - b.mean()
    r = (a_c @ b_c) / np.sqrt((a_c @ a_c) * (b_c @ b_c))
    return float(np.clip(r, -1.0, 1.0))


def randn(rows: int, cols: int, rng: SeededRng) -> np.ndarray:
    """``rows × cols`` matrix of i.i.d. standard normals drawn from ``rng``."""
    if int(rows) < 1 or int(cols) < 1:
        raise DimensionError("dimension error: randn needs positive sizes, got {}x{}".format(rows, cols))
    return rng.generator.standard_normal((int(rows), int(cols)))
