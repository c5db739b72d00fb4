"""Dense linear-algebra kernel used by the diagnostics and optimizers.

Matrices are plain float64 numpy arrays (row-major); vectors are 1-d arrays.
The heavy factorizations are delegated to LAPACK via numpy/scipy, wrapped
behind small functions that pin down the contracts the rest of the package
relies on (symmetrization policy, rank drop tolerance, pivot checks).
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import (
    ConvergenceError,
    DimensionError,
    InvalidInputError,
    RankDeficiencyError,
    SingularMatrixError,
)

# Relative asymmetry tolerated by the symmetric eigensolver before we refuse
# to average the skew away.
SYMMETRY_RTOL = 1e-8
# Rank drop tolerance for the range-basis detection, relative to ||M||_F.
RANK_DROP_RTOL = 1e-10
# Pivot threshold for declaring an LU factorization singular.
PIVOT_RTOL = 1e-12


class SingularTriplet(NamedTuple):
    """Top singular value with unit left/right vectors: M @ right = sigma * left."""

    sigma: float
    left: np.ndarray
    right: np.ndarray


def as_matrix(m, name="matrix") -> np.ndarray:
    """Validate and return a finite 2-d float64 array."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"{name} must be a 2-d array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError(f"{name} contains NaN or Inf entries")
    return m


def as_vector(v, name="vector") -> np.ndarray:
    """Validate and return a finite 1-d float64 array."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] < 1:
        raise DimensionError(f"{name} must be a 1-d array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} contains NaN or Inf entries")
    return v


def _require_square(m, name):
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")


def symmetric_eig_min(m) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and a unit eigenvector of a symmetric matrix.

    The input may carry rounding skew up to ``SYMMETRY_RTOL * max|M|``; it is
    symmetrized by averaging with its transpose before solving.  Larger
    asymmetry is rejected.
    """
    m = as_matrix(m, "symmetric matrix")
    _require_square(m, "symmetric matrix")
    scale = np.abs(m).max()
    skew = np.abs(m - m.T).max()
    if scale > 0 and skew > SYMMETRY_RTOL * scale:
        raise InvalidInputError(
            f"matrix is not symmetric: max skew {skew:.3e} exceeds "
            f"{SYMMETRY_RTOL:.0e} * max|M| = {SYMMETRY_RTOL * scale:.3e}"
        )
    sym = 0.5 * (m + m.T)
    vals, vecs = np.linalg.eigh(sym)
    return float(vals[0]), vecs[:, 0].copy()


def symmetric_eigensystem(m) -> tuple[np.ndarray, np.ndarray]:
    """All eigenvalues (ascending) and eigenvectors of a symmetric matrix."""
    m = as_matrix(m, "symmetric matrix")
    _require_square(m, "symmetric matrix")
    return np.linalg.eigh(0.5 * (m + m.T))


def spectral_radius(m) -> float:
    """Largest eigenvalue modulus of a square matrix (complex pairs included)."""
    m = as_matrix(m, "matrix")
    _require_square(m, "matrix")
    try:
        eigs = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        # Rare QR-iteration stall inside LAPACK; report the Frobenius norm as
        # the best available upper bound on the radius.
        raise ConvergenceError(
            f"eigenvalue iteration did not converge: {exc}",
            estimate=float(np.linalg.norm(m)),
        ) from exc
    return float(np.max(np.abs(eigs)))


def top_singular_triplet(m) -> SingularTriplet:
    """Spectral norm of M together with the corresponding singular vectors."""
    m = as_matrix(m, "matrix")
    rows, cols = m.shape
    if not m.any():
        left = np.zeros(rows)
        right = np.zeros(cols)
        left[0] = 1.0
        right[0] = 1.0
        return SingularTriplet(0.0, left, right)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return SingularTriplet(float(s[0]), u[:, 0].copy(), vt[0].copy())


def spectral_norm(m) -> float:
    return top_singular_triplet(m).sigma


def orthonormal_range_basis(m) -> np.ndarray:
    """Orthonormal basis Z of range(M), detected by column-pivoted QR.

    Columns of R with |R_kk| below ``RANK_DROP_RTOL * ||M||_F`` are dropped.
    A zero matrix has no range and is rejected.
    """
    m = as_matrix(m, "matrix")
    fro = np.linalg.norm(m)
    if fro == 0.0:
        raise RankDeficiencyError("zero matrix has rank 0; no range basis exists")
    q, r, _ = scipy.linalg.qr(m, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.count_nonzero(diag > RANK_DROP_RTOL * fro))
    if rank == 0:
        raise RankDeficiencyError("matrix rank is 0 at the drop tolerance")
    return q[:, :rank].copy()


def lu_solve(m, b) -> np.ndarray:
    """Solve the square system M x = b by partial-pivoted LU.

    Raises ``SingularMatrixError`` when the smallest pivot falls below
    ``PIVOT_RTOL * ||M||_F``.
    """
    m = as_matrix(m, "matrix")
    _require_square(m, "matrix")
    b = as_vector(b, "right-hand side")
    if b.shape[0] != m.shape[0]:
        raise DimensionError(
            f"rhs length {b.shape[0]} does not match matrix size {m.shape[0]}"
        )
    with warnings.catch_warnings():
        # The pivot check below is our singularity report; scipy's warning is noise.
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= PIVOT_RTOL * np.linalg.norm(m):
        raise SingularMatrixError(
            f"matrix is singular to working precision (min pivot {pivots.min():.3e})"
        )
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def is_invertible(m) -> bool:
    """Pivot-threshold invertibility test on a square matrix."""
    m = as_matrix(m, "matrix")
    _require_square(m, "matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, _ = scipy.linalg.lu_factor(m, check_finite=False)
    pivots = np.abs(np.diag(lu))
    return bool(pivots.min() > PIVOT_RTOL * np.linalg.norm(m))
