"""Experiment instance generators.

Gaussian systems (overdetermined, noisy, underdetermined), thresholded and
entry-zeroed surrogate adjoints, row-scaled instances for the probability
optimization study, and a parallel-beam tomography pair built from an exact
Siddon-style ray tracer over a unit-pixel grid.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.ndimage

from .errors import EmptySystemError, InvalidInputError, SingularMatrixError
from .linalg import as_matrix, as_vector, is_invertible
from .sampling import replicate_rng
from .solver import SystemPair, make_system


def gen_gaussian(m, n, seed) -> np.ndarray:
    """i.i.d. standard normal (m, n) matrix, deterministic per seed."""
    if m < 1 or n < 1:
        raise InvalidInputError(f"matrix shape ({m}, {n}) must be positive")
    return replicate_rng(seed).standard_normal((m, n))


def mismatch_threshold(a, tau) -> np.ndarray:
    """Surrogate adjoint rows: copy of A with entries |A_ij| < tau zeroed."""
    a = as_matrix(a, "a")
    if tau < 0:
        raise InvalidInputError(f"threshold tau = {tau} must be >= 0")
    return np.where(np.abs(a) >= tau, a, 0.0)


def assemble_consistent(a, v, seed) -> SystemPair:
    """Consistent system with a Gaussian solution: b = A x_hat."""
    a = as_matrix(a, "a")
    truth = replicate_rng(seed, 1).standard_normal(a.shape[1])
    return make_system(a, v, a @ truth, truth=truth)


def assemble_inconsistent(a, v, noise_scale, seed) -> SystemPair:
    """Noisy right-hand side: the solver sees b + r with Gaussian r.

    The consistent part b = A x_hat and the noise r are stored separately so
    the noise amplification and fixed-point error stay computable.
    """
    a = as_matrix(a, "a")
    rng = replicate_rng(seed, 1)
    truth = rng.standard_normal(a.shape[1])
    noise = noise_scale * rng.standard_normal(a.shape[0])
    return make_system(a, v, a @ truth, noise=noise, truth=truth)


def assemble_underdetermined(m, n, tau, seed) -> SystemPair:
    """Wide system whose solution lies in rg V^T (x_hat = V^T c).

    Generically x_hat is then *not* in rg A^T, so the matched iteration
    stalls at the range gap while the mismatched one can converge.
    """
    if m >= n:
        raise InvalidInputError(f"underdetermined instance needs m < n, got {m} x {n}")
    a = gen_gaussian(m, n, seed)
    v = mismatch_threshold(a, tau)
    c = replicate_rng(seed, 2).standard_normal(m)
    truth = v.T @ c
    if not is_invertible(a @ v.T):
        raise SingularMatrixError("A V^T is singular for this seed; pick another")
    return make_system(a, v, a @ truth, truth=truth)


def assemble_scaled_for_probopt(m, n, zero_frac, seed) -> SystemPair:
    """Row-scaled Gaussian instance with randomly zeroed surrogate entries.

    Row i (1-based) of A is scaled by 2 / (sqrt(i) + 2), giving decaying row
    norms; V equals A with floor(zero_frac * m * n) uniformly chosen entries
    set to zero.
    """
    if not 0 <= zero_frac < 1:
        raise InvalidInputError(f"zero_frac = {zero_frac} must be in [0, 1)")
    rng = replicate_rng(seed)
    a = rng.standard_normal((m, n))
    a *= (2.0 / (np.sqrt(np.arange(1, m + 1)) + 2.0))[:, None]
    v = a.copy()
    n_zero = int(zero_frac * m * n)
    if n_zero:
        flat = rng.choice(m * n, size=n_zero, replace=False)
        v.flat[flat] = 0.0
    truth = replicate_rng(seed, 1).standard_normal(n)
    return make_system(a, v, a @ truth, truth=truth)


def parallel_beam_matrix(grid_n, angles_deg, rays_per_angle, detector_span) -> np.ndarray:
    """Exact line-intersection projection matrix for a parallel-beam geometry.

    The image is a grid_n x grid_n block of unit pixels centered at the
    origin, stored row-major with row 0 at the top (image convention).  For
    each angle, ``rays_per_angle`` parallel rays are spread over
    ``detector_span`` at evenly spaced lateral offsets (cell-midpoint
    spacing).  Row ordering is angle-major, ray-minor.  Each entry is the
    exact intersection length of the ray with a pixel; rays that miss the
    grid produce zero rows, which are kept at this stage.
    """
    if grid_n < 2:
        raise InvalidInputError(f"grid_n = {grid_n} must be >= 2")
    half = grid_n / 2.0
    offsets = (np.arange(rays_per_angle) + 0.5 - rays_per_angle / 2.0) * (
        detector_span / rays_per_angle
    )
    rows = np.zeros((len(angles_deg) * rays_per_angle, grid_n * grid_n))
    edges = np.arange(grid_n + 1) - half  # shared x and y grid-line coordinates
    row_idx = 0
    for angle in angles_deg:
        theta = np.deg2rad(angle)
        d = np.array([np.cos(theta), np.sin(theta)])  # ray direction
        u = np.array([-np.sin(theta), np.cos(theta)])  # lateral (detector) axis
        for t in offsets:
            origin = t * u
            _trace_ray(rows[row_idx], origin, d, edges, grid_n, half)
            row_idx += 1
    return rows


def _trace_ray(out, origin, d, edges, grid_n, half):
    """Accumulate intersection lengths of one ray into a flat pixel row."""
    # Parametric entry/exit of the bounding square along each axis.
    s_min, s_max = -np.inf, np.inf
    for axis in range(2):
        if abs(d[axis]) < 1e-14:
            if not -half <= origin[axis] <= half:
                return  # parallel to the axis and outside the slab
        else:
            s0 = (-half - origin[axis]) / d[axis]
            s1 = (half - origin[axis]) / d[axis]
            s_min = max(s_min, min(s0, s1))
            s_max = min(s_max, max(s0, s1))
    if not s_min < s_max:
        return
    # All grid-line crossings inside the traversal interval.
    crossings = [np.array([s_min, s_max])]
    for axis in range(2):
        if abs(d[axis]) >= 1e-14:
            s_cross = (edges - origin[axis]) / d[axis]
            crossings.append(s_cross[(s_cross > s_min) & (s_cross < s_max)])
    s = np.unique(np.concatenate(crossings))
    mids = 0.5 * (s[1:] + s[:-1])
    lengths = np.diff(s)
    points = origin[None, :] + mids[:, None] * d[None, :]
    cols = np.clip(np.floor(points[:, 0] + half).astype(int), 0, grid_n - 1)
    rows_img = np.clip(
        grid_n - 1 - np.floor(points[:, 1] + half).astype(int), 0, grid_n - 1
    )
    np.add.at(out, rows_img * grid_n + cols, lengths)


def ct_mismatch_pair(full, b_full, truth=None) -> SystemPair:
    """Forward/backprojection pair from a full projection matrix.

    The forward rows take every third row of ``full`` (the middle ray of
    each group of three); the backprojection rows average the group (a
    simple centered model of detector bin width).  Anchoring the forward
    ray at the bin center keeps the expected iteration stable; anchoring it
    at the bin edge makes the restricted spectral radius exceed one.  Rows
    whose forward part is zero are eliminated from A, V, and b together;
    rows with a vanishing pairing are dropped with a warning.
    """
    full = as_matrix(full, "full")
    b_full = as_vector(b_full, "b_full")
    if full.shape[0] % 3 != 0:
        raise InvalidInputError(
            f"full matrix has {full.shape[0]} rows; expected a multiple of 3"
        )
    if b_full.shape[0] != full.shape[0]:
        raise InvalidInputError("b_full length does not match the full matrix")
    a = full[1::3]
    v = (full[0::3] + full[1::3] + full[2::3]) / 3.0
    b = b_full[1::3]
    nonzero = a.any(axis=1)
    a, v, b = a[nonzero], v[nonzero], b[nonzero]
    if a.shape[0] == 0:
        raise EmptySystemError("all forward rows are zero")
    pairing = np.einsum("ij,ij->i", a, v)
    norms = np.linalg.norm(a, axis=1) * np.linalg.norm(v, axis=1)
    ok = pairing > 1e-12 * norms
    dropped = int(np.count_nonzero(~ok))
    if dropped:
        warnings.warn(f"dropped {dropped} rows with vanishing pairing", stacklevel=2)
        a, v, b = a[ok], v[ok], b[ok]
    if a.shape[0] == 0:
        raise EmptySystemError("all rows eliminated by the pairing filter")
    return make_system(a, v, b, truth=truth)


def smooth_phantom(grid_n, seed) -> np.ndarray:
    """Smooth positive test image, flattened row-major and scaled to max 1."""
    rng = replicate_rng(seed, 3)
    field = rng.random((grid_n, grid_n))
    smooth = scipy.ndimage.gaussian_filter(field, sigma=max(1.0, grid_n / 12.0))
    smooth /= smooth.max()
    return smooth.reshape(-1)
