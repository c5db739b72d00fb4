"""Row-action solver with a mismatched adjoint.

One step picks a random row i and moves the iterate along the surrogate
direction v_i instead of a_i:

    x <- x - omega_i * (<a_i, x> - beta_i) * v_i

With the default step size omega_i = 1/<a_i, v_i> the update is the oblique
projection onto the hyperplane {x : <a_i, x> = beta_i}; with V = A it reduces
to the classical randomized Kaczmarz projection.  beta is the right-hand side
in use: b, or b plus the stored noise vector for inconsistent systems.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidInputError, NumericError
from .linalg import as_matrix, as_vector
from .sampling import build_sampler, check_probability_vector, replicate_rng

# Rows whose pairing <a_i, v_i> falls below this relative threshold make the
# oblique step division meaningless and are rejected at construction.
PAIRING_RTOL = 1e-12
# Consistency required of (A, b, truth) when no noise vector is stored.
CONSISTENCY_RTOL = 1e-8
# Residual magnitude below which the adaptive step is defined as a no-op.
ADAPTIVE_RESIDUAL_FLOOR = 1e-14


class StepRule(enum.Enum):
    """Step-size choices for the row update."""

    OBLIQUE_EXACT = "oblique"          # omega = 1/<a_i, v_i>, lands on the a-hyperplane
    INVERSE_ROW_NORM_A = "rownorm-a"   # omega = 1/||a_i||^2
    INVERSE_ROW_NORM_V = "rownorm-v"   # omega = 1/||v_i||^2
    ADAPTIVE_V_HYPERPLANE = "adaptive-v"  # iterate-dependent; lands on the v-hyperplane

    @property
    def is_static(self):
        return self is not StepRule.ADAPTIVE_V_HYPERPLANE


@dataclass(frozen=True)
class SystemPair:
    """A linear system together with its surrogate adjoint rows.

    ``a`` and ``v`` are (m, n); ``b`` is the consistent right-hand side.  When
    ``noise`` is present the solver actually sees b + noise.  ``truth`` is the
    known solution used for error tracking, if any.

    Use ``make_system`` to construct: it enforces the row pairing sign
    convention and the consistency invariant.
    """

    a: np.ndarray
    v: np.ndarray
    b: np.ndarray
    noise: np.ndarray | None = None
    truth: np.ndarray | None = None
    pairing: np.ndarray = field(default=None, repr=False)  # <a_i, v_i> per row

    @property
    def m(self):
        return self.a.shape[0]

    @property
    def n(self):
        return self.a.shape[1]

    @property
    def rhs(self):
        """The right-hand side the iteration sees (b, or b + noise)."""
        if self.noise is None:
            return self.b
        return self.b + self.noise

    def row_norms_sq(self, which="a"):
        rows = self.a if which == "a" else self.v
        return np.einsum("ij,ij->i", rows, rows)


def make_system(a, v, b, noise=None, truth=None) -> SystemPair:
    """Validate and assemble a ``SystemPair``.

    Rows of ``v`` with negative pairing <a_i, v_i> have their sign flipped;
    rows with |<a_i, v_i>| <= 1e-12 * ||a_i|| * ||v_i|| are rejected.
    """
    a = as_matrix(a, "a")
    v = as_matrix(v, "v")
    b = as_vector(b, "b")
    if a.shape != v.shape:
        raise DimensionError(f"a and v must share shape: {a.shape} vs {v.shape}")
    m, n = a.shape
    if b.shape[0] != m:
        raise DimensionError(f"b has length {b.shape[0]}, expected {m}")
    pairing = np.einsum("ij,ij->i", a, v)
    flip = pairing < 0
    if np.any(flip):
        v = v.copy()
        v[flip] *= -1.0
        pairing = np.abs(pairing)
    norms_a = np.linalg.norm(a, axis=1)
    norms_v = np.linalg.norm(v, axis=1)
    bad = pairing <= PAIRING_RTOL * norms_a * norms_v
    if np.any(bad):
        rows = np.flatnonzero(bad).tolist()
        raise InvalidInputError(
            f"rows with near-orthogonal (a_i, v_i) pairing: {rows[:20]}"
            + ("..." if len(rows) > 20 else "")
        )
    if noise is not None:
        noise = as_vector(noise, "noise")
        if noise.shape[0] != m:
            raise DimensionError(f"noise has length {noise.shape[0]}, expected {m}")
    if truth is not None:
        truth = as_vector(truth, "truth")
        if truth.shape[0] != n:
            raise DimensionError(f"truth has length {truth.shape[0]}, expected {n}")
        if noise is None:
            residual = np.linalg.norm(a @ truth - b)
            if residual > CONSISTENCY_RTOL * max(np.linalg.norm(b), 1e-300):
                raise InvalidInputError(
                    f"truth does not solve the system: ||A truth - b|| = {residual:.3e}"
                )
    return SystemPair(a=a, v=v, b=b, noise=noise, truth=truth, pairing=pairing)


def static_step_sizes(sys: SystemPair, rule: StepRule) -> np.ndarray:
    """Per-row omega for the iterate-independent rules."""
    if not rule.is_static:
        raise InvalidInputError(
            "adaptive rule has no static step sizes (omega depends on the iterate)"
        )
    if rule is StepRule.OBLIQUE_EXACT:
        return 1.0 / sys.pairing
    if rule is StepRule.INVERSE_ROW_NORM_A:
        return 1.0 / sys.row_norms_sq("a")
    return 1.0 / sys.row_norms_sq("v")


@dataclass
class SolverConfig:
    rule: StepRule = StepRule.OBLIQUE_EXACT
    max_iterations: int = 1000
    log_stride: int = 1
    seed: int = 0
    residual_tolerance: float = 0.0  # relative to ||rhs||; 0 disables early stop
    start: np.ndarray | None = None  # None means the zero vector
    start_coefficients: np.ndarray | None = None  # x0 = V^T c, confined to rg V^T
    keep_logged_iterates: bool = False  # snapshot x at each log point

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidInputError("max_iterations must be >= 1")
        if self.log_stride < 1:
            raise InvalidInputError("log_stride must be >= 1")
        if self.residual_tolerance < 0:
            raise InvalidInputError("residual_tolerance must be >= 0")
        if self.start is not None and self.start_coefficients is not None:
            raise InvalidInputError("give either start or start_coefficients, not both")


@dataclass
class Trace:
    """Logged history of one solver run."""

    logged_k: list[int]
    error_norms: list[float]  # empty when truth is unknown
    residual_norms: list[float]
    final_x: np.ndarray
    rows_visited: np.ndarray  # visit count per row
    stopped_early: bool = False
    logged_x: list[np.ndarray] | None = None  # only with keep_logged_iterates


def initial_iterate(sys: SystemPair, cfg: SolverConfig) -> np.ndarray:
    if cfg.start_coefficients is not None:
        c = as_vector(cfg.start_coefficients, "start coefficients")
        if c.shape[0] != sys.m:
            raise DimensionError(
                f"start coefficients have length {c.shape[0]}, expected {sys.m}"
            )
        return sys.v.T @ c
    if cfg.start is not None:
        x0 = as_vector(cfg.start, "start")
        if x0.shape[0] != sys.n:
            raise DimensionError(f"start has length {x0.shape[0]}, expected {sys.n}")
        return x0.copy()
    return np.zeros(sys.n)


def rkma_step(sys: SystemPair, x, i, rule: StepRule = StepRule.OBLIQUE_EXACT):
    """One row update; returns the new iterate (input x is not modified)."""
    x = as_vector(x, "x")
    if x.shape[0] != sys.n:
        raise DimensionError(f"x has length {x.shape[0]}, expected {sys.n}")
    if not 0 <= i < sys.m:
        raise InvalidInputError(f"row index {i} out of range [0, {sys.m})")
    beta = sys.rhs[i]
    a_i = sys.a[i]
    v_i = sys.v[i]
    residual = a_i @ x - beta
    if rule is StepRule.OBLIQUE_EXACT:
        coeff = residual / sys.pairing[i]
    elif rule is StepRule.INVERSE_ROW_NORM_A:
        coeff = residual / (a_i @ a_i)
    elif rule is StepRule.INVERSE_ROW_NORM_V:
        coeff = residual / (v_i @ v_i)
    else:  # adaptive: lands on the v-hyperplane; no-op when already on the a-one
        if abs(residual) <= ADAPTIVE_RESIDUAL_FLOOR:
            return x.copy()
        coeff = (v_i @ x - beta) / (v_i @ v_i)
    x_new = x - coeff * v_i
    if not np.all(np.isfinite(x_new)):
        raise NumericError(f"non-finite iterate produced by row {i}")
    return x_new


def run(sys: SystemPair, p, cfg: SolverConfig) -> Trace:
    """Run the randomized iteration and log every ``log_stride`` steps.

    Iterations 0 and the final iterate are always logged.  Early stopping on
    the relative residual is checked at the logging points (keeping the
    per-step cost at O(n)).  Deterministic for a fixed config seed.
    """
    p = check_probability_vector(p)
    if len(p) != sys.m:
        raise DimensionError(f"p has length {len(p)}, expected {sys.m}")
    sampler = build_sampler(p)
    rng = replicate_rng(cfg.seed)
    omega = static_step_sizes(sys, cfg.rule) if cfg.rule.is_static else None

    x = initial_iterate(sys, cfg)
    rhs = sys.rhs
    rhs_norm = np.linalg.norm(rhs)
    tol_abs = cfg.residual_tolerance * rhs_norm
    rows_visited = np.zeros(sys.m, dtype=np.int64)

    logged_k: list[int] = []
    error_norms: list[float] = []
    residual_norms: list[float] = []
    logged_x: list[np.ndarray] | None = [] if cfg.keep_logged_iterates else None
    stopped_early = False

    def log_point(k):
        logged_k.append(k)
        if sys.truth is not None:
            error_norms.append(float(np.linalg.norm(x - sys.truth)))
        if logged_x is not None:
            logged_x.append(x.copy())
        residual = float(np.linalg.norm(sys.a @ x - rhs))
        residual_norms.append(residual)
        if not np.isfinite(residual):
            raise NumericError(f"non-finite residual at iteration {k}")
        return residual

    log_point(0)
    a, v = sys.a, sys.v
    for k in range(1, cfg.max_iterations + 1):
        i = sampler.draw(rng)
        rows_visited[i] += 1
        a_i = a[i]
        residual_i = a_i @ x - rhs[i]
        if cfg.rule.is_static:
            coeff = residual_i * omega[i]
        elif abs(residual_i) <= ADAPTIVE_RESIDUAL_FLOOR:
            coeff = 0.0
        else:
            v_i = v[i]
            coeff = (v_i @ x - rhs[i]) / (v_i @ v_i)
        x = x - coeff * v[i]
        if k % cfg.log_stride == 0 or k == cfg.max_iterations:
            residual = log_point(k)
            if k < cfg.max_iterations and cfg.residual_tolerance > 0 and residual <= tol_abs:
                stopped_early = True
                break

    return Trace(
        logged_k=logged_k,
        error_norms=error_norms,
        residual_norms=residual_norms,
        final_x=x,
        rows_visited=rows_visited,
        stopped_early=stopped_early,
        logged_x=logged_x,
    )


@dataclass
class ReplicateStats:
    """Replicate-averaged error statistics from a batch of independent runs."""

    logged_k: list[int]
    sq_errors: np.ndarray  # (n_logged, n_replicates) squared error norms
    final_x: np.ndarray  # (n_replicates, n) final iterates

    @property
    def mean_sq_errors(self):
        return self.sq_errors.mean(axis=1)


def run_replicates(sys: SystemPair, p, cfg: SolverConfig, n_replicates) -> ReplicateStats:
    """Run many independent replicates of the same configuration at once.

    The batch is vectorized across replicates (one row draw per replicate per
    step) and is deterministic given the config seed.  Requires a known truth
    since the point of replication is error statistics.
    """
    if sys.truth is None:
        raise InvalidInputError("replicate statistics need a known solution")
    p = check_probability_vector(p)
    if len(p) != sys.m:
        raise DimensionError(f"p has length {len(p)}, expected {sys.m}")
    sampler = build_sampler(p)
    rng = replicate_rng(cfg.seed)
    omega = static_step_sizes(sys, cfg.rule)  # adaptive rule not supported here

    x0 = initial_iterate(sys, cfg)
    x = np.tile(x0, (n_replicates, 1))  # (R, n)
    rhs = sys.rhs
    truth = sys.truth

    logged_k = [0]
    sq_errors = [np.einsum("rj,rj->r", x - truth, x - truth)]
    a, v = sys.a, sys.v
    for k in range(1, cfg.max_iterations + 1):
        idx = sampler.draw_array(rng, n_replicates)
        rows_a = a[idx]  # (R, n)
        residuals = np.einsum("rj,rj->r", rows_a, x) - rhs[idx]
        coeff = residuals * omega[idx]
        x -= coeff[:, None] * v[idx]
        if k % cfg.log_stride == 0 or k == cfg.max_iterations:
            logged_k.append(k)
            diff = x - truth
            sq_errors.append(np.einsum("rj,rj->r", diff, diff))
    return ReplicateStats(
        logged_k=logged_k,
        sq_errors=np.array(sq_errors),
        final_x=x,
    )


def exact_one_step_expectation(sys: SystemPair, x, p, rule: StepRule = StepRule.OBLIQUE_EXACT):
    """Exact one-step expectation by direct summation over all rows.

    Returns (mean, mean_sq_error) where mean = sum_i p_i * step(x, i) and
    mean_sq_error = sum_i p_i * ||step(x, i) - truth||^2.  Before returning,
    both values are cross-checked against the closed matrix forms

        mean - truth = (I - V^T D A)(x - truth)
        mean_sq_error = ||e||^2 - <e, (2 V^T D A - A^T S D A) e>,  e = x - truth

    with D = diag(p_i * omega_i), S = diag(omega_i * ||v_i||^2); a mismatch
    beyond 1e-10 (relative) raises ``NumericError``.
    """
    if sys.truth is None:
        raise InvalidInputError("exact expectation needs the known solution")
    if sys.noise is not None:
        raise InvalidInputError("exact expectation is defined for consistent systems")
    if not rule.is_static:
        raise InvalidInputError("adaptive rule has no static expectation matrices")
    p = check_probability_vector(p)
    if len(p) != sys.m:
        raise DimensionError(f"p has length {len(p)}, expected {sys.m}")
    x = as_vector(x, "x")

    mean = np.zeros(sys.n)
    mean_sq = 0.0
    for i in range(sys.m):
        stepped = rkma_step(sys, x, i, rule)
        mean += p[i] * stepped
        diff = stepped - sys.truth
        mean_sq += p[i] * float(diff @ diff)

    # Closed-form cross-check (the defining identities of the scaling matrices).
    omega = static_step_sizes(sys, rule)
    d = p * omega
    s = omega * sys.row_norms_sq("v")
    e = x - sys.truth
    vtda_e = sys.v.T @ (d * (sys.a @ e))
    scale = max(float(np.linalg.norm(e)), 1.0)
    mean_err = np.linalg.norm((mean - sys.truth) - (e - vtda_e))
    if mean_err > 1e-10 * scale:
        raise NumericError(
            f"one-step mean deviates from (I - V^T D A) e by {mean_err:.3e}"
        )
    ae = sys.a @ e
    quad = float(e @ e) - (2.0 * float(e @ vtda_e) - float(ae @ (s * d * ae)))
    if abs(mean_sq - quad) > 1e-10 * max(abs(quad), scale**2):
        raise NumericError(
            f"one-step mean squared error deviates from the quadratic form: "
            f"{mean_sq:.16e} vs {quad:.16e}"
        )
    return mean, mean_sq
