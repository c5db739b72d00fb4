"""Simplex-constrained optimization of the row-selection probabilities.

Two objectives over the probability simplex: maximize the contraction
constant lambda_min(W(p)) (concave in p, projected supergradient ascent) or
minimize the spectral norm ||I - V^T D A|| (convex in p, projected
subgradient descent).  Both use the exact Euclidean simplex projection and a
best-iterate tracker, since subgradient methods are not monotone.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSubdifferentialError, InvalidInputError
from .linalg import as_vector, symmetric_eigensystem, top_singular_triplet
from .sampling import check_probability_vector, replicate_rng
from .solver import StepRule, SystemPair, static_step_sizes

# Relative eigen/singular gap below which the extremal vector is flagged as a
# degenerate (tied) subdifferential point.
DEGENERACY_GAP_RTOL = 1e-10
# Slack allowed when checking the concavity/convexity first-order inequalities.
SUBGRADIENT_SLACK = 1e-8


class Objective(enum.Enum):
    MAX_LAMBDA_MIN = "lambda"
    MIN_SPECTRAL_NORM = "norm"


class StepSchedule(enum.Enum):
    CONSTANT = "const"
    SQRT_DECAY = "sqrt"


@dataclass
class ProbOptConfig:
    objective: Objective = Objective.MAX_LAMBDA_MIN
    iterations: int = 200
    schedule: StepSchedule = StepSchedule.SQRT_DECAY
    base_step: float = 1.0
    record_history: bool = True
    seed: int = 0  # drives the sign-validation probes only

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidInputError("iterations must be >= 1")
        if self.base_step <= 0:
            raise InvalidInputError("base_step must be > 0")

    def step_at(self, k):
        if self.schedule is StepSchedule.CONSTANT:
            return self.base_step
        return self.base_step / math.sqrt(k + 1.0)


@dataclass
class ProbOptResult:
    best_p: np.ndarray
    best_objective: float
    history: list[tuple[int, float]]
    objective_evals: np.ndarray
    degenerate_iterations: list[int] = field(default_factory=list)


def project_simplex(y) -> np.ndarray:
    """Exact Euclidean projection onto the probability simplex.

    Sort-and-threshold: with the entries sorted in decreasing order, find the
    largest k for which y_(k) exceeds the running threshold, subtract it, and
    clip at zero.  The result is renormalized by its exact sum so the simplex
    invariant holds to full precision for long vectors.
    """
    y = as_vector(y, "y")
    u = np.sort(y)[::-1]
    css = np.cumsum(u)
    thresholds = (css - 1.0) / np.arange(1, len(y) + 1)
    k = np.nonzero(u > thresholds)[0][-1]
    p = np.clip(y - thresholds[k], 0.0, None)
    return p / math.fsum(p.tolist())


def _expectation_improvement_matrix(sys, p, rule):
    omega = static_step_sizes(sys, rule)
    d = p * omega
    s = omega * sys.row_norms_sq("v")
    vtda = sys.v.T @ (d[:, None] * sys.a)
    return vtda + vtda.T - sys.a.T @ ((s * d)[:, None] * sys.a)


def lambda_objective(sys: SystemPair, p, rule: StepRule = StepRule.OBLIQUE_EXACT) -> float:
    w = _expectation_improvement_matrix(sys, np.asarray(p, float), rule)
    vals, _ = symmetric_eigensystem(w)
    return float(vals[0])


def norm_objective(sys: SystemPair, p, rule: StepRule = StepRule.OBLIQUE_EXACT) -> float:
    omega = static_step_sizes(sys, rule)
    d = np.asarray(p, float) * omega
    vtda = sys.v.T @ (d[:, None] * sys.a)
    return top_singular_triplet(np.eye(sys.n) - vtda).sigma


def supergradient_lambda(sys: SystemPair, p, rule: StepRule = StepRule.OBLIQUE_EXACT):
    """Supergradient of p -> lambda_min(W(p)) at p.

    With x a unit eigenvector for the smallest eigenvalue of W, the component
    for row i is omega_i * <2 v_i - s_i a_i, x> * <a_i, x>.  Returns
    (gradient, degenerate flag); the flag marks a (near-)tied smallest
    eigenvalue, where any extremal eigenvector still yields a valid
    supergradient element.
    """
    p = check_probability_vector(p)
    w = _expectation_improvement_matrix(sys, p, rule)
    vals, vecs = symmetric_eigensystem(w)
    x = vecs[:, 0]
    scale = max(abs(vals[0]), abs(vals[-1]), 1e-30)
    degenerate = len(vals) > 1 and (vals[1] - vals[0]) <= DEGENERACY_GAP_RTOL * scale
    omega = static_step_sizes(sys, rule)
    s = omega * sys.row_norms_sq("v")
    ax = sys.a @ x
    vx = sys.v @ x
    return omega * (2.0 * vx - s * ax) * ax, degenerate


def _norm_subgradient_candidate(sys, p, rule):
    """Unsigned candidate from the top singular pair of I - V^T D A."""
    omega = static_step_sizes(sys, rule)
    d = p * omega
    vtda = sys.v.T @ (d[:, None] * sys.a)
    u_mat, s_vals, v_t = np.linalg.svd(np.eye(sys.n) - vtda)
    sigma, left, right = float(s_vals[0]), u_mat[:, 0], v_t[0]
    degenerate = len(s_vals) > 1 and (s_vals[0] - s_vals[1]) <= DEGENERACY_GAP_RTOL * max(
        s_vals[0], 1e-30
    )
    candidate = -omega * (sys.v @ left) * (sys.a @ right)
    return candidate, sigma, degenerate


def validate_subgradient_sign(
    sys: SystemPair,
    p,
    rule: StepRule = StepRule.OBLIQUE_EXACT,
    n_probes: int = 24,
    seed: int = 0,
):
    """Pick the sign that makes the candidate a genuine subgradient.

    The candidate built from the top singular pair is checked, with both
    signs, against the convexity underestimate f(q) >= f(p) + <g, q - p> on
    random simplex probes; the sign that satisfies it is returned.  Failure
    of both signs indicates a degenerate (tied) top singular value.
    """
    p = check_probability_vector(p)
    candidate, f_p, _ = _norm_subgradient_candidate(sys, p, rule)
    rng = replicate_rng(seed, 101)
    probes = rng.dirichlet(np.ones(sys.m), size=n_probes)
    gaps = np.array([norm_objective(sys, q, rule) - f_p for q in probes])
    inner = probes @ candidate - p @ candidate
    plus_ok = bool(np.all(gaps >= inner - SUBGRADIENT_SLACK))
    minus_ok = bool(np.all(gaps >= -inner - SUBGRADIENT_SLACK))
    if plus_ok:
        return 1.0
    if minus_ok:
        return -1.0
    raise DegenerateSubdifferentialError(
        "no sign of the singular-pair candidate satisfies the subgradient "
        "inequality; the top singular value appears to be tied"
    )


def subgradient_norm(
    sys: SystemPair,
    p,
    rule: StepRule = StepRule.OBLIQUE_EXACT,
    sign: float | None = None,
):
    """Validated subgradient of p -> ||I - V^T D A|| at p.

    ``sign`` may carry a previously validated orientation (it is fixed per
    instance); when omitted, the sign is validated on the spot.  Returns
    (gradient, degenerate flag).
    """
    p = check_probability_vector(p)
    if sign is None:
        sign = validate_subgradient_sign(sys, p, rule)
    candidate, _, degenerate = _norm_subgradient_candidate(sys, p, rule)
    return sign * candidate, degenerate


def optimize_probabilities(
    sys: SystemPair,
    rule: StepRule = StepRule.OBLIQUE_EXACT,
    cfg: ProbOptConfig | None = None,
) -> ProbOptResult:
    """Projected super/subgradient iteration from the uniform distribution.

    Ascent for the lambda objective, descent for the norm objective, exact
    simplex projection after every step, best iterate kept (the raw iterate
    sequence is not monotone).
    """
    if sys.m < 2:
        raise InvalidInputError("probability optimization needs at least 2 rows")
    cfg = cfg or ProbOptConfig()
    maximizing = cfg.objective is Objective.MAX_LAMBDA_MIN
    evaluate = lambda_objective if maximizing else norm_objective

    p = np.full(sys.m, 1.0 / sys.m)
    sign = None
    if not maximizing:
        sign = validate_subgradient_sign(sys, p, rule, seed=cfg.seed)

    values = [evaluate(sys, p, rule)]
    best_p = p.copy()
    best_value = values[0]
    degenerate_iterations: list[int] = []

    for k in range(cfg.iterations):
        if maximizing:
            g, degenerate = supergradient_lambda(sys, p, rule)
            p = project_simplex(p + cfg.step_at(k) * g)
        else:
            g, degenerate = subgradient_norm(sys, p, rule, sign=sign)
            p = project_simplex(p - cfg.step_at(k) * g)
        if degenerate:
            degenerate_iterations.append(k)
        value = evaluate(sys, p, rule)
        values.append(value)
        if (maximizing and value > best_value) or (
            not maximizing and value < best_value
        ):
            best_value = value
            best_p = p.copy()

    objective_evals = np.array(values)
    history = list(enumerate(values)) if cfg.record_history else []
    return ProbOptResult(
        best_p=best_p,
        best_objective=best_value,
        history=history,
        objective_evals=objective_evals,
        degenerate_iterations=degenerate_iterations,
    )
