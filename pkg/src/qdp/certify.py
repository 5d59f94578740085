"""Privacy budgets and robustness certificates for depolarised classifiers.

For composed depolarisation p and inputs within trace distance tau of
each other, every outcome probability ratio is pinned inside
[e^-eps, e^eps] with eps = ln(1 + measured_dim * (1-p) * tau / p).
A prediction whose score ratio B = y_C / max_{k!=C} y_k exceeds e^{2 eps}
therefore cannot change inside the ball. Degenerate cases (p = 0, slack
swallowing the estimate, zero runner-up) surface as explicit reason
codes, never as silent booleans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuits import LayeredCircuit, compose_noise, run_circuit
from .classify import (
    ScoreVector,
    ShotEstimate,
    exact_scores,
    hoeffding_confidence,
    predict,
)
from .qcore import ATOL_PROPERTY, DensityMatrix, Povm

REASON_NO_NOISE = "not-certifiable: no noise (p = 0 gives no privacy)"
REASON_SLACK = "not-certifiable: slack exceeds the top estimate"
REASON_ZERO_RUNNER_UP = "degenerate: runner-up score is zero"


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    exp_epsilon: float
    p: float
    trace_radius: float
    measured_dim: int


@dataclass(frozen=True)
class RobustnessCertificate:
    certified: bool
    trace_radius: float
    score_ratio: float
    threshold: float
    confidence: float
    mode: str
    epsilon: float
    exp_epsilon: float
    p: float
    measured_dim: int
    slack: float | None = None
    shots: int | None = None
    reason: str | None = None

    def to_dict(self) -> dict:
        def finite(v):
            return v if math.isfinite(v) else None

        doc = {
            "mode": self.mode,
            "certified": self.certified,
            "tau_d": self.trace_radius,
            "B": finite(self.score_ratio),
            "threshold": finite(self.threshold),
            "epsilon": finite(self.epsilon),
            "exp_epsilon": finite(self.exp_epsilon),
            "p": self.p,
            "d_meas": self.measured_dim,
            "confidence": self.confidence,
        }
        if self.mode == "finite":
            doc["zeta"] = self.slack
            doc["shots"] = self.shots
        if self.reason is not None:
            doc["reason"] = self.reason
        return doc


def epsilon_budget(p: float, trace_radius: float, measured_dim: int) -> PrivacyBudget:
    """Privacy budget eps = ln(1 + measured_dim * (1 - p) * tau / p)."""
    if p == 0.0:
        raise ValueError("p = 0 admits no privacy budget (ratio bound is vacuous)")
    if not 0.0 < p < 1.0:
        raise ValueError(f"noise parameter {p!r} outside (0, 1)")
    if not 0.0 <= trace_radius <= 1.0:
        raise ValueError(f"trace radius {trace_radius!r} outside [0, 1]")
    if measured_dim < 2:
        raise ValueError("measured dimension must be at least 2")
    exp_eps = 1.0 + measured_dim * (1.0 - p) * trace_radius / p
    return PrivacyBudget(math.log(exp_eps), exp_eps, p, trace_radius, measured_dim)


def max_trace_radius(p: float, epsilon: float, measured_dim: int) -> float:
    """Largest radius affordable at budget eps: (e^eps - 1) p / (d (1 - p))."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"noise parameter {p!r} outside (0, 1)")
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    if measured_dim < 2:
        raise ValueError("measured dimension must be at least 2")
    return (math.exp(epsilon) - 1.0) * p / (measured_dim * (1.0 - p))


def _runner_up(scores: np.ndarray, label: int) -> float:
    others = np.delete(scores, label)
    return float(np.max(others))


def certify_infinite(
    scores: ScoreVector,
    predicted: int,
    p: float,
    trace_radius: float,
    measured_dim: int,
) -> RobustnessCertificate:
    """Exact-score certificate: certified iff B > e^{2 eps}.

    ``scores`` are the noisy scores of the depolarised circuit and
    ``predicted`` their argmax.
    """
    if p == 0.0:
        return RobustnessCertificate(
            False, trace_radius, math.nan, math.inf, 1.0, "infinite",
            math.inf, math.inf, p, measured_dim, reason=REASON_NO_NOISE,
        )
    budget = epsilon_budget(p, trace_radius, measured_dim)
    threshold = budget.exp_epsilon**2
    top = float(scores.scores[predicted])
    second = _runner_up(scores.scores, predicted)
    if second == 0.0:
        return RobustnessCertificate(
            True, trace_radius, math.inf, threshold, 1.0, "infinite",
            budget.epsilon, budget.exp_epsilon, p, measured_dim,
            reason=REASON_ZERO_RUNNER_UP,
        )
    ratio = top / second
    return RobustnessCertificate(
        ratio > threshold, trace_radius, ratio, threshold, 1.0, "infinite",
        budget.epsilon, budget.exp_epsilon, p, measured_dim,
    )


def certify_finite(
    estimate: ShotEstimate,
    predicted: int,
    slack: float,
    p: float,
    trace_radius: float,
    measured_dim: int,
) -> RobustnessCertificate:
    """Finite-shot certificate with Hoeffding slack on every estimate.

    B = (top - slack) / (runner-up + slack) must exceed e^{2 eps}; the
    guarantee holds with probability >= 1 - 2 exp(-2 N slack^2).
    """
    if not 0.0 < slack < 0.5:
        raise ValueError(f"slack {slack!r} outside (0, 0.5)")
    confidence = hoeffding_confidence(estimate.shots, slack)
    if p == 0.0:
        return RobustnessCertificate(
            False, trace_radius, math.nan, math.inf, confidence, "finite",
            math.inf, math.inf, p, measured_dim, slack, estimate.shots,
            reason=REASON_NO_NOISE,
        )
    budget = epsilon_budget(p, trace_radius, measured_dim)
    threshold = budget.exp_epsilon**2
    freqs = estimate.estimates
    top = float(freqs[predicted]) - slack
    second = _runner_up(freqs, predicted) + slack
    if top <= 0.0:
        return RobustnessCertificate(
            False, trace_radius, math.nan, threshold, confidence, "finite",
            budget.epsilon, budget.exp_epsilon, p, measured_dim, slack,
            estimate.shots, reason=REASON_SLACK,
        )
    ratio = top / second
    return RobustnessCertificate(
        ratio > threshold, trace_radius, ratio, threshold, confidence, "finite",
        budget.epsilon, budget.exp_epsilon, p, measured_dim, slack, estimate.shots,
    )


def max_certified_radius(scores: ScoreVector, p: float, measured_dim: int) -> float:
    """Largest trace radius at which certify_infinite succeeds.

    Solves B = e^{2 eps}: tau = (sqrt(B) - 1) p / (d (1 - p)); any
    strictly smaller radius certifies.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"noise parameter {p!r} outside (0, 1)")
    label = predict(scores)
    second = _runner_up(scores.scores, label)
    if second == 0.0:
        return 1.0
    ratio = float(scores.scores[label]) / second
    if ratio <= 1.0:
        return 0.0
    return (math.sqrt(ratio) - 1.0) * p / (measured_dim * (1.0 - p))


def binary_ratio_certify_exact(
    score_ratio: float, p: float, trace_radius: float
) -> bool:
    """Exact binary robustness condition from the noiseless score ratio.

    With c = (1-p)/p, y0 = B/(1+B) and y1 = 1/(1+B), checks
        (1-p)(y0 - y1) / (p/2 + (1-p) y1)  >  4 c tau + 4 c^2 tau^2.
    True guarantees the depolarised binary classifier keeps its label
    under any perturbation within the trace radius.
    """
    if score_ratio <= 1.0:
        raise ValueError("score ratio must exceed 1")
    if not 0.0 < p < 1.0:
        raise ValueError(f"noise parameter {p!r} outside (0, 1)")
    if not 0.0 <= trace_radius <= 1.0:
        raise ValueError(f"trace radius {trace_radius!r} outside [0, 1]")
    y0 = score_ratio / (1.0 + score_ratio)
    y1 = 1.0 / (1.0 + score_ratio)
    c = (1.0 - p) / p
    lhs = (1.0 - p) * (y0 - y1) / (p / 2.0 + (1.0 - p) * y1)
    rhs = 4.0 * c * trace_radius + 4.0 * c**2 * trace_radius**2
    return lhs > rhs


def binary_ratio_radius_bounds(score_ratio: float, p: float) -> dict:
    """Closed-form certified radii from the noiseless score ratio B.

    linear_bound:     tau   < (B - 1) / (4 (B + 1) + 8 c)
    quadratic_bound:  tau^2 < (B - 1) / (4 (B + 1) c + 8 c^2)
    with c = (1 - p)/p. Each bound is sufficient within its regime:
    c * tau < 1 for the linear form, c * tau > 1 for the quadratic one;
    binary_ratio_certify_exact is the ground truth either way.
    """
    if score_ratio < 1.0:
        raise ValueError("score ratio must be at least 1")
    if not 0.0 < p < 1.0:
        raise ValueError(f"noise parameter {p!r} outside (0, 1)")
    c = (1.0 - p) / p
    b = score_ratio
    linear = (b - 1.0) / (4.0 * (b + 1.0) + 8.0 * c)
    quadratic = math.sqrt((b - 1.0) / (4.0 * (b + 1.0) * c + 8.0 * c**2))
    return {"linear_bound": linear, "quadratic_bound": quadratic}


def dp_ratio_check(
    circuit: LayeredCircuit,
    theta,
    povm: Povm,
    sigma: DensityMatrix,
    rho: DensityMatrix,
    budget: PrivacyBudget,
) -> bool:
    """Check e^-eps <= y_k(rho)/y_k(sigma) <= e^eps on every outcome.

    Both states run through the same noisy circuit. Ratios are never
    0/0 when the circuit carries noise (every outcome probability has a
    floor p * Tr(Pi_k) / D); a zero denominator with nonzero numerator
    is reported as an error rather than a verdict.
    """
    y_sigma = exact_scores(run_circuit(sigma, circuit, theta), povm).scores
    y_rho = exact_scores(run_circuit(rho, circuit, theta), povm).scores
    lo, hi = math.exp(-budget.epsilon), math.exp(budget.epsilon)
    for k, (num, den) in enumerate(zip(y_rho, y_sigma)):
        if den == 0.0:
            if num == 0.0:
                continue
            raise ArithmeticError(
                f"outcome {k}: probability ratio undefined (0 denominator)"
            )
        r = num / den
        if r < lo - ATOL_PROPERTY or r > hi + ATOL_PROPERTY:
            return False
    return True


def circuit_noise_budget(
    circuit: LayeredCircuit, trace_radius: float, measured_dim: int
) -> PrivacyBudget:
    """Budget for the noise composed over a circuit's declared channels."""
    return epsilon_budget(
        compose_noise([np_.p for np_ in circuit.noise_points]),
        trace_radius,
        measured_dim,
    )
