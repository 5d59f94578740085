"""Class scores, argmax prediction, shot sampling and shot planning."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qcore import ATOL_PROPERTY, DensityMatrix, Povm, embed_povm, measure_probability
from .seeding import as_rng


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Exact outcome probabilities on the K-simplex."""

    scores: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float).reshape(-1)
        object.__setattr__(self, "scores", s)
        if np.any(s < -ATOL_PROPERTY) or np.any(s > 1.0 + ATOL_PROPERTY):
            raise ValueError(f"scores outside [0, 1]: {s!r}")
        if abs(float(s.sum()) - 1.0) > ATOL_PROPERTY:
            raise ValueError(f"scores sum to {float(s.sum())!r}, not 1")

    @property
    def num_classes(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True, eq=False)
class ShotEstimate:
    """Frequency estimates from a finite number of measurement shots."""

    counts: np.ndarray
    shots: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=int).reshape(-1)
        object.__setattr__(self, "counts", c)
        if self.shots < 1:
            raise ValueError("need at least one shot")
        if int(c.sum()) != self.shots:
            raise ValueError(f"counts sum to {int(c.sum())}, expected {self.shots}")

    @property
    def estimates(self) -> np.ndarray:
        return self.counts / self.shots


@dataclass(frozen=True)
class ShotPlan:
    """Shot count guaranteeing the sampled argmax matches the exact one."""

    score_gap: float
    p: float
    confidence_target: float
    shots: int


def exact_scores(rho_out: DensityMatrix, povm: Povm) -> ScoreVector:
    """Per-outcome probabilities Tr(Pi_k rho) of the circuit output state."""
    elements = embed_povm(povm, rho_out.dim)
    return ScoreVector(np.array([measure_probability(e, rho_out) for e in elements]))


def noisy_scores_closed_form(y: ScoreVector, p: float) -> ScoreVector:
    """Scores after composed depolarisation p: p/K + (1 - p) * y_k.

    The p/K constant assumes a rank-balanced POVM (every embedded element
    has equal trace, e.g. a full computational-basis measurement or a
    single measured qubit); the general constant is p * Tr(Pi_k) / D.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise parameter {p!r} outside [0, 1]")
    k = y.num_classes
    return ScoreVector(p / k + (1.0 - p) * y.scores)


def predict(y) -> int:
    """Argmax class label; exact ties go to the lowest index."""
    if isinstance(y, ShotEstimate):
        return int(np.argmax(y.counts))
    scores = y.scores if isinstance(y, ScoreVector) else np.asarray(y, dtype=float)
    return int(np.argmax(scores))


def sample_scores(y: ScoreVector, shots: int, rng) -> ShotEstimate:
    """One multinomial draw of `shots` outcomes from the exact scores.

    Each shot measures the full POVM, so a single experiment yields one
    outcome count per class simultaneously. Deterministic given the seed.
    """
    if shots < 1:
        raise ValueError("need at least one shot")
    probs = np.clip(y.scores, 0.0, None)
    probs = probs / probs.sum()
    counts = as_rng(rng).multinomial(shots, probs)
    return ShotEstimate(counts, shots)


def plan_shots(score_gap: float, p: float, confidence_target: float) -> ShotPlan:
    """Shots needed so the sampled argmax agrees with probability >= target.

    N = ceil( ln(2 / (1 - target)) / (8 * gap^2 * (1 - p)^2) ), where `gap`
    is the noiseless margin between the top score and the runner-up. The
    noisy margin shrinks to (1 - p) * gap, hence the (1 - p)^2 factor.
    """
    if not 0.0 < score_gap <= 1.0:
        raise ValueError(f"score gap {score_gap!r} outside (0, 1]")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"noise parameter {p!r} outside [0, 1)")
    if not 0.0 < confidence_target < 1.0:
        raise ValueError(f"confidence target {confidence_target!r} outside (0, 1)")
    n = math.log(2.0 / (1.0 - confidence_target)) / (
        8.0 * score_gap**2 * (1.0 - p) ** 2
    )
    return ShotPlan(score_gap, p, confidence_target, math.ceil(n))


def hoeffding_confidence(shots: int, slack: float) -> float:
    """Two-sided Hoeffding bound 1 - 2 exp(-2 N slack^2), floored at 0."""
    if shots < 1:
        raise ValueError("need at least one shot")
    if slack <= 0.0:
        raise ValueError("slack must be positive")
    return max(0.0, 1.0 - 2.0 * math.exp(-2.0 * shots * slack**2))
