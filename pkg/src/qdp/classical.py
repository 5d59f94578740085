"""Classical baseline: kernel perceptron under the Laplace mechanism.

The perceptron scores y0(x) = sum_i w_i y_i (x_i* . x)^n over unit-norm
support points. Noise drawn from a Laplace density with standard
deviation `noise_std` (scale noise_std / sqrt(2)) is added to the score
pair before each vote, and certified radii follow from the mechanism's
privacy budget eps = sensitivity * radius / noise_std.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .qcore import ATOL_PROPERTY
from .seeding import as_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class KernelPerceptron:
    """Polynomial-kernel binary scorer with trained signed weights."""

    support_points: np.ndarray
    signed_weights: np.ndarray
    degree: int

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.support_points, dtype=float))
        w = np.asarray(self.signed_weights, dtype=float).reshape(-1)
        object.__setattr__(self, "support_points", pts)
        object.__setattr__(self, "signed_weights", w)
        if pts.shape[0] != w.shape[0]:
            raise ValueError("one signed weight per support point required")
        if self.degree < 1:
            raise ValueError("kernel degree must be >= 1")
        norms = np.linalg.norm(pts, axis=1)
        if np.max(np.abs(norms - 1.0)) > ATOL_PROPERTY:
            raise ValueError("support points must have unit l2 norm")

    @property
    def num_points(self) -> int:
        return self.support_points.shape[0]

    def max_abs_weight(self) -> float:
        return float(np.max(np.abs(self.signed_weights)))

    def to_dict(self) -> dict:
        return {
            "support_points": self.support_points.tolist(),
            "signed_weights": self.signed_weights.tolist(),
            "degree": self.degree,
        }


def perceptron_from_dict(doc: dict) -> KernelPerceptron:
    try:
        return KernelPerceptron(
            np.array(doc["support_points"], dtype=float),
            np.array(doc["signed_weights"], dtype=float),
            int(doc["degree"]),
        )
    except KeyError as exc:
        raise ValueError(f"perceptron document missing field {exc}") from exc


@dataclass(frozen=True)
class VoteResult:
    counts: np.ndarray
    total: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=int).reshape(-1)
        object.__setattr__(self, "counts", c)
        if int(c.sum()) != self.total:
            raise ValueError("vote counts must sum to the total")


def _check_unit(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(x))
    if abs(norm - 1.0) > ATOL_PROPERTY:
        raise ValueError(f"input norm {norm!r} != 1 beyond tolerance")
    return x


def kernel_score(model: KernelPerceptron, x) -> tuple[np.ndarray, bool]:
    """Score pair (y0, 1 - y0); y0 clamped into [0, 1] with a logged flag."""
    x = _check_unit(x)
    overlaps = model.support_points @ x
    y0 = float(np.dot(model.signed_weights, overlaps**model.degree))
    clamped = not 0.0 <= y0 <= 1.0
    if clamped:
        logger.warning("raw kernel score %.6f clamped into [0, 1]", y0)
        y0 = min(max(y0, 0.0), 1.0)
    return np.array([y0, 1.0 - y0]), clamped


def sample_laplace(noise_std: float, rng) -> float:
    """One Laplace draw with standard deviation noise_std, by inverse CDF."""
    if noise_std <= 0.0:
        raise ValueError("noise standard deviation must be positive")
    scale = noise_std / math.sqrt(2.0)
    u = as_rng(rng).uniform(-0.5, 0.5)
    return -scale * math.copysign(1.0, u) * math.log1p(-2.0 * abs(u))


def _laplace_matrix(noise_std: float, rng, shape) -> np.ndarray:
    scale = noise_std / math.sqrt(2.0)
    u = as_rng(rng).uniform(-0.5, 0.5, size=shape)
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def noisy_vote(
    model: KernelPerceptron, x, noise_std: float, repetitions: int, rng
) -> VoteResult:
    """Tally argmax votes over score pairs with fresh Laplace noise per run."""
    if repetitions < 1:
        raise ValueError("need at least one repetition")
    if noise_std <= 0.0:
        raise ValueError("noise standard deviation must be positive")
    scores, _ = kernel_score(model, x)
    noisy = scores[None, :] + _laplace_matrix(noise_std, rng, (repetitions, 2))
    votes = np.argmax(noisy, axis=1)
    counts = np.bincount(votes, minlength=2)
    return VoteResult(counts, repetitions)


def estimate_noisy_ratio(
    model: KernelPerceptron, x, noise_std: float, repetitions: int, rng
) -> float:
    """Ratio of mean noisy class scores, the margin fed to the radius bound."""
    scores, _ = kernel_score(model, x)
    noisy = scores[None, :] + _laplace_matrix(noise_std, rng, (repetitions, 2))
    means = noisy.mean(axis=0)
    if means[1] <= 0.0:
        raise ArithmeticError("mean class-1 score is nonpositive; ratio undefined")
    return float(means[0] / means[1])


def sensitivity_bound(num_points: int, degree: int, max_abs_weight: float) -> float:
    """Lipschitz bound sqrt(2) * M * n * max|w y| on the score pair."""
    if num_points < 1 or degree < 1 or max_abs_weight <= 0.0:
        raise ValueError("all arguments must be positive")
    return math.sqrt(2.0) * num_points * degree * max_abs_weight


def vote_certified_radius(
    votes: VoteResult,
    predicted: int,
    confidence: float,
    noise_std: float,
    sensitivity: float,
) -> float | None:
    """Certified l2 radius from vote frequencies, or None if not certifiable.

    radius < (noise_std / 2 sensitivity) * ln( (f_C - s) / (max f_k + s) )
    with s = sqrt(ln(2 / (1 - confidence)) / 2N). Returns None whenever the
    log argument is undefined or at most 1.
    """
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence {confidence!r} outside (0, 1)")
    if noise_std <= 0.0 or sensitivity <= 0.0:
        raise ValueError("noise_std and sensitivity must be positive")
    n = votes.total
    freqs = votes.counts / n
    s = math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * n))
    top = float(freqs[predicted]) - s
    others = np.delete(freqs, predicted)
    second = float(np.max(others)) + s
    if top <= 0.0 or top <= second:
        return None
    return noise_std / (2.0 * sensitivity) * math.log(top / second)


def kernel_certified_radius(
    model: KernelPerceptron, noise_std: float, noisy_ratio: float
) -> float:
    """Closed-form certified l2 radius for the polynomial kernel perceptron.

    radius <= (1/M) * noise_std / (2 sqrt(2) n max|w y|) * ln(noisy_ratio);
    shrinks as the kernel degree or the number of support points grows.
    """
    if noisy_ratio < 1.0:
        raise ValueError("noisy score ratio must be at least 1")
    if noise_std <= 0.0:
        raise ValueError("noise standard deviation must be positive")
    denom = 2.0 * math.sqrt(2.0) * model.degree * model.max_abs_weight()
    return (1.0 / model.num_points) * noise_std / denom * math.log(noisy_ratio)


def vote_certificate(
    votes: VoteResult,
    predicted: int,
    confidence: float,
    noise_std: float,
    sensitivity: float,
) -> dict:
    """Certificate document mirroring the quantum schema for the baseline.

    The radius is the certified l2 bound from the vote tally (None when
    not certifiable) and epsilon the matching budget sensitivity * L / std.
    """
    radius = vote_certified_radius(votes, predicted, confidence, noise_std,
                                   sensitivity)
    doc = {
        "mechanism": "laplace",
        "mode": "votes",
        "certified": radius is not None,
        "radius": radius,
        "epsilon": None if radius is None else sensitivity * radius / noise_std,
        "noise_std": noise_std,
        "sensitivity": sensitivity,
        "confidence": confidence,
        "votes": votes.counts.tolist(),
        "total": votes.total,
    }
    if radius is None:
        doc["reason"] = "not-certifiable: no vote majority beyond the slack"
    return doc


@dataclass(frozen=True)
class PairDistances:
    l2: float
    trace: float


def l2_to_trace(x, x_prime) -> PairDistances:
    """Both distances between amplitude encodings of two unit vectors.

    trace = sqrt(1 - (x . x')^2), l2 = sqrt(2 - 2 (x . x')); they satisfy
    trace = l2 * sqrt(1 - l2^2 / 4) <= l2.
    """
    x = _check_unit(x)
    x_prime = _check_unit(x_prime)
    c = float(np.clip(np.dot(x, x_prime), -1.0, 1.0))
    trace = math.sqrt(max(0.0, 1.0 - c * c))
    l2 = math.sqrt(max(0.0, 2.0 - 2.0 * c))
    bridged = l2 * math.sqrt(max(0.0, 1.0 - l2 * l2 / 4.0))
    if abs(bridged - trace) > 1e-12:
        raise AssertionError(f"distance bridge violated: {bridged} vs {trace}")
    if trace > l2 + 1e-12:
        raise AssertionError("trace distance exceeded l2 distance")
    return PairDistances(l2, trace)


def l2_for_trace(trace_radius: float) -> float:
    """l2 distance whose amplitude encodings sit at the given trace distance."""
    if not 0.0 <= trace_radius <= 1.0:
        raise ValueError(f"trace radius {trace_radius!r} outside [0, 1]")
    c = math.sqrt(1.0 - trace_radius**2)
    return math.sqrt(2.0 - 2.0 * c)
