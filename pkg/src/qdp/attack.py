"""Sign-gradient attacks on the trained classifier and accuracy sweeps.

The attacker runs I-FGSM: ascent on the squared loss of the true label
in steps of size alpha = radius / steps, each followed by projection
onto the l2 ball around the clean input and back onto the unit sphere
(amplitude encoding needs unit vectors). Gradients default to exact
scores, the strongest adversary; pass ``shots`` to model an attacker
limited to sampled estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classify import predict
from .seeding import as_rng, stream_seed, substream
from .train import ModelArtifact

INPUT_GRAD_STEP = 1e-4


@dataclass(frozen=True)
class AttackConfig:
    radius: float
    steps: int = 50
    alpha: float | None = None
    early_stop: bool = False

    def __post_init__(self):
        if self.radius < 0.0:
            raise ValueError("attack radius must be nonnegative")
        if self.steps < 1:
            raise ValueError("need at least one attack step")
        if self.alpha is not None and self.alpha * self.steps < self.radius:
            raise ValueError("alpha * steps must cover the attack radius")

    @property
    def step_size(self) -> float:
        return self.alpha if self.alpha is not None else self.radius / self.steps


@dataclass(frozen=True, eq=False)
class AttackIterate:
    x: np.ndarray
    loss: float
    l2_distance: float
    trace_distance: float
    predicted: int


@dataclass(frozen=True, eq=False)
class AttackTrace:
    iterates: tuple
    success: bool

    @property
    def final(self) -> AttackIterate:
        return self.iterates[-1]


def _unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    return x / np.linalg.norm(x)


def _noisy_class1_rows(model: ModelArtifact, rows: np.ndarray, p: float) -> np.ndarray:
    return p / 2.0 + (1.0 - p) * model.class1_probabilities(rows)


def _estimate_class1(model, x, p, shots, rng) -> float:
    est = model.sampled_scores(x, p, shots, rng)
    return float(est.estimates[1])


def _loss_rows(model, rows, label, p, shots, rng) -> np.ndarray:
    if shots is None:
        y1 = _noisy_class1_rows(model, rows, p)
    else:
        y1 = np.array([_estimate_class1(model, r, p, shots, rng) for r in rows])
    return (float(label) - y1) ** 2


def _predict_point(model, x, p, shots, rng) -> int:
    if shots is None:
        return predict(model.noisy_scores(x, p))
    return predict(model.sampled_scores(x, p, shots, rng))


def input_gradient(
    model: ModelArtifact,
    x,
    label: int,
    p: float = 0.0,
    shots: int | None = None,
    rng=None,
    step: float = INPUT_GRAD_STEP,
) -> np.ndarray:
    """Central-difference gradient of the attack loss in input space.

    Each perturbed input is re-normalised before encoding, so this is the
    gradient of the loss as the classifier actually sees the input.
    """
    x = _unit(x)
    d = x.shape[0]
    perturbed = np.repeat(x[None, :], 2 * d, axis=0)
    for j in range(d):
        perturbed[2 * j, j] += step
        perturbed[2 * j + 1, j] -= step
    perturbed /= np.linalg.norm(perturbed, axis=1, keepdims=True)
    losses = _loss_rows(model, perturbed, label, p, shots, as_rng(rng))
    return (losses[0::2] - losses[1::2]) / (2.0 * step)


def _project_sphere_cap(center: np.ndarray, v: np.ndarray, radius: float) -> np.ndarray:
    """Nearest unit vector to v within l2 distance `radius` of `center`."""
    dv = v - center
    dist = float(np.linalg.norm(dv))
    if dist > radius:
        v = center + dv * (radius / dist)
    v = v / np.linalg.norm(v)
    if np.linalg.norm(v - center) <= radius + 1e-12:
        return v
    # renormalising left the ball: land exactly on the cap boundary
    cos_phi = 1.0 - radius**2 / 2.0
    w = v - float(np.dot(v, center)) * center
    norm_w = float(np.linalg.norm(w))
    if norm_w < 1e-15:
        return center
    w = w / norm_w
    return cos_phi * center + math.sqrt(max(0.0, 1.0 - cos_phi**2)) * w


def encoded_trace_distance(x, x_prime) -> float:
    """Trace distance sqrt(1 - (x . x')^2) between amplitude encodings."""
    c = float(np.clip(np.dot(_unit(x), _unit(x_prime)), -1.0, 1.0))
    return math.sqrt(max(0.0, 1.0 - c * c))


def ifgsm(
    model: ModelArtifact,
    x,
    label: int,
    config: AttackConfig,
    p: float = 0.0,
    shots: int | None = None,
    seed=0,
) -> AttackTrace:
    """Iterated sign-gradient attack inside the l2 ball around x.

    Records every iterate with its loss, distances to the clean input and
    predicted label; success means the final label differs from `label`.
    """
    x0 = _unit(x)
    rng = substream(seed, "ifgsm") if not isinstance(seed, np.random.Generator) else seed
    alpha = config.step_size

    def snapshot(v):
        loss = float(_loss_rows(model, v[None, :], label, p, shots, rng)[0])
        return AttackIterate(
            v.copy(),
            loss,
            float(np.linalg.norm(v - x0)),
            encoded_trace_distance(x0, v),
            _predict_point(model, v, p, shots, rng),
        )

    iterates = [snapshot(x0)]
    v = x0.copy()
    for _ in range(config.steps):
        grad = input_gradient(model, v, label, p, shots, rng)
        v = v + alpha * np.sign(grad)
        v = _project_sphere_cap(x0, v, config.radius)
        it = snapshot(v)
        iterates.append(it)
        if config.early_stop and it.predicted != label:
            break
    return AttackTrace(tuple(iterates), iterates[-1].predicted != label)


def is_adversarial(
    model: ModelArtifact,
    x,
    x_adv,
    label: int,
    threshold: float,
    metric: str = "l2",
    p: float = 0.0,
    shots: int | None = None,
    rng=None,
) -> bool:
    """Adversarial-example predicate: correctly classified clean input,
    misclassified perturbed input, perturbation within the threshold."""
    if metric == "l2":
        dist = float(np.linalg.norm(_unit(x) - _unit(x_adv)))
    elif metric == "trace":
        dist = encoded_trace_distance(x, x_adv)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    rng = as_rng(rng)
    return (
        _predict_point(model, _unit(x), p, shots, rng) == label
        and _predict_point(model, _unit(x_adv), p, shots, rng) != label
        and dist <= threshold
    )


def conventional_accuracy(
    model: ModelArtifact,
    test_set,
    config: AttackConfig,
    p: float = 0.0,
    n_samp: int | None = None,
    seed=0,
) -> float:
    """Fraction of test examples still correctly classified after attack.

    The adversary sees exact scores; the defended prediction of each
    attacked input is estimated with n_samp shots (exact when None).
    """
    correct = 0
    for i, ex in enumerate(test_set):
        trace = ifgsm(model, ex.features, ex.label, config, p, shots=None, seed=0)
        rng = substream(stream_seed(seed, "acc", i), "predict")
        predicted = _predict_point(model, trace.final.x, p, n_samp, rng)
        correct += predicted == ex.label
    return correct / len(test_set)


def sweep(
    model: ModelArtifact,
    test_set,
    p_values,
    radii,
    config: AttackConfig,
    n_samp: int | None,
    seeds,
) -> list[dict]:
    """Attacked-accuracy grid over noise levels and attack radii.

    One row per (p, radius, seed) in deterministic order; each cell draws
    its sampling stream from its own coordinates so cells can be rerun
    independently.
    """
    if isinstance(seeds, (int, np.integer)):
        seeds = [int(seeds)]
    if not radii:
        raise ValueError("empty radius grid")
    rows = []
    for seed in seeds:
        for p in p_values:
            for radius in radii:
                rows.append(sweep_cell(model, test_set, p, radius, config,
                                       n_samp, seed))
    return rows


def sweep_cell(model, test_set, p, radius, config, n_samp, seed) -> dict:
    cell_cfg = AttackConfig(radius, config.steps, config.alpha, config.early_stop)
    cell_seed = stream_seed(seed, "sweep", repr(float(p)), repr(float(radius)))
    acc = conventional_accuracy(model, test_set, cell_cfg, p, n_samp, cell_seed)
    return {"p": float(p), "L": float(radius), "acc": acc,
            "n_samp": n_samp, "seed": int(seed)}
