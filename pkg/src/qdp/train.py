"""Iris ingestion, preprocessing and squared-loss training of the QNN.

Pipeline: keep the two linearly separable species, zero the fourth
feature, l2-normalise, amplitude-encode on two qubits, then train the
layered ansatz by zeroth-order gradient descent on the squared loss
between the true label and the class-1 probability. The classifier
measures qubit 0 with {|0><0|, |1><1|}.
"""

from __future__ import annotations

import csv
import importlib.resources
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

from .circuits import (
    EncodedInput,
    LayeredCircuit,
    amplitude_encode,
    build_qnn_ansatz,
    circuit_from_dict,
    circuit_to_dict,
    circuit_unitary,
    gate_unitary,
)
from .classify import ScoreVector, noisy_scores_closed_form, predict, sample_scores
from .qcore import Povm, dagger
from .seeding import substream

MODEL_SCHEMA_VERSION = 1

SPECIES_LABELS = {"setosa": 0, "versicolor": 1, "versicolour": 1, "virginica": 2}

TRAIN_SIZE = 60
TEST_SIZE = 40


def bundled_iris_path() -> str:
    """Path of the Iris CSV shipped with the package."""
    return str(importlib.resources.files("qdp").joinpath("data", "iris.csv"))


@dataclass(frozen=True, eq=False)
class Example:
    features: np.ndarray
    label: int
    encoded: EncodedInput


@dataclass(frozen=True)
class Dataset:
    train: tuple
    test: tuple
    seed: int


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 50
    learning_rate: float = 0.01
    layers: int = 5
    grad_step: float = 0.01
    seed: int = 0
    per_example: bool = True


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    train_accuracy: float
    test_accuracy: float


def qnn_povm() -> Povm:
    """Single-qubit measurement on qubit 0: {|0><0|, |1><1|}."""
    zero = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    one = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
    return Povm((zero, one), 2, 0)


@dataclass(eq=False)
class ModelArtifact:
    circuit: LayeredCircuit
    theta: np.ndarray
    training_config: TrainingConfig
    loss_trace: list = field(default_factory=list)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if self.theta.shape[0] != self.circuit.param_count:
            raise ValueError(
                f"{self.theta.shape[0]} parameters for a circuit with "
                f"{self.circuit.param_count}"
            )
        self._projector_cache = None

    def _class1_projector(self) -> np.ndarray:
        # U† (|1><1| on qubit 0) U, cached per theta array identity
        cached = self._projector_cache
        if cached is not None and cached[0] is self.theta:
            return cached[1]
        d = self.circuit.dim
        p1 = np.zeros((d, d), dtype=complex)
        for i in range(d // 2, d):
            p1[i, i] = 1.0
        u = circuit_unitary(self.circuit, self.theta)
        m = dagger(u) @ p1 @ u
        self._projector_cache = (self.theta, m)
        return m

    def class1_probabilities(self, inputs: np.ndarray) -> np.ndarray:
        """Noiseless class-1 probabilities for rows of amplitude vectors."""
        m = self._class1_projector()
        inputs = np.atleast_2d(np.asarray(inputs))
        return np.einsum("bi,ij,bj->b", inputs.conj(), m, inputs).real

    def scores(self, x) -> ScoreVector:
        y1 = float(self.class1_probabilities(np.asarray(x, dtype=float))[0])
        y1 = min(max(y1, 0.0), 1.0)
        return ScoreVector(np.array([1.0 - y1, y1]))

    def noisy_scores(self, x, p: float) -> ScoreVector:
        return noisy_scores_closed_form(self.scores(x), p)

    def sampled_scores(self, x, p: float, shots: int, rng):
        return sample_scores(self.noisy_scores(x, p), shots, rng)


def load_iris(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse the 150-row Iris CSV into feature rows and integer labels."""
    features, labels = [], []
    with open(path, newline="") as f:
        for i, row in enumerate(csv.reader(f)):
            if not row:
                continue
            if len(row) != 5:
                raise ValueError(f"{path}:{i + 1}: expected 5 columns, got {len(row)}")
            if i == 0 and not _is_float(row[0]):
                continue  # header
            try:
                features.append([float(v) for v in row[:4]])
            except ValueError as exc:
                raise ValueError(f"{path}:{i + 1}: malformed numeric field") from exc
            species = row[4].strip().lower()
            if species not in SPECIES_LABELS:
                raise ValueError(f"{path}:{i + 1}: unknown species {row[4]!r}")
            labels.append(SPECIES_LABELS[species])
    if len(features) != 150:
        raise ValueError(f"expected 150 data rows, got {len(features)}")
    return np.array(features), np.array(labels, dtype=int)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def preprocess(features: np.ndarray, labels: np.ndarray, split_seed: int) -> Dataset:
    """Drop class 2, zero feature 3, l2-normalise, split 60/40, encode."""
    keep = labels < 2
    feats = np.array(features[keep], dtype=float)
    labs = labels[keep]
    if feats.shape[0] != TRAIN_SIZE + TEST_SIZE:
        raise ValueError(f"expected {TRAIN_SIZE + TEST_SIZE} binary examples")
    feats[:, 3] = 0.0
    examples = []
    for row, lab in zip(feats, labs):
        norm = np.linalg.norm(row)
        if norm < 1e-12:
            raise ValueError("example is the zero vector after dropping feature 3")
        unit = row / norm
        examples.append(Example(unit, int(lab), amplitude_encode(unit, 2)))
    order = substream(split_seed, "split").permutation(len(examples))
    train = tuple(examples[i] for i in order[:TRAIN_SIZE])
    test = tuple(examples[i] for i in order[TRAIN_SIZE:])
    return Dataset(train, test, split_seed)


def _stack(examples) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([ex.features for ex in examples])
    c = np.array([ex.label for ex in examples], dtype=float)
    return x, c


def _batch_class1(circuit: LayeredCircuit, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    d = circuit.dim
    u = circuit_unitary(circuit, theta)
    p1 = np.zeros((d, d), dtype=complex)
    for i in range(d // 2, d):
        p1[i, i] = 1.0
    m = dagger(u) @ p1 @ u
    return np.einsum("bi,ij,bj->b", x, m, x).real


def _batch_loss(circuit, theta, x, c) -> float:
    return float(np.mean((c - _batch_class1(circuit, theta, x)) ** 2))


def _class1_from_unitary(u: np.ndarray, x: np.ndarray) -> np.ndarray:
    # |1><1| on qubit 0 projects onto the upper half of the basis indices
    v = u @ x.T
    half = u.shape[0] // 2
    return np.sum(np.abs(v[half:, :]) ** 2, axis=0)


def _embedded_rotations(kind: str, target: int, num_qubits: int, angles) -> np.ndarray:
    """Stack of full-register rotation unitaries, one per angle."""
    angles = np.asarray(angles, dtype=float).reshape(-1)
    half = 0.5 * angles
    r2 = np.zeros((angles.shape[0], 2, 2), dtype=complex)
    if kind == "rot_z":
        r2[:, 0, 0] = np.exp(-1j * half)
        r2[:, 1, 1] = np.exp(1j * half)
    else:
        c, s = np.cos(half), np.sin(half)
        r2[:, 0, 0] = c
        r2[:, 0, 1] = -s
        r2[:, 1, 0] = s
        r2[:, 1, 1] = c
    left = np.eye(2**target)
    right = np.eye(2 ** (num_qubits - target - 1))
    d = 2**num_qubits
    out = np.einsum("ac,gbd,ef->gabecdf", left, r2, right)
    return out.reshape(angles.shape[0], d, d)


def _fast_loss_gradient(circuit, theta, x, c, step: float) -> np.ndarray:
    """Central-difference loss gradient via cached prefix/suffix products.

    Shifting one angle only changes one gate, so all coordinates evaluate
    as one batched matrix product instead of a full circuit rebuild each.
    Matches the naive per-coordinate evaluation up to float association.
    """
    n = circuit.num_qubits
    gates = circuit.gates
    units = [gate_unitary(g, n, theta) for g in gates]
    eye = np.eye(circuit.dim, dtype=complex)
    prefix = [eye]
    for u in units:
        prefix.append(u @ prefix[-1])
    suffix = [eye] * (len(gates) + 1)
    for i in range(len(gates) - 1, -1, -1):
        suffix[i] = suffix[i + 1] @ units[i]

    positions: dict[int, list[int]] = {}
    for k, g in enumerate(gates):
        if g.param_index is not None:
            positions.setdefault(g.param_index, []).append(k)
    single = [
        (j, pos[0]) for j, pos in sorted(positions.items()) if len(pos) == 1
    ]
    grad = np.zeros(circuit.param_count)

    # batch all single-occurrence rotation coordinates, grouped by gate shape
    xt = x.T.astype(complex)
    groups: dict[tuple, list[tuple[int, int]]] = {}
    for j, k in single:
        g = gates[k]
        groups.setdefault((g.kind, g.target), []).append((j, k))
    for (kind, target), members in groups.items():
        js = np.array([j for j, _ in members])
        ks = [k for _, k in members]
        pre = np.stack([prefix[k] @ xt for k in ks])
        suf = np.stack([suffix[k + 1] for k in ks])
        losses = []
        for delta in (step, -step):
            rots = _embedded_rotations(kind, target, n, theta[js] + delta)
            y1 = np.sum(np.abs((suf @ (rots @ pre))[:, circuit.dim // 2 :, :]) ** 2, axis=1)
            losses.append(np.mean((c[None, :] - y1) ** 2, axis=1))
        grad[js] = (losses[0] - losses[1]) / (2.0 * step)

    # parameters shared across gates fall back to full rebuilds
    for j, pos in positions.items():
        if len(pos) == 1:
            continue
        vals = []
        for delta in (step, -step):
            shifted = theta.copy()
            shifted[j] += delta
            u = circuit_unitary(circuit, shifted)
            vals.append(float(np.mean((c - _class1_from_unitary(u, x)) ** 2)))
        grad[j] = (vals[0] - vals[1]) / (2.0 * step)
    return grad


def squared_loss(model: ModelArtifact, examples) -> float:
    """Mean squared difference between true labels and class-1 probabilities."""
    x, c = _stack(examples)
    return float(np.mean((c - model.class1_probabilities(x)) ** 2))


def accuracy(model: ModelArtifact, examples) -> float:
    x, c = _stack(examples)
    predicted = (model.class1_probabilities(x) > 0.5).astype(float)
    return float(np.mean(predicted == c))


def zeroth_order_gradient(loss_at, theta, step: float) -> np.ndarray:
    """Central-difference gradient (loss(t + h e_j) - loss(t - h e_j)) / 2h."""
    if step <= 0.0:
        raise ValueError("finite-difference step must be positive")
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for j in range(theta.shape[0]):
        shifted = theta.copy()
        shifted[j] = theta[j] + step
        up = loss_at(shifted)
        shifted[j] = theta[j] - step
        down = loss_at(shifted)
        grad[j] = (up - down) / (2.0 * step)
    return grad


def train(dataset: Dataset, config: TrainingConfig = TrainingConfig()) -> ModelArtifact:
    """Gradient-descent training loop; deterministic given the config seed."""
    circuit = build_qnn_ansatz(2, config.layers)
    rng = substream(config.seed, "init")
    theta = rng.uniform(0.0, 2.0 * math.pi, size=circuit.param_count)
    x_tr, c_tr = _stack(dataset.train)
    order_rng = substream(config.seed, "epoch-order")

    trace: list[EpochStats] = []
    for epoch in range(1, config.epochs + 1):
        if config.per_example:
            for i in order_rng.permutation(len(dataset.train)):
                grad = _fast_loss_gradient(
                    circuit, theta, x_tr[i : i + 1], c_tr[i : i + 1], config.grad_step
                )
                theta = theta - config.learning_rate * grad
        else:
            grad = _fast_loss_gradient(circuit, theta, x_tr, c_tr, config.grad_step)
            theta = theta - config.learning_rate * grad
        model = ModelArtifact(circuit, theta, config, trace)
        trace.append(
            EpochStats(
                epoch,
                squared_loss(model, dataset.train),
                accuracy(model, dataset.train),
                accuracy(model, dataset.test),
            )
        )
    return ModelArtifact(circuit, theta, config, trace)


def model_to_dict(model: ModelArtifact) -> dict:
    return {
        "version": MODEL_SCHEMA_VERSION,
        "circuit": circuit_to_dict(model.circuit),
        "theta": [float(t) for t in model.theta],
        "config": asdict(model.training_config),
        "loss_trace": [asdict(s) for s in model.loss_trace],
    }


def model_from_dict(doc: dict) -> ModelArtifact:
    if "version" not in doc:
        raise ValueError("model document missing required field 'version'")
    if doc["version"] != MODEL_SCHEMA_VERSION:
        raise ValueError(f"unknown model schema version {doc['version']!r}")
    try:
        return ModelArtifact(
            circuit_from_dict(doc["circuit"]),
            np.array(doc["theta"], dtype=float),
            TrainingConfig(**doc["config"]),
            [EpochStats(**s) for s in doc["loss_trace"]],
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"model document malformed: {exc}") from exc


def save_model(model: ModelArtifact, path) -> None:
    write_text_atomic(path, json.dumps(model_to_dict(model), indent=2) + "\n")


def load_model(path) -> ModelArtifact:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid model JSON: {exc}") from exc
    return model_from_dict(doc)


def save_loss_trace(model: ModelArtifact, path) -> None:
    """Per-epoch CSV: epoch, loss, train_acc, test_acc."""
    rows = ["epoch,loss,train_acc,test_acc"]
    for s in model.loss_trace:
        rows.append(f"{s.epoch},{s.loss!r},{s.train_accuracy!r},{s.test_accuracy!r}")
    write_text_atomic(path, "\n".join(rows) + "\n")


def write_text_atomic(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# re-exported for callers that iterate over test predictions
__all__ = [
    "Dataset",
    "EpochStats",
    "Example",
    "ModelArtifact",
    "TrainingConfig",
    "accuracy",
    "bundled_iris_path",
    "load_iris",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "predict",
    "preprocess",
    "qnn_povm",
    "save_loss_trace",
    "save_model",
    "squared_loss",
    "train",
    "write_text_atomic",
    "zeroth_order_gradient",
]
