"""Parameterised circuits, amplitude encoding and depolarisation channels.

Conventions:
  R_Z(a) = diag(e^{-ia/2}, e^{ia/2})
  R_Y(a) = [[cos a/2, -sin a/2], [sin a/2, cos a/2]]
  Entangler per layer: CNOT ladder (control i -> target i+1).
A noise point ``(position, p)`` fires a depolarisation channel after
``position`` gates have been applied (0 = before any gate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .qcore import (
    ATOL_PROPERTY,
    DensityMatrix,
    PureState,
    dagger,
    measure_probability,
    tensor_product,
)

GATE_KINDS = ("rot_z", "rot_y", "cnot")


@dataclass(frozen=True)
class GateSpec:
    kind: str
    target: int
    control: int | None = None
    param_index: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "cnot":
            if self.control is None or self.control == self.target:
                raise ValueError("cnot needs a control distinct from its target")
            if self.param_index is not None:
                raise ValueError("cnot takes no parameter")
        else:
            if self.param_index is None:
                raise ValueError(f"{self.kind} needs a param_index")
            if self.control is not None:
                raise ValueError("rotations take no control")


@dataclass(frozen=True)
class NoisePoint:
    position: int
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValueError(f"noise parameter {self.p!r} outside [0, 1)")
        if self.position < 0:
            raise ValueError("noise position must be >= 0")


@dataclass(frozen=True, eq=False)
class LayeredCircuit:
    num_qubits: int
    gates: tuple = field(default=())
    noise_points: tuple = field(default=())
    param_count: int = 0

    def __post_init__(self):
        gates = tuple(self.gates)
        noise = tuple(self.noise_points)
        object.__setattr__(self, "gates", gates)
        object.__setattr__(self, "noise_points", noise)
        used = set()
        for g in gates:
            if g.target >= self.num_qubits or (
                g.control is not None and g.control >= self.num_qubits
            ):
                raise ValueError(f"gate {g} addresses a qubit outside the register")
            if g.param_index is not None:
                if g.param_index >= self.param_count:
                    raise ValueError(
                        f"param index {g.param_index} >= param_count {self.param_count}"
                    )
                used.add(g.param_index)
        if used != set(range(self.param_count)):
            raise ValueError("every declared parameter must be used at least once")
        for np_ in noise:
            if np_.position > len(gates):
                raise ValueError(f"noise position {np_.position} beyond end of circuit")

    @property
    def dim(self) -> int:
        return 2**self.num_qubits


@dataclass(frozen=True, eq=False)
class EncodedInput:
    classical_vector: np.ndarray
    state: PureState


def rotation_matrix(kind: str, angle: float) -> np.ndarray:
    half = 0.5 * angle
    if kind == "rot_z":
        return np.diag([np.exp(-1j * half), np.exp(1j * half)])
    if kind == "rot_y":
        c, s = math.cos(half), math.sin(half)
        return np.array([[c, -s], [s, c]], dtype=complex)
    raise ValueError(f"not a rotation kind: {kind!r}")


def _embed_single(g: np.ndarray, num_qubits: int, target: int) -> np.ndarray:
    left = np.eye(2**target)
    right = np.eye(2 ** (num_qubits - target - 1))
    return tensor_product(tensor_product(left, g), right)


def _cnot_unitary(num_qubits: int, control: int, target: int) -> np.ndarray:
    dim = 2**num_qubits
    u = np.zeros((dim, dim), dtype=complex)
    c_bit = num_qubits - 1 - control
    t_bit = num_qubits - 1 - target
    for i in range(dim):
        j = i ^ (1 << t_bit) if (i >> c_bit) & 1 else i
        u[j, i] = 1.0
    return u


def gate_unitary(gate: GateSpec, num_qubits: int, theta: np.ndarray) -> np.ndarray:
    if gate.kind == "cnot":
        return _cnot_unitary(num_qubits, gate.control, gate.target)
    return _embed_single(
        rotation_matrix(gate.kind, float(theta[gate.param_index])),
        num_qubits,
        gate.target,
    )


def circuit_unitary(circuit: LayeredCircuit, theta: np.ndarray) -> np.ndarray:
    """Product of all gate unitaries, ignoring noise points."""
    theta = _check_theta(circuit, theta)
    u = np.eye(circuit.dim, dtype=complex)
    for g in circuit.gates:
        u = gate_unitary(g, circuit.num_qubits, theta) @ u
    return u


def _check_theta(circuit: LayeredCircuit, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != circuit.param_count:
        raise ValueError(
            f"got {theta.shape[0]} parameters, circuit needs {circuit.param_count}"
        )
    return theta


def amplitude_encode(x, num_qubits: int) -> EncodedInput:
    """Map a unit-norm real vector to the amplitudes of a basis expansion."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != 2**num_qubits:
        raise ValueError(f"need {2**num_qubits} entries, got {x.shape[0]}")
    norm = float(np.linalg.norm(x))
    if abs(norm - 1.0) > ATOL_PROPERTY:
        raise ValueError(f"input norm {norm!r} != 1 beyond tolerance")
    x = x / norm
    return EncodedInput(x, PureState(x.astype(complex)))


def preparation_unitary(x) -> np.ndarray:
    """Unitary with first column x, built by Gram-Schmidt completion.

    Sends |0...0> to the amplitude-encoded state of x.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    d = x.shape[0]
    cols = [x / np.linalg.norm(x)]
    for i in range(d):
        v = np.zeros(d)
        v[i] = 1.0
        for c in cols:
            v = v - np.dot(c, v) * c
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            cols.append(v / norm)
        if len(cols) == d:
            break
    return np.column_stack(cols).astype(complex)


def depolarize(rho: DensityMatrix, p: float) -> DensityMatrix:
    """Convex mixture p * I/D + (1 - p) * rho."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarisation probability {p!r} outside [0, 1]")
    d = rho.dim
    return DensityMatrix(p * np.eye(d) / d + (1.0 - p) * rho.matrix)


def compose_noise(p_list) -> float:
    """Effective single depolarisation parameter 1 - prod(1 - p_i).

    Permutation-invariant; the empty sequence composes to 0.
    """
    acc = 1.0
    for p in p_list:
        if not 0.0 <= p < 1.0:
            raise ValueError(f"noise parameter {p!r} outside [0, 1)")
        acc *= 1.0 - p
    return 1.0 - acc


def build_qnn_ansatz(num_qubits: int, layers: int) -> LayeredCircuit:
    """Layered ansatz: per layer R_Z R_Y R_Z on each qubit, then a CNOT ladder.

    3 * num_qubits * layers trainable angles.
    """
    if layers < 1:
        raise ValueError("need at least one layer")
    gates = []
    idx = 0
    for _ in range(layers):
        for q in range(num_qubits):
            for kind in ("rot_z", "rot_y", "rot_z"):
                gates.append(GateSpec(kind, q, param_index=idx))
                idx += 1
        for q in range(num_qubits - 1):
            gates.append(GateSpec("cnot", q + 1, control=q))
    return LayeredCircuit(num_qubits, tuple(gates), (), idx)


def with_noise(circuit: LayeredCircuit, noise_points) -> LayeredCircuit:
    pts = tuple(
        np_ if isinstance(np_, NoisePoint) else NoisePoint(*np_) for np_ in noise_points
    )
    return replace(circuit, noise_points=pts)


def run_circuit(
    state: DensityMatrix, circuit: LayeredCircuit, theta
) -> DensityMatrix:
    """Propagate a density matrix through gates and declared noise points."""
    theta = _check_theta(circuit, theta)
    if state.dim != circuit.dim:
        raise ValueError(f"state dim {state.dim} != circuit dim {circuit.dim}")
    fire_at: dict[int, list[float]] = {}
    for np_ in circuit.noise_points:
        fire_at.setdefault(np_.position, []).append(np_.p)
    rho = state.matrix
    d = circuit.dim
    eye = np.eye(d)
    for pos in range(len(circuit.gates) + 1):
        for p in fire_at.get(pos, ()):
            rho = p * eye / d + (1.0 - p) * rho
        if pos < len(circuit.gates):
            u = gate_unitary(circuit.gates[pos], circuit.num_qubits, theta)
            rho = u @ rho @ dagger(u)
    return DensityMatrix(rho)


def kernel_overlap_probability(x, theta, kernel_circuit: LayeredCircuit) -> float:
    """All-zeros outcome probability of the encode-then-ansatz kernel circuit.

    Amplitude-encodes x, runs the trainable circuit (with any declared
    noise), and measures the projector onto |0...0>. In the noiseless pure
    case this equals the squared overlap between the evolved state and the
    all-zeros state.
    """
    encoded = amplitude_encode(x, kernel_circuit.num_qubits)
    out = run_circuit(encoded.state.density(), kernel_circuit, theta)
    proj = np.zeros((kernel_circuit.dim, kernel_circuit.dim), dtype=complex)
    proj[0, 0] = 1.0
    return measure_probability(proj, out)


def circuit_to_dict(circuit: LayeredCircuit) -> dict:
    return {
        "num_qubits": circuit.num_qubits,
        "param_count": circuit.param_count,
        "gates": [
            {
                "kind": g.kind,
                "target": g.target,
                "control": g.control,
                "param_index": g.param_index,
            }
            for g in circuit.gates
        ],
        "noise_points": [
            {"position": np_.position, "p": np_.p} for np_ in circuit.noise_points
        ],
    }


def circuit_from_dict(doc: dict) -> LayeredCircuit:
    try:
        gates = tuple(
            GateSpec(g["kind"], g["target"], g.get("control"), g.get("param_index"))
            for g in doc["gates"]
        )
        noise = tuple(
            NoisePoint(np_["position"], np_["p"]) for np_ in doc.get("noise_points", [])
        )
        return LayeredCircuit(doc["num_qubits"], gates, noise, doc["param_count"])
    except KeyError as exc:
        raise ValueError(f"circuit document missing field {exc}") from exc
