"""Dense complex linear algebra and quantum-state primitives.

Everything here targets small Hilbert spaces (dim <= ~64) where O(D^3)
eigensolvers are cheap, so states are plain numpy arrays wrapped in thin
validating dataclasses.

Qubit ordering convention: qubit 0 is the most significant bit of the
computational-basis index, so |q0 q1 ... q_{n-1}> maps to index
q0*2^(n-1) + ... + q_{n-1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Numerical tolerances, one knob per audit class:
#   ATOL_STATE    state/POVM construction invariants
#   ATOL_PROPERTY derived property checks (PSD floor, probability clipping)
#   ATOL_UNITARY  unitarity of operators fed to apply_unitary
ATOL_STATE = 1e-10
ATOL_PROPERTY = 1e-9
ATOL_UNITARY = 1e-8


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def is_unitary(m: np.ndarray, atol: float = ATOL_UNITARY) -> bool:
    if m.shape[0] != m.shape[1]:
        return False
    return np.max(np.abs(dagger(m) @ m - np.eye(m.shape[0]))) <= atol


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalised state vector on a register of qubits."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        dim = amps.shape[0]
        if dim < 1 or dim & (dim - 1):
            raise ValueError(f"dimension {dim} is not a power of two")
        norm_sq = float(np.sum(np.abs(amps) ** 2))
        if abs(norm_sq - 1.0) > ATOL_STATE:
            raise ValueError(f"state not normalised: sum |a_i|^2 = {norm_sq!r}")

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def num_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, PSD, unit-trace matrix describing a possibly mixed state."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {m.shape}")
        if np.max(np.abs(m - dagger(m))) > ATOL_STATE:
            raise ValueError("density matrix not Hermitian")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > ATOL_STATE:
            raise ValueError(f"trace {tr!r} != 1")
        if float(np.min(np.linalg.eigvalsh(m))) < -ATOL_PROPERTY:
            raise ValueError("density matrix not positive semidefinite")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def maximally_mixed(dim: int) -> DensityMatrix:
    return DensityMatrix(np.eye(dim) / dim)


@dataclass(frozen=True, eq=False)
class Povm:
    """Positive operators summing to the identity on a measured qubit block.

    ``subsystem_position`` is the index of the first measured qubit (MSB
    ordering); the remaining tensor factors are implicitly identity.
    """

    elements: tuple = field()
    subsystem_dim: int = 0
    subsystem_position: int = 0

    def __post_init__(self):
        elems = tuple(np.asarray(e, dtype=complex) for e in self.elements)
        object.__setattr__(self, "elements", elems)
        d = self.subsystem_dim or elems[0].shape[0]
        object.__setattr__(self, "subsystem_dim", d)
        if len(elems) > d:
            raise ValueError(f"{len(elems)} outcomes exceed subsystem dim {d}")
        total = np.zeros((d, d), dtype=complex)
        for e in elems:
            if e.shape != (d, d):
                raise ValueError(f"element shape {e.shape} != ({d}, {d})")
            if np.max(np.abs(e - dagger(e))) > ATOL_STATE:
                raise ValueError("POVM element not Hermitian")
            if float(np.min(np.linalg.eigvalsh(e))) < -ATOL_PROPERTY:
                raise ValueError("POVM element not PSD")
            total += e
        if np.max(np.abs(total - np.eye(d))) > ATOL_STATE:
            raise ValueError("POVM elements do not sum to the identity")

    @property
    def num_outcomes(self) -> int:
        return len(self.elements)


def computational_povm(num_measured_qubits: int, position: int = 0) -> Povm:
    """Basis-projector POVM {|k><k|} on a block of qubits."""
    d = 2**num_measured_qubits
    elems = []
    for k in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[k, k] = 1.0
        elems.append(e)
    return Povm(tuple(elems), d, position)


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; dimensions multiply."""
    return np.kron(np.asarray(a), np.asarray(b))


def apply_unitary(u: np.ndarray, rho: DensityMatrix) -> DensityMatrix:
    """Conjugate a state: rho -> U rho U†."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (rho.dim, rho.dim):
        raise ValueError(f"operator shape {u.shape} does not match state dim {rho.dim}")
    if not is_unitary(u):
        raise ValueError("operator is not unitary within tolerance")
    return DensityMatrix(u @ rho.matrix @ dagger(u))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Half the trace norm of rho - sigma; in [0, 1]."""
    if rho.dim != sigma.dim:
        raise ValueError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    eigs = np.linalg.eigvalsh(rho.matrix - sigma.matrix)
    return float(0.5 * np.sum(np.abs(eigs)))


def measure_probability(element: np.ndarray, rho: DensityMatrix) -> float:
    """Outcome probability Tr(Pi rho) for a full-dimension POVM element."""
    element = np.asarray(element, dtype=complex)
    if element.shape != (rho.dim, rho.dim):
        raise ValueError(
            f"element shape {element.shape} does not match state dim {rho.dim}"
        )
    p = float(np.real(np.trace(element @ rho.matrix)))
    if p < -ATOL_STATE or p > 1.0 + ATOL_STATE:
        raise ValueError(f"trace {p!r} outside [0, 1] beyond tolerance")
    return min(max(p, 0.0), 1.0)


def embed_povm(povm: Povm, total_dim: int) -> list[np.ndarray]:
    """Tensor each element with identities so it acts on the full register."""
    if total_dim % povm.subsystem_dim:
        raise ValueError(f"total dim {total_dim} not divisible by {povm.subsystem_dim}")
    left_dim = 2**povm.subsystem_position
    if left_dim * povm.subsystem_dim > total_dim:
        raise ValueError(
            f"position {povm.subsystem_position} out of range for dim {total_dim}"
        )
    right_dim, rem = divmod(total_dim, left_dim * povm.subsystem_dim)
    if rem:
        raise ValueError(f"dims {left_dim}x{povm.subsystem_dim} do not tile {total_dim}")
    left = np.eye(left_dim)
    right = np.eye(right_dim)
    return [tensor_product(tensor_product(left, e), right) for e in povm.elements]
