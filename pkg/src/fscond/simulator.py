"""Dense statevector simulation of the RX/RY/RZ/CNOT/Pauli gate set.

Conventions (these pin down every metric value downstream):

* rotations are R_P(theta) = exp(-i * theta * P / 2) for P in {X, Y, Z};
* qubit 0 is the least significant bit of the amplitude index, so the basis
  state with qubit q set contributes 2**q to the index.

All operations are pure: inputs are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backends
from .backends import codes
from .errors import DimensionMismatchError, GateError

KIND_CODES = {
    "RX": codes.RX,
    "RY": codes.RY,
    "RZ": codes.RZ,
    "CNOT": codes.CNOT,
    "PauliX": codes.PAULI_X,
    "PauliY": codes.PAULI_Y,
    "PauliZ": codes.PAULI_Z,
}
ROTATION_KINDS = ("RX", "RY", "RZ")

_NORM_TOL = 1e-10


@dataclass
class StateVector:
    """Amplitudes of an n-qubit pure state (or an unnormalized tangent state)."""

    amplitudes: np.ndarray
    num_qubits: int
    unnormalized: bool = False

    def __post_init__(self) -> None:
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.num_qubits,):
            raise DimensionMismatchError(
                f"expected {1 << self.num_qubits} amplitudes for "
                f"{self.num_qubits} qubits, got {self.amplitudes.shape}"
            )
        if not self.unnormalized:
            norm_sq = float(np.sum(np.abs(self.amplitudes) ** 2))
            if abs(norm_sq - 1.0) > _NORM_TOL:
                raise GateError(
                    f"state not normalized: sum |a|^2 = {norm_sq!r}; "
                    "flag unnormalized=True for tangent states"
                )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def scaled(self, factor: complex) -> "StateVector":
        return StateVector(self.amplitudes * factor, self.num_qubits,
                           unnormalized=True)


def zero_state(num_qubits: int) -> StateVector:
    """|0...0> on num_qubits qubits."""
    amps = np.zeros(1 << num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(amps, num_qubits)


def basis_state(num_qubits: int, index: int) -> StateVector:
    """Computational basis state with the given amplitude index."""
    amps = np.zeros(1 << num_qubits, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(amps, num_qubits)


@dataclass(frozen=True)
class GateOp:
    """One gate: rotation (with angle, optionally a parameter slot), CNOT,
    or a bare Pauli used to build tangent states."""

    kind: str
    target: int
    control: int | None = None
    angle: float | None = None
    param_index: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in KIND_CODES:
            raise GateError(f"unknown gate kind {self.kind!r}")
        is_rotation = self.kind in ROTATION_KINDS
        if is_rotation and self.angle is None:
            raise GateError(f"{self.kind} requires an angle")
        if not is_rotation and self.angle is not None:
            raise GateError(f"{self.kind} takes no angle")
        if self.kind == "CNOT":
            if self.control is None:
                raise GateError("CNOT requires a control qubit")
            if self.control == self.target:
                raise GateError("CNOT control and target must differ")
        elif self.control is not None:
            raise GateError(f"{self.kind} takes no control qubit")
        if self.param_index is not None and not is_rotation:
            raise GateError("only rotations can carry a param_index")


@dataclass
class GateSequence:
    """Ordered gate list plus the compact array encoding the kernels consume."""

    gates: list[GateOp]
    num_qubits: int
    _encoded: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        for gate in self.gates:
            _check_indices(gate, self.num_qubits)

    def __len__(self) -> int:
        return len(self.gates)

    @property
    def encoded(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(kinds, targets, controls, angles) int32/int32/int32/float64 arrays."""
        if self._encoded is None:
            n = len(self.gates)
            kinds = np.empty(n, dtype=np.int32)
            targets = np.empty(n, dtype=np.int32)
            controls = np.full(n, codes.NO_CONTROL, dtype=np.int32)
            angles = np.zeros(n, dtype=np.float64)
            for i, g in enumerate(self.gates):
                kinds[i] = KIND_CODES[g.kind]
                targets[i] = g.target
                if g.control is not None:
                    controls[i] = g.control
                if g.angle is not None:
                    angles[i] = g.angle
            self._encoded = (kinds, targets, controls, angles)
        return self._encoded

    @property
    def param_positions(self) -> np.ndarray:
        """Gate positions carrying a param_index, ordered by param_index."""
        slots = [(g.param_index, i) for i, g in enumerate(self.gates)
                 if g.param_index is not None]
        slots.sort()
        return np.asarray([i for _, i in slots], dtype=np.int32)


def _check_indices(gate: GateOp, num_qubits: int) -> None:
    if not 0 <= gate.target < num_qubits:
        raise GateError(f"target {gate.target} out of range for {num_qubits} qubits")
    if gate.control is not None and not 0 <= gate.control < num_qubits:
        raise GateError(f"control {gate.control} out of range for {num_qubits} qubits")


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    """Apply one gate. Paulis apply the bare operator (used for tangent states)."""
    _check_indices(gate, state.num_qubits)
    amps = state.amplitudes.copy()
    kinds = np.array([KIND_CODES[gate.kind]], dtype=np.int32)
    targets = np.array([gate.target], dtype=np.int32)
    controls = np.array(
        [gate.control if gate.control is not None else codes.NO_CONTROL],
        dtype=np.int32,
    )
    angles = np.array([gate.angle if gate.angle is not None else 0.0],
                      dtype=np.float64)
    backends.run_gates(amps, kinds, targets, controls, angles, 0, 1)
    return StateVector(amps, state.num_qubits, unnormalized=state.unnormalized)


def run_sequence(seq: GateSequence, initial: StateVector) -> StateVector:
    """Apply all gates in list order (index 0 first)."""
    if seq.num_qubits != initial.num_qubits:
        raise DimensionMismatchError(
            f"sequence is on {seq.num_qubits} qubits, state on {initial.num_qubits}"
        )
    amps = initial.amplitudes.copy()
    kinds, targets, controls, angles = seq.encoded
    backends.run_gates(amps, kinds, targets, controls, angles, 0, len(seq))
    return StateVector(amps, seq.num_qubits, unnormalized=initial.unnormalized)


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugate-linear in the first argument."""
    if a.num_qubits != b.num_qubits:
        raise DimensionMismatchError("states live on different qubit counts")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2."""
    return float(abs(inner_product(a, b)) ** 2)


def pauli_z_expectations(state: StateVector) -> np.ndarray:
    """<Z_q> for each qubit q; entries lie in [-1, 1]."""
    return backends.z_expectations(state.amplitudes, state.num_qubits)


def z_shift_derivatives(seq: GateSequence) -> tuple[np.ndarray, np.ndarray]:
    """Z expectations of the circuit on |0...0> plus their parameter-shift
    derivatives with respect to every parameterized rotation.

    Returns (z0, dz): z0 has one entry per qubit; dz[k, q] is the exact
    derivative d<Z_q>/d theta_k from the +-pi/2 shift rule.
    """
    kinds, targets, controls, angles = seq.encoded
    return backends.z_shift_sweep(kinds, targets, controls, angles,
                                  seq.param_positions, seq.num_qubits)
