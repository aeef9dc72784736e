"""Hardware-efficient layered ansatz and the composite parameterization.

Circuit structure: one encoding block (RX(x_i), RZ(scale * x_i) on qubit
i mod N per feature), then L layers of per-qubit RX/RY/RZ rotations followed
by a circular CNOT chain. Trainable parameter k = layer * 3N + qubit * 3 + r
with r in {0: RX, 1: RY, 2: RZ}, matching the order the rotation gates appear
in the sequence.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import backends
from .backends import codes
from .errors import DimensionMismatchError
from .simulator import GateOp, GateSequence, StateVector


@dataclass(frozen=True)
class AnsatzSpec:
    """Shape of the circuit family: qubits, layers, feature width, RZ scale."""

    num_qubits: int = 8
    num_layers: int = 3
    feature_dim: int = 8
    encoding_rz_scale: float = 0.01

    def __post_init__(self) -> None:
        if self.num_qubits < 1:
            raise DimensionMismatchError("num_qubits must be >= 1")
        if self.num_layers < 0 or self.feature_dim < 0:
            raise DimensionMismatchError("num_layers and feature_dim must be >= 0")

    @property
    def num_params(self) -> int:
        return self.num_qubits * self.num_layers * 3

    @property
    def cnots_per_layer(self) -> int:
        # circular chain needs at least two qubits
        return self.num_qubits if self.num_qubits > 1 else 0

    @property
    def num_gates(self) -> int:
        return (2 * self.feature_dim
                + self.num_layers * (3 * self.num_qubits + self.cnots_per_layer))

    def param_index(self, layer: int, qubit: int, rotation: int) -> int:
        """Flat slot of (layer, qubit, rotation) with rotation 0/1/2 = RX/RY/RZ."""
        return layer * 3 * self.num_qubits + qubit * 3 + rotation

    def layer_blocks(self) -> list[tuple[int, int]]:
        """Per-layer parameter index ranges [(start, stop), ...]."""
        width = 3 * self.num_qubits
        return [(l * width, (l + 1) * width) for l in range(self.num_layers)]


def compose_parameters(theta_task: np.ndarray, theta_meta: np.ndarray,
                       lam: float) -> np.ndarray:
    """theta_task + lam * theta_meta elementwise.

    lam is expected in [0, 1]; values outside only warn, since the sweep
    machinery may deliberately probe past the nominal range.
    """
    theta_task = np.asarray(theta_task, dtype=np.float64)
    theta_meta = np.asarray(theta_meta, dtype=np.float64)
    if theta_task.shape != theta_meta.shape:
        raise DimensionMismatchError(
            f"parameter length mismatch: {theta_task.shape} vs {theta_meta.shape}"
        )
    if not 0.0 <= lam <= 1.0:
        warnings.warn(f"meta-scaling coefficient {lam} outside [0, 1]",
                      stacklevel=2)
    return theta_task + lam * theta_meta


class CircuitTemplate:
    """Pre-encoded gate arrays for one AnsatzSpec.

    Only the angles depend on (x, theta), so repeated circuit evaluations
    reduce to refilling a float array. Hot paths (metric evaluation,
    parameter-shift sweeps) go through this class straight into the kernels.
    """

    def __init__(self, spec: AnsatzSpec) -> None:
        self.spec = spec
        n, layers, d = spec.num_qubits, spec.num_layers, spec.feature_dim
        n_gates = spec.num_gates

        kinds = np.empty(n_gates, dtype=np.int32)
        targets = np.empty(n_gates, dtype=np.int32)
        controls = np.full(n_gates, codes.NO_CONTROL, dtype=np.int32)
        param_pos = np.empty(spec.num_params, dtype=np.int32)

        pos = 0
        for i in range(d):
            qubit = i % n
            kinds[pos], targets[pos] = codes.RX, qubit
            kinds[pos + 1], targets[pos + 1] = codes.RZ, qubit
            pos += 2
        for layer in range(layers):
            for q in range(n):
                for r in range(3):
                    kinds[pos] = (codes.RX, codes.RY, codes.RZ)[r]
                    targets[pos] = q
                    param_pos[spec.param_index(layer, q, r)] = pos
                    pos += 1
            for q in range(spec.cnots_per_layer):
                kinds[pos] = codes.CNOT
                controls[pos] = q
                targets[pos] = (q + 1) % n
                pos += 1
        assert pos == n_gates

        self.kinds = kinds
        self.targets = targets
        self.controls = controls
        self.param_positions = param_pos
        self.block_ids = np.repeat(np.arange(layers, dtype=np.int32), 3 * n)
        # encoding angle slots: gate 2i is RX(x_i), gate 2i+1 is RZ(scale*x_i)
        self._enc_rx = np.arange(0, 2 * d, 2)
        self._enc_rz = np.arange(1, 2 * d, 2)

    def angles_for(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Concrete angle array for features x and trainable parameters theta."""
        spec = self.spec
        x = np.asarray(x, dtype=np.float64)
        theta = np.asarray(theta, dtype=np.float64)
        if x.shape != (spec.feature_dim,):
            raise DimensionMismatchError(
                f"expected {spec.feature_dim} features, got {x.shape}")
        if theta.shape != (spec.num_params,):
            raise DimensionMismatchError(
                f"expected {spec.num_params} parameters, got {theta.shape}")
        angles = np.zeros(len(self.kinds), dtype=np.float64)
        angles[self._enc_rx] = x
        angles[self._enc_rz] = spec.encoding_rz_scale * x
        angles[self.param_positions] = theta
        return angles


@lru_cache(maxsize=32)
def template_for(spec: AnsatzSpec) -> CircuitTemplate:
    return CircuitTemplate(spec)


def build_circuit(spec: AnsatzSpec, x: np.ndarray, theta: np.ndarray) -> GateSequence:
    """Materialize the gate list for (x, theta); rotations carry param_index."""
    tpl = template_for(spec)
    angles = tpl.angles_for(x, theta)

    param_of_pos = {int(pos): k for k, pos in enumerate(tpl.param_positions)}
    code_to_kind = {codes.RX: "RX", codes.RY: "RY", codes.RZ: "RZ"}
    gates: list[GateOp] = []
    for pos in range(len(tpl.kinds)):
        code = int(tpl.kinds[pos])
        if code == codes.CNOT:
            gates.append(GateOp("CNOT", target=int(tpl.targets[pos]),
                                control=int(tpl.controls[pos])))
        else:
            gates.append(GateOp(code_to_kind[code], target=int(tpl.targets[pos]),
                                angle=float(angles[pos]),
                                param_index=param_of_pos.get(pos)))
    seq = GateSequence(gates, spec.num_qubits)
    seq._encoded = (tpl.kinds, tpl.targets, tpl.controls, angles)
    return seq


def circuit_state(spec: AnsatzSpec, x: np.ndarray, theta: np.ndarray) -> StateVector:
    """Circuit output state on |0...0>."""
    tpl = template_for(spec)
    angles = tpl.angles_for(x, theta)
    amps = np.zeros(1 << spec.num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    backends.run_gates(amps, tpl.kinds, tpl.targets, tpl.controls,
                       angles, 0, len(tpl.kinds))
    return StateVector(amps, spec.num_qubits)
