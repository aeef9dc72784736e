"""Riemannian metric of the circuit state manifold.

Two independent routes compute the same tensor:

* the projector form, Re[<d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>],
  assembled from explicitly replayed tangent states (slow, auditable);
* the covariance form, Cov(K_i, K_j)/4 over Heisenberg-conjugated rotation
  generators, evaluated in one kernel call (fast path, also powers the
  block-diagonal and batch-averaged variants).

Their elementwise agreement, and the second-order fidelity expansion
1 - |<psi(t)|psi(t+dt)>|^2 = dt.G.dt + O(|dt|^3), are the correctness
oracles for everything built on top.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backends, simulator
from .ansatz import AnsatzSpec, build_circuit, circuit_state, template_for
from .errors import DimensionMismatchError, GateError
from .simulator import GateOp, StateVector

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-9

_EMPTY_BLOCKS = np.empty(0, dtype=np.int32)


@dataclass
class MetricTensor:
    """Symmetric PSD matrix over trainable parameters plus block metadata.

    block_partition is a list of per-layer index ranges, or None for a full
    (dense) tensor. Entries outside declared blocks are exactly zero.
    """

    entries: np.ndarray
    block_partition: list[tuple[int, int]] | None
    source: str  # {projector, covariance, block_diag, batch_avg}

    @property
    def num_params(self) -> int:
        return self.entries.shape[0]

    def max_asymmetry(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.T), initial=0.0))


def derivative_state(spec: AnsatzSpec, x: np.ndarray, theta: np.ndarray,
                     k: int) -> StateVector:
    """Tangent state d|psi>/d theta_k, built by replaying the circuit with the
    rotation generator (times -i/2) inserted at parameter k.

    The result is unnormalized; its norm is exactly 1/2 for a normalized
    input state.
    """
    if not 0 <= k < spec.num_params:
        raise GateError(f"parameter index {k} out of range for p={spec.num_params}")
    seq = build_circuit(spec, x, theta)
    positions = seq.param_positions
    pos = int(positions[k])
    gate = seq.gates[pos]

    state = simulator.zero_state(spec.num_qubits)
    for g in seq.gates[: pos + 1]:
        state = simulator.apply_gate(state, g)
    pauli = {"RX": "PauliX", "RY": "PauliY", "RZ": "PauliZ"}[gate.kind]
    state = simulator.apply_gate(state, GateOp(pauli, target=gate.target))
    state = state.scaled(-0.5j)
    for g in seq.gates[pos + 1:]:
        state = simulator.apply_gate(state, g)
    return state


def fs_metric_projector(spec: AnsatzSpec, x: np.ndarray,
                        theta: np.ndarray) -> MetricTensor:
    """Full metric from tangent-state overlaps (the definition, replayed gate
    by gate per parameter). Oracle route; prefer fs_metric_covariance in
    production loops."""
    p = spec.num_params
    psi = circuit_state(spec, x, theta)
    tangents = [derivative_state(spec, x, theta, k) for k in range(p)]
    overlaps = np.array([simulator.inner_product(psi, t) for t in tangents])

    entries = np.empty((p, p), dtype=np.float64)
    for i in range(p):
        for j in range(i, p):
            value = (simulator.inner_product(tangents[i], tangents[j])
                     - np.conj(overlaps[i]) * overlaps[j]).real
            entries[i, j] = value
            entries[j, i] = value
    return MetricTensor(entries, block_partition=None, source="projector")


def _covariance_entries(spec: AnsatzSpec, x: np.ndarray, theta: np.ndarray,
                        block_ids: np.ndarray) -> np.ndarray:
    tpl = template_for(spec)
    angles = tpl.angles_for(x, theta)
    return backends.covariance_metric(tpl.kinds, tpl.targets, tpl.controls,
                                      angles, tpl.param_positions,
                                      spec.num_qubits, block_ids)


def fs_metric_covariance(spec: AnsatzSpec, x: np.ndarray,
                         theta: np.ndarray) -> MetricTensor:
    """Full metric via generator covariances (kernel fast path)."""
    entries = _covariance_entries(spec, x, theta, _EMPTY_BLOCKS)
    return MetricTensor(entries, block_partition=None, source="covariance")


def fs_metric_block_diag(spec: AnsatzSpec, x: np.ndarray,
                         theta: np.ndarray) -> MetricTensor:
    """Per-layer block-diagonal restriction of the covariance metric.

    Within-block entries share the covariance code path, so they match the
    full metric exactly; everything across layers is exactly zero.
    """
    tpl = template_for(spec)
    entries = _covariance_entries(spec, x, theta, tpl.block_ids)
    return MetricTensor(entries, block_partition=spec.layer_blocks(),
                        source="block_diag")


def fs_metric_batch_avg(spec: AnsatzSpec, batch: list[np.ndarray] | np.ndarray,
                        theta_rep: np.ndarray) -> MetricTensor:
    """Mean of per-input block-diagonal metrics at a shared parameter point.

    Summation runs in batch order so results are reproducible regardless of
    how the per-input metrics were scheduled.
    """
    batch = [np.asarray(x, dtype=np.float64) for x in batch]
    if len(batch) == 0:
        raise DimensionMismatchError("batch must be nonempty")
    tpl = template_for(spec)
    total = np.zeros((spec.num_params, spec.num_params), dtype=np.float64)
    for x in batch:
        total += _covariance_entries(spec, x, theta_rep, tpl.block_ids)
    total /= len(batch)
    return MetricTensor(total, block_partition=spec.layer_blocks(),
                        source="batch_avg")


def fidelity_expansion_residual(spec: AnsatzSpec, x: np.ndarray,
                                theta: np.ndarray, dtheta: np.ndarray,
                                metric: MetricTensor | None = None) -> float:
    """| (1 - |<psi(t)|psi(t+dt)>|^2)  -  dt . G(t) . dt |.

    Third-order small in |dt|; serves as the universal check that G really is
    the quadratic form of the fidelity drop.
    """
    theta = np.asarray(theta, dtype=np.float64)
    dtheta = np.asarray(dtheta, dtype=np.float64)
    if dtheta.shape != theta.shape:
        raise DimensionMismatchError("dtheta must match theta in length")
    if metric is None:
        metric = fs_metric_covariance(spec, x, theta)
    psi = circuit_state(spec, x, theta)
    psi_shift = circuit_state(spec, x, theta + dtheta)
    ds2 = 1.0 - simulator.fidelity(psi, psi_shift)
    quad = float(dtheta @ metric.entries @ dtheta)
    return abs(ds2 - quad)


def dump_metric_csv_rows(metric: MetricTensor):
    """(row, col, value) triples for CSV export."""
    p = metric.num_params
    for i in range(p):
        for j in range(p):
            yield i, j, float(metric.entries[i, j])


def metric_to_json_dict(metric: MetricTensor) -> dict:
    """Dense matrix plus block metadata, JSON-serializable."""
    return {
        "source": metric.source,
        "num_params": metric.num_params,
        "block_partition": (None if metric.block_partition is None
                            else [list(b) for b in metric.block_partition]),
        "entries": metric.entries.tolist(),
    }
