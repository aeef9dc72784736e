"""Pure-numpy reference kernels.

Same public surface and semantics as the compiled module
(fscond.backends._ckernels), used as the import-time fallback and for
cross-backend agreement tests. Substantially slower on deep circuits: gate
application is vectorized per gate, but the per-gate Python overhead
dominates at 8 qubits. The benchmark script quantifies the gap.
"""

from __future__ import annotations

import numpy as np

from . import codes

COMPILED = False

_HALF_PI = np.pi / 2.0


def _apply_1q(amps: np.ndarray, q: int, u00, u01, u10, u11) -> None:
    view = amps.reshape(-1, 2, 1 << q)
    a0 = view[:, 0, :].copy()
    a1 = view[:, 1, :].copy()
    view[:, 0, :] = u00 * a0 + u01 * a1
    view[:, 1, :] = u10 * a0 + u11 * a1


def _apply_diag(amps: np.ndarray, q: int, d0, d1) -> None:
    view = amps.reshape(-1, 2, 1 << q)
    view[:, 0, :] *= d0
    view[:, 1, :] *= d1


_cnot_index_cache: dict[tuple[int, int, int], tuple[np.ndarray, np.ndarray]] = {}


def _cnot_indices(dim: int, ctrl: int, tgt: int) -> tuple[np.ndarray, np.ndarray]:
    key = (dim, ctrl, tgt)
    cached = _cnot_index_cache.get(key)
    if cached is None:
        idx = np.arange(dim)
        src = idx[((idx >> ctrl) & 1 == 1) & ((idx >> tgt) & 1 == 0)]
        cached = (src, src | (1 << tgt))
        _cnot_index_cache[key] = cached
    return cached


def _apply_cnot(amps: np.ndarray, ctrl: int, tgt: int) -> None:
    src, dst = _cnot_indices(amps.shape[0], ctrl, tgt)
    tmp = amps[src].copy()
    amps[src] = amps[dst]
    amps[dst] = tmp


def _apply_gate(amps: np.ndarray, kind: int, target: int, control: int,
                angle: float) -> None:
    if kind == codes.RX:
        c = np.cos(angle * 0.5)
        s = np.sin(angle * 0.5)
        _apply_1q(amps, target, c, -1j * s, -1j * s, c)
    elif kind == codes.RY:
        c = np.cos(angle * 0.5)
        s = np.sin(angle * 0.5)
        _apply_1q(amps, target, c, -s, s, c)
    elif kind == codes.RZ:
        c = np.cos(angle * 0.5)
        s = np.sin(angle * 0.5)
        _apply_diag(amps, target, c - 1j * s, c + 1j * s)
    elif kind == codes.CNOT:
        _apply_cnot(amps, control, target)
    elif kind == codes.PAULI_X:
        _apply_1q(amps, target, 0.0, 1.0, 1.0, 0.0)
    elif kind == codes.PAULI_Y:
        _apply_1q(amps, target, 0.0, -1j, 1j, 0.0)
    elif kind == codes.PAULI_Z:
        _apply_diag(amps, target, 1.0, -1.0)
    else:
        raise ValueError(f"unknown gate code {kind}")


def run_gates(amps, kinds, targets, controls, angles, start, stop) -> None:
    """Apply gates[start:stop] to the amplitude buffer in place."""
    for g in range(start, stop):
        _apply_gate(amps, int(kinds[g]), int(targets[g]), int(controls[g]),
                    float(angles[g]))


def z_expectations(amps, n_qubits: int) -> np.ndarray:
    """Per-qubit Pauli-Z expectation values of the given amplitudes."""
    probs = np.abs(amps) ** 2
    idx = np.arange(amps.shape[0])
    out = np.empty(n_qubits, dtype=np.float64)
    for q in range(n_qubits):
        signs = 1.0 - 2.0 * ((idx >> q) & 1)
        out[q] = float(np.dot(signs, probs))
    return out


def covariance_metric(kinds, targets, controls, angles, param_pos,
                      n_qubits: int, block_ids) -> np.ndarray:
    """Generator-covariance metric; see the compiled twin for the contract."""
    n_gates = len(kinds)
    p = len(param_pos)
    dim = 1 << n_qubits
    use_blocks = len(block_ids) == p and p > 0

    metric = np.zeros((p, p), dtype=np.float64)
    if p == 0:
        return metric

    psi = np.zeros(dim, dtype=np.complex128)
    psi[0] = 1.0
    snapshots = np.empty((p, dim), dtype=np.complex128)
    next_param = 0
    for g in range(n_gates):
        _apply_gate(psi, int(kinds[g]), int(targets[g]), int(controls[g]),
                    float(angles[g]))
        if next_param < p and param_pos[next_param] == g:
            snapshots[next_param] = psi
            next_param += 1

    chis = np.empty((p, dim), dtype=np.complex128)
    avals = np.empty(p, dtype=np.float64)
    for k in range(p):
        g = int(param_pos[k])
        chi = snapshots[k].copy()
        _apply_gate(chi, int(kinds[g]) + codes.PAULI_OFFSET, int(targets[g]),
                    codes.NO_CONTROL, 0.0)
        run_gates(chi, kinds, targets, controls, angles, g + 1, n_gates)
        chis[k] = chi
        avals[k] = np.vdot(psi, chi).real

    for i in range(p):
        for j in range(i, p):
            if use_blocks and block_ids[i] != block_ids[j]:
                continue
            value = 0.25 * (np.vdot(chis[i], chis[j]).real - avals[i] * avals[j])
            metric[i, j] = value
            metric[j, i] = value
    return metric


def z_shift_sweep(kinds, targets, controls, angles, param_pos, n_qubits: int):
    """Base Z expectations and parameter-shift derivatives; see compiled twin."""
    n_gates = len(kinds)
    p = len(param_pos)
    dim = 1 << n_qubits

    psi = np.zeros(dim, dtype=np.complex128)
    psi[0] = 1.0
    snapshots = np.empty((p, dim), dtype=np.complex128)
    next_param = 0
    for g in range(n_gates):
        if next_param < p and param_pos[next_param] == g:
            snapshots[next_param] = psi
            next_param += 1
        _apply_gate(psi, int(kinds[g]), int(targets[g]), int(controls[g]),
                    float(angles[g]))
    z0 = z_expectations(psi, n_qubits)

    dz = np.zeros((p, n_qubits), dtype=np.float64)
    for k in range(p):
        g = int(param_pos[k])
        shifted = {}
        for sign in (+1, -1):
            work = snapshots[k].copy()
            _apply_gate(work, int(kinds[g]), int(targets[g]), int(controls[g]),
                        float(angles[g]) + sign * _HALF_PI)
            run_gates(work, kinds, targets, controls, angles, g + 1, n_gates)
            shifted[sign] = z_expectations(work, n_qubits)
        dz[k] = 0.5 * (shifted[+1] - shifted[-1])
    return z0, dz


def jacobi_eigh(matrix: np.ndarray, tol_rel: float, max_sweeps: int):
    """Cyclic Jacobi eigendecomposition; see the compiled twin for the contract."""
    n = matrix.shape[0]
    a = np.array(matrix, dtype=np.float64, copy=True)
    vecs = np.eye(n, dtype=np.float64)

    fro = float(np.sqrt(np.sum(a * a)))
    thresh = tol_rel * fro
    sweeps = 0
    if fro > 0.0:
        while sweeps < max_sweeps:
            off = _max_offdiag(a)
            if off <= thresh:
                break
            sweeps += 1
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if abs(apq) <= thresh:
                        continue
                    app = a[p, p]
                    aqq = a[q, q]
                    tau = (aqq - app) / (2.0 * apq)
                    if tau >= 0.0:
                        t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                    else:
                        t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                    c = 1.0 / np.sqrt(1.0 + t * t)
                    s = t * c
                    akp = a[:, p].copy()
                    akq = a[:, q].copy()
                    a[:, p] = c * akp - s * akq
                    a[:, q] = s * akp + c * akq
                    arp = a[p, :].copy()
                    arq = a[q, :].copy()
                    a[p, :] = c * arp - s * arq
                    a[q, :] = s * arp + c * arq
                    a[p, p] = app - t * apq
                    a[q, q] = aqq + t * apq
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    vkp = vecs[:, p].copy()
                    vkq = vecs[:, q].copy()
                    vecs[:, p] = c * vkp - s * vkq
                    vecs[:, q] = s * vkp + c * vkq

    return np.diagonal(a).copy(), vecs, sweeps


def _max_offdiag(a: np.ndarray) -> float:
    off = np.abs(a.copy())
    np.fill_diagonal(off, 0.0)
    return float(off.max()) if a.shape[0] > 1 else 0.0
