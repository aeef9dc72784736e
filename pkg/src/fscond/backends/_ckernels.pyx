# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.

Everything here operates on the compact circuit encoding (parallel int/float
arrays, see fscond.backends.codes) and plain C loops over the statevector:

* in-place gate application over an amplitude buffer,
* Pauli-Z expectation values,
* the Heisenberg-generator covariance metric (optionally block-masked),
* parameter-shift Z-expectation sweeps,
* a cyclic Jacobi eigensolver for symmetric matrices.

The reference backend (fscond.backends.reference) implements the same
signatures in numpy; fscond.backends selects one of the two at import time.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, fabs, sin, sqrt

cnp.import_array()

# Gate codes; must match fscond.backends.codes.
cdef enum GateCode:
    K_RX = 0
    K_RY = 1
    K_RZ = 2
    K_CNOT = 3
    K_PX = 4
    K_PY = 5
    K_PZ = 6
    PAULI_OFFSET = 4

ctypedef double complex cplx

COMPILED = True


cdef inline void _apply_1q(cplx* a, long dim, int q,
                           cplx u00, cplx u01, cplx u10, cplx u11) noexcept nogil:
    cdef long step = 1L << q
    cdef long block = step << 1
    cdef long base = 0
    cdef long low, i0, i1
    cdef cplx a0, a1
    while base < dim:
        for low in range(step):
            i0 = base + low
            i1 = i0 + step
            a0 = a[i0]
            a1 = a[i1]
            a[i0] = u00 * a0 + u01 * a1
            a[i1] = u10 * a0 + u11 * a1
        base += block


cdef inline void _apply_diag(cplx* a, long dim, int q, cplx d0, cplx d1) noexcept nogil:
    cdef long step = 1L << q
    cdef long block = step << 1
    cdef long base = 0
    cdef long low, i0
    while base < dim:
        for low in range(step):
            i0 = base + low
            a[i0] = d0 * a[i0]
            a[i0 + step] = d1 * a[i0 + step]
        base += block


cdef inline void _apply_cnot(cplx* a, long dim, int ctrl, int tgt) noexcept nogil:
    cdef long cbit = 1L << ctrl
    cdef long tbit = 1L << tgt
    cdef long i
    cdef cplx tmp
    for i in range(dim):
        if (i & cbit) != 0 and (i & tbit) == 0:
            tmp = a[i]
            a[i] = a[i | tbit]
            a[i | tbit] = tmp


cdef void _apply_gate(cplx* a, long dim, int kind, int target, int control,
                      double angle) noexcept nogil:
    cdef double c, s
    if kind == K_RX:
        c = cos(angle * 0.5)
        s = sin(angle * 0.5)
        _apply_1q(a, dim, target, c, -1j * s, -1j * s, c)
    elif kind == K_RY:
        c = cos(angle * 0.5)
        s = sin(angle * 0.5)
        _apply_1q(a, dim, target, c, -s, s, c)
    elif kind == K_RZ:
        c = cos(angle * 0.5)
        s = sin(angle * 0.5)
        _apply_diag(a, dim, target, c - 1j * s, c + 1j * s)
    elif kind == K_CNOT:
        _apply_cnot(a, dim, control, target)
    elif kind == K_PX:
        _apply_1q(a, dim, target, 0, 1, 1, 0)
    elif kind == K_PY:
        _apply_1q(a, dim, target, 0, -1j, 1j, 0)
    elif kind == K_PZ:
        _apply_diag(a, dim, target, 1, -1)


cdef void _run(cplx* a, long dim, const int* kinds, const int* targets,
               const int* controls, const double* angles,
               Py_ssize_t start, Py_ssize_t stop) noexcept nogil:
    cdef Py_ssize_t g
    for g in range(start, stop):
        _apply_gate(a, dim, kinds[g], targets[g], controls[g], angles[g])


cdef void _z_expect(const cplx* a, long dim, int n_qubits, double* out) noexcept nogil:
    cdef long i
    cdef int q
    cdef double p
    for q in range(n_qubits):
        out[q] = 0.0
    for i in range(dim):
        p = a[i].real * a[i].real + a[i].imag * a[i].imag
        for q in range(n_qubits):
            if (i >> q) & 1:
                out[q] -= p
            else:
                out[q] += p


cdef inline cplx _vdot(const cplx* x, const cplx* y, long dim) noexcept nogil:
    # conjugate-linear in the first argument
    cdef cplx acc = 0
    cdef long i
    for i in range(dim):
        acc += x[i].conjugate() * y[i]
    return acc


def run_gates(cplx[::1] amps, int[::1] kinds, int[::1] targets,
              int[::1] controls, double[::1] angles,
              Py_ssize_t start, Py_ssize_t stop):
    """Apply gates[start:stop] to the amplitude buffer in place."""
    cdef long dim = amps.shape[0]
    if stop > start:
        with nogil:
            _run(&amps[0], dim, &kinds[0], &targets[0], &controls[0],
                 &angles[0], start, stop)


def z_expectations(cplx[::1] amps, int n_qubits):
    """Per-qubit Pauli-Z expectation values of the given amplitudes."""
    out = np.empty(n_qubits, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef long dim = amps.shape[0]
    with nogil:
        _z_expect(&amps[0], dim, n_qubits, &out_v[0])
    return out


def covariance_metric(int[::1] kinds, int[::1] targets, int[::1] controls,
                      double[::1] angles, int[::1] param_pos,
                      int n_qubits, int[::1] block_ids):
    """Riemannian metric of the circuit state over its parameterized gates.

    Computes G_ij = (Re<chi_i|chi_j> - <chi_i|psi><psi|chi_j>)/4 where
    chi_k is the final state with the generator Pauli of parameterized gate k
    inserted right after that gate. ``block_ids`` restricts computed pairs to
    equal ids (entries across blocks stay exactly zero); pass an empty view to
    compute the full matrix.
    """
    cdef Py_ssize_t n_gates = kinds.shape[0]
    cdef Py_ssize_t p = param_pos.shape[0]
    cdef long dim = 1L << n_qubits
    cdef bint use_blocks = block_ids.shape[0] == p and p > 0

    metric = np.zeros((p, p), dtype=np.float64)
    if p == 0:
        return metric

    psi_arr = np.zeros(dim, dtype=np.complex128)
    snap_arr = np.empty((p, dim), dtype=np.complex128)
    chi_arr = np.empty((p, dim), dtype=np.complex128)
    avals_arr = np.empty(p, dtype=np.float64)

    cdef double[:, ::1] g_v = metric
    cdef cplx[::1] psi = psi_arr
    cdef cplx[:, ::1] snap = snap_arr
    cdef cplx[:, ::1] chi = chi_arr
    cdef double[::1] avals = avals_arr

    cdef Py_ssize_t g, k, i, j
    cdef long idx
    cdef int pauli
    cdef Py_ssize_t next_param
    cdef cplx acc

    with nogil:
        psi[0] = 1.0
        next_param = 0
        for g in range(n_gates):
            _apply_gate(&psi[0], dim, kinds[g], targets[g], controls[g], angles[g])
            if next_param < p and param_pos[next_param] == g:
                for idx in range(dim):
                    snap[next_param, idx] = psi[idx]
                next_param += 1

        for k in range(p):
            g = param_pos[k]
            for idx in range(dim):
                chi[k, idx] = snap[k, idx]
            pauli = kinds[g] + PAULI_OFFSET
            _apply_gate(&chi[k, 0], dim, pauli, targets[g], -1, 0.0)
            _run(&chi[k, 0], dim, &kinds[0], &targets[0], &controls[0],
                 &angles[0], g + 1, n_gates)
            acc = _vdot(&psi[0], &chi[k, 0], dim)
            avals[k] = acc.real

        for i in range(p):
            for j in range(i, p):
                if use_blocks and block_ids[i] != block_ids[j]:
                    continue
                acc = _vdot(&chi[i, 0], &chi[j, 0], dim)
                g_v[i, j] = 0.25 * (acc.real - avals[i] * avals[j])
                g_v[j, i] = g_v[i, j]

    return metric


def z_shift_sweep(int[::1] kinds, int[::1] targets, int[::1] controls,
                  double[::1] angles, int[::1] param_pos, int n_qubits):
    """Base Z expectations plus parameter-shift derivatives of each of them.

    Returns (z0, dz) with z0 shape (n_qubits,) and dz shape (p, n_qubits),
    dz[k, q] = ( <Z_q>(theta_k + pi/2) - <Z_q>(theta_k - pi/2) ) / 2.
    """
    cdef Py_ssize_t n_gates = kinds.shape[0]
    cdef Py_ssize_t p = param_pos.shape[0]
    cdef long dim = 1L << n_qubits
    cdef double half_pi = np.pi / 2.0

    z0 = np.empty(n_qubits, dtype=np.float64)
    dz = np.zeros((p, n_qubits), dtype=np.float64)
    psi_arr = np.zeros(dim, dtype=np.complex128)
    snap_arr = np.empty((p, dim), dtype=np.complex128)
    work_arr = np.empty(dim, dtype=np.complex128)
    zp_arr = np.empty(n_qubits, dtype=np.float64)
    zm_arr = np.empty(n_qubits, dtype=np.float64)

    cdef double[::1] z0_v = z0
    cdef double[:, ::1] dz_v = dz
    cdef cplx[::1] psi = psi_arr
    cdef cplx[:, ::1] snap = snap_arr
    cdef cplx[::1] work = work_arr
    cdef double[::1] zp = zp_arr
    cdef double[::1] zm = zm_arr

    cdef Py_ssize_t g, k
    cdef long idx
    cdef int q, sign
    cdef Py_ssize_t next_param
    cdef double shifted

    with nogil:
        psi[0] = 1.0
        next_param = 0
        for g in range(n_gates):
            if next_param < p and param_pos[next_param] == g:
                for idx in range(dim):
                    snap[next_param, idx] = psi[idx]
                next_param += 1
            _apply_gate(&psi[0], dim, kinds[g], targets[g], controls[g], angles[g])
        _z_expect(&psi[0], dim, n_qubits, &z0_v[0])

        for k in range(p):
            g = param_pos[k]
            for sign in range(2):
                shifted = angles[g] + (half_pi if sign == 0 else -half_pi)
                for idx in range(dim):
                    work[idx] = snap[k, idx]
                _apply_gate(&work[0], dim, kinds[g], targets[g], controls[g], shifted)
                _run(&work[0], dim, &kinds[0], &targets[0], &controls[0],
                     &angles[0], g + 1, n_gates)
                if sign == 0:
                    _z_expect(&work[0], dim, n_qubits, &zp[0])
                else:
                    _z_expect(&work[0], dim, n_qubits, &zm[0])
            for q in range(n_qubits):
                dz_v[k, q] = 0.5 * (zp[q] - zm[q])

    return z0, dz


def jacobi_eigh(double[:, ::1] matrix, double tol_rel, int max_sweeps):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps rotate away off-diagonal entries in fixed (row-major upper
    triangle) order until the largest off-diagonal magnitude drops to
    tol_rel times the Frobenius norm of the input, or max_sweeps is hit.
    Returns (eigenvalues, eigenvectors-as-columns, sweeps) unsorted.
    """
    cdef Py_ssize_t n = matrix.shape[0]
    a = np.array(matrix, dtype=np.float64, copy=True)
    vecs = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] A = a
    cdef double[:, ::1] V = vecs

    cdef double fro = 0.0
    cdef Py_ssize_t i, j, k, pi, qi
    cdef double thresh, off, apq, app, aqq, tau, t, c, s, akp, akq, vkp, vkq
    cdef int sweeps = 0
    cdef bint converged

    with nogil:
        for i in range(n):
            for j in range(n):
                fro += A[i, j] * A[i, j]
        fro = sqrt(fro)
        thresh = tol_rel * fro

        if fro > 0.0:
            while sweeps < max_sweeps:
                off = 0.0
                for i in range(n - 1):
                    for j in range(i + 1, n):
                        if fabs(A[i, j]) > off:
                            off = fabs(A[i, j])
                if off <= thresh:
                    break
                sweeps += 1
                for pi in range(n - 1):
                    for qi in range(pi + 1, n):
                        apq = A[pi, qi]
                        if fabs(apq) <= thresh:
                            continue
                        app = A[pi, pi]
                        aqq = A[qi, qi]
                        tau = (aqq - app) / (2.0 * apq)
                        if tau >= 0.0:
                            t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                        else:
                            t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                        c = 1.0 / sqrt(1.0 + t * t)
                        s = t * c
                        A[pi, pi] = app - t * apq
                        A[qi, qi] = aqq + t * apq
                        A[pi, qi] = 0.0
                        A[qi, pi] = 0.0
                        for k in range(n):
                            if k == pi or k == qi:
                                continue
                            akp = A[k, pi]
                            akq = A[k, qi]
                            A[k, pi] = c * akp - s * akq
                            A[pi, k] = A[k, pi]
                            A[k, qi] = s * akp + c * akq
                            A[qi, k] = A[k, qi]
                        for k in range(n):
                            vkp = V[k, pi]
                            vkq = V[k, qi]
                            V[k, pi] = c * vkp - s * vkq
                            V[k, qi] = s * vkp + c * vkq

    return np.diagonal(a).copy(), vecs, sweeps
