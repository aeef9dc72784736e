import numpy as np
import pytest

from fscond import simulator as sim
from fscond.errors import DimensionMismatchError, GateError
from fscond.simulator import GateOp, GateSequence


def rotation_matrix(kind: str, angle: float) -> np.ndarray:
    """Independent 2x2 oracle for R_P(angle) = exp(-i * angle * P / 2)."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        return np.array([[c, -s], [s, c]])
    return np.array([[c - 1j * s, 0], [0, c + 1j * s]])


class TestApplyGate:
    def test_rx_pi_flips_to_minus_i_one(self):
        out = sim.apply_gate(sim.zero_state(1), GateOp("RX", 0, angle=np.pi))
        np.testing.assert_allclose(out.amplitudes, [0, -1j], atol=1e-12)

    def test_rz_phase_on_zero(self):
        theta = 0.7321
        out = sim.apply_gate(sim.zero_state(1), GateOp("RZ", 0, angle=theta))
        np.testing.assert_allclose(out.amplitudes,
                                   [np.exp(-0.5j * theta), 0], atol=1e-12)

    def test_cnot_truth_table(self):
        # |q0=1, q1=0> -> |q0=1, q1=1>: index 1 -> index 3 in LSB ordering
        out = sim.apply_gate(sim.basis_state(2, 1), GateOp("CNOT", 1, control=0))
        np.testing.assert_allclose(out.amplitudes, [0, 0, 0, 1], atol=0)
        # control clear: untouched
        out = sim.apply_gate(sim.basis_state(2, 2), GateOp("CNOT", 1, control=0))
        np.testing.assert_allclose(out.amplitudes, [0, 0, 1, 0], atol=0)

    def test_single_qubit_gates_match_matrix_oracle(self, rng):
        for kind in ("RX", "RY", "RZ"):
            for _ in range(5):
                angle = rng.uniform(-2 * np.pi, 2 * np.pi)
                amps = rng.normal(size=2) + 1j * rng.normal(size=2)
                amps /= np.linalg.norm(amps)
                state = sim.StateVector(amps.copy(), 1)
                out = sim.apply_gate(state, GateOp(kind, 0, angle=angle))
                np.testing.assert_allclose(
                    out.amplitudes, rotation_matrix(kind, angle) @ amps,
                    atol=1e-14)

    def test_target_out_of_range(self):
        with pytest.raises(GateError):
            sim.apply_gate(sim.zero_state(2), GateOp("RX", 2, angle=0.1))

    def test_gateop_validation(self):
        with pytest.raises(GateError):
            GateOp("RX", 0)  # missing angle
        with pytest.raises(GateError):
            GateOp("CNOT", 0, control=0)
        with pytest.raises(GateError):
            GateOp("PauliX", 0, angle=0.3)
        with pytest.raises(GateError):
            GateOp("Hadamard", 0)


class TestRunSequence:
    def test_empty_sequence_is_identity(self):
        initial = sim.zero_state(2)
        out = sim.run_sequence(GateSequence([], 2), initial)
        np.testing.assert_array_equal(out.amplitudes, initial.amplitudes)

    def test_two_half_rotations_compose(self):
        seq = GateSequence([GateOp("RX", 0, angle=np.pi / 2),
                            GateOp("RX", 0, angle=np.pi / 2)], 1)
        out = sim.run_sequence(seq, sim.zero_state(1))
        np.testing.assert_allclose(out.amplitudes, [0, -1j], atol=1e-12)

    def test_ry_half_pi_gives_plus_state(self):
        seq = GateSequence([GateOp("RY", 0, angle=np.pi / 2)], 1)
        out = sim.run_sequence(seq, sim.zero_state(1))
        np.testing.assert_allclose(out.amplitudes,
                                   [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-12)

    def test_qubit_count_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            sim.run_sequence(GateSequence([], 2), sim.zero_state(3))


def random_circuit(num_qubits, rng, depth=20, with_paulis=False):
    kinds = ["RX", "RY", "RZ", "CNOT"] + (["PauliX", "PauliY", "PauliZ"]
                                          if with_paulis else [])
    gates = []
    for _ in range(depth):
        kind = kinds[rng.integers(len(kinds))]
        target = int(rng.integers(num_qubits))
        if kind == "CNOT":
            if num_qubits < 2:
                continue
            control = int(rng.integers(num_qubits))
            while control == target:
                control = int(rng.integers(num_qubits))
            gates.append(GateOp(kind, target, control=control))
        elif kind.startswith("Pauli"):
            gates.append(GateOp(kind, target))
        else:
            gates.append(GateOp(kind, target, angle=float(rng.uniform(-np.pi, np.pi))))
    return GateSequence(gates, num_qubits)


def random_state(num_qubits, rng):
    amps = rng.normal(size=1 << num_qubits) + 1j * rng.normal(size=1 << num_qubits)
    amps /= np.linalg.norm(amps)
    return sim.StateVector(amps, num_qubits)


class TestInvariants:
    def test_unitarity(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 5))
            seq = random_circuit(n, rng)
            out = sim.run_sequence(seq, random_state(n, rng))
            assert abs(out.norm - 1.0) <= 1e-12

    def test_rotation_inverse_roundtrip(self, rng):
        for kind in ("RX", "RY", "RZ"):
            for _ in range(10):
                n = int(rng.integers(1, 4))
                target = int(rng.integers(n))
                angle = float(rng.uniform(-np.pi, np.pi))
                state = random_state(n, rng)
                fwd = sim.apply_gate(state, GateOp(kind, target, angle=angle))
                back = sim.apply_gate(fwd, GateOp(kind, target, angle=-angle))
                np.testing.assert_allclose(back.amplitudes, state.amplitudes,
                                           atol=1e-12)

    def test_inner_product_conjugate_symmetry(self, rng):
        for _ in range(10):
            n = int(rng.integers(1, 5))
            a, b = random_state(n, rng), random_state(n, rng)
            assert sim.inner_product(a, b) == pytest.approx(
                np.conj(sim.inner_product(b, a)), abs=1e-15)

    def test_inner_product_examples(self, rng):
        psi = random_state(3, rng)
        assert sim.inner_product(psi, psi) == pytest.approx(1.0, abs=1e-12)
        assert sim.inner_product(sim.basis_state(1, 0),
                                 sim.basis_state(1, 1)) == 0
        theta = 1.234
        rotated = sim.apply_gate(sim.zero_state(1), GateOp("RX", 0, angle=theta))
        assert sim.inner_product(sim.zero_state(1), rotated) == pytest.approx(
            np.cos(theta / 2), abs=1e-12)

    def test_inner_product_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            sim.inner_product(sim.zero_state(1), sim.zero_state(2))


class TestPauliZExpectations:
    def test_all_zero_state(self):
        np.testing.assert_allclose(
            sim.pauli_z_expectations(sim.zero_state(3)), [1, 1, 1], atol=0)

    def test_equator_state(self):
        state = sim.apply_gate(sim.zero_state(1), GateOp("RX", 0, angle=np.pi / 2))
        assert sim.pauli_z_expectations(state)[0] == pytest.approx(0.0, abs=1e-12)

    def test_rx_analytic_cosine(self, rng):
        for _ in range(10):
            theta = float(rng.uniform(-2 * np.pi, 2 * np.pi))
            state = sim.apply_gate(sim.zero_state(1), GateOp("RX", 0, angle=theta))
            assert sim.pauli_z_expectations(state)[0] == pytest.approx(
                np.cos(theta), abs=1e-12)

    def test_matches_operator_route(self, rng):
        # <Z_q> via apply_gate(PauliZ) + inner_product must agree
        for _ in range(10):
            n = int(rng.integers(1, 5))
            state = sim.run_sequence(random_circuit(n, rng), sim.zero_state(n))
            fast = sim.pauli_z_expectations(state)
            for q in range(n):
                z_state = sim.apply_gate(state, GateOp("PauliZ", q))
                assert fast[q] == pytest.approx(
                    sim.inner_product(state, z_state).real, abs=1e-12)

    def test_entries_bounded(self, rng):
        for _ in range(10):
            n = int(rng.integers(1, 5))
            state = sim.run_sequence(random_circuit(n, rng), sim.zero_state(n))
            z = sim.pauli_z_expectations(state)
            assert np.all(z <= 1.0 + 1e-12) and np.all(z >= -1.0 - 1e-12)


class TestStateVector:
    def test_rejects_unnormalized_without_flag(self):
        with pytest.raises(GateError):
            sim.StateVector(np.array([2.0, 0.0], dtype=complex), 1)

    def test_tangent_states_allowed(self):
        state = sim.StateVector(np.array([0.5j, 0.0]), 1, unnormalized=True)
        assert state.norm == pytest.approx(0.5)

    def test_length_must_match_qubits(self):
        with pytest.raises(DimensionMismatchError):
            sim.StateVector(np.zeros(3, dtype=complex), 2)
