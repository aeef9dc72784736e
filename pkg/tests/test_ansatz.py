import numpy as np
import pytest

from fscond import simulator as sim
from fscond.ansatz import (AnsatzSpec, build_circuit, circuit_state,
                           compose_parameters, template_for)
from fscond.errors import DimensionMismatchError


class TestBuildCircuit:
    def test_default_gate_count(self):
        spec = AnsatzSpec()  # 8 qubits, 3 layers, 8 features
        seq = build_circuit(spec, np.zeros(8), np.zeros(72))
        assert len(seq) == 112
        kinds = [g.kind for g in seq.gates]
        assert kinds.count("CNOT") == 24
        assert sum(1 for g in seq.gates if g.param_index is not None) == 72
        # encoding gates carry no parameter slot
        assert all(g.param_index is None for g in seq.gates[:16])

    def test_two_qubit_structure_unrolled(self):
        spec = AnsatzSpec(num_qubits=2, num_layers=1, feature_dim=1)
        seq = build_circuit(spec, np.array([0.4]), np.zeros(6))
        kinds = [(g.kind, g.target, g.control) for g in seq.gates]
        assert kinds == [
            ("RX", 0, None), ("RZ", 0, None),               # encoding
            ("RX", 0, None), ("RY", 0, None), ("RZ", 0, None),
            ("RX", 1, None), ("RY", 1, None), ("RZ", 1, None),
            ("CNOT", 1, 0), ("CNOT", 0, 1),                 # circular chain
        ]

    def test_encoding_angles_and_scale(self):
        spec = AnsatzSpec(num_qubits=4, num_layers=1, feature_dim=4,
                          encoding_rz_scale=0.01)
        x = np.array([0.3, -1.2, 0.0, 2.5])
        seq = build_circuit(spec, x, np.zeros(12))
        for i in range(4):
            rx, rz = seq.gates[2 * i], seq.gates[2 * i + 1]
            assert rx.kind == "RX" and rx.angle == pytest.approx(x[i])
            assert rz.kind == "RZ" and rz.angle == pytest.approx(0.01 * x[i])
            assert rx.target == rz.target == i

    def test_feature_wraparound_beyond_qubits(self):
        spec = AnsatzSpec(num_qubits=2, num_layers=1, feature_dim=5)
        seq = build_circuit(spec, np.arange(5.0), np.zeros(6))
        targets = [g.target for g in seq.gates[:10]]
        assert targets == [0, 0, 1, 1, 0, 0, 1, 1, 0, 0]

    def test_fewer_features_than_qubits(self):
        spec = AnsatzSpec(num_qubits=4, num_layers=1, feature_dim=2)
        seq = build_circuit(spec, np.ones(2), np.zeros(12))
        encoded_targets = {g.target for g in seq.gates[:4]}
        assert encoded_targets == {0, 1}

    def test_param_indices_unique_and_in_order(self):
        spec = AnsatzSpec(num_qubits=3, num_layers=2, feature_dim=3)
        seq = build_circuit(spec, np.zeros(3), np.zeros(18))
        indices = [g.param_index for g in seq.gates if g.param_index is not None]
        assert indices == list(range(18))
        # layout: layer-major, then qubit, then RX/RY/RZ
        for layer in range(2):
            for q in range(3):
                for r, kind in enumerate(("RX", "RY", "RZ")):
                    k = spec.param_index(layer, q, r)
                    gate = seq.gates[int(seq.param_positions[k])]
                    assert gate.kind == kind and gate.target == q

    def test_dimension_mismatch(self):
        spec = AnsatzSpec(num_qubits=2, num_layers=1, feature_dim=2)
        with pytest.raises(DimensionMismatchError):
            build_circuit(spec, np.zeros(3), np.zeros(6))
        with pytest.raises(DimensionMismatchError):
            build_circuit(spec, np.zeros(2), np.zeros(5))


class TestComposeParameters:
    def test_lambda_zero_is_bit_identical(self, rng):
        task = rng.normal(size=10)
        meta = rng.normal(size=10)
        np.testing.assert_array_equal(compose_parameters(task, meta, 0.0), task)

    def test_lambda_one_with_zero_task(self, rng):
        meta = rng.normal(size=10)
        np.testing.assert_array_equal(
            compose_parameters(np.zeros(10), meta, 1.0), meta)

    def test_midpoint_arithmetic(self):
        out = compose_parameters(np.full(4, 0.1), np.full(4, 1.0), 0.5)
        np.testing.assert_allclose(out, np.full(4, 0.6), atol=1e-15)

    def test_out_of_range_warns_but_computes(self):
        with pytest.warns(UserWarning):
            out = compose_parameters(np.zeros(2), np.ones(2), 1.5)
        np.testing.assert_allclose(out, [1.5, 1.5])

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            compose_parameters(np.zeros(3), np.zeros(4), 0.5)


class TestCircuitState:
    def test_trivial_single_qubit(self):
        spec = AnsatzSpec(num_qubits=1, num_layers=0, feature_dim=1)
        state = circuit_state(spec, np.zeros(1), np.zeros(0))
        np.testing.assert_allclose(state.amplitudes, [1, 0], atol=0)

    def test_zero_inputs_leave_vacuum(self):
        for n, layers in ((2, 1), (4, 3)):
            spec = AnsatzSpec(num_qubits=n, num_layers=layers, feature_dim=n)
            state = circuit_state(spec, np.zeros(n), np.zeros(spec.num_params))
            expected = np.zeros(1 << n)
            expected[0] = 1.0
            np.testing.assert_allclose(state.amplitudes, expected, atol=1e-12)

    def test_output_normalized(self, small_spec, rng):
        for _ in range(10):
            x = rng.normal(size=4)
            theta = rng.uniform(0, np.pi, small_spec.num_params)
            assert abs(circuit_state(small_spec, x, theta).norm - 1) <= 1e-12

    def test_matches_explicit_sequence_run(self, small_spec, rng):
        x = rng.normal(size=4)
        theta = rng.uniform(0, np.pi, small_spec.num_params)
        via_template = circuit_state(small_spec, x, theta)
        via_gates = sim.run_sequence(build_circuit(small_spec, x, theta),
                                     sim.zero_state(4))
        np.testing.assert_allclose(via_template.amplitudes,
                                   via_gates.amplitudes, atol=1e-14)

    def test_lambda_invariance_with_zero_meta(self, small_spec, rng):
        x = rng.normal(size=4)
        task = rng.uniform(0, np.pi, small_spec.num_params)
        zero_meta = np.zeros(small_spec.num_params)
        states = [circuit_state(small_spec, x,
                                compose_parameters(task, zero_meta, lam))
                  for lam in (0.0, 0.33, 1.0)]
        for other in states[1:]:
            np.testing.assert_array_equal(states[0].amplitudes, other.amplitudes)


def test_template_caching_returns_same_object():
    spec = AnsatzSpec(num_qubits=3, num_layers=1, feature_dim=3)
    assert template_for(spec) is template_for(AnsatzSpec(num_qubits=3,
                                                         num_layers=1,
                                                         feature_dim=3))


def test_layer_blocks_cover_parameters():
    spec = AnsatzSpec(num_qubits=8, num_layers=3, feature_dim=8)
    blocks = spec.layer_blocks()
    assert blocks == [(0, 24), (24, 48), (48, 72)]
