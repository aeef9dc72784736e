import numpy as np
import pytest

from fscond import fsmetric, simulator as sim
from fscond.ansatz import AnsatzSpec, circuit_state
from fscond.errors import DimensionMismatchError, GateError
from tests.conftest import random_instance


def finite_difference_state(spec, x, theta, k, h=1e-4):
    """Central-difference tangent-state oracle."""
    e = np.zeros_like(theta)
    e[k] = h
    plus = circuit_state(spec, x, theta + e).amplitudes
    minus = circuit_state(spec, x, theta - e).amplitudes
    return (plus - minus) / (2 * h)


class TestDerivativeState:
    def test_single_rx_norm_quarter(self):
        spec = AnsatzSpec(num_qubits=1, num_layers=1, feature_dim=0)
        theta = np.array([0.83, 0.0, 0.0])
        d = fsmetric.derivative_state(spec, np.zeros(0), theta, 0)
        assert d.norm**2 == pytest.approx(0.25, abs=1e-12)

    def test_norm_never_exceeds_half(self, small_spec, rng):
        x, theta = random_instance(small_spec, rng)
        for k in (0, 7, small_spec.num_params - 1):
            d = fsmetric.derivative_state(small_spec, x, theta, k)
            assert d.norm <= 0.5 + 1e-12

    def test_overlap_with_state_purely_imaginary(self, small_spec, rng):
        x, theta = random_instance(small_spec, rng)
        psi = circuit_state(small_spec, x, theta)
        for k in range(small_spec.num_params):
            overlap = sim.inner_product(
                fsmetric.derivative_state(small_spec, x, theta, k), psi)
            assert abs(overlap.real) <= 1e-12

    def test_matches_central_difference(self, small_spec, rng):
        x, theta = random_instance(small_spec, rng)
        for k in (0, 5, 11, small_spec.num_params - 1):
            analytic = fsmetric.derivative_state(small_spec, x, theta, k)
            fd = finite_difference_state(small_spec, x, theta, k)
            assert np.linalg.norm(analytic.amplitudes - fd) <= 1e-6

    def test_invalid_index(self, small_spec):
        with pytest.raises(GateError):
            fsmetric.derivative_state(small_spec, np.zeros(4),
                                      np.zeros(small_spec.num_params), 99)


class TestProjectorForm:
    def test_single_rx_metric(self):
        spec = AnsatzSpec(num_qubits=1, num_layers=1, feature_dim=0)
        theta = np.array([1.1, 0.0, 0.0])
        g = fsmetric.fs_metric_projector(spec, np.zeros(0), theta)
        # RX entry: Var(X)/4 on |0> = 1/4; RY follows RX(1.1); RZ row vanishes
        assert g.entries[0, 0] == pytest.approx(0.25, abs=1e-12)

    def test_rx_then_ry_at_zero_angles(self):
        # single qubit, layer = RX,RY,RZ at theta=0: G diag = (1/4, 1/4, 0)
        spec = AnsatzSpec(num_qubits=1, num_layers=1, feature_dim=0)
        g = fsmetric.fs_metric_projector(spec, np.zeros(0), np.zeros(3))
        np.testing.assert_allclose(np.diag(g.entries), [0.25, 0.25, 0.0],
                                   atol=1e-12)
        assert abs(g.entries[0, 1]) <= 1e-12  # Re<0|XY|0> = 0

    def test_symmetric_and_psd(self, small_spec, rng):
        x, theta = random_instance(small_spec, rng)
        g = fsmetric.fs_metric_projector(small_spec, x, theta)
        assert g.max_asymmetry() <= 1e-12
        assert np.linalg.eigvalsh(g.entries).min() >= -1e-9


class TestCovarianceForm:
    def test_matches_projector_on_random_instances(self, small_spec, rng):
        for _ in range(20):
            x, theta = random_instance(small_spec, rng)
            gp = fsmetric.fs_metric_projector(small_spec, x, theta)
            gc = fsmetric.fs_metric_covariance(small_spec, x, theta)
            assert np.abs(gp.entries - gc.entries).max() <= 1e-10

    def test_diagonal_entries_bounded_by_quarter(self, small_spec, rng):
        for _ in range(5):
            x, theta = random_instance(small_spec, rng)
            diag = np.diag(fsmetric.fs_metric_covariance(small_spec, x,
                                                         theta).entries)
            assert np.all(diag >= -1e-12) and np.all(diag <= 0.25 + 1e-12)

    def test_single_rx_value(self):
        spec = AnsatzSpec(num_qubits=1, num_layers=1, feature_dim=0)
        g = fsmetric.fs_metric_covariance(spec, np.zeros(0),
                                          np.array([1.1, 0.0, 0.0]))
        assert g.entries[0, 0] == pytest.approx(0.25, abs=1e-12)


class TestBlockDiagonal:
    def test_structure_and_exact_equality_inside_blocks(self, small_spec, rng):
        x, theta = random_instance(small_spec, rng)
        gb = fsmetric.fs_metric_block_diag(small_spec, x, theta)
        gc = fsmetric.fs_metric_covariance(small_spec, x, theta)
        mask = np.zeros_like(gb.entries, dtype=bool)
        for start, stop in small_spec.layer_blocks():
            mask[start:stop, start:stop] = True
        np.testing.assert_array_equal(gb.entries[mask], gc.entries[mask])
        assert np.all(gb.entries[~mask] == 0.0)
        assert gb.block_partition == small_spec.layer_blocks()

    def test_default_spec_block_count(self):
        spec = AnsatzSpec()
        x = np.zeros(8)
        theta = np.full(72, 0.8)
        gb = fsmetric.fs_metric_block_diag(spec, x, theta)
        assert gb.block_partition == [(0, 24), (24, 48), (48, 72)]
        nonzero_possible = sum((stop - start) ** 2
                               for start, stop in gb.block_partition)
        assert nonzero_possible == 1728

    def test_single_layer_equals_full(self, rng):
        spec = AnsatzSpec(num_qubits=3, num_layers=1, feature_dim=3)
        x, theta = random_instance(spec, rng)
        gb = fsmetric.fs_metric_block_diag(spec, x, theta)
        gc = fsmetric.fs_metric_covariance(spec, x, theta)
        np.testing.assert_array_equal(gb.entries, gc.entries)


class TestBatchAverage:
    def test_singleton_batch_equals_single_metric(self, small_spec, rng):
        x, theta = random_instance(small_spec, rng)
        avg = fsmetric.fs_metric_batch_avg(small_spec, [x], theta)
        single = fsmetric.fs_metric_block_diag(small_spec, x, theta)
        np.testing.assert_array_equal(avg.entries, single.entries)
        assert avg.source == "batch_avg"

    def test_identical_batch_equals_single_metric(self, small_spec, rng):
        x, theta = random_instance(small_spec, rng)
        avg = fsmetric.fs_metric_batch_avg(small_spec, [x, x, x], theta)
        single = fsmetric.fs_metric_block_diag(small_spec, x, theta)
        np.testing.assert_allclose(avg.entries, single.entries, atol=1e-15)

    def test_average_stays_psd(self, small_spec, rng):
        theta = rng.uniform(0, np.pi, small_spec.num_params)
        batch = rng.normal(size=(6, 4))
        avg = fsmetric.fs_metric_batch_avg(small_spec, batch, theta)
        assert np.linalg.eigvalsh(avg.entries).min() >= -1e-9

    def test_empty_batch_rejected(self, small_spec):
        with pytest.raises(DimensionMismatchError):
            fsmetric.fs_metric_batch_avg(small_spec, [],
                                         np.zeros(small_spec.num_params))


class TestFidelityExpansion:
    def test_zero_displacement(self, small_spec, rng):
        x, theta = random_instance(small_spec, rng)
        assert fsmetric.fidelity_expansion_residual(
            small_spec, x, theta, np.zeros_like(theta)) == pytest.approx(0.0,
                                                                         abs=1e-14)

    def test_residual_small_at_1e3(self, small_spec, rng):
        # tolerance frozen after observing residuals ~1e-11 over 100 draws
        for _ in range(10):
            x, theta = random_instance(small_spec, rng)
            d = rng.normal(size=small_spec.num_params)
            d *= 1e-3 / np.linalg.norm(d)
            assert fsmetric.fidelity_expansion_residual(small_spec, x, theta,
                                                        d) <= 1e-7

    def test_third_order_shrinkage(self, small_spec, rng):
        # mean residual over fixed directions drops ~8x per halving
        scales = (1e-2, 5e-3, 2.5e-3)
        sums = {s: 0.0 for s in scales}
        for _ in range(20):
            x, theta = random_instance(small_spec, rng)
            direction = rng.normal(size=small_spec.num_params)
            direction /= np.linalg.norm(direction)
            g = fsmetric.fs_metric_covariance(small_spec, x, theta)
            for s in scales:
                sums[s] += fsmetric.fidelity_expansion_residual(
                    small_spec, x, theta, s * direction, metric=g)
        ratio1 = sums[1e-2] / sums[5e-3]
        ratio2 = sums[5e-3] / sums[2.5e-3]
        assert 6.0 <= ratio1 <= 10.0
        assert 6.0 <= ratio2 <= 10.0

    def test_length_mismatch(self, small_spec):
        with pytest.raises(DimensionMismatchError):
            fsmetric.fidelity_expansion_residual(
                small_spec, np.zeros(4), np.zeros(small_spec.num_params),
                np.zeros(3))


def test_metric_dump_helpers(small_spec, rng):
    x, theta = random_instance(small_spec, rng)
    g = fsmetric.fs_metric_block_diag(small_spec, x, theta)
    rows = list(fsmetric.dump_metric_csv_rows(g))
    assert len(rows) == small_spec.num_params**2
    i, j, value = rows[1]
    assert (i, j) == (0, 1) and value == g.entries[0, 1]
    payload = fsmetric.metric_to_json_dict(g)
    assert payload["num_params"] == small_spec.num_params
    assert payload["block_partition"] == [list(b) for b in small_spec.layer_blocks()]
    np.testing.assert_array_equal(np.asarray(payload["entries"]), g.entries)
