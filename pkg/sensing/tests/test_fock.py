import math

import numpy as np
import pytest

from sensing.exceptions import ContractError, InvalidCutoffError, LeakageError, ShapeError
from sensing.services.fock import (
    Operator,
    QuantumState,
    SubsystemLayout,
    annihilation,
    coherent_state,
    displacement,
    displacement_matrix,
    expectation,
    fidelity_with_fock,
    fock_state,
    gaussian_ops,
    mean_occupation,
    multimode_displacement,
    parity,
    partial_trace,
    photon_distribution,
    product_state,
    quadrature_covariance,
    quadratures,
    squeezed_vacuum,
    wigner,
)


class TestLayout:
    def test_build_orders_qumodes_before_qubits(self):
        layout = SubsystemLayout.build(2, 5, 1)
        assert layout.dims == (5, 5, 2)
        assert layout.total_dim == 50
        assert layout.qumodes == (0, 1)
        assert layout.qubits == (2,)

    def test_cutoff_below_two_is_rejected(self):
        with pytest.raises(InvalidCutoffError):
            SubsystemLayout.build(1, 1)

    def test_repeated_targets_are_rejected(self):
        with pytest.raises(ShapeError):
            SubsystemLayout.build(2, 4).check_targets((0, 0))


class TestOperators:
    def test_annihilation_lowers_fock_state(self):
        out = annihilation(6).apply(fock_state(3, 6))
        assert out.data[2] == pytest.approx(math.sqrt(3))
        assert np.count_nonzero(np.abs(out.data) > 1e-14) == 1

    def test_quadrature_commutator_below_top_level(self):
        q, p = quadratures(12)
        comm = q.data @ p.data - p.data @ q.data
        np.testing.assert_allclose(comm[:11, :11], 1j * np.eye(11), atol=1e-12)

    def test_coherent_amplitudes(self):
        alpha = 0.7 + 0.2j
        column = displacement_matrix(alpha, 40)[:, 0]
        n = np.arange(10)
        expected = np.exp(-abs(alpha) ** 2 / 2) * alpha ** n / np.sqrt([math.factorial(k) for k in n])
        np.testing.assert_allclose(column[:10], expected, atol=1e-10)

    def test_displacement_shifts_quadratures(self):
        state = coherent_state(0.5 - 0.25j, 30)
        q, p = quadratures(30)
        assert expectation(state, q) == pytest.approx(math.sqrt(2) * 0.5, abs=1e-10)
        assert expectation(state, p) == pytest.approx(-math.sqrt(2) * 0.25, abs=1e-10)

    def test_displacement_inverse(self):
        d = 30
        product = displacement(0.4j, d).data @ displacement(-0.4j, d).data
        np.testing.assert_allclose(product[:20, :20], np.eye(20), atol=1e-10)

    def test_verify_catches_mislabelled_unitary(self):
        op = Operator(SubsystemLayout.single_mode(3), 2 * np.eye(3), unitary=True)
        with pytest.raises(ContractError):
            op.verify()

    def test_multimode_displacement_is_local(self):
        layout = SubsystemLayout.build(2, 16)
        op = multimode_displacement([0.3, 0.0], layout, modes=(1,))
        state = op.apply(QuantumState.vacuum(layout))
        assert mean_occupation(state, (0,)) == pytest.approx(0.0, abs=1e-12)
        assert mean_occupation(state, (1,)) == pytest.approx(0.09, abs=1e-8)

    def test_beamsplitter_swaps_a_photon_at_quarter_turn(self):
        layout = SubsystemLayout.build(2, 6)
        bs = gaussian_ops('beamsplitter', layout, (0, 1), math.pi / 2)
        out = bs.apply(QuantumState.basis(layout, [1, 0]))
        assert mean_occupation(out, (0,)) == pytest.approx(0.0, abs=1e-12)
        assert mean_occupation(out, (1,)) == pytest.approx(1.0, abs=1e-12)

    def test_unknown_gaussian_operation(self):
        with pytest.raises(ContractError):
            gaussian_ops('rotation', SubsystemLayout.single_mode(4), (0,))


class TestStates:
    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            QuantumState(SubsystemLayout.single_mode(4), np.ones(5))

    def test_leakage_check(self):
        assert fock_state(0, 10).leakage() == 0.0
        with pytest.raises(LeakageError) as excinfo:
            fock_state(9, 10).check_leakage()
        assert excinfo.value.cutoff == 10

    def test_squeezed_vacuum_energy_and_variances(self):
        r = 0.5
        state = squeezed_vacuum(r, 40)
        assert mean_occupation(state) == pytest.approx(math.sinh(r) ** 2, abs=1e-8)
        cov = quadrature_covariance(state, 0)
        np.testing.assert_allclose(cov, np.diag([math.exp(-2 * r) / 2, math.exp(2 * r) / 2]), atol=1e-7)

    def test_partial_trace_of_product(self):
        state = product_state(fock_state(1, 5), fock_state(0, 4))
        reduced = partial_trace(state, (0,))
        expected = np.zeros((5, 5))
        expected[1, 1] = 1.0
        np.testing.assert_allclose(reduced.data, expected, atol=1e-14)

    def test_photon_distribution_of_vacuum(self):
        np.testing.assert_allclose(photon_distribution(fock_state(0, 6), 0), [1, 0, 0, 0, 0, 0])

    def test_mixed_state_validation(self):
        rho = np.diag([0.5, 0.5, 0.0])
        QuantumState(SubsystemLayout.single_mode(3), rho).validate()
        with pytest.raises(ContractError):
            QuantumState(SubsystemLayout.single_mode(3), 2 * rho).validate()

    def test_parity_and_fock_fidelity(self):
        assert expectation(fock_state(3, 8), parity(8)) == pytest.approx(-1.0)
        assert expectation(fock_state(2, 8), parity(8)) == pytest.approx(1.0)
        assert fidelity_with_fock(fock_state(2, 6), 0, 2) == pytest.approx(1.0)
        assert fidelity_with_fock(coherent_state(0.5, 30), 0, 0) == pytest.approx(math.exp(-0.25), abs=1e-10)


class TestWigner:
    def test_vacuum_and_single_photon_at_origin(self):
        vac = wigner(fock_state(0, 20), (-1, 1), (-1, 1), 3)
        one = wigner(fock_state(1, 20), (-1, 1), (-1, 1), 3)
        assert vac.values[1, 1] == pytest.approx(1 / math.pi, abs=1e-10)
        assert one.values[1, 1] == pytest.approx(-1 / math.pi, abs=1e-10)

    def test_vacuum_normalisation_and_marginal(self):
        grid = wigner(fock_state(0, 60), (-3, 3), (-3, 3), 61)
        assert grid.total() == pytest.approx(1.0, abs=1e-3)
        assert grid.marginal_q()[30] == pytest.approx(1 / math.sqrt(math.pi), abs=1e-3)

    def test_squeezed_vacuum_moments(self):
        r = 0.25
        grid = wigner(squeezed_vacuum(r, 50), (-4, 4), (-4, 4), 41)
        total = grid.total()
        assert total == pytest.approx(1.0, abs=1e-3)
        var_q = float(np.sum(grid.q ** 2 * grid.marginal_q()) * (grid.q[1] - grid.q[0])) / total
        var_p = float(np.sum(grid.p ** 2 * grid.marginal_p()) * (grid.p[1] - grid.p[0])) / total
        assert var_q == pytest.approx(math.exp(-2 * r) / 2, rel=1e-2)
        assert var_p == pytest.approx(math.exp(2 * r) / 2, rel=1e-2)

    def test_marginals_are_quadrature_densities(self):
        one = wigner(fock_state(1, 40), (-4, 4), (-4, 4), 41)
        density = 2 * one.q ** 2 * np.exp(-one.q ** 2) / math.sqrt(math.pi)
        np.testing.assert_allclose(one.marginal_q(), density, atol=1e-2 * density.max())
        np.testing.assert_allclose(one.marginal_p(), density, atol=1e-2 * density.max())

        alpha = 0.5 + 0.4j
        shifted = wigner(coherent_state(alpha, 40), (-4, 4), (-4, 4), 41)
        q_density = np.exp(-(shifted.q - math.sqrt(2) * alpha.real) ** 2) / math.sqrt(math.pi)
        p_density = np.exp(-(shifted.p - math.sqrt(2) * alpha.imag) ** 2) / math.sqrt(math.pi)
        np.testing.assert_allclose(shifted.marginal_q(), q_density, atol=1e-2 * q_density.max())
        np.testing.assert_allclose(shifted.marginal_p(), p_density, atol=1e-2 * p_density.max())

    def test_multimode_state_needs_a_mode(self):
        state = product_state(fock_state(0, 4), fock_state(1, 4))
        with pytest.raises(ContractError):
            wigner(state, resolution=3)
        grid = wigner(state, (-1, 1), (-1, 1), 3, mode=1)
        assert grid.values[1, 1] == pytest.approx(-1 / math.pi, abs=1e-10)

    def test_frame_columns(self):
        frame = wigner(fock_state(0, 10), (-1, 1), (-1, 1), 3).to_frame()
        assert list(frame.columns) == ['q (quadrature)', 'p (quadrature)', 'W (1/area)']
        assert len(frame) == 9
