import numpy as np
import pytest

from sensing.exceptions import ConfigError, ContractError, ShapeError
from sensing.services.analytics import helstrom_binary, induced_helstrom
from sensing.services.circuit import Architecture, SystemParams, probe_state
from sensing.services.tasks import (
    BINARY,
    CIRCLE,
    GAUSSIAN,
    RF_CIRCLE,
    NoiseModel,
    TaskSpec,
    class_states,
    classification_prob,
    decision_probabilities,
    displaced_columns,
    error_probability,
    make_task,
    noisy_error_probability,
    output_state,
)
from sensing.services.training import TrainConfig, minimize


class TestEnsembles:
    def test_binary_atoms(self):
        ensemble = make_task(TaskSpec(family=BINARY, epsilon=0.3))
        assert ensemble.labels == 2
        np.testing.assert_allclose(ensemble.classes[0].points, [[0.3, 0.0]])
        np.testing.assert_allclose(ensemble.classes[1].points, [[-0.3, 0.0]])
        np.testing.assert_allclose(ensemble.priors, [0.5, 0.5])

    def test_gaussian_cluster_moments(self):
        ensemble = make_task(TaskSpec(family=GAUSSIAN, epsilon=0.4, delta=0.05, nodes_per_axis=5))
        atoms = ensemble.classes[0]
        assert atoms.size == 25
        mean = atoms.weights @ atoms.points
        np.testing.assert_allclose(mean, [0.4, 0.0], atol=1e-12)
        centred = atoms.points - mean
        cov = (centred * atoms.weights[:, None]).T @ centred
        np.testing.assert_allclose(cov, 0.05 ** 2 * np.eye(2), atol=1e-12)

    def test_gaussian_without_spread_is_binary(self):
        ensemble = make_task(TaskSpec(family=GAUSSIAN, epsilon=0.4, delta=0.0))
        assert ensemble.classes[0].size == 1

    def test_gaussian_discretize_needs_square_count(self):
        ensemble = make_task(TaskSpec(family=GAUSSIAN, epsilon=0.4, delta=0.05))
        assert ensemble.discretize(9).classes[0].size == 9
        with pytest.raises(ConfigError):
            ensemble.discretize(10)

    def test_circle_atoms(self):
        ensemble = make_task(TaskSpec(family=CIRCLE, epsilon=0.6, atoms=16))
        np.testing.assert_allclose(ensemble.classes[0].points, [[0.0, 0.0]])
        np.testing.assert_allclose(np.linalg.norm(ensemble.classes[1].points, axis=1), 0.6)
        assert ensemble.discretize(64).classes[1].size == 64

    def test_rf_circle_atoms_are_real(self):
        ensemble = make_task(TaskSpec(family=RF_CIRCLE, epsilon=0.5, atoms=8))
        points = ensemble.classes[1].points
        assert ensemble.data_modes == 2
        np.testing.assert_allclose(points[:, [1, 3]], 0.0)
        np.testing.assert_allclose(points[:, 0] ** 2 + points[:, 2] ** 2, 0.25, atol=1e-12)

    def test_custom_atoms(self):
        ensemble = make_task({
            'family': 'atoms',
            'classes': [{'atoms': [[0.0, 0.0]]}, {'atoms': [[0.2, 0.0], [0.0, 0.2]], 'weights': [0.25, 0.75]}],
            'priors': [0.4, 0.6],
        })
        np.testing.assert_allclose(ensemble.classes[1].weights, [0.25, 0.75])
        np.testing.assert_allclose(ensemble.priors, [0.4, 0.6])

    def test_custom_atoms_accept_array_weights(self):
        ensemble = make_task(TaskSpec(family='atoms', classes=(
            {'atoms': np.zeros((1, 2))},
            {'atoms': np.array([[0.2, 0.0], [0.0, 0.2]]), 'weights': np.array([0.25, 0.75])},
        )))
        np.testing.assert_allclose(ensemble.classes[0].weights, [1.0])
        np.testing.assert_allclose(ensemble.classes[1].weights, [0.25, 0.75])

    @pytest.mark.parametrize('spec, key', [
        ({'family': 'atoms'}, 'task.classes'),
        ({'family': 'binary-pm-epsilon', 'epsilon': -0.1}, 'task.epsilon'),
        ({'family': 'binary-pm-epsilon', 'priors': [0.7, 0.7]}, 'task.priors'),
        ({'family': 'circle-vs-vacuum', 'atoms': 3}, 'task.atoms'),
        ({'family': 'spiral'}, 'task.family'),
    ])
    def test_invalid_specs(self, spec, key):
        with pytest.raises(ConfigError) as excinfo:
            make_task(spec)
        assert excinfo.value.key == key

    def test_sampling_is_seeded(self):
        ensemble = make_task(TaskSpec(family=CIRCLE, epsilon=0.5))
        a = ensemble.sample(20, np.random.default_rng(3))
        b = ensemble.sample(20, np.random.default_rng(3))
        np.testing.assert_array_equal(a[0], b[0])
        ring = a[0][a[1] == 1]
        np.testing.assert_allclose(np.linalg.norm(ring, axis=1), 0.5)

    def test_frame_layout(self):
        frame = make_task(TaskSpec(family=BINARY, epsilon=0.2)).to_frame()
        assert list(frame.columns) == ['label', 'prior', 'weight', 're_alpha_1 (amplitude)', 'im_alpha_1 (amplitude)']
        assert len(frame) == 2


class TestPipeline:
    @pytest.fixture
    def params(self, small_arch):
        return SystemParams.random(small_arch, np.random.default_rng(0))

    def test_identical_classes_give_chance(self, small_arch, params):
        ensemble = make_task(TaskSpec(family=BINARY, epsilon=0.0))
        assert error_probability(ensemble, params, small_arch) == pytest.approx(0.5, abs=1e-12)

    def test_error_is_a_probability(self, small_arch, params):
        ensemble = make_task(TaskSpec(family=BINARY, epsilon=0.4))
        value = error_probability(ensemble, params, small_arch)
        assert 0.0 <= value <= 1.0

    def test_label_probabilities_sum_to_one(self, small_arch, params):
        probs = classification_prob([0.2, -0.1], params, small_arch)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(probs >= 0)

    def test_output_state_matches_label_probabilities(self, small_arch, params):
        state = output_state([0.2, -0.1], params.probe, params.measurement, small_arch)
        assert state.norm() == pytest.approx(1.0, abs=1e-10)
        qubit_one = state.data.reshape(-1, 2)[:, 1]
        probs = classification_prob([0.2, -0.1], params, small_arch)
        assert probs[1] == pytest.approx(float(np.vdot(qubit_one, qubit_one).real), abs=1e-12)

    def test_measured_error_respects_helstrom_limit(self, small_arch, params):
        ensemble = make_task(TaskSpec(family=BINARY, epsilon=0.3))
        rho0, rho1 = class_states(probe_state(params.probe, small_arch), ensemble, small_arch)
        limit = helstrom_binary(rho0, rho1)
        assert limit == pytest.approx(induced_helstrom(params, small_arch, ensemble), abs=1e-9)
        assert error_probability(ensemble, params, small_arch) >= limit - 1e-6

    def test_extra_outcomes_go_to_last_label(self):
        arch = Architecture(qubits=2, layers=1, cutoff=4, decision_qubits=(0, 1))
        vector = np.zeros(arch.layout.total_dim, dtype=complex)
        vector[3] = 1.0  # mode |0>, qubits |1,1>
        probs = decision_probabilities(vector[:, None], arch, labels=3)
        np.testing.assert_allclose(probs[:, 0], [0.0, 0.0, 1.0])

    def test_circle_refinement_converges(self, small_arch, params):
        coarse = error_probability(make_task(TaskSpec(family=CIRCLE, epsilon=0.5, atoms=32)), params, small_arch)
        fine = error_probability(make_task(TaskSpec(family=CIRCLE, epsilon=0.5, atoms=64)), params, small_arch)
        assert abs(fine - coarse) < 1e-4

    def test_too_many_labels_for_decision_qubits(self, small_arch):
        with pytest.raises(ConfigError):
            decision_probabilities(np.ones((small_arch.layout.total_dim, 1)), small_arch, labels=3)

    def test_mode_mismatch(self, small_arch, params):
        ensemble = make_task(TaskSpec(family=RF_CIRCLE, epsilon=0.3, atoms=4))
        with pytest.raises(ConfigError):
            error_probability(ensemble, params, small_arch)

    def test_displacement_width_checked(self, small_arch):
        with pytest.raises(ShapeError):
            displaced_columns(np.zeros(small_arch.layout.total_dim), np.zeros((1, 4)), small_arch)


class TestNoise:
    def test_quadrature_reproduces_covariance(self):
        noise = NoiseModel.isotropic(0.01)
        zetas, weights = noise.quadrature(7)
        assert weights.sum() == pytest.approx(1.0)
        second = (zetas * weights[:, None]).T @ zetas
        np.testing.assert_allclose(second, 1e-4 * np.eye(2), atol=1e-16)

    def test_rejects_indefinite_covariance(self):
        with pytest.raises(ContractError):
            NoiseModel(('q', 'p'), [[1e-4, 0.0], [0.0, -1e-4]])

    def test_rejects_unknown_generator(self):
        with pytest.raises(ConfigError):
            NoiseModel(('x',), [[1e-4]])

    def test_zero_noise_matches_noiseless(self, small_arch):
        params = SystemParams.random(small_arch, np.random.default_rng(4))
        ensemble = make_task(TaskSpec(family=BINARY, epsilon=0.3))
        noisy = noisy_error_probability(ensemble, params, small_arch, NoiseModel.isotropic(0.0))
        assert noisy == error_probability(ensemble, params, small_arch)

    def test_strong_noise_is_rejected(self, small_arch):
        params = SystemParams.random(small_arch, np.random.default_rng(4))
        ensemble = make_task(TaskSpec(family=BINARY, epsilon=0.3))
        with pytest.raises(ContractError):
            noisy_error_probability(ensemble, params, small_arch, NoiseModel.isotropic(0.2))

    def test_weak_noise_changes_error_slightly(self, small_arch):
        params = SystemParams.random(small_arch, np.random.default_rng(4))
        ensemble = make_task(TaskSpec(family=BINARY, epsilon=0.3))
        clean = error_probability(ensemble, params, small_arch)
        noisy = noisy_error_probability(ensemble, params, small_arch, NoiseModel.isotropic(1e-3))
        assert noisy == pytest.approx(clean, abs=1e-3)

    @pytest.mark.slow
    def test_noise_degrades_a_trained_classifier_quadratically(self):
        config = TrainConfig(
            architecture=Architecture(layers=8, cutoff=30),
            task=TaskSpec(family=BINARY, epsilon=0.45),
            energy=1.0,
            restarts=8,
            seed=0,
        )
        result = minimize(config)
        ensemble = make_task(config.task)
        deltas = [0.0, 0.001, 0.005, 0.01, 0.02]
        errors = [noisy_error_probability(ensemble, result.params, config.architecture, NoiseModel.isotropic(d))
                  for d in deltas]
        assert all(np.diff(errors) >= -1e-12)
        excess = {d: e - errors[0] for d, e in zip(deltas, errors)}
        assert excess[0.01] / excess[0.005] == pytest.approx(4.0, rel=0.15)
        assert excess[0.02] / excess[0.01] == pytest.approx(4.0, rel=0.15)
