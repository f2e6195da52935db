import math
from dataclasses import replace

import numpy as np
import pytest

from sensing.exceptions import ConfigError, ContractError, LeakageError, OptimizationFailure
from sensing.services.circuit import Architecture, SystemParams
from sensing.services.tasks import BINARY, TaskSpec, error_probability, make_task
from sensing.services.training import (
    Adam,
    FitOptions,
    LossContext,
    OptimizerSettings,
    PenaltySchedule,
    TrainConfig,
    _escalate,
    check_monotone_past_threshold,
    fit_fock,
    gradient,
    loss,
    minimize,
    richardson_gradient,
    sweep_threshold,
)


@pytest.fixture
def measurement_only(small_arch):
    """Fixed vacuum-like probe; only the readout circuit trains"""
    return TrainConfig(
        architecture=small_arch,
        task=TaskSpec(family=BINARY, epsilon=0.45),
        energy=0.0,
        optimizer=OptimizerSettings(learning_rate=0.05, max_iterations=15, patience=5),
        restarts=2,
        seed=7,
        trainable='measurement',
        initial=SystemParams.zeros(small_arch),
    )


class TestSchedule:
    def test_penalty_stages(self):
        schedule = PenaltySchedule()
        assert schedule.stages == 3
        assert schedule.value(0) == 10.0
        assert schedule.value(1) == 100.0
        assert schedule.value(5) == 1e3

    def test_flat_schedule_has_one_stage(self):
        assert PenaltySchedule(start=10.0, maximum=10.0).stages == 1


class TestAdam:
    def test_first_step_has_learning_rate_size(self):
        step = Adam(lr=0.1).step(np.array([1.0]), np.array([2.0]))
        np.testing.assert_allclose(step, [0.9], atol=1e-8)

    def test_descends_a_quadratic(self):
        adam = Adam(lr=0.01)
        x = np.array([0.0])
        for _ in range(100):
            x = adam.step(x, 2 * (x - 3.0))
        assert 0.5 < x[0] < 1.5


class TestLoss:
    def test_zero_penalty_is_error_probability(self, small_arch):
        params = SystemParams.random(small_arch, np.random.default_rng(3))
        ensemble = make_task(TaskSpec(family=BINARY, epsilon=0.3))
        assert loss(params, ensemble, small_arch, 1.0, 0.0) == pytest.approx(
            error_probability(ensemble, params, small_arch), abs=1e-12)

    def test_penalty_adds_energy_residual(self, small_arch):
        params = SystemParams.random(small_arch, np.random.default_rng(3))
        ensemble = make_task(TaskSpec(family=BINARY, epsilon=0.3))
        context = LossContext(small_arch, ensemble, 1.0)
        ev = context.evaluate(params.vector(), 0.0)
        assert loss(params, ensemble, small_arch, 1.0, 5.0) == pytest.approx(
            ev.error + 5.0 * (ev.energy - 1.0) ** 2, abs=1e-12)

    def test_negative_penalty(self, small_arch):
        ensemble = make_task(TaskSpec(family=BINARY, epsilon=0.3))
        with pytest.raises(ContractError):
            loss(SystemParams.zeros(small_arch), ensemble, small_arch, 1.0, -1.0)

    def test_probe_cache_survives_measurement_perturbations(self, small_arch):
        params = SystemParams.random(small_arch, np.random.default_rng(3))
        context = LossContext(small_arch, make_task(TaskSpec(family=BINARY, epsilon=0.3)), 1.0)
        free = params.vector()
        context.evaluate(free, 1.0)
        key = context._cache_key
        shifted = free.copy()
        shifted[-1] += 0.1
        context.evaluate(shifted, 1.0)
        assert context._cache_key == key

    def test_central_difference_agrees_with_richardson(self, small_arch):
        params = SystemParams.random(small_arch, np.random.default_rng(9))
        context = LossContext(small_arch, make_task(TaskSpec(family=BINARY, epsilon=0.3)), 0.5)
        free = context.free_vector(params)
        np.testing.assert_allclose(gradient(free, context, 10.0), richardson_gradient(free, context, 10.0),
                                   atol=1e-6)

    def test_gradient_is_relatively_accurate_at_random_points(self, small_arch):
        rng = np.random.default_rng(21)
        context = LossContext(small_arch, make_task(TaskSpec(family=BINARY, epsilon=0.3)), 0.5)
        for _ in range(10):
            free = context.free_vector(SystemParams.random(small_arch, rng))
            reference = richardson_gradient(free, context, 10.0)
            significant = np.abs(reference) > 1e-8
            np.testing.assert_allclose(gradient(free, context, 10.0)[significant], reference[significant],
                                       rtol=1e-5)

    def test_penalty_is_quadratic_in_the_energy_residual(self, small_arch):
        params = SystemParams.random(small_arch, np.random.default_rng(5))
        ensemble = make_task(TaskSpec(family=BINARY, epsilon=0.3))
        ev = LossContext(small_arch, ensemble, 0.0).evaluate(params.vector(), 0.0)
        residual = 0.2
        once = loss(params, ensemble, small_arch, ev.energy + residual, 3.0) - ev.error
        twice = loss(params, ensemble, small_arch, ev.energy + 2 * residual, 3.0) - ev.error
        assert once == pytest.approx(3.0 * residual ** 2, rel=1e-9)
        assert twice == pytest.approx(4 * once, rel=1e-9)

    def test_error_is_stable_when_the_cutoff_grows(self, small_arch):
        ensemble = make_task(TaskSpec(family=BINARY, epsilon=0.3))
        for seed in range(3):
            params = SystemParams.random(small_arch, np.random.default_rng(seed))
            base = error_probability(ensemble, params, small_arch)
            wider = error_probability(ensemble, params, small_arch.with_cutoff(small_arch.cutoff + 10))
            assert abs(wider - base) < 1e-7

    def test_trainable_subsets(self, small_arch):
        ensemble = make_task(TaskSpec(family=BINARY, epsilon=0.3))
        fixed = SystemParams.random(small_arch, np.random.default_rng(1))
        probe_only = LossContext(small_arch, ensemble, 1.0, 'probe', fixed)
        assert probe_only.size == small_arch.n_params
        rebuilt = probe_only.params(probe_only.free_vector(fixed))
        np.testing.assert_allclose(rebuilt.vector(), fixed.vector())


class TestTrainConfig:
    def test_needs_a_restart(self, small_arch):
        with pytest.raises(ConfigError) as excinfo:
            TrainConfig(small_arch, TaskSpec(), 1.0, restarts=0)
        assert excinfo.value.key == 'restarts'

    def test_measurement_only_needs_a_probe(self, small_arch):
        with pytest.raises(ConfigError) as excinfo:
            TrainConfig(small_arch, TaskSpec(), 1.0, trainable='measurement')
        assert excinfo.value.key == 'initial'

    def test_negative_energy(self, small_arch):
        with pytest.raises(ConfigError):
            TrainConfig(small_arch, TaskSpec(), -0.5)


class TestCutoffEscalation:
    def test_escalates_by_step(self, small_arch):
        context = LossContext(small_arch, make_task(TaskSpec(family=BINARY, epsilon=0.3)), 1.0)
        bigger = _escalate(context, LeakageError('leak', 1e-6, 20))
        assert bigger.arch.cutoff == 30

    def test_stops_at_the_maximum(self):
        arch = Architecture(layers=1, cutoff=55)
        context = LossContext(arch, make_task(TaskSpec(family=BINARY, epsilon=0.3)), 1.0)
        with pytest.raises(LeakageError):
            _escalate(context, LeakageError('leak', 1e-6, 55))


class TestMinimize:
    def test_measurement_training(self, measurement_only):
        result = minimize(measurement_only)
        assert 0.0 <= result.error <= 0.5
        assert len(result.restarts) == 2
        assert all(np.diff(result.trace) <= 0)
        np.testing.assert_allclose(result.params.probe.pack(), 0.0)

    def test_same_seed_same_payload(self, measurement_only):
        first = minimize(measurement_only).to_payload()
        second = minimize(measurement_only).to_payload()
        assert first == second
        assert 'wall_time' not in first

    def test_mode_mismatch(self, measurement_only):
        config = replace(measurement_only, architecture=Architecture(data_modes=2, layers=2, cutoff=20),
                         initial=None, trainable='all')
        with pytest.raises(ConfigError):
            minimize(config)

    def test_unreachable_energy_fails(self, small_arch):
        config = TrainConfig(
            architecture=small_arch,
            task=TaskSpec(family=BINARY, epsilon=0.3),
            energy=5.0,
            optimizer=OptimizerSettings(learning_rate=1e-4, max_iterations=3, patience=2),
            penalty=PenaltySchedule(every=2, extra_stages=0),
            restarts=1,
        )
        with pytest.raises(OptimizationFailure) as excinfo:
            minimize(config)
        assert excinfo.value.exit_code == 2
        assert len(excinfo.value.traces) == 1

    @pytest.mark.slow
    def test_binary_error_matches_target(self):
        config = TrainConfig(
            architecture=Architecture(layers=8, cutoff=30),
            task=TaskSpec(family=BINARY, epsilon=0.45),
            energy=1.0,
            restarts=8,
            seed=0,
        )
        result = minimize(config)
        assert result.energy_residual <= 1e-3
        assert result.error < 1e-6


class TestSweeps:
    def test_monotone_check(self):
        assert check_monotone_past_threshold([(0.1, 0.3), (0.2, 1e-9), (0.3, 1e-10)])
        assert not check_monotone_past_threshold([(0.1, 0.3), (0.2, 1e-9), (0.3, 0.1)])
        assert check_monotone_past_threshold([(0.3, 0.2), (0.1, 0.4)])

    @pytest.mark.parametrize('grid', [[], [0.1, 0.3, 0.2], [0.1, 0.1]])
    def test_rejects_bad_grids(self, measurement_only, grid):
        with pytest.raises(ConfigError) as excinfo:
            sweep_threshold(measurement_only, grid)
        assert excinfo.value.key == 'sweep.values'

    def test_sweep_without_threshold(self, measurement_only):
        result = sweep_threshold(measurement_only, [0.0, 0.1], refine=False)
        assert [p.epsilon for p in result.points] == [0.0, 0.1]
        assert result.points[0].error == pytest.approx(0.5, abs=1e-12)
        assert result.epsilon_th is None
        assert list(result.curve().columns) == ['epsilon (amplitude)', 'P_E (probability)']


class TestFitFock:
    def test_level_outside_trusted_range(self, small_arch):
        with pytest.raises(ContractError):
            fit_fock(small_arch.cutoff - 2, small_arch)

    @pytest.mark.slow
    def test_single_photon(self):
        arch = Architecture(layers=4, cutoff=12)
        result = fit_fock(1, arch, FitOptions(max_iterations=2000, restarts=4))
        assert result.fidelity > 0.99
        assert not math.isnan(result.fidelity)
