"""
Unit tests for the Monte Carlo simulation and the estimation chain.
"""

import math
import os

import numpy as np
import pandas as pd
import pytest

from src.attack.model import AttackParams
from src.errors import DataQualityError, DomainError
from src.gaussian.core import rotation_symplectic, squeezing_symplectic
from src.montecarlo.estimation import (MomentAccumulator, NormalForm, calibrate_gains, classical_to_quantum_cm,
                                       condition_classical, convergence_study, estimate_moments,
                                       estimate_transmissivity, eta_factor, finite_size_summary, model_rate,
                                       optimize_r, reconstruct, run_estimation, symmetrize_to_normal_form)
from src.montecarlo.simulation import (SAMPLE_COLUMNS, RelaySettings, SimConfig, analytic_global_cm,
                                       cross_talk_rotation, kappa_pair, relay_projection, simulate,
                                       simulate_calibration)
from src.rates.engine import rate_general


def normal_form_cm(a, b, c):
    Z = np.diag([1.0, -1.0])
    return np.block([[a * np.eye(2), c * Z], [c * Z, b * np.eye(2)]])


class TestRelaySettings:

    def test_kappa_pair(self):
        assert kappa_pair(1.0) == pytest.approx((0.0, 1.0))
        k1, k2 = kappa_pair(0.5)
        assert k1 ** 2 + k2 ** 2 == pytest.approx(1.0)

    def test_ideal_relay_does_not_mix(self):
        relay = RelaySettings()
        assert relay.mixing == 0.0
        assert np.allclose(relay.mixing_matrix, np.eye(2))
        assert relay.emitted_noise_variance == 0.0

    def test_imbalance_shifts_effective_r(self):
        relay = RelaySettings(r=0.5, detector_imbalance=2.0)
        assert relay.effective_r == pytest.approx(1.0)
        assert relay.mixing == pytest.approx(0.0)

    @pytest.mark.parametrize('kwargs', [{'r': 0.0}, {'detection_noise_variance': 0.5}, {'detector_imbalance': -1.0}])
    def test_validation(self, kwargs):
        with pytest.raises(DomainError):
            RelaySettings(**kwargs)


class TestSimConfig:

    @pytest.mark.parametrize('kwargs', [
        {'phi': 0.0},
        {'tau_B': 0.0},
        {'tau_A': 1.2},
        {'n_rounds': 1},
        {'xi': 0.0},
        {'epsilon': -0.1},
        {'attenuation': 'teleport'},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(DomainError):
            SimConfig(**kwargs)

    def test_batch_sizes(self):
        assert SimConfig(n_rounds=250, batch_size=100).batch_sizes() == [100, 100, 50]

    def test_excess_variance(self):
        config = SimConfig(tau_B=0.5, epsilon=0.3)
        assert config.excess_variance == pytest.approx(0.05)

    def test_as_dict_serialises_cross_talk(self):
        config = SimConfig(cross_talk=cross_talk_rotation(0.1, 0.2))
        data = config.as_dict()
        assert isinstance(data['cross_talk'][0], list)
        assert SimConfig().as_dict()['cross_talk'] is None


class TestModel:

    def test_projection_ideal_links(self):
        P = relay_projection(SimConfig())
        expected = np.array([[1.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, 1.0]]) / math.sqrt(2.0)
        assert np.allclose(P, expected)

    def test_analytic_cm_blocks(self):
        config = SimConfig(tau_B=0.5)
        cm = analytic_global_cm(config, RelaySettings())
        assert np.allclose(cm, cm.T)
        assert np.allclose(cm[:4, :4], 65.0 * np.eye(4))
        assert cm[4, 2] == pytest.approx(-65.0 * math.sqrt(0.5 / 2.0))

    def test_sample_covariance_matches_model(self):
        config = SimConfig(tau_B=0.5, epsilon=0.2, n_rounds=100_000, batch_size=50_000, seed=3)
        relay = RelaySettings(r=0.8, detection_noise_variance=1.5)
        samples = pd.concat(list(simulate(config, relay)), ignore_index=True)
        _, cov = estimate_moments(samples)
        assert np.allclose(cov, analytic_global_cm(config, relay), atol=2.0)

    def test_beam_splitter_attenuation_matches_model(self):
        config = SimConfig(tau_B=0.3, n_rounds=100_000, batch_size=100_000, seed=4, attenuation='beam_splitter')
        samples = next(simulate(config, RelaySettings()))
        _, cov = estimate_moments(samples)
        assert np.allclose(cov, analytic_global_cm(config, RelaySettings()), atol=2.0)

    def test_cross_talk_enters_model(self):
        config = SimConfig(cross_talk=cross_talk_rotation(0.3, -0.2))
        P = relay_projection(config)
        assert not np.allclose(P, relay_projection(SimConfig()))


class TestSimulation:

    def test_seeded_runs_are_identical(self):
        config = SimConfig(n_rounds=2_000, batch_size=500, seed=11)
        first = pd.concat(list(simulate(config, RelaySettings())))
        second = pd.concat(list(simulate(config, RelaySettings())))
        assert list(first.columns) == SAMPLE_COLUMNS
        pd.testing.assert_frame_equal(first, second)

    def test_displacements_do_not_depend_on_relay(self):
        config = SimConfig(n_rounds=1_000, batch_size=1_000, seed=5)
        ideal = next(simulate(config, RelaySettings(r=1.0)))
        skewed = next(simulate(config, RelaySettings(r=0.5)))
        assert np.array_equal(ideal[SAMPLE_COLUMNS[:4]].to_numpy(), skewed[SAMPLE_COLUMNS[:4]].to_numpy())
        assert not np.array_equal(ideal['x_minus'].to_numpy(), skewed['x_minus'].to_numpy())

    def test_different_seeds_differ(self):
        a = next(simulate(SimConfig(n_rounds=100, batch_size=100, seed=1), RelaySettings()))
        b = next(simulate(SimConfig(n_rounds=100, batch_size=100, seed=2), RelaySettings()))
        assert not np.array_equal(a.to_numpy(), b.to_numpy())


class TestMoments:

    def test_merge_matches_single_pass(self, rng):
        data = rng.normal(size=(1_000, 6))
        split = MomentAccumulator().update(data[:300]).update(data[300:])
        whole = MomentAccumulator().update(data)
        assert split.n == whole.n
        assert np.allclose(split.mean, whole.mean)
        assert np.allclose(split.covariance, np.cov(data, rowvar=False))

    def test_needs_two_samples(self):
        acc = MomentAccumulator().update(np.zeros((1, 6)))
        with pytest.raises(DataQualityError):
            acc.covariance

    def test_rejects_wrong_width(self):
        with pytest.raises(DomainError):
            MomentAccumulator().update(np.zeros((5, 4)))


class TestEstimationChain:

    def test_transmissivity_from_model(self):
        cm = analytic_global_cm(SimConfig(tau_B=0.3), RelaySettings())
        tau_hat, se = estimate_transmissivity(cm, 1_000_000)
        assert tau_hat == pytest.approx(0.3)
        assert 0.0 < se < 1e-2

    def test_transmissivity_is_invariant_to_relay_rescaling(self):
        config = SimConfig(tau_B=0.3)
        tau_hat, _ = estimate_transmissivity(analytic_global_cm(config, RelaySettings(r=0.6)), 1_000_000)
        assert tau_hat == pytest.approx(0.3)

    def test_singular_relay_block(self):
        cm = np.eye(6)
        cm[4:, 4:] = 1.0
        with pytest.raises(DataQualityError):
            condition_classical(cm)

    def test_normal_form_is_fixed_point(self):
        form = symmetrize_to_normal_form(normal_form_cm(5.0, 3.0, 3.5))
        assert (form.a, form.b, form.c) == pytest.approx((5.0, 3.0, 3.5))
        assert form.det_ratio == pytest.approx(1.0)

    def test_normal_form_undoes_local_operations(self):
        V0 = normal_form_cm(5.0, 3.0, 3.5)
        S_A = rotation_symplectic(0.3) @ squeezing_symplectic(0.2)
        S_B = squeezing_symplectic(-0.4) @ rotation_symplectic(1.1)
        S = np.block([[S_A, np.zeros((2, 2))], [np.zeros((2, 2)), S_B]])
        form = symmetrize_to_normal_form(S @ V0 @ S.T)

        assert (form.a, form.b, form.c) == pytest.approx((5.0, 3.0, 3.5))
        assert form.det_ratio == pytest.approx(1.0)
        local = np.block([[form.S_A, np.zeros((2, 2))], [np.zeros((2, 2)), form.S_B]])
        assert np.allclose(local @ S @ V0 @ S.T @ local.T, form.cm, atol=1e-9)

    def test_normal_form_needs_correlations(self):
        with pytest.raises(DataQualityError):
            symmetrize_to_normal_form(np.diag([2.0, 2.0, 3.0, 3.0]))

    def test_eta(self):
        assert eta_factor(66.0) == pytest.approx(67.0 / math.sqrt(66.0 ** 2 - 1.0))
        with pytest.raises(DomainError):
            eta_factor(1.0)

    def test_classical_to_quantum(self):
        form = NormalForm(5.0, 3.0, 3.5, np.eye(2), np.eye(2), 1.0)
        quantum = classical_to_quantum_cm(form, 1.1)
        assert np.allclose(quantum, 1.21 * form.cm - np.eye(4))

    @pytest.mark.parametrize('tau_B', [1.0, 0.5, 0.1])
    def test_model_reconstruction_matches_closed_form(self, tau_B):
        config = SimConfig(tau_B=tau_B, xi=1.0)
        expected = rate_general(AttackParams(1.0, tau_B), mu=66.0, finite=True).rate
        assert model_rate(config, RelaySettings()) == pytest.approx(expected, abs=1e-8)

    def test_excess_noise_is_a_thermal_reservoir(self):
        config = SimConfig(tau_B=0.5, epsilon=0.3, xi=1.0)
        omega_B = 1.0 + 2.0 * config.excess_variance / (1.0 - config.tau_B)
        expected = rate_general(AttackParams(1.0, 0.5, 1.0, omega_B), mu=66.0, finite=True).rate
        assert model_rate(config, RelaySettings()) == pytest.approx(expected, abs=1e-8)

    def test_epsilon_estimate_grows_with_noise(self):
        estimates = []
        for eps in (0.0, 0.1, 0.3):
            config = SimConfig(tau_B=0.5, epsilon=eps, xi=1.0)
            estimates.append(reconstruct(analytic_global_cm(config, RelaySettings()), 10 ** 6, 1.0).rate.epsilon)
        assert estimates[0] < estimates[1] < estimates[2]

    def test_detection_noise_lowers_rate(self):
        config = SimConfig(tau_B=0.5, xi=1.0)
        clean = model_rate(config, RelaySettings())
        noisy = model_rate(config, RelaySettings(detection_noise_variance=1.5))
        assert noisy < clean


class TestRelayOptimisation:

    def test_ideal_detectors_keep_r_at_one(self):
        r_opt, rate = optimize_r(SimConfig(tau_B=0.5, xi=1.0))
        assert r_opt == 1.0
        assert rate == pytest.approx(model_rate(SimConfig(tau_B=0.5, xi=1.0), RelaySettings()))

    def test_noiseless_relay_rate_does_not_depend_on_r(self):
        config = SimConfig(tau_B=0.5, xi=1.0)
        assert model_rate(config, RelaySettings(r=0.5)) == pytest.approx(model_rate(config, RelaySettings()))

    def test_imbalanced_noisy_relay_never_loses_rate(self):
        config = SimConfig(tau_B=0.5, xi=1.0)
        relay = RelaySettings(detection_noise_variance=1.5, detector_imbalance=1.25)
        r_opt, rate = optimize_r(config, relay)
        assert 0.2 <= r_opt <= 2.0
        assert rate >= model_rate(config, relay) - 1e-9


class TestCalibration:

    def test_gains_are_recovered(self):
        gains = (0.9, 1.1, 1.0, 0.8)
        fit = calibrate_gains(simulate_calibration(gains, n=50_000, seed=2))
        assert fit.identifiable
        for estimate, se, true in zip(fit.gains, fit.std_errors, gains):
            assert abs(estimate - true) < 5 * se
        assert fit.residual_variance == pytest.approx((1.0, 1.0), rel=0.05)

    def test_separate_outcomes(self):
        records = simulate_calibration((1.0, 1.0, 1.0, 1.0), n=10_000, seed=3)
        fit = calibrate_gains(records[['A_q', 'A_p', 'B_q', 'B_p']], records[['x_minus', 'x_plus']].to_numpy())
        assert fit.t1 == pytest.approx(1.0, abs=0.05)

    def test_no_signal_is_unidentifiable(self):
        fit = calibrate_gains(simulate_calibration((1.0, 1.0, 1.0, 1.0), phi=0.0, n=1_000))
        assert not fit.identifiable
        assert all(np.isnan(fit.gains))


class TestRunEstimation:

    def test_small_run(self, tmpdir):
        dump = tmpdir.join('samples.csv')
        config = SimConfig(tau_B=0.5, epsilon=0.3, xi=1.0, n_rounds=50_000, batch_size=10_000, seed=7)
        report = run_estimation(config, RelaySettings(), checkpoints=[1_000, 10_000, 100_000],
                                dump_path=dump.strpath)

        assert [row['n'] for row in report.convergence] == [1_000, 10_000]
        assert len(report.batch_rates) == 5
        assert np.isfinite(report.rate_se)
        assert report.rate.rate == pytest.approx(model_rate(config, RelaySettings()), abs=0.15)
        assert report.tau_B_hat == pytest.approx(0.5, abs=0.05)

        assert os.path.exists(dump.strpath)
        assert len(pd.read_csv(dump.strpath)) == 50_000

        data = report.as_dict()
        assert data['rng'] == 'PCG64'
        assert data['seed'] == 7
        assert set(data['normal_form']) == {'a', 'b', 'c', 'det_ratio'}
        assert list(finite_size_summary(report).columns) == ['n', 'tau_hat', 'det_ratio', 'rate']

    def test_runs_are_reproducible(self):
        config = SimConfig(tau_B=0.9, epsilon=0.1, xi=1.0, n_rounds=20_000, batch_size=10_000, seed=9)
        first = run_estimation(config, checkpoints=None)
        second = run_estimation(config, checkpoints=None)
        assert first.rate.rate == second.rate.rate
        assert np.array_equal(first.global_cm_hat, second.global_cm_hat)


@pytest.mark.slow
class TestMonteCarloClosure:

    @pytest.mark.parametrize('tau_B', [1.0, 0.5, 0.1])
    def test_clean_simulation(self, tau_B):
        config = SimConfig(tau_B=tau_B, xi=1.0, n_rounds=1_000_000, batch_size=100_000, seed=2015)
        report = run_estimation(config, checkpoints=None)
        expected = rate_general(AttackParams(1.0, tau_B), mu=66.0, finite=True).rate

        assert abs(report.rate.rate - expected) < 3 * report.rate_se
        tau_se = report.reconstruction.tau_B_se
        assert abs(report.tau_B_hat - tau_B) < 3 * tau_se

    def test_convergence_by_hundred_thousand(self):
        config = SimConfig(tau_B=0.1, xi=1.0, n_rounds=1_000_000, batch_size=100_000, seed=2015)
        rows = convergence_study(config)
        assert [row['n'] for row in rows] == [1_000, 10_000, 100_000, 1_000_000]
        final = rows[-1]['rate']
        assert abs(rows[2]['rate'] - final) < 0.05 * abs(final)
