"""
Unit tests for the threshold solver and the link-budget conversions.
"""

import numpy as np
import pytest

from src.errors import DomainError, InfeasibleNoiseError
from src.thresholds.solver import (STATUS_CAPPED, STATUS_NO_KEY, STATUS_OK, LinkBudget, db_from_tau,
                                   direct_reconciliation_threshold, distance_from_tau, max_bob_distance,
                                   max_bob_distance_point, max_symmetric_distance, parse_length, rate_surface,
                                   symmetric_threshold, tau_from_db, tau_from_distance, threshold_curve,
                                   threshold_curves)
from src.rates.engine import rate_from_epsilon


class TestConversions:

    def test_ten_db(self):
        assert tau_from_db(10.0) == pytest.approx(0.1)
        assert db_from_tau(0.1) == pytest.approx(10.0)

    def test_fifty_km(self):
        assert tau_from_distance(50.0) == pytest.approx(0.1)
        assert distance_from_tau(0.1) == pytest.approx(50.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            tau_from_db(-1.0)
        with pytest.raises(DomainError):
            tau_from_distance(1.0, loss_rate=0.0)
        with pytest.raises(DomainError):
            db_from_tau(0.0)

    def test_link_budget(self):
        link = LinkBudget(50.0)
        assert link.tau == pytest.approx(0.1)
        assert link.loss_db == pytest.approx(10.0)
        assert LinkBudget.from_tau(0.01, 0.25).distance_km == pytest.approx(80.0)

    @pytest.mark.parametrize('text,expected', [
        ('50km', 0.1),
        ('50 KM', 0.1),
        ('50000m', 0.1),
        ('10dB', 0.1),
        ('0.25', 0.25),
        ('1', 1.0),
    ])
    def test_parse_length(self, text, expected):
        assert parse_length(text) == pytest.approx(expected)

    @pytest.mark.parametrize('text', ['abc', '1.5', '-3km', '10 furlongs'])
    def test_parse_length_rejects(self, text):
        with pytest.raises(DomainError):
            parse_length(text)


class TestThresholds:

    def test_symmetric_threshold(self):
        assert symmetric_threshold() == pytest.approx(0.84, abs=5e-3)

    def test_direct_reconciliation_threshold(self):
        assert direct_reconciliation_threshold() == pytest.approx(np.e / (1.0 + np.e), abs=1e-4)

    def test_symmetric_distance(self):
        distance = max_symmetric_distance()
        assert 3.6 < distance < 4.0
        assert max_bob_distance(distance) == pytest.approx(distance, rel=1e-3)

    def test_symmetric_distance_scales_with_loss(self):
        assert max_symmetric_distance(0.4) == pytest.approx(max_symmetric_distance(0.2) / 2.0)


class TestMaxBobDistance:

    def test_root_has_zero_rate(self):
        point = max_bob_distance_point(1.0)
        assert point.status == STATUS_OK

        def rate_at(d_km):
            return rate_from_epsilon(tau_from_distance(1.0), tau_from_distance(d_km), 0.0).rate

        assert abs(rate_at(point.d_max_km)) < 1e-6
        assert rate_at(point.d_max_km - 1e-3) > 0 > rate_at(point.d_max_km + 1e-3)

    def test_proximal_relay_reaches_far(self):
        assert max_bob_distance(0.001, epsilon=0.0) > 100.0

    def test_excess_noise_shortens_distance(self):
        clean = max_bob_distance(0.01, epsilon=0.0)
        noisy = max_bob_distance(0.01, epsilon=0.1)
        assert 0.0 < noisy < clean

    def test_distance_shrinks_with_radius(self):
        distances = [max_bob_distance(r) for r in (0.1, 0.5, 1.0, 2.0)]
        assert all(a > b for a, b in zip(distances, distances[1:]))

    def test_no_key(self):
        point = max_bob_distance_point(10.0)
        assert point.status == STATUS_NO_KEY
        assert point.d_max_km == 0.0

    def test_capped(self):
        point = max_bob_distance_point(0.0, cap_km=50.0)
        assert point.status == STATUS_CAPPED
        assert point.d_max_km == 50.0

    def test_negative_noise(self):
        with pytest.raises(InfeasibleNoiseError):
            max_bob_distance_point(1.0, epsilon=-0.1)


class TestSweeps:

    def test_threshold_curve(self):
        curve = threshold_curve([0.5, 1.0, 10.0])
        assert [p.status for p in curve.points] == [STATUS_OK, STATUS_OK, STATUS_NO_KEY]
        frame = curve.to_frame()
        assert list(frame.columns) == ['r_km', 'd_max_km', 'epsilon', 'status']
        assert len(frame) == 3

    def test_threshold_curves_stack(self):
        frame = threshold_curves([0.5, 1.0], [0.0, 0.1])
        assert len(frame) == 4
        assert sorted(frame['epsilon'].unique()) == [0.0, 0.1]

    def test_rate_surface(self):
        grid = np.linspace(0.6, 1.0, 3)
        surface = rate_surface(grid, grid)
        assert list(surface.columns) == ['tau_A', 'tau_B', 'rate']
        assert len(surface) == 9
        row = surface[(surface['tau_A'] == 1.0) & (surface['tau_B'] == 0.6)]
        assert row['rate'].iloc[0] == pytest.approx(rate_from_epsilon(1.0, 0.6, 0.0).rate)

    def test_noisy_key_region_lies_inside_clean_one(self):
        grid = np.linspace(0.5, 1.0, 11)
        clean = rate_surface(grid, grid, epsilon=0.0)['rate'].to_numpy() > 0
        noisy = rate_surface(grid, grid, epsilon=0.1)['rate'].to_numpy() > 0
        assert noisy.any()
        assert not np.any(noisy & ~clean)
        assert noisy.sum() < clean.sum()

    def test_surface_is_not_symmetric_in_the_links(self):
        surface = rate_surface([0.7, 0.85, 1.0], [0.7, 0.85, 1.0]).set_index(['tau_A', 'tau_B'])['rate']
        assert surface[(1.0, 0.7)] > 0 > surface[(0.7, 1.0)]
        assert surface[(1.0, 0.85)] != pytest.approx(surface[(0.85, 1.0)])
