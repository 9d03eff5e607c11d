"""
Unit tests for the two-mode attack model and the correlation-plane classification.
"""

import numpy as np
import pytest

from src.attack.model import (AttackClass, AttackParams, attack_region, correlation_axis, negative_epr_attack,
                              phi_bound, positive_epr_attack, positivity_violation, scan_correlation_plane,
                              validate)
from src.errors import DomainError


class TestAttackParams:

    @pytest.mark.parametrize('tau', [0.0, -0.1, 1.5])
    def test_rejects_bad_transmissivity(self, tau):
        with pytest.raises(DomainError):
            AttackParams(tau, 0.5)

    def test_rejects_subvacuum_reservoir(self):
        with pytest.raises(DomainError):
            AttackParams(0.5, 0.5, omega_A=0.5)

    def test_swapped_correlations(self):
        params = AttackParams(0.9, 0.8, 3.0, 2.0, g=1.0, g_prime=-0.5)
        swapped = params.swapped_correlations()
        assert (swapped.g, swapped.g_prime) == (0.5, -1.0)

    def test_with_correlations(self):
        params = AttackParams(0.9, 0.8, 3.0, 2.0).with_correlations(0.3, 0.4)
        assert params.as_dict() == {'tau_A': 0.9, 'tau_B': 0.8, 'omega_A': 3.0, 'omega_B': 2.0,
                                    'g': 0.3, 'g_prime': 0.4}


class TestValidate:

    def test_origin_is_product(self):
        assert validate(AttackParams(0.9, 0.9, 5.0, 2.0)) is AttackClass.SEPARABLE_PRODUCT

    def test_separable_correlated(self):
        assert validate(AttackParams(0.9, 0.9, 5.0, 2.0, 1.0, 1.0)) is AttackClass.SEPARABLE_CORRELATED

    def test_epr_attacks_are_entangled(self):
        assert validate(negative_epr_attack(0.9, 0.9, 5.0, 2.0)) is AttackClass.ENTANGLED
        assert validate(positive_epr_attack(0.9, 0.9, 5.0, 2.0)) is AttackClass.ENTANGLED

    def test_uncertainty_violation(self):
        params = AttackParams(0.9, 0.9, 5.0, 2.0, -3.0, 3.0)
        assert validate(params) is AttackClass.UNPHYSICAL
        assert 'uncertainty' in positivity_violation(params)

    def test_positivity_violation(self):
        params = AttackParams(0.9, 0.9, 5.0, 2.0, 4.0, 0.0)
        assert validate(params) is AttackClass.UNPHYSICAL
        assert positivity_violation(params).startswith('|g|')

    def test_accessible_flag(self):
        assert AttackClass.ENTANGLED.accessible
        assert not AttackClass.UNPHYSICAL.accessible

    def test_accessible_region_is_convex(self, attack_sampler, rng):
        for _ in range(200):
            first = attack_sampler(tau_A=0.5, tau_B=0.5)
            bound = np.sqrt(first.omega_A * first.omega_B)
            other = first.with_correlations(*rng.uniform(-bound, bound, size=2))
            if not validate(other).accessible:
                continue
            t = rng.uniform()
            mid = first.with_correlations(t * first.g + (1 - t) * other.g,
                                          t * first.g_prime + (1 - t) * other.g_prime)
            assert validate(mid).accessible


class TestExtremalAttacks:

    def test_phi_bound(self):
        assert phi_bound(1.0, 1.0) == 0.0
        assert phi_bound(5.0, 2.0) == pytest.approx(np.sqrt(6.0))
        assert attack_region(5.0, 2.0).phi_max == pytest.approx(np.sqrt(6.0))

    def test_phi_bound_domain(self):
        with pytest.raises(DomainError):
            phi_bound(0.5, 2.0)

    def test_epr_attack_signs(self):
        phi = phi_bound(5.0, 2.0)
        neg = negative_epr_attack(0.9, 0.8, 5.0, 2.0)
        pos = positive_epr_attack(0.9, 0.8, 5.0, 2.0)
        assert (neg.g, neg.g_prime) == (-phi, phi)
        assert (pos.g, pos.g_prime) == (phi, -phi)

    def test_bisector_extremes_lie_on_boundary(self):
        phi = phi_bound(5.0, 2.0)
        inside = AttackParams(0.9, 0.9, 5.0, 2.0, -0.999 * phi, 0.999 * phi)
        outside = AttackParams(0.9, 0.9, 5.0, 2.0, -1.001 * phi, 1.001 * phi)
        assert validate(inside).accessible
        assert not validate(outside).accessible


class TestCorrelationPlane:

    def test_axis_is_odd_and_centred(self):
        axis = correlation_axis(5.0, 2.0, 4)
        assert len(axis) == 5
        assert axis[2] == 0.0
        assert axis[-1] < np.sqrt(10.0)

    def test_axis_rejects_empty(self):
        with pytest.raises(DomainError):
            correlation_axis(5.0, 2.0, 0)

    def test_scan_columns_and_size(self):
        scan = scan_correlation_plane(5.0, 2.0, 21)
        assert list(scan.columns) == ['g', 'g_prime', 'class']
        assert len(scan) == 21 * 21
        assert set(scan['class']) == {c.value for c in AttackClass}

    def test_scan_origin(self):
        scan = scan_correlation_plane(5.0, 2.0, 21)
        origin = scan[(scan['g'] == 0.0) & (scan['g_prime'] == 0.0)]
        assert origin['class'].tolist() == [AttackClass.SEPARABLE_PRODUCT.value]

    def test_scan_matches_scalar_validation(self):
        scan = scan_correlation_plane(5.0, 2.0, 21)
        for row in scan.itertuples(index=False):
            params = AttackParams(0.9, 0.9, 5.0, 2.0, row.g, row.g_prime)
            assert validate(params).value == row[2]

    def test_vacuum_reservoir_only_origin_accessible(self):
        scan = scan_correlation_plane(1.0, 1.0, 11)
        accessible = scan[scan['class'] != AttackClass.UNPHYSICAL.value]
        assert len(accessible) == 1
