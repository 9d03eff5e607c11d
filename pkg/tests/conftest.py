"""
Shared fixtures for the test suite.
"""

import numpy as np
import pytest

from src.attack.model import AttackParams, validate


@pytest.fixture
def rng():
    return np.random.default_rng(20150101)


def random_accessible_attack(rng, tau_A=None, tau_B=None, max_omega=5.0, tries=1000):
    """Draw omega_A, omega_B and (g, g') uniformly until the reservoir is physical."""
    tau_A = rng.uniform(0.1, 1.0) if tau_A is None else tau_A
    tau_B = rng.uniform(0.1, 1.0) if tau_B is None else tau_B
    for _ in range(tries):
        omega_A, omega_B = rng.uniform(1.0, max_omega, size=2)
        bound = np.sqrt(omega_A * omega_B)
        g, g_prime = rng.uniform(-bound, bound, size=2)
        params = AttackParams(tau_A, tau_B, omega_A, omega_B, g, g_prime)
        if validate(params).accessible:
            return params
    raise RuntimeError("no accessible attack found")


@pytest.fixture
def attack_sampler(rng):
    def sample(**kwargs):
        return random_accessible_attack(rng, **kwargs)
    return sample
