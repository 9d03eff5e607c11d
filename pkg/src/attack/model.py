"""
Attack Model Module

The two-mode coherent Gaussian attack. Eve injects the two modes of a reservoir state with
covariance matrix [[omega_A I, G], [G, omega_B I]], G = diag(g, g'), into the links through
beam splitters of transmissivity tau_A and tau_B.

This module validates attack parameters against the bona-fide conditions, classifies the
reservoir state (separable or entangled), builds the extremal EPR attacks and scans the
(g, g') correlation plane.
"""

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
import pandas as pd

from ..errors import DomainError
from ..gaussian.core import attack_reservoir_cm, least_eigenvalue_squared, partial_transpose_eigenvalue_squared
from ..utils.logging_utils import get_logger

logger = get_logger('attack.model')

BOUNDARY_TOL = 1e-9
GRID_EDGE_SHRINK = 1e-6


class AttackClass(Enum):
    UNPHYSICAL = 'unphysical'
    SEPARABLE_PRODUCT = 'separable_product'
    SEPARABLE_CORRELATED = 'separable_correlated'
    ENTANGLED = 'entangled'

    @property
    def accessible(self) -> bool:
        return self is not AttackClass.UNPHYSICAL


@dataclass(frozen=True)
class AttackParams:
    """
    The six attack parameters.

    Attributes:
        tau_A (float): Transmissivity of Alice's link, in (0, 1]
        tau_B (float): Transmissivity of Bob's link, in (0, 1]
        omega_A (float): Thermal variance of the mode injected on Alice's link, >= 1
        omega_B (float): Thermal variance of the mode injected on Bob's link, >= 1
        g (float): q-q correlation of the reservoir modes
        g_prime (float): p-p correlation of the reservoir modes
    """
    tau_A: float
    tau_B: float
    omega_A: float = 1.0
    omega_B: float = 1.0
    g: float = 0.0
    g_prime: float = 0.0

    def __post_init__(self):
        for name in ('tau_A', 'tau_B'):
            tau = getattr(self, name)
            if not 0.0 < tau <= 1.0:
                raise DomainError(f"{name} must lie in (0, 1], got {tau}")
        for name in ('omega_A', 'omega_B'):
            omega = getattr(self, name)
            if omega < 1.0:
                raise DomainError(f"{name} must be >= 1, got {omega}")

    def with_correlations(self, g: float, g_prime: float) -> 'AttackParams':
        return replace(self, g=g, g_prime=g_prime)

    def swapped_correlations(self) -> 'AttackParams':
        """(g, g') -> (-g', -g), which exchanges lambda and lambda'."""
        return replace(self, g=-self.g_prime, g_prime=-self.g)

    def as_dict(self) -> dict:
        return {'tau_A': self.tau_A, 'tau_B': self.tau_B, 'omega_A': self.omega_A,
                'omega_B': self.omega_B, 'g': self.g, 'g_prime': self.g_prime}


@dataclass(frozen=True)
class AttackRegion:
    omega_A: float
    omega_B: float
    phi_max: float


def positivity_violation(params, tol: float = BOUNDARY_TOL) -> str:
    """
    Name of the first violated bona-fide constraint, or '' when the reservoir is physical.
    """
    bound = np.sqrt(params.omega_A * params.omega_B)
    if abs(params.g) >= bound + tol:
        return f"|g| < sqrt(omega_A omega_B) = {bound:.6g}"
    if abs(params.g_prime) >= bound + tol:
        return f"|g'| < sqrt(omega_A omega_B) = {bound:.6g}"
    if least_eigenvalue_squared(attack_reservoir_cm(params)) < 1.0 - tol:
        return "nu_-^2 >= 1 (uncertainty principle)"
    return ''


def validate(params, tol: float = BOUNDARY_TOL) -> AttackClass:
    """
    Classify the reservoir state of an attack.

    Args:
        params: AttackParams (or any object with omega_A, omega_B, g, g_prime)
        tol (float): Relaxation of the strict boundary inequalities

    Returns:
        AttackClass: UNPHYSICAL when a bona-fide condition fails; SEPARABLE_PRODUCT when
        g = g' = 0; ENTANGLED when the partial-transpose eigenvalue is below 1;
        SEPARABLE_CORRELATED otherwise
    """
    violation = positivity_violation(params, tol)
    if violation:
        logger.debug(f"attack {params} unphysical: {violation}")
        return AttackClass.UNPHYSICAL
    if abs(params.g) <= tol and abs(params.g_prime) <= tol:
        return AttackClass.SEPARABLE_PRODUCT
    if partial_transpose_eigenvalue_squared(attack_reservoir_cm(params)) < 1.0 - tol:
        return AttackClass.ENTANGLED
    return AttackClass.SEPARABLE_CORRELATED


def phi_bound(omega_A: float, omega_B: float) -> float:
    """
    Largest |g| = |g'| reachable on the bisector g' = -g.

    Returns:
        float: min{sqrt((omega_A - 1)(omega_B + 1)), sqrt((omega_A + 1)(omega_B - 1))}
    """
    if omega_A < 1 or omega_B < 1:
        raise DomainError(f"thermal variances must be >= 1, got ({omega_A}, {omega_B})")
    return float(min(np.sqrt((omega_A - 1.0) * (omega_B + 1.0)),
                     np.sqrt((omega_A + 1.0) * (omega_B - 1.0))))


def attack_region(omega_A: float, omega_B: float) -> AttackRegion:
    return AttackRegion(omega_A, omega_B, phi_bound(omega_A, omega_B))


def negative_epr_attack(tau_A: float, tau_B: float, omega_A: float, omega_B: float) -> AttackParams:
    """Extremal entangled attack (g, g') = (-phi, phi), the one that minimises the rate."""
    phi = phi_bound(omega_A, omega_B)
    return AttackParams(tau_A, tau_B, omega_A, omega_B, -phi, phi)


def positive_epr_attack(tau_A: float, tau_B: float, omega_A: float, omega_B: float) -> AttackParams:
    """Extremal entangled attack (g, g') = (phi, -phi)."""
    phi = phi_bound(omega_A, omega_B)
    return AttackParams(tau_A, tau_B, omega_A, omega_B, phi, -phi)


def _classify_arrays(omega_A: float, omega_B: float, g: np.ndarray, g_prime: np.ndarray,
                     tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Vectorised validate() for a fixed reservoir temperature."""
    wa, wb = omega_A, omega_B
    bound = np.sqrt(wa * wb)
    det = (wa * wb - g * g) * (wa * wb - g_prime * g_prime)
    delta = wa * wa + wb * wb + 2.0 * g * g_prime
    delta_t = wa * wa + wb * wb - 2.0 * g * g_prime

    def least_sq(d):
        denom = d + np.sqrt(np.maximum(d * d - 4.0 * det, 0.0))
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.where(denom > 0, 2.0 * det / denom, 0.0)

    physical = (np.abs(g) < bound + tol) & (np.abs(g_prime) < bound + tol) & (least_sq(delta) >= 1.0 - tol)
    product = (np.abs(g) <= tol) & (np.abs(g_prime) <= tol)
    entangled = least_sq(delta_t) < 1.0 - tol

    labels = np.full(g.shape, AttackClass.SEPARABLE_CORRELATED.value, dtype=object)
    labels[entangled] = AttackClass.ENTANGLED.value
    labels[product] = AttackClass.SEPARABLE_PRODUCT.value
    labels[~physical] = AttackClass.UNPHYSICAL.value
    return labels


def correlation_axis(omega_A: float, omega_B: float, grid_n: int) -> np.ndarray:
    """
    Grid axis over +-sqrt(omega_A omega_B)(1 - 1e-6), inclusive. An odd number of points is
    always used so that the origin lies on the grid.
    """
    if grid_n < 1:
        raise DomainError(f"grid_n must be positive, got {grid_n}")
    if grid_n % 2 == 0:
        grid_n += 1
    edge = np.sqrt(omega_A * omega_B) * (1.0 - GRID_EDGE_SHRINK)
    return np.linspace(-edge, edge, grid_n)


def scan_correlation_plane(omega_A: float, omega_B: float, grid_n: int,
                           tol: float = BOUNDARY_TOL) -> pd.DataFrame:
    """
    Classify every point of a square grid on the (g, g') plane.

    Args:
        omega_A (float): Thermal variance on Alice's link
        omega_B (float): Thermal variance on Bob's link
        grid_n (int): Points per axis (made odd)

    Returns:
        pd.DataFrame: Columns g, g_prime, class
    """
    if omega_A < 1 or omega_B < 1:
        raise DomainError(f"thermal variances must be >= 1, got ({omega_A}, {omega_B})")
    axis = correlation_axis(omega_A, omega_B, grid_n)
    gg, gp = np.meshgrid(axis, axis, indexing='ij')
    labels = _classify_arrays(omega_A, omega_B, gg.ravel(), gp.ravel(), tol)

    scan = pd.DataFrame({'g': gg.ravel(), 'g_prime': gp.ravel(), 'class': labels})
    counts = scan['class'].value_counts().to_dict()
    logger.info(f"Scanned correlation plane for omega=({omega_A}, {omega_B}) on {len(axis)}^2 points: {counts}")
    return scan
