"""
Threshold Solver Module

Root finding and sweeps for security thresholds: the maximum distance of Bob from the relay
for a given relay radius, rate surfaces over the transmissivity plane, and the conversions
between fibre length, loss in dB and transmissivity.
"""

import re
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

import numpy as np
import pandas as pd
from scipy.optimize import bisect

from ..errors import DomainError, InfeasibleNoiseError
from ..rates.engine import rate_from_epsilon, rate_pure_loss_dr_limit, rate_pure_loss_symmetric
from ..utils.logging_utils import get_logger

logger = get_logger('thresholds.solver')

DEFAULT_LOSS_RATE = 0.2
DISTANCE_CAP_KM = 500.0
RATE_TOL = 1e-9
MAX_ITER = 200

STATUS_OK = 'ok'
STATUS_CAPPED = 'capped'
STATUS_NO_KEY = 'no_key'


def tau_from_db(loss_db: float) -> float:
    if loss_db < 0:
        raise DomainError(f"loss must be non-negative, got {loss_db} dB")
    return float(10.0 ** (-loss_db / 10.0))


def db_from_tau(tau: float) -> float:
    if not 0.0 < tau <= 1.0:
        raise DomainError(f"tau must lie in (0, 1], got {tau}")
    return float(-10.0 * np.log10(tau))


def tau_from_distance(d_km: float, loss_rate: float = DEFAULT_LOSS_RATE) -> float:
    """
    Args:
        d_km (float): Fibre length in km, >= 0
        loss_rate (float): Attenuation in dB/km, > 0

    Returns:
        float: 10^(-loss_rate d / 10)
    """
    if loss_rate <= 0:
        raise DomainError(f"loss rate must be positive, got {loss_rate} dB/km")
    if d_km < 0:
        raise DomainError(f"distance must be non-negative, got {d_km} km")
    return tau_from_db(loss_rate * d_km)


def distance_from_tau(tau: float, loss_rate: float = DEFAULT_LOSS_RATE) -> float:
    if loss_rate <= 0:
        raise DomainError(f"loss rate must be positive, got {loss_rate} dB/km")
    return db_from_tau(tau) / loss_rate


@dataclass(frozen=True)
class LinkBudget:
    """A fibre link; tau follows from the distance and the loss rate."""
    distance_km: float
    loss_rate_db_per_km: float = DEFAULT_LOSS_RATE

    @property
    def tau(self) -> float:
        return tau_from_distance(self.distance_km, self.loss_rate_db_per_km)

    @property
    def loss_db(self) -> float:
        return self.distance_km * self.loss_rate_db_per_km

    @classmethod
    def from_tau(cls, tau: float, loss_rate: float = DEFAULT_LOSS_RATE) -> 'LinkBudget':
        return cls(distance_from_tau(tau, loss_rate), loss_rate)


_LENGTH_RE = re.compile(r'^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(km|m|db)?\s*$', re.IGNORECASE)


def parse_length(text: str, loss_rate: float = DEFAULT_LOSS_RATE) -> float:
    """
    Convert '3.8km', '500m', '10dB' or a bare transmissivity '0.1' to a transmissivity.

    Raises:
        DomainError: On unparseable text or a bare value outside (0, 1]
    """
    match = _LENGTH_RE.match(str(text))
    if not match:
        raise DomainError(f"cannot parse {text!r}; expected e.g. '3.8km', '10dB' or a transmissivity")
    value, unit = float(match.group(1)), (match.group(2) or '').lower()
    if unit == 'km':
        return tau_from_distance(value, loss_rate)
    if unit == 'm':
        return tau_from_distance(value / 1000.0, loss_rate)
    if unit == 'db':
        return tau_from_db(value)
    if not 0.0 < value <= 1.0:
        raise DomainError(f"bare transmissivity must lie in (0, 1], got {value}")
    return value


@dataclass(frozen=True)
class ThresholdPoint:
    r_km: float
    d_max_km: float
    epsilon: float
    status: str = STATUS_OK


@dataclass
class ThresholdCurve:
    epsilon: float
    loss_rate: float = DEFAULT_LOSS_RATE
    points: List[ThresholdPoint] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{'r_km': p.r_km, 'd_max_km': p.d_max_km, 'epsilon': p.epsilon, 'status': p.status}
                             for p in self.points], columns=['r_km', 'd_max_km', 'epsilon', 'status'])


def _bob_rate(r_km: float, d_km: float, epsilon: float, loss_rate: float, xi: float) -> float:
    return rate_from_epsilon(tau_from_distance(r_km, loss_rate), tau_from_distance(d_km, loss_rate),
                             epsilon, xi).rate


def max_bob_distance_point(r_km: float, epsilon: float = 0.0, loss_rate: float = DEFAULT_LOSS_RATE,
                           xi: float = 1.0, cap_km: float = DISTANCE_CAP_KM) -> ThresholdPoint:
    """
    Largest distance of Bob from the relay with a positive rate, for Alice at r_km.

    Returns:
        ThresholdPoint: status 'no_key' (d_max = 0) when there is no key even at d = 0,
        'capped' (d_max = cap_km) when the rate is still positive at the cap
    """
    if epsilon < 0:
        raise InfeasibleNoiseError(f"excess noise must be non-negative, got {epsilon}")

    def rate_at(d):
        return _bob_rate(r_km, d, epsilon, loss_rate, xi)

    if not rate_at(0.0) > 0:
        logger.debug(f"no key at r = {r_km} km, epsilon = {epsilon} even with Bob at the relay")
        return ThresholdPoint(r_km, 0.0, epsilon, STATUS_NO_KEY)

    lo, hi = 0.0, 1.0
    while hi < cap_km and rate_at(hi) > 0:
        lo, hi = hi, 2.0 * hi
    if hi >= cap_km:
        hi = cap_km
        if rate_at(hi) > 0:
            logger.debug(f"rate still positive at the {cap_km} km cap for r = {r_km} km")
            return ThresholdPoint(r_km, cap_km, epsilon, STATUS_CAPPED)

    d_max = bisect(rate_at, lo, hi, xtol=1e-10, rtol=4 * np.finfo(float).eps, maxiter=MAX_ITER)
    residual = abs(rate_at(d_max))
    if residual >= RATE_TOL:
        logger.warning(f"bisection residual {residual:.3g} bits at r = {r_km} km exceeds {RATE_TOL}")
    return ThresholdPoint(r_km, float(d_max), epsilon, STATUS_OK)


def max_bob_distance(r_km: float, epsilon: float = 0.0, loss_rate: float = DEFAULT_LOSS_RATE,
                     xi: float = 1.0) -> float:
    return max_bob_distance_point(r_km, epsilon, loss_rate, xi).d_max_km


def threshold_curve(r_values: Iterable[float], epsilon: float = 0.0, loss_rate: float = DEFAULT_LOSS_RATE,
                    xi: float = 1.0) -> ThresholdCurve:
    curve = ThresholdCurve(epsilon=epsilon, loss_rate=loss_rate)
    for r_km in r_values:
        curve.points.append(max_bob_distance_point(float(r_km), epsilon, loss_rate, xi))
    capped = sum(p.status == STATUS_CAPPED for p in curve.points)
    logger.info(f"Threshold curve for epsilon = {epsilon}: {len(curve.points)} points, {capped} capped")
    return curve


def threshold_curves(r_values: Iterable[float], epsilons: Iterable[float], loss_rate: float = DEFAULT_LOSS_RATE,
                     xi: float = 1.0) -> pd.DataFrame:
    """Stacked curves for several excess noises."""
    r_values = list(r_values)
    frames = [threshold_curve(r_values, eps, loss_rate, xi).to_frame() for eps in epsilons]
    return pd.concat(frames, ignore_index=True)


def rate_surface(tau_grid_A: Iterable[float], tau_grid_B: Iterable[float], epsilon: float = 0.0,
                 xi: float = 1.0) -> pd.DataFrame:
    """
    Minimum rate at fixed excess noise over the transmissivity plane.

    Returns:
        pd.DataFrame: Long-form columns tau_A, tau_B, rate
    """
    rows = []
    for tau_A in tau_grid_A:
        for tau_B in tau_grid_B:
            rows.append({'tau_A': float(tau_A), 'tau_B': float(tau_B),
                         'rate': rate_from_epsilon(float(tau_A), float(tau_B), epsilon, xi).rate})
    return pd.DataFrame(rows, columns=['tau_A', 'tau_B', 'rate'])


def symmetric_threshold() -> float:
    """Transmissivity where the pure-loss rate with the relay in the middle vanishes (about 0.84)."""
    return float(bisect(rate_pure_loss_symmetric, 0.5, 0.99, xtol=1e-14, maxiter=MAX_ITER))


def direct_reconciliation_threshold() -> float:
    """Alice's transmissivity where the pure-loss rate vanishes with the relay next to Bob: e / (1 + e)."""
    return float(bisect(rate_pure_loss_dr_limit, 0.5, 0.99, xtol=1e-14, maxiter=MAX_ITER))


def max_symmetric_distance(loss_rate: float = DEFAULT_LOSS_RATE, threshold: Optional[float] = None) -> float:
    """Largest relay-to-party distance for a relay in the middle (about 3.8 km at 0.2 dB/km)."""
    return distance_from_tau(symmetric_threshold() if threshold is None else threshold, loss_rate)
