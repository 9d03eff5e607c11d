"""
Monte Carlo Simulation Module

Sample-level simulation of the protocol as run in the experiment: Alice and Bob draw Gaussian
displacements, the modes reach the relay, and the relay emits the two r-parametrised outcomes.

Conventions:
  - recorded variables q_A, p_A, q_B, p_B are the optical displacements in vacuum units,
    each drawn from N(0, phi);
  - optional cross-talk mixes each party's recorded pair into the optical pair;
  - 'modulation' attenuation scales Bob's displacement by sqrt(tau_B) and keeps one unit of
    vacuum noise per relay quadrature, which is the statistics of a lossy beam splitter;
    'beam_splitter' attenuation draws the vacuum of every mode and beam-splitter port;
  - excess noise of variance w = epsilon tau_A tau_B / (2 (tau_A + tau_B)) is added to each
    relay quadrature, raising the large-modulation chi by epsilon when tau_A = 1;
  - the relay outputs K(r rho) (q_-, p_+) plus electronic noise and reports them divided by
    kappa_2, so that x_-r = q_- + k p_+ with k = (1 - r)/(1 + r) on an ideal detector.
"""

import math
from dataclasses import dataclass, field, asdict
from typing import Iterator, Optional, Tuple

import numpy as np
import pandas as pd

from ..errors import DomainError
from ..utils.logging_utils import get_logger

logger = get_logger('montecarlo.simulation')

RNG_ALGORITHM = 'PCG64'
SAMPLE_COLUMNS = ['q_A', 'p_A', 'q_B', 'p_B', 'x_minus', 'x_plus']
CALIBRATION_COLUMNS = ['A_q', 'A_p', 'B_q', 'B_p', 'x_minus', 'x_plus']
ATTENUATION_MODES = ('modulation', 'beam_splitter')


def kappa_pair(r: float) -> Tuple[float, float]:
    """(kappa_1, kappa_2) = ((1 - r), (1 + r)) / sqrt(2 (1 + r^2))."""
    norm = math.sqrt(2.0 * (1.0 + r * r))
    return (1.0 - r) / norm, (1.0 + r) / norm


@dataclass(frozen=True)
class RelaySettings:
    """
    Attributes:
        r (float): Current-rescale parameter of the relay, > 0 (1 is the ideal Bell relay)
        detection_noise_variance (float): Noise of each output channel in vacuum units, >= 1
        detector_imbalance (float): Conversion ratio rho of the two photodiode channels; the
            physical mixing uses r * rho
    """
    r: float = 1.0
    detection_noise_variance: float = 1.0
    detector_imbalance: float = 1.0

    def __post_init__(self):
        if self.r <= 0:
            raise DomainError(f"relay parameter r must be positive, got {self.r}")
        if self.detection_noise_variance < 1:
            raise DomainError(f"detection noise variance must be >= 1, got {self.detection_noise_variance}")
        if self.detector_imbalance <= 0:
            raise DomainError(f"detector imbalance must be positive, got {self.detector_imbalance}")

    @property
    def kappa_1(self) -> float:
        return kappa_pair(self.r)[0]

    @property
    def kappa_2(self) -> float:
        return kappa_pair(self.r)[1]

    @property
    def effective_r(self) -> float:
        return self.r * self.detector_imbalance

    @property
    def mixing(self) -> float:
        r_eff = self.effective_r
        return (1.0 - r_eff) / (1.0 + r_eff)

    @property
    def mixing_matrix(self) -> np.ndarray:
        k = self.mixing
        return np.array([[1.0, k], [k, 1.0]])

    @property
    def emitted_noise_variance(self) -> float:
        """Electronic noise of each reported outcome, (v - 1) / kappa_2(r rho)^2."""
        return (self.detection_noise_variance - 1.0) / kappa_pair(self.effective_r)[1] ** 2


@dataclass(frozen=True)
class SimConfig:
    """
    Attributes:
        phi (float): Modulation variance in vacuum units
        tau_B (float): Transmissivity applied to Bob's modulation
        tau_A (float): Transmissivity applied to Alice's modulation (1 in the experiment)
        n_rounds (int): Number of samples
        seed (int): Root seed of the substreams
        xi (float): Reconciliation efficiency
        epsilon (float): Injected excess noise
        cross_talk (tuple, optional): Pair of 2x2 matrices mapping each party's recorded
            (q, p) to the optical displacement
        batch_size (int): Samples per substream
        attenuation (str): 'modulation' or 'beam_splitter'
    """
    phi: float = 65.0
    tau_B: float = 1.0
    tau_A: float = 1.0
    n_rounds: int = 1_000_000
    seed: int = 0
    xi: float = 0.97
    epsilon: float = 0.0
    cross_talk: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, compare=False)
    batch_size: int = 100_000
    attenuation: str = 'modulation'

    def __post_init__(self):
        if self.phi <= 0:
            raise DomainError(f"phi must be positive, got {self.phi}")
        for name in ('tau_A', 'tau_B'):
            tau = getattr(self, name)
            if not 0.0 < tau <= 1.0:
                raise DomainError(f"{name} must lie in (0, 1], got {tau}")
        if self.n_rounds < 2:
            raise DomainError(f"n_rounds must be at least 2, got {self.n_rounds}")
        if self.batch_size < 2:
            raise DomainError(f"batch_size must be at least 2, got {self.batch_size}")
        if not 0.0 < self.xi <= 1.0:
            raise DomainError(f"xi must lie in (0, 1], got {self.xi}")
        if self.epsilon < 0:
            raise DomainError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.attenuation not in ATTENUATION_MODES:
            raise DomainError(f"attenuation must be one of {ATTENUATION_MODES}, got {self.attenuation!r}")

    @property
    def excess_variance(self) -> float:
        T = self.tau_A + self.tau_B
        return self.epsilon * self.tau_A * self.tau_B / (2.0 * T)

    @property
    def cross_talk_matrices(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.cross_talk is None:
            return np.eye(2), np.eye(2)
        return np.asarray(self.cross_talk[0], dtype=float), np.asarray(self.cross_talk[1], dtype=float)

    def batch_sizes(self):
        full, rest = divmod(self.n_rounds, self.batch_size)
        return [self.batch_size] * full + ([rest] if rest else [])

    def as_dict(self) -> dict:
        data = asdict(self)
        a, b = self.cross_talk_matrices
        data['cross_talk'] = None if self.cross_talk is None else [a.tolist(), b.tolist()]
        return data


def cross_talk_rotation(theta_A: float, theta_B: float) -> Tuple[np.ndarray, np.ndarray]:
    """Cross-talk that rotates each party's (q, p) pair."""
    def rot(t):
        c, s = math.cos(t), math.sin(t)
        return np.array([[c, s], [-s, c]])
    return rot(theta_A), rot(theta_B)


def relay_projection(config: SimConfig) -> np.ndarray:
    """2x4 map from recorded (q_A, p_A, q_B, p_B) to the signal part of (q_-, p_+)."""
    M_A, M_B = config.cross_talk_matrices
    sa, sb = math.sqrt(config.tau_A), math.sqrt(config.tau_B)
    P = np.zeros((2, 4))
    P[0, :2] = sa * M_A[0]
    P[0, 2:] = -sb * M_B[0]
    P[1, :2] = sa * M_A[1]
    P[1, 2:] = sb * M_B[1]
    return P / math.sqrt(2.0)


def analytic_global_cm(config: SimConfig, relay: RelaySettings) -> np.ndarray:
    """
    Exact 6x6 covariance matrix of (q_A, p_A, q_B, p_B, x_minus, x_plus) under the model.
    """
    P = relay_projection(config)
    L = relay.mixing_matrix
    phi, w = config.phi, config.excess_variance

    cm = np.zeros((6, 6))
    cm[:4, :4] = phi * np.eye(4)
    cm[:4, 4:] = phi * P.T @ L.T
    cm[4:, :4] = cm[:4, 4:].T
    cm[4:, 4:] = phi * L @ P @ P.T @ L.T + (1.0 + w) * L @ L.T + relay.emitted_noise_variance * np.eye(2)
    return cm


def _draw_batch(config: SimConfig, relay: RelaySettings, rng: np.random.Generator, size: int) -> np.ndarray:
    # Draw order does not depend on the relay settings, so equal seeds give equal draws for every r.
    z = math.sqrt(config.phi) * rng.standard_normal((size, 4))
    if config.attenuation == 'beam_splitter':
        vacuum = rng.standard_normal((size, 8))
    else:
        vacuum = rng.standard_normal((size, 2))
    excess = rng.standard_normal((size, 2))
    electronic = rng.standard_normal((size, 2))

    M_A, M_B = config.cross_talk_matrices
    optical_A = z[:, :2] @ M_A.T
    optical_B = z[:, 2:] @ M_B.T

    if config.attenuation == 'beam_splitter':
        ta, tb = config.tau_A, config.tau_B
        out_A = math.sqrt(ta) * (optical_A + vacuum[:, 0:2]) + math.sqrt(1.0 - ta) * vacuum[:, 2:4]
        out_B = math.sqrt(tb) * (optical_B + vacuum[:, 4:6]) + math.sqrt(1.0 - tb) * vacuum[:, 6:8]
        q_minus = (out_A[:, 0] - out_B[:, 0]) / math.sqrt(2.0)
        p_plus = (out_A[:, 1] + out_B[:, 1]) / math.sqrt(2.0)
    else:
        signal = z @ relay_projection(config).T
        q_minus = signal[:, 0] + vacuum[:, 0]
        p_plus = signal[:, 1] + vacuum[:, 1]

    relay_quadratures = np.column_stack([q_minus, p_plus]) + math.sqrt(config.excess_variance) * excess
    outcomes = relay_quadratures @ relay.mixing_matrix.T + math.sqrt(relay.emitted_noise_variance) * electronic
    return np.column_stack([z, outcomes])


def substreams(config: SimConfig):
    """One independent generator per batch, spawned from the root seed."""
    children = np.random.SeedSequence(config.seed).spawn(len(config.batch_sizes()))
    return [np.random.default_rng(child) for child in children]


def simulate(config: SimConfig, relay: RelaySettings) -> Iterator[pd.DataFrame]:
    """
    Stream the protocol's sample records.

    Yields:
        pd.DataFrame: One batch with columns q_A, p_A, q_B, p_B, x_minus, x_plus
    """
    sizes = config.batch_sizes()
    logger.info(f"Simulating {config.n_rounds} rounds in {len(sizes)} batches "
                f"(phi={config.phi}, tau_B={config.tau_B}, r={relay.r}, seed={config.seed})")
    for rng, size in zip(substreams(config), sizes):
        yield pd.DataFrame(_draw_batch(config, relay, rng, size), columns=SAMPLE_COLUMNS)


def dump_samples(batches, path: str) -> int:
    """
    Write sample batches to one CSV file.

    Returns:
        int: Number of rows written
    """
    rows = 0
    for i, batch in enumerate(batches):
        batch.to_csv(path, mode='w' if i == 0 else 'a', header=(i == 0), index=False, float_format='%.12g')
        rows += len(batch)
    logger.info(f"Wrote {rows} samples to {path}")
    return rows


@dataclass(frozen=True)
class GainCalibration:
    """
    Electro-optical gains mapping applied displacements (A_q, B_q, A_p, B_p) to optical ones.

    Attributes:
        gains (tuple): (t1, t2, t3, t4), NaN when unidentifiable
        std_errors (tuple): Standard errors of the gains
        residual_variance (tuple): Residual noise variance of (x_minus, x_plus)
        identifiable (bool): False when the design matrix is rank deficient
    """
    gains: Tuple[float, float, float, float]
    std_errors: Tuple[float, float, float, float]
    residual_variance: Tuple[float, float]
    identifiable: bool = True

    @property
    def t1(self) -> float:
        return self.gains[0]

    @property
    def t2(self) -> float:
        return self.gains[1]

    @property
    def t3(self) -> float:
        return self.gains[2]

    @property
    def t4(self) -> float:
        return self.gains[3]


def simulate_calibration(gains: Tuple[float, float, float, float], phi: float = 65.0, n: int = 100_000,
                         seed: int = 0, noise_variance: float = 1.0) -> pd.DataFrame:
    """
    Calibration run with an ideal relay: x_- = (t1 A_q - t2 B_q)/sqrt(2) + noise and
    x_+ = (t3 A_p + t4 B_p)/sqrt(2) + noise.

    Returns:
        pd.DataFrame: Columns A_q, A_p, B_q, B_p, x_minus, x_plus
    """
    t1, t2, t3, t4 = gains
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    applied = math.sqrt(phi) * rng.standard_normal((n, 4)) if phi > 0 else np.zeros((n, 4))
    noise = math.sqrt(noise_variance) * rng.standard_normal((n, 2))
    a_q, a_p, b_q, b_p = applied.T
    x_minus = (t1 * a_q - t2 * b_q) / math.sqrt(2.0) + noise[:, 0]
    x_plus = (t3 * a_p + t4 * b_p) / math.sqrt(2.0) + noise[:, 1]
    return pd.DataFrame(np.column_stack([applied, x_minus, x_plus]), columns=CALIBRATION_COLUMNS)
