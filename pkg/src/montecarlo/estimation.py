"""
Estimation Module

Post-processing of simulated (or recorded) protocol data into a key rate:

  1. accumulate first and second moments of (q_A, p_A, q_B, p_B, x_minus, x_plus);
  2. estimate Bob's transmissivity from the regression of the relay outcomes on the displacements;
  3. condition the displacements on the relay outcomes (Gaussian elimination);
  4. bring the conditional CM to normal form with local symplectic transformations;
  5. convert the classical CM into the quantum CM V_ab|gamma = eta^2 V - I;
  6. evaluate R = xi I_AB - I_E on the reconstructed state.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import numpy.linalg as LA
import pandas as pd
from scipy.optimize import minimize_scalar

from ..errors import DataQualityError, DomainError
from ..gaussian.core import symplectic_eigenvalues
from ..rates.engine import RateResult, rate_from_cm
from ..utils.logging_utils import get_logger
from .simulation import (RNG_ALGORITHM, SAMPLE_COLUMNS, GainCalibration, RelaySettings, SimConfig,
                         analytic_global_cm, dump_samples, simulate)

logger = get_logger('montecarlo.estimation')

ESTIMATION_TOL = 2e-2
R_BOUNDS = (0.2, 2.0)
R_TIE_TOL = 1e-6
DEFAULT_CHECKPOINTS = (1_000, 10_000, 100_000, 1_000_000)


class MomentAccumulator:
    """
    Mergeable running mean and comoment matrix (Chan et al. pairwise update).
    """

    def __init__(self, dim: int = 6):
        self.n = 0
        self.mean = np.zeros(dim)
        self.comoment = np.zeros((dim, dim))

    def update(self, data) -> 'MomentAccumulator':
        x = np.asarray(data, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.mean.shape[0] or x.shape[0] == 0:
            raise DomainError(f"expected a non-empty (n, {self.mean.shape[0]}) array, got {x.shape}")
        other = MomentAccumulator(self.mean.shape[0])
        other.n = x.shape[0]
        other.mean = x.mean(axis=0)
        centred = x - other.mean
        other.comoment = centred.T @ centred
        return self.merge(other)

    def merge(self, other: 'MomentAccumulator') -> 'MomentAccumulator':
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.comoment = other.n, other.mean.copy(), other.comoment.copy()
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        self.comoment = self.comoment + other.comoment + np.outer(delta, delta) * (self.n * other.n / n)
        self.mean = self.mean + delta * (other.n / n)
        self.n = n
        return self

    @property
    def covariance(self) -> np.ndarray:
        if self.n < 2:
            raise DataQualityError(f"need at least 2 samples for a covariance, have {self.n}")
        return self.comoment / (self.n - 1)


def estimate_moments(samples) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sample means and unbiased 6x6 covariance of the protocol variables.

    Args:
        samples: DataFrame with the sample columns, a 2-D array or a MomentAccumulator
    """
    if isinstance(samples, MomentAccumulator):
        return samples.mean.copy(), samples.covariance
    if isinstance(samples, pd.DataFrame):
        samples = samples[SAMPLE_COLUMNS].to_numpy()
    acc = MomentAccumulator().update(samples)
    return acc.mean.copy(), acc.covariance


def _split(global_cm) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    V = np.asarray(global_cm, dtype=float)
    if V.shape != (6, 6):
        raise DomainError(f"expected a 6x6 classical CM, got shape {V.shape}")
    return V[:4, :4], V[:4, 4:], V[4:, 4:]


def estimate_transmissivity(global_cm, n: int, tau_A: float = 1.0) -> Tuple[float, float]:
    """
    Bob's transmissivity from the regression of the relay outcomes on the displacements.

    The coefficients B = V_AB^-1 C scale as sqrt(tau) per party, so
    tau_B = tau_A |B_Bob|^2 / |B_Alice|^2 (Frobenius norms). The standard error comes from the
    delta method with coefficient covariance Sigma_res (x) V_AB^-1 / (n - 1).

    Returns:
        Tuple[float, float]: (tau_B_hat, standard error)
    """
    V_AB, C, R = _split(global_cm)
    V_inv = LA.inv(V_AB)
    coeffs = V_inv @ C
    alice = float(np.sum(coeffs[:2] ** 2))
    bob = float(np.sum(coeffs[2:] ** 2))
    if alice <= 0:
        raise DataQualityError("relay outcomes do not depend on Alice's displacements")
    tau_hat = tau_A * bob / alice

    grad = np.zeros_like(coeffs)
    grad[:2] = -2.0 * tau_A * bob * coeffs[:2] / alice ** 2
    grad[2:] = 2.0 * tau_A * coeffs[2:] / alice
    residual = R - C.T @ V_inv @ C
    cov = np.kron(residual, V_inv) / max(n - 1, 1)
    g = grad.flatten(order='F')
    return tau_hat, float(math.sqrt(max(g @ cov @ g, 0.0)))


def condition_classical(global_cm) -> np.ndarray:
    """
    Gaussian elimination of the relay outcomes: V_AB - C R^-1 C^T.

    Raises:
        DataQualityError: If the relay block R is singular
    """
    V_AB, C, R = _split(global_cm)
    if LA.cond(R) > 1e12:
        logger.error(f"singular relay block, cond = {LA.cond(R):.3e}")
        raise DataQualityError("relay outcome covariance is singular")
    return V_AB - C @ LA.solve(R, C.T)


@dataclass(frozen=True)
class NormalForm:
    """
    Two-mode normal form [[a I, c Z], [c Z, b I]] and the local transforms that produce it.

    Attributes:
        S_A, S_B (np.ndarray): 2x2 symplectic maps with S V S^T in normal form
        det_ratio (float): det of the normal form over det of the input
    """
    a: float
    b: float
    c: float
    S_A: np.ndarray
    S_B: np.ndarray
    det_ratio: float

    @property
    def cm(self) -> np.ndarray:
        Z = np.diag([1.0, -1.0])
        return np.block([[self.a * np.eye(2), self.c * Z], [self.c * Z, self.b * np.eye(2)]])


def _standardising_map(block: np.ndarray) -> np.ndarray:
    # det(M)^(1/4) M^(-1/2): symmetric, unit determinant, maps M to sqrt(det M) I
    w, U = LA.eigh(0.5 * (block + block.T))
    if np.any(w <= 0):
        raise DataQualityError(f"local block is not positive definite (eigenvalues {w})")
    return (np.prod(w) ** 0.25) * (U @ np.diag(w ** -0.5) @ U.T)


def symmetrize_to_normal_form(conditional_cm, off_diagonal_tol: float = 1e-15) -> NormalForm:
    """
    Local symplectic transformations bringing a two-party CM to normal form.

    Each local block is rescaled to a multiple of the identity, then proper rotations
    diagonalise the cross block to diag(s1, s2) with s1 > 0 > s2. The result uses
    a = sqrt(det A), b = sqrt(det B) and c = sqrt(-det C), which keeps det A, det B and
    det C (hence det A + det B + 2 det C) invariant.

    Raises:
        DataQualityError: If det C >= 0, which leaves c complex
    """
    V = np.asarray(conditional_cm, dtype=float)
    A, B, C = V[:2, :2], V[2:, 2:], V[:2, 2:]
    det_C = LA.det(C)
    if det_C >= 0:
        logger.error(f"det C = {det_C:.3e} >= 0; no normal form with real c")
        raise DataQualityError(f"inconsistent invariants: det C = {det_C:.3e} must be negative")

    S_A = _standardising_map(A)
    S_B = _standardising_map(B)
    C_std = S_A @ C @ S_B.T

    scale = max(abs(C_std).max(), 1.0)
    if abs(C_std[0, 1]) <= off_diagonal_tol * scale and abs(C_std[1, 0]) <= off_diagonal_tol * scale:
        R_A = R_B = np.eye(2)
    else:
        U, s, Vt = LA.svd(C_std)
        s = s.copy()
        if LA.det(U) < 0:
            U[:, 1] *= -1.0
            s[1] *= -1.0
        if LA.det(Vt) < 0:
            Vt[1, :] *= -1.0
            s[1] *= -1.0
        R_A, R_B = U.T, Vt

    a = math.sqrt(LA.det(A))
    b = math.sqrt(LA.det(B))
    c = math.sqrt(-det_C)
    form = NormalForm(a, b, c, R_A @ S_A, R_B @ S_B, 1.0)
    det_ratio = float(LA.det(form.cm) / LA.det(V))
    return replace(form, det_ratio=det_ratio)


def eta_factor(mu: float) -> float:
    """eta = (mu + 1) / sqrt(mu^2 - 1)."""
    if mu <= 1:
        raise DomainError(f"mu must exceed 1, got {mu}")
    return (mu + 1.0) / math.sqrt(mu * mu - 1.0)


def classical_to_quantum_cm(normal_form, eta: float) -> np.ndarray:
    """V_ab|gamma = eta^2 V - I for a classical normal-form CM (NormalForm or 4x4 array)."""
    V = normal_form.cm if isinstance(normal_form, NormalForm) else np.asarray(normal_form, dtype=float)
    return eta * eta * V - np.eye(4)


def empirical_rate(quantum_cm, xi: float, mu: float, tau_A: Optional[float] = None,
                   tau_B: Optional[float] = None, tol: float = ESTIMATION_TOL) -> RateResult:
    """
    Rate of a reconstructed post-relay state.

    Raises:
        DataQualityError: If a symplectic eigenvalue is below 1 - tol
    """
    V = np.asarray(quantum_cm, dtype=float)
    nu_min = float(symplectic_eigenvalues(V).min())
    if nu_min < 1.0 - tol:
        logger.error(f"reconstructed CM is unphysical: least symplectic eigenvalue {nu_min:.6f}")
        raise DataQualityError(f"reconstructed CM is unphysical (nu = {nu_min:.6f} < 1 - {tol})")
    return rate_from_cm(V, mu, xi, tau_A, tau_B, tol)


@dataclass(frozen=True)
class Reconstruction:
    n: int
    tau_B_hat: float
    tau_B_se: float
    phi_hat: float
    mu: float
    eta: float
    conditional_cm: np.ndarray
    normal_form: NormalForm
    quantum_cm: np.ndarray
    rate: RateResult


def reconstruct(global_cm, n: int, xi: float = 0.97, tau_A: float = 1.0,
                tol: float = ESTIMATION_TOL) -> Reconstruction:
    """Run the estimation chain on a 6x6 classical CM."""
    V = np.asarray(global_cm, dtype=float)
    tau_hat, tau_se = estimate_transmissivity(V, n, tau_A)
    phi_hat = 0.5 * (V[0, 0] + V[1, 1])
    mu = phi_hat + 1.0
    eta = eta_factor(mu)

    conditional = condition_classical(V)
    form = symmetrize_to_normal_form(conditional)
    quantum = classical_to_quantum_cm(form, eta)
    tau_B = min(max(tau_hat, 1e-12), 1.0)
    rate = empirical_rate(quantum, xi, mu, tau_A, tau_B, tol)
    return Reconstruction(n, tau_hat, tau_se, phi_hat, mu, eta, conditional, form, quantum, rate)


@dataclass
class EstimationReport:
    """
    Everything estimated from one simulation run.

    Attributes:
        convergence (List[Dict]): Rows with n, tau_hat, det_ratio, rate at each checkpoint
        rate_se (float): Batch-means Monte Carlo standard error of the rate
    """
    config: SimConfig
    relay: RelaySettings
    rng: str
    means: np.ndarray
    global_cm_hat: np.ndarray
    reconstruction: Reconstruction
    rate_se: float
    batch_rates: List[float]
    convergence: List[Dict[str, float]] = field(default_factory=list)

    @property
    def tau_B_hat(self) -> float:
        return self.reconstruction.tau_B_hat

    @property
    def rate(self) -> RateResult:
        return self.reconstruction.rate

    @property
    def epsilon_hat(self) -> float:
        return self.reconstruction.rate.epsilon

    def as_dict(self) -> dict:
        rec = self.reconstruction
        form = rec.normal_form
        return {
            'simulation': self.config.as_dict(),
            'relay': {'r': self.relay.r, 'detection_noise_variance': self.relay.detection_noise_variance,
                      'detector_imbalance': self.relay.detector_imbalance,
                      'kappa_1': self.relay.kappa_1, 'kappa_2': self.relay.kappa_2},
            'rng': self.rng,
            'seed': self.config.seed,
            'n': rec.n,
            'means': self.means.tolist(),
            'global_cm': self.global_cm_hat.tolist(),
            'tau_B_hat': rec.tau_B_hat,
            'tau_B_se': rec.tau_B_se,
            'phi_hat': rec.phi_hat,
            'mu': rec.mu,
            'eta': rec.eta,
            'conditional_cm': rec.conditional_cm.tolist(),
            'normal_form': {'a': form.a, 'b': form.b, 'c': form.c, 'det_ratio': form.det_ratio},
            'quantum_cm': rec.quantum_cm.tolist(),
            'rate': rec.rate.as_dict(),
            'rate_se': self.rate_se,
            'batch_rates': list(self.batch_rates),
            'convergence': list(self.convergence),
        }


def _safe_rate(cm: np.ndarray, n: int, config: SimConfig, tol: float) -> Optional[Reconstruction]:
    try:
        return reconstruct(cm, n, config.xi, config.tau_A, tol)
    except (DataQualityError, DomainError) as e:
        logger.debug(f"estimation failed at n = {n}: {e}")
        return None


def _convergence_row(n: int, rec: Optional[Reconstruction]) -> Dict[str, float]:
    if rec is None:
        return {'n': n, 'tau_hat': float('nan'), 'det_ratio': float('nan'), 'rate': float('nan')}
    return {'n': n, 'tau_hat': rec.tau_B_hat, 'det_ratio': rec.normal_form.det_ratio, 'rate': rec.rate.rate}


def run_estimation(config: SimConfig, relay: RelaySettings = RelaySettings(),
                   checkpoints: Optional[Iterable[int]] = DEFAULT_CHECKPOINTS, dump_path: Optional[str] = None,
                   tol: float = ESTIMATION_TOL) -> EstimationReport:
    """
    Simulate, accumulate and estimate in one pass.

    Args:
        config (SimConfig): Simulation configuration
        relay (RelaySettings): Relay settings
        checkpoints (Iterable[int], optional): Sample counts at which the convergence series is
            evaluated; values above n_rounds are dropped
        dump_path (str, optional): CSV file receiving every sample

    Raises:
        DataQualityError: If the full-sample reconstruction is unphysical
    """
    marks = sorted({int(c) for c in (checkpoints or ()) if 2 <= int(c) <= config.n_rounds})
    total = MomentAccumulator()
    batch_rates: List[float] = []
    convergence: List[Dict[str, float]] = []
    dumped = []

    for batch in simulate(config, relay):
        data = batch[SAMPLE_COLUMNS].to_numpy()
        if dump_path:
            dumped.append(batch)

        start = 0
        while marks and total.n + (len(data) - start) >= marks[0]:
            stop = start + marks[0] - total.n
            total.update(data[start:stop])
            start = stop
            convergence.append(_convergence_row(total.n, _safe_rate(total.covariance, total.n, config, tol)))
            marks.pop(0)
        if start < len(data):
            total.update(data[start:])

        batch_acc = MomentAccumulator().update(data)
        rec = _safe_rate(batch_acc.covariance, batch_acc.n, config, tol)
        batch_rates.append(rec.rate.rate if rec is not None else float('nan'))

    if dump_path:
        dump_samples(dumped, dump_path)

    final = reconstruct(total.covariance, total.n, config.xi, config.tau_A, tol)
    valid = np.array([r for r in batch_rates if np.isfinite(r)])
    rate_se = float(valid.std(ddof=1) / math.sqrt(len(valid))) if len(valid) > 1 else float('nan')

    logger.info(f"Estimated rate {final.rate.rate:.6g} +- {rate_se:.2g} bits/use, "
                f"tau_B = {final.tau_B_hat:.6g} +- {final.tau_B_se:.2g}")
    return EstimationReport(config=config, relay=relay, rng=RNG_ALGORITHM, means=total.mean.copy(),
                            global_cm_hat=total.covariance, reconstruction=final, rate_se=rate_se,
                            batch_rates=batch_rates, convergence=convergence)


def convergence_study(config: SimConfig, relay: RelaySettings = RelaySettings(),
                      checkpoints: Optional[Iterable[int]] = None) -> List[Dict[str, float]]:
    """tau_hat, det ratio and rate at logarithmically spaced sample counts (default 10^3 ... n_rounds)."""
    if checkpoints is None:
        top = int(math.floor(math.log10(config.n_rounds)))
        checkpoints = [10 ** k for k in range(3, top + 1)]
        if config.n_rounds not in checkpoints:
            checkpoints.append(config.n_rounds)
    return run_estimation(config, relay, checkpoints).convergence


def model_rate(config: SimConfig, relay: RelaySettings, tol: float = ESTIMATION_TOL) -> float:
    """Rate of the noiseless analytic moments."""
    return reconstruct(analytic_global_cm(config, relay), config.n_rounds, config.xi, config.tau_A, tol).rate.rate


def optimize_r(config: SimConfig, relay: RelaySettings = RelaySettings(), use_model: bool = True,
               bounds: Tuple[float, float] = R_BOUNDS, tie_tol: float = R_TIE_TOL) -> Tuple[float, float]:
    """
    Relay parameter r maximising the estimated rate.

    With use_model the analytic moments are used; otherwise every evaluation re-simulates with
    the same seed. r = 1 is kept unless another value improves the rate by more than tie_tol.

    Returns:
        Tuple[float, float]: (r_opt, rate at r_opt)
    """
    def rate_at(r: float) -> float:
        settings = replace(relay, r=r)
        try:
            if use_model:
                return model_rate(config, settings)
            return run_estimation(config, settings, checkpoints=None).rate.rate
        except (DataQualityError, DomainError):
            return -np.inf

    baseline = rate_at(1.0)
    result = minimize_scalar(lambda r: -rate_at(r), bounds=bounds, method='bounded', options={'xatol': 1e-4})
    best_r, best_rate = float(result.x), float(-result.fun)
    if best_rate - baseline > tie_tol:
        logger.info(f"Optimal relay parameter r = {best_r:.4f} (rate {best_rate:.6g} vs {baseline:.6g} at r = 1)")
        return best_r, best_rate
    return 1.0, baseline


def calibrate_gains(electronic_records, relay_outcomes=None) -> GainCalibration:
    """
    Least-squares fit of the electro-optical gains.

    Minimises <[x_- - (t1 A_q - t2 B_q)/sqrt(2)]^2> and <[x_+ - (t3 A_p + t4 B_p)/sqrt(2)]^2>.

    Args:
        electronic_records: DataFrame with columns A_q, A_p, B_q, B_p (and x_minus, x_plus when
            relay_outcomes is None)
        relay_outcomes: Optional (n, 2) array of (x_minus, x_plus)
    """
    records = pd.DataFrame(electronic_records)
    if relay_outcomes is None:
        outcomes = records[['x_minus', 'x_plus']].to_numpy(dtype=float)
    else:
        outcomes = np.asarray(relay_outcomes, dtype=float)

    design_minus = np.column_stack([records['A_q'], -records['B_q']]) / math.sqrt(2.0)
    design_plus = np.column_stack([records['A_p'], records['B_p']]) / math.sqrt(2.0)

    gains, errors, residuals = [], [], []
    identifiable = True
    for design, y in ((design_minus, outcomes[:, 0]), (design_plus, outcomes[:, 1])):
        coef, _, rank, _ = LA.lstsq(design, y, rcond=None)
        if rank < 2:
            identifiable = False
            gains += [float('nan')] * 2
            errors += [float('nan')] * 2
            residuals.append(float(np.var(y, ddof=1)))
            continue
        resid = y - design @ coef
        dof = max(len(y) - 2, 1)
        sigma2 = float(resid @ resid / dof)
        cov = sigma2 * LA.inv(design.T @ design)
        gains += coef.tolist()
        errors += np.sqrt(np.diag(cov)).tolist()
        residuals.append(sigma2)

    if not identifiable:
        logger.warning("calibration data carry no signal; gains are unidentifiable")
    return GainCalibration(tuple(gains), tuple(errors), tuple(residuals), identifiable)


def finite_size_summary(report: EstimationReport) -> pd.DataFrame:
    return pd.DataFrame(report.convergence, columns=['n', 'tau_hat', 'det_ratio', 'rate'])
