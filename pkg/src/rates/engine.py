"""
Rate Engine Module

Secret-key rates of the continuous-variable measurement-device-independent protocol under
the two-mode coherent Gaussian attack.

Two evaluation paths are provided:
  - finite modulation: the post-relay covariance matrix V_ab|gamma is built explicitly and
    the mutual information and Holevo bound are computed from its symplectic spectra;
  - large modulation: closed-form expressions in which the log2(mu) terms of I_AB and I_E
    cancel exactly. Divergent entropies are carried as (constant, log2 mu coefficient).

All rates are in bits per relay use and may be negative.
"""

from dataclasses import dataclass, asdict
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import numpy.linalg as LA
import pandas as pd
from scipy.linalg import block_diag

from ..attack.model import (AttackClass, AttackParams, correlation_axis, negative_epr_attack,
                            phi_bound, positivity_violation, _classify_arrays, validate)
from ..errors import DomainError, InfeasibleNoiseError, InternalConsistencyError, UnphysicalAttackError
from ..gaussian.core import (PHYSICAL_TOL, apply_symplectic, attack_reservoir_cm, beam_splitter_symplectic,
                             condition_on_bell, condition_on_heterodyne, epr_cm, h_entropy, h_entropy_vec,
                             partial_trace, permute_modes, symplectic_eigenvalues, von_neumann_entropy)
from ..utils.logging_utils import get_logger

logger = get_logger('rates.engine')

SYMMETRIC_TOL = 1e-6
DEFAULT_PHI = 65.0
DEFAULT_MU = DEFAULT_PHI + 1.0
LOG2E = np.log2(np.e)


@dataclass(frozen=True)
class ProtocolParams:
    """Modulation variance phi, total variance mu = phi + 1 and the factor eta."""
    phi: float
    mu: float
    eta: float


def protocol_params(phi: float = DEFAULT_PHI) -> ProtocolParams:
    """
    Args:
        phi (float): Gaussian modulation variance in vacuum units, > 0

    Returns:
        ProtocolParams: mu = phi + 1 and eta = (mu + 1) / sqrt(mu^2 - 1)
    """
    if phi <= 0:
        raise DomainError(f"modulation variance must be positive, got {phi}")
    mu = phi + 1.0
    return ProtocolParams(phi=phi, mu=mu, eta=(mu + 1.0) / np.sqrt(mu * mu - 1.0))


@dataclass(frozen=True)
class DerivedAttackQuantities:
    kappa: float
    u: float
    lam: float
    lam_prime: float
    theta: Optional[float] = None
    theta_prime: Optional[float] = None


@dataclass(frozen=True)
class NoiseBudget:
    chi: float
    chi_loss: float
    epsilon: float


@dataclass(frozen=True)
class RateResult:
    """
    Attributes:
        i_ab (float): Mutual information between Alice and Bob
        i_e (float): Holevo bound on Eve's information
        rate (float): xi * i_ab - i_e
        xi (float): Reconciliation efficiency
        chi (float): Equivalent noise
        epsilon (float): Excess noise chi - chi_loss (NaN when the transmissivities are unknown)
    """
    i_ab: float
    i_e: float
    rate: float
    xi: float
    chi: float
    epsilon: float

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}


class SpectrumTerm(NamedTuple):
    """Symplectic eigenvalue approximated as coefficient * mu ** mu_power."""
    coefficient: float
    mu_power: float


def _check_xi(xi: float):
    if not 0.0 < xi <= 1.0:
        raise DomainError(f"reconciliation efficiency must lie in (0, 1], got {xi}")


def _check_tau(tau_A: float, tau_B: float):
    for name, tau in (('tau_A', tau_A), ('tau_B', tau_B)):
        if not 0.0 < tau <= 1.0:
            raise DomainError(f"{name} must lie in (0, 1], got {tau}")


def require_physical(params: AttackParams):
    """
    Raises:
        UnphysicalAttackError: Naming the violated bona-fide condition
    """
    violation = positivity_violation(params)
    if violation:
        logger.error(f"unphysical attack {params.as_dict()}: violates {violation}")
        raise UnphysicalAttackError(f"unphysical attack: violates {violation}", constraint=violation)


def derived_quantities(params: AttackParams, mu: Optional[float] = None) -> DerivedAttackQuantities:
    """
    kappa, u, lambda, lambda' (and theta, theta' when mu is given).

    Raises:
        InternalConsistencyError: If lambda or lambda' is negative
    """
    tA, tB = params.tau_A, params.tau_B
    kappa = (1.0 - tA) * params.omega_A + (1.0 - tB) * params.omega_B
    u = 2.0 * np.sqrt((1.0 - tA) * (1.0 - tB))
    lam = kappa - u * params.g
    lam_p = kappa + u * params.g_prime
    if lam < -PHYSICAL_TOL or lam_p < -PHYSICAL_TOL:
        logger.error(f"negative lambda for {params.as_dict()}: ({lam}, {lam_p})")
        raise InternalConsistencyError(f"lambda = {lam}, lambda' = {lam_p} must be non-negative")
    lam, lam_p = max(lam, 0.0), max(lam_p, 0.0)

    theta = theta_p = None
    if mu is not None:
        theta = (tA + tB) * mu + lam
        theta_p = (tA + tB) * mu + lam_p
    return DerivedAttackQuantities(kappa, u, lam, lam_p, theta, theta_p)


def chi_loss(tau_A: float, tau_B: float) -> float:
    """Equivalent noise of a pure-loss attack: 2 (tau_A + tau_B) / (tau_A tau_B)."""
    _check_tau(tau_A, tau_B)
    return 2.0 * (tau_A + tau_B) / (tau_A * tau_B)


def equivalent_noise(params: AttackParams) -> float:
    """Large-modulation equivalent noise chi = T / (tau_A tau_B) sqrt((T + lambda)(T + lambda'))."""
    d = derived_quantities(params)
    T = params.tau_A + params.tau_B
    return T / (params.tau_A * params.tau_B) * np.sqrt((T + d.lam) * (T + d.lam_prime))


def noise_budget(params: AttackParams) -> NoiseBudget:
    chi = equivalent_noise(params)
    loss = chi_loss(params.tau_A, params.tau_B)
    return NoiseBudget(chi=chi, chi_loss=loss, epsilon=chi - loss)


def post_relay_cm_closed(params: AttackParams, mu: float) -> np.ndarray:
    """
    Covariance matrix of Alice's and Bob's EPR modes after the relay's Bell detection.

    Returns:
        np.ndarray: mu I - (mu^2 - 1) M, where M has q entries tau_A/theta, -sqrt(tau_A tau_B)/theta,
        tau_B/theta and p entries tau_A/theta', +sqrt(tau_A tau_B)/theta', tau_B/theta'

    Raises:
        UnphysicalAttackError: If the attack violates a bona-fide condition
        DomainError: If mu <= 1
    """
    if mu <= 1:
        raise DomainError(f"mu must exceed 1, got {mu}")
    require_physical(params)
    d = derived_quantities(params, mu)
    tA, tB = params.tau_A, params.tau_B
    s = np.sqrt(tA * tB)
    th, thp = d.theta, d.theta_prime

    M = np.array([
        [tA / th, 0.0, -s / th, 0.0],
        [0.0, tA / thp, 0.0, s / thp],
        [-s / th, 0.0, tB / th, 0.0],
        [0.0, s / thp, 0.0, tB / thp],
    ])
    return mu * np.eye(4) - (mu * mu - 1.0) * M


def post_relay_cm_pipeline(params: AttackParams, mu: float) -> np.ndarray:
    """
    Same matrix built mode by mode from the twelve-quadrature global state.

    Modes a, A (Alice's EPR), b, B (Bob's EPR) and E1, E2 (reservoir) are permuted to
    (a, b, A, E1, E2, B); the links act as S(tau_A) on (A, E1) and S(tau_B)^T on (E2, B);
    E1', E2' are traced out and A', B' are Bell-detected.
    """
    if mu <= 1:
        raise DomainError(f"mu must exceed 1, got {mu}")
    require_physical(params)

    total = block_diag(epr_cm(mu), epr_cm(mu), attack_reservoir_cm(params))
    ordered = permute_modes(total, [0, 2, 1, 4, 5, 3])

    S = (beam_splitter_symplectic(params.tau_A, 2, 3, 6)
         @ beam_splitter_symplectic(params.tau_B, 4, 5, 6, transpose=True))
    evolved = apply_symplectic(ordered, S)

    return condition_on_bell(partial_trace(evolved, [0, 1, 2, 5]))


def conditional_cms(cm_ab) -> Tuple[np.ndarray, np.ndarray]:
    """Bob's conditional CMs V_b|gamma and V_b|gamma,alpha (Alice heterodyned)."""
    V = np.asarray(cm_ab, dtype=float)
    return V[2:, 2:], condition_on_heterodyne(V)


def rate_from_cm(cm_ab, mu: float, xi: float = 1.0, tau_A: Optional[float] = None,
                 tau_B: Optional[float] = None, tol: float = PHYSICAL_TOL) -> RateResult:
    """
    Finite-modulation rate from a post-relay covariance matrix.

    I_AB = log2(Sigma) / 2 with Sigma = det(V_b|gamma + I) / det(V_b|gamma,alpha + I),
    chi = mu Sigma^(-1/2) and I_E = S(V_ab|gamma) - S(V_b|gamma,alpha).

    Args:
        cm_ab: 4x4 covariance matrix V_ab|gamma
        mu (float): Total variance of the EPR states
        xi (float): Reconciliation efficiency
        tau_A, tau_B (float, optional): Transmissivities, used to report epsilon
        tol (float): Clamp tolerance for symplectic eigenvalues slightly below 1
    """
    _check_xi(xi)
    V_b, V_b_alpha = conditional_cms(cm_ab)
    sigma = LA.det(V_b + np.eye(2)) / LA.det(V_b_alpha + np.eye(2))
    i_ab = 0.5 * np.log2(sigma)
    chi = mu / np.sqrt(sigma)
    i_e = von_neumann_entropy(cm_ab, tol) - von_neumann_entropy(V_b_alpha, tol)

    epsilon = np.nan
    if tau_A is not None and tau_B is not None:
        epsilon = chi - chi_loss(tau_A, tau_B)
    return RateResult(i_ab=float(i_ab), i_e=float(i_e), rate=float(xi * i_ab - i_e), xi=xi,
                      chi=float(chi), epsilon=float(epsilon))


def asymptotic_spectrum(params: AttackParams, symmetric_tol: float = SYMMETRIC_TOL) -> List[SpectrumTerm]:
    """
    Large-mu symplectic spectrum of V_ab|gamma.

    tau_A != tau_B: {|dtau| mu / T, sqrt(lambda lambda') / |dtau|}
    tau_A == tau_B: {sqrt(lambda mu / (2 tau_B)), sqrt(lambda' mu / (2 tau_B))}
    """
    d = derived_quantities(params)
    dtau = abs(params.tau_A - params.tau_B)
    T = params.tau_A + params.tau_B
    if dtau < symmetric_tol:
        return [SpectrumTerm(np.sqrt(d.lam / (2.0 * params.tau_B)), 0.5),
                SpectrumTerm(np.sqrt(d.lam_prime / (2.0 * params.tau_B)), 0.5)]
    return [SpectrumTerm(dtau / T, 1.0), SpectrumTerm(np.sqrt(d.lam * d.lam_prime) / dtau, 0.0)]


def asymptotic_entropy(terms: List[SpectrumTerm]) -> Tuple[float, float]:
    """
    Entropy of a large-mu spectrum as (constant, coefficient of log2 mu).

    Divergent terms use h(x) ~ log2(e x / 2); a divergent term with zero coefficient belongs
    to a pure mode and contributes nothing.
    """
    constant, slope = 0.0, 0.0
    for term in terms:
        if term.mu_power > 0:
            if term.coefficient > 0:
                constant += np.log2(np.e * term.coefficient / 2.0)
                slope += term.mu_power
        else:
            constant += h_entropy(term.coefficient)
    return constant, slope


def conditional_eigenvalue(params: AttackParams) -> float:
    """nu = sqrt((tau_A + lambda)(tau_A + lambda')) / tau_B, spectrum of V_b|gamma,alpha at large mu."""
    d = derived_quantities(params)
    return float(np.sqrt((params.tau_A + d.lam) * (params.tau_A + d.lam_prime)) / params.tau_B)


def mutual_information(params: AttackParams, mu: float = DEFAULT_MU, asymptotic: bool = False) -> Tuple[float, float]:
    """
    Mutual information I_AB and equivalent noise chi.

    Args:
        params (AttackParams): Attack parameters
        mu (float): Total variance
        asymptotic (bool): Use log2(mu / chi) with the large-mu chi instead of the finite CM

    Returns:
        Tuple[float, float]: (i_ab, chi)
    """
    require_physical(params)
    if asymptotic:
        chi = equivalent_noise(params)
        return float(np.log2(mu / chi)), float(chi)
    result = rate_from_cm(post_relay_cm_closed(params, mu), mu)
    return result.i_ab, result.chi


def holevo_bound(params: AttackParams, mu: float = DEFAULT_MU, asymptotic: bool = False) -> float:
    """
    Holevo bound I_E = S(rho_ab|gamma) - S(rho_b|gamma,alpha).

    The asymptotic branch uses the large-mu spectrum and h(nu), evaluated at the given mu.
    """
    require_physical(params)
    if asymptotic:
        constant, slope = asymptotic_entropy(asymptotic_spectrum(params))
        return float(constant + slope * np.log2(mu) - h_entropy(conditional_eigenvalue(params)))
    V = post_relay_cm_closed(params, mu)
    return float(von_neumann_entropy(V) - von_neumann_entropy(condition_on_heterodyne(V)))


def _large_mu_rate(tau_A: float, tau_B: float, lam: float, lam_p: float, chi: float, nu: float,
                   symmetric_tol: float) -> float:
    """I_AB - I_E with the log2(mu) terms removed."""
    dtau = abs(tau_A - tau_B)
    T = tau_A + tau_B
    with np.errstate(divide='ignore'):
        if dtau < symmetric_tol:
            return float(h_entropy(nu) + np.log2(4.0 * T / (np.e ** 2 * chi * np.sqrt(lam * lam_p))))
        return float(h_entropy(nu) - h_entropy(np.sqrt(lam * lam_p) / dtau)
                     + np.log2(2.0 * T / (np.e * dtau * chi)))


def _large_mu_result(r_inf: float, chi: float, tau_A: float, tau_B: float, xi: float,
                     mu: Optional[float]) -> RateResult:
    """
    Wrap a large-modulation rate. For xi < 1 the reconciliation loss (1 - xi) log2(mu / chi) is
    charged at the protocol's mu (default 66).
    """
    _check_xi(xi)
    mu = DEFAULT_MU if mu is None else mu
    i_ab = float(np.log2(mu / chi))
    i_e = i_ab - r_inf
    return RateResult(i_ab=i_ab, i_e=float(i_e), rate=float(xi * i_ab - i_e), xi=xi,
                      chi=float(chi), epsilon=float(chi - chi_loss(tau_A, tau_B)))


def rate_general(params: AttackParams, mu: Optional[float] = None, xi: float = 1.0, finite: bool = False,
                 symmetric_tol: float = SYMMETRIC_TOL) -> RateResult:
    """
    Rate for arbitrary attack parameters.

    Args:
        params (AttackParams): Attack parameters
        mu (float, optional): Total variance; default 66
        xi (float): Reconciliation efficiency
        finite (bool): Evaluate at finite mu from the covariance matrices instead of the
            large-modulation formula
        symmetric_tol (float): |tau_A - tau_B| below which the symmetric branch is used

    Raises:
        UnphysicalAttackError: If the attack violates a bona-fide condition
    """
    require_physical(params)
    if finite:
        mu = DEFAULT_MU if mu is None else mu
        return rate_from_cm(post_relay_cm_closed(params, mu), mu, xi, params.tau_A, params.tau_B)

    d = derived_quantities(params)
    chi = equivalent_noise(params)
    r_inf = _large_mu_rate(params.tau_A, params.tau_B, d.lam, d.lam_prime, chi,
                           conditional_eigenvalue(params), symmetric_tol)
    logger.debug(f"rate_general {params.as_dict()}: R = {r_inf}")
    return _large_mu_result(r_inf, chi, params.tau_A, params.tau_B, xi, mu)


def rate_min_fixed_thermal(tau_A: float, tau_B: float, omega_A: float, omega_B: float, xi: float = 1.0,
                           mu: Optional[float] = None, symmetric_tol: float = SYMMETRIC_TOL) -> RateResult:
    """
    Minimum rate over the correlation plane at fixed thermal noise, reached by the negative
    EPR attack with lambda = kappa + u phi.

    tau_A != tau_B: h((tau_A + lam)/tau_B) - h(lam/|dtau|) + log2[2 tau_A tau_B / (e |dtau| (T + lam))]
    tau_A == tau_B: h((tau_A + lam)/tau_B) + log2[4 tau_A tau_B / (e^2 (T + lam) lam)]
    """
    _check_tau(tau_A, tau_B)
    phi = phi_bound(omega_A, omega_B)
    kappa = (1.0 - tau_A) * omega_A + (1.0 - tau_B) * omega_B
    u = 2.0 * np.sqrt((1.0 - tau_A) * (1.0 - tau_B))
    lam = np.float64(kappa + u * phi)
    T = tau_A + tau_B
    dtau = abs(tau_A - tau_B)
    nu = (tau_A + lam) / tau_B

    with np.errstate(divide='ignore'):
        if dtau < symmetric_tol:
            r_inf = h_entropy(nu) + np.log2(4.0 * tau_A * tau_B / (np.e ** 2 * (T + lam) * lam))
        else:
            r_inf = (h_entropy(nu) - h_entropy(lam / dtau)
                     + np.log2(2.0 * tau_A * tau_B / (np.e * dtau * (T + lam))))

    chi = T * (T + lam) / (tau_A * tau_B)
    return _large_mu_result(float(r_inf), chi, tau_A, tau_B, xi, mu)


def rate_min_fixed_chi(tau_A: float, tau_B: float, chi: float, xi: float = 1.0, mu: Optional[float] = None,
                       symmetric_tol: float = SYMMETRIC_TOL) -> RateResult:
    """
    Minimum rate at fixed equivalent noise chi.

    tau_A != tau_B: h(tau_A chi/T - 1) - h[(tau_A tau_B chi - T^2)/(|dtau| T)] + log2[2T/(e |dtau| chi)]
    tau_A == tau_B: h(chi/2 - 1) + log2[16/(e^2 chi (chi - 4))], written with general T

    Raises:
        InfeasibleNoiseError: If chi < chi_loss(tau_A, tau_B)
    """
    loss = chi_loss(tau_A, tau_B)
    if chi < loss * (1.0 - 1e-12):
        logger.error(f"chi = {chi} is below the pure-loss noise {loss} for tau=({tau_A}, {tau_B})")
        raise InfeasibleNoiseError(f"chi = {chi:.6g} is below chi_loss = {loss:.6g} (requires chi >= chi_loss)")
    chi = max(chi, loss)
    T = tau_A + tau_B
    dtau = abs(tau_A - tau_B)
    lam = np.float64(max(tau_A * tau_B * chi / T - T, 0.0))

    with np.errstate(divide='ignore'):
        if dtau < symmetric_tol:
            r_inf = h_entropy(tau_A * chi / T - 1.0) + np.log2(4.0 * T / (np.e ** 2 * chi * lam))
        else:
            r_inf = (h_entropy(tau_A * chi / T - 1.0)
                     - h_entropy((tau_A * tau_B * chi - T * T) / (dtau * T))
                     + np.log2(2.0 * T / (np.e * dtau * chi)))
    return _large_mu_result(float(r_inf), chi, tau_A, tau_B, xi, mu)


def rate_from_epsilon(tau_A: float, tau_B: float, epsilon: float, xi: float = 1.0,
                      mu: Optional[float] = None) -> RateResult:
    """Minimum rate with chi = chi_loss + epsilon."""
    return rate_min_fixed_chi(tau_A, tau_B, chi_loss(tau_A, tau_B) + epsilon, xi, mu)


def rate_pure_loss(tau_A: float, tau_B: float, xi: float = 1.0, mu: Optional[float] = None,
                   symmetric_tol: float = SYMMETRIC_TOL) -> RateResult:
    """
    Rate with no excess noise.

    tau_A != tau_B: h((2 - tau_B)/tau_B) - h((2 - T)/|dtau|) + log2[tau_A tau_B / (e |dtau|)]
    tau_A == tau_B: h((2 - tau_B)/tau_B) + log2[2 tau_A tau_B / (e^2 (2 - T))]
    """
    _check_tau(tau_A, tau_B)
    T = tau_A + tau_B
    dtau = abs(tau_A - tau_B)
    nu = (2.0 - tau_B) / tau_B
    with np.errstate(divide='ignore'):
        if dtau < symmetric_tol:
            r_inf = h_entropy(nu) + np.log2(2.0 * tau_A * tau_B / (np.e ** 2 * np.float64(2.0 - T)))
        else:
            r_inf = h_entropy(nu) - h_entropy((2.0 - T) / dtau) + np.log2(tau_A * tau_B / (np.e * dtau))
    return _large_mu_result(float(r_inf), chi_loss(tau_A, tau_B), tau_A, tau_B, xi, mu)


def rate_pure_loss_symmetric(tau: float) -> float:
    """h((2 - tau)/tau) + log2[tau^2 / (e^2 (1 - tau))]; vanishes near tau = 0.84."""
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")
    return float(h_entropy((2.0 - tau) / tau) + np.log2(tau * tau / (np.e ** 2 * (1.0 - tau))))


def rate_pure_loss_dr_limit(tau_A: float) -> float:
    """Pure-loss rate for tau_B -> 1: log2[tau_A / (e (1 - tau_A))]; vanishes at e/(1 + e)."""
    if not 0.0 < tau_A < 1.0:
        raise DomainError(f"tau_A must lie in (0, 1), got {tau_A}")
    return float(np.log2(tau_A / (np.e * (1.0 - tau_A))))


def rate_limit_tauA_to_1(tau_B: float, omega_B: float = 1.0, xi: float = 1.0,
                         mu: Optional[float] = None) -> RateResult:
    """
    Relay next to Alice: the reverse-reconciliation rate of a single thermal-loss link.

    h[(1 + (1 - tau_B) omega_B)/tau_B] - h(omega_B) + log2{2 tau_B / [e (1 - tau_B)(1 + tau_B + (1 - tau_B) omega_B)]}
    """
    if not 0.0 < tau_B < 1.0:
        raise DomainError(f"tau_B must lie in (0, 1), got {tau_B}")
    if omega_B < 1:
        raise DomainError(f"omega_B must be >= 1, got {omega_B}")
    lam = (1.0 - tau_B) * omega_B
    r_inf = (h_entropy((1.0 + lam) / tau_B) - h_entropy(omega_B)
             + np.log2(2.0 * tau_B / (np.e * (1.0 - tau_B) * (1.0 + tau_B + lam))))
    chi = (1.0 + tau_B) * (1.0 + tau_B + lam) / tau_B
    return _large_mu_result(float(r_inf), chi, 1.0, tau_B, xi, mu)


def rate_limit_tauB_to_1(tau_A: float, omega_A: float = 1.0, xi: float = 1.0,
                         mu: Optional[float] = None) -> RateResult:
    """
    Relay next to Bob: the direct-reconciliation rate of a single thermal-loss link.

    h[tau_A + (1 - tau_A) omega_A] - h(omega_A) + log2{2 tau_A / [e (1 - tau_A)(1 + tau_A + (1 - tau_A) omega_A)]}
    """
    if not 0.0 < tau_A < 1.0:
        raise DomainError(f"tau_A must lie in (0, 1), got {tau_A}")
    if omega_A < 1:
        raise DomainError(f"omega_A must be >= 1, got {omega_A}")
    lam = (1.0 - tau_A) * omega_A
    r_inf = (h_entropy(tau_A + lam) - h_entropy(omega_A)
             + np.log2(2.0 * tau_A / (np.e * (1.0 - tau_A) * (1.0 + tau_A + lam))))
    chi = (1.0 + tau_A) * (1.0 + tau_A + lam) / tau_A
    return _large_mu_result(float(r_inf), chi, tau_A, 1.0, xi, mu)


def rate_grid(tau_A: float, tau_B: float, omega_A: float, omega_B: float, g, g_prime,
              symmetric_tol: float = SYMMETRIC_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorised large-modulation rate and chi over arrays of (g, g').

    Returns:
        Tuple[np.ndarray, np.ndarray]: (rate, chi), NaN at inaccessible points
    """
    _check_tau(tau_A, tau_B)
    g = np.asarray(g, dtype=float)
    g_prime = np.asarray(g_prime, dtype=float)
    accessible = _classify_arrays(omega_A, omega_B, g, g_prime) != AttackClass.UNPHYSICAL.value

    kappa = (1.0 - tau_A) * omega_A + (1.0 - tau_B) * omega_B
    u = 2.0 * np.sqrt((1.0 - tau_A) * (1.0 - tau_B))
    lam = np.maximum(kappa - u * g, 0.0)
    lam_p = np.maximum(kappa + u * g_prime, 0.0)
    T = tau_A + tau_B
    dtau = abs(tau_A - tau_B)

    chi = T / (tau_A * tau_B) * np.sqrt((T + lam) * (T + lam_p))
    nu = np.sqrt((tau_A + lam) * (tau_A + lam_p)) / tau_B
    with np.errstate(divide='ignore', invalid='ignore'):
        if dtau < symmetric_tol:
            rate = h_entropy_vec(nu) + np.log2(4.0 * T / (np.e ** 2 * chi * np.sqrt(lam * lam_p)))
        else:
            rate = (h_entropy_vec(nu) - h_entropy_vec(np.sqrt(lam * lam_p) / dtau)
                    + np.log2(2.0 * T / (np.e * dtau * chi)))
    return np.where(accessible, rate, np.nan), np.where(accessible, chi, np.nan)


def rate_plane(tau_A: float, tau_B: float, omega_A: float, omega_B: float, grid_n: int) -> pd.DataFrame:
    """
    Correlation-plane scan with rate and chi columns for iso-rate / iso-noise inspection.

    Returns:
        pd.DataFrame: Columns g, g_prime, class, rate, chi (NaN where inaccessible)
    """
    axis = correlation_axis(omega_A, omega_B, grid_n)
    gg, gp = np.meshgrid(axis, axis, indexing='ij')
    g, g_prime = gg.ravel(), gp.ravel()
    rate, chi = rate_grid(tau_A, tau_B, omega_A, omega_B, g, g_prime)
    return pd.DataFrame({
        'g': g,
        'g_prime': g_prime,
        'class': _classify_arrays(omega_A, omega_B, g, g_prime),
        'rate': rate,
        'chi': chi,
    })


def iso_chi_curve(tau_A: float, tau_B: float, chi: float, omega_A: float, omega_B: float,
                  n: int = 201) -> pd.DataFrame:
    """
    Accessible attacks with equivalent noise chi at fixed thermal noise.

    Solves (T + kappa - u g)(T + kappa + u g') = (chi tau_A tau_B / T)^2 for g' on a grid of g.

    Returns:
        pd.DataFrame: Columns g, g_prime, rate
    """
    if tau_A >= 1.0 or tau_B >= 1.0:
        raise DomainError("iso-noise curves need tau_A, tau_B < 1 (u = 0 otherwise)")
    T = tau_A + tau_B
    kappa = (1.0 - tau_A) * omega_A + (1.0 - tau_B) * omega_B
    u = 2.0 * np.sqrt((1.0 - tau_A) * (1.0 - tau_B))
    K = (chi * tau_A * tau_B / T) ** 2

    g = correlation_axis(omega_A, omega_B, n)
    with np.errstate(divide='ignore', invalid='ignore'):
        g_prime = (K / (T + kappa - u * g) - T - kappa) / u
    rate, _ = rate_grid(tau_A, tau_B, omega_A, omega_B, g, g_prime)
    keep = np.isfinite(rate)
    return pd.DataFrame({'g': g[keep], 'g_prime': g_prime[keep], 'rate': rate[keep]})


def epr_attack_rate_gap(tau_A: float, tau_B: float, omega_A: float, omega_B: float) -> float:
    """Rate at the entangling-cloner origin minus the rate under the negative EPR attack."""
    origin = rate_general(AttackParams(tau_A, tau_B, omega_A, omega_B))
    worst = rate_general(negative_epr_attack(tau_A, tau_B, omega_A, omega_B))
    return origin.rate - worst.rate
