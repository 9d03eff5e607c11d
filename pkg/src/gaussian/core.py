"""
Gaussian Core Module

Covariance-matrix algebra for Gaussian states: construction, symplectic transformations,
partial trace, measurement conditioning, symplectic spectra and von Neumann entropy.

Conventions: quadratures are ordered (q1, p1, q2, p2, ...), the vacuum has unit variance
(hbar = 2) and the symplectic form is the direct sum of [[0, 1], [-1, 0]] blocks.
Covariance matrices are plain numpy arrays; functions never modify their inputs.
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import numpy.linalg as LA
from scipy.linalg import block_diag

from ..errors import DegenerateDetectionError, DomainError, InternalConsistencyError
from ..utils.logging_utils import get_logger

logger = get_logger('gaussian.core')

I2 = np.eye(2)
Z = np.diag([1.0, -1.0])
OMEGA_1 = np.array([[0.0, 1.0], [-1.0, 0.0]])

# Pauli-like matrices entering the Bell conditioning formula
X1 = np.array([[0.0, 1.0], [1.0, 0.0]])
X2 = np.array([[0.0, 1.0], [-1.0, 0.0]])

SYMMETRY_TOL = 1e-12
PHYSICAL_TOL = 1e-9

CovarianceMatrix = np.ndarray
SymplecticSpectrum = np.ndarray


@dataclass(frozen=True)
class GaussianState:
    """Mean vector and covariance matrix of an n-mode Gaussian state."""
    mean: np.ndarray
    cm: np.ndarray

    def __post_init__(self):
        cm = as_cm(self.cm)
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        if mean.shape[0] != cm.shape[0]:
            raise DomainError(f"mean has length {mean.shape[0]}, expected {cm.shape[0]}")
        object.__setattr__(self, 'cm', cm)
        object.__setattr__(self, 'mean', mean)

    @property
    def dim_modes(self) -> int:
        return self.cm.shape[0] // 2

    @classmethod
    def zero_mean(cls, cm) -> 'GaussianState':
        cm = as_cm(cm)
        return cls(np.zeros(cm.shape[0]), cm)


def as_cm(matrix, tol: float = SYMMETRY_TOL) -> np.ndarray:
    """
    Validate and copy a covariance matrix.

    Args:
        matrix: Square array-like of even dimension
        tol (float): Allowed asymmetry |V[i][j] - V[j][i]|

    Returns:
        np.ndarray: Float copy of the matrix

    Raises:
        DomainError: If the matrix is not square, of odd dimension or not symmetric
    """
    V = np.array(matrix, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise DomainError(f"covariance matrix must be square, got shape {V.shape}")
    if V.shape[0] % 2:
        raise DomainError(f"covariance matrix must have even dimension, got {V.shape[0]}")
    asym = np.max(np.abs(V - V.T)) if V.size else 0.0
    if asym > tol * max(1.0, np.max(np.abs(V))):
        raise DomainError(f"covariance matrix is not symmetric (max asymmetry {asym:.3e})")
    return V


def n_modes(cm) -> int:
    return np.shape(cm)[0] // 2


def symplectic_form(n: int) -> np.ndarray:
    """Symplectic form of n modes in (q1, p1, q2, p2, ...) ordering."""
    return np.kron(np.eye(n), OMEGA_1)


def is_symplectic(S, tol: float = 1e-10) -> bool:
    S = np.asarray(S, dtype=float)
    omega = symplectic_form(S.shape[0] // 2)
    return bool(np.allclose(LA.multi_dot([S, omega, S.T]), omega, atol=tol, rtol=0.0))


def epr_cm(mu: float) -> np.ndarray:
    """
    Covariance matrix of the EPR state (two-mode squeezed vacuum) with variance mu.

    Args:
        mu (float): Local variance, mu >= 1

    Returns:
        np.ndarray: [[mu I, mu' Z], [mu' Z, mu I]] with mu' = sqrt(mu^2 - 1)

    Raises:
        DomainError: If mu < 1
    """
    if mu < 1:
        raise DomainError(f"EPR variance must be >= 1, got {mu}")
    mu_p = np.sqrt(mu * mu - 1.0)
    return np.block([[mu * I2, mu_p * Z], [mu_p * Z, mu * I2]])


def thermal_cm(omega: float, modes: int = 1) -> np.ndarray:
    if omega < 1:
        raise DomainError(f"thermal variance must be >= 1, got {omega}")
    return omega * np.eye(2 * modes)


def attack_reservoir_cm(params) -> np.ndarray:
    """
    Covariance matrix of the two reservoir modes injected by the attack.

    Accepts any object with omega_A, omega_B, g and g_prime attributes. Physicality is
    not checked here.

    Returns:
        np.ndarray: [[omega_A I, G], [G, omega_B I]] with G = diag(g, g')

    Raises:
        DomainError: If a thermal variance is below 1
    """
    omega_A, omega_B = params.omega_A, params.omega_B
    if omega_A < 1 or omega_B < 1:
        raise DomainError(f"thermal variances must be >= 1, got ({omega_A}, {omega_B})")
    G = np.diag([params.g, params.g_prime])
    return np.block([[omega_A * I2, G], [G, omega_B * I2]])


def beam_splitter_symplectic(tau: float, mode_i: int, mode_j: int, total_modes: int,
                             transpose: bool = False) -> np.ndarray:
    """
    Beam splitter of transmissivity tau between two modes, embedded in 2N x 2N identity.

    The two-mode block is [[sqrt(tau) I, sqrt(1-tau) I], [-sqrt(1-tau) I, sqrt(tau) I]];
    transpose=True gives its transpose, which is the orientation used on Bob's link.

    Raises:
        DomainError: If tau is outside [0, 1] or a mode index is invalid
    """
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"transmissivity must lie in [0, 1], got {tau}")
    if mode_i == mode_j:
        raise DomainError("beam splitter modes must be distinct")
    for m in (mode_i, mode_j):
        if not 0 <= m < total_modes:
            raise DomainError(f"mode index {m} out of range for {total_modes} modes")

    t, s = np.sqrt(tau), np.sqrt(1.0 - tau)
    block = np.kron(np.array([[t, s], [-s, t]]), I2)
    if transpose:
        block = block.T

    S = np.eye(2 * total_modes)
    idx = [2 * mode_i, 2 * mode_i + 1, 2 * mode_j, 2 * mode_j + 1]
    S[np.ix_(idx, idx)] = block
    return S


def rotation_symplectic(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def squeezing_symplectic(r: float) -> np.ndarray:
    return np.diag([np.exp(-r), np.exp(r)])


def apply_symplectic(cm, S) -> np.ndarray:
    """
    Transform V -> S V S^T.

    Raises:
        DomainError: On dimension mismatch
    """
    V = np.asarray(cm, dtype=float)
    S = np.asarray(S, dtype=float)
    if S.shape != V.shape:
        raise DomainError(f"symplectic of shape {S.shape} does not match CM of shape {V.shape}")
    return LA.multi_dot([S, V, S.T])


def _quadrature_indices(modes: Iterable[int]) -> list:
    idx = []
    for m in modes:
        idx.extend([2 * m, 2 * m + 1])
    return idx


def partial_trace(cm, keep_modes: Sequence[int]) -> np.ndarray:
    """
    Reduced covariance matrix of the given modes, in the given order.

    Raises:
        DomainError: If a mode index is out of range
    """
    V = np.asarray(cm, dtype=float)
    total = n_modes(V)
    for m in keep_modes:
        if not 0 <= m < total:
            raise DomainError(f"mode index {m} out of range for {total} modes")
    idx = _quadrature_indices(keep_modes)
    return V[np.ix_(idx, idx)]


def permute_modes(cm, order: Sequence[int]) -> np.ndarray:
    """
    Reorder modes: mode k of the result is mode order[k] of the input.

    Raises:
        DomainError: If order is not a permutation of all modes
    """
    total = n_modes(cm)
    if sorted(order) != list(range(total)):
        raise DomainError(f"{list(order)} is not a permutation of {total} modes")
    return partial_trace(cm, order)


def condition_on_heterodyne(cm_two_party) -> np.ndarray:
    """
    Covariance matrix of mode b after heterodyne detection of mode a.

    The input is split as [[a, c], [c^T, b]] and the result is b - c^T (a + I)^-1 c.

    Raises:
        InternalConsistencyError: If a + I is singular
    """
    V = np.asarray(cm_two_party, dtype=float)
    a, b, c = V[:2, :2], V[2:, 2:], V[:2, 2:]
    try:
        return b - LA.multi_dot([c.T, LA.inv(a + I2), c])
    except LA.LinAlgError as e:
        logger.error("a + I is singular in heterodyne conditioning")
        raise InternalConsistencyError("a + I is singular in heterodyne conditioning") from e


def condition_on_heterodyne_adjugate(cm_two_party) -> np.ndarray:
    """
    Same conditioning written as b - c^T (Omega a Omega^T + I) c / zeta, zeta = det a + Tr a + 1.
    """
    V = np.asarray(cm_two_party, dtype=float)
    a, b, c = V[:2, :2], V[2:, 2:], V[:2, 2:]
    zeta = LA.det(a) + np.trace(a) + 1.0
    if abs(zeta) <= 1e-15:
        logger.error("zeta vanishes in heterodyne conditioning")
        raise InternalConsistencyError("zeta vanishes in heterodyne conditioning")
    adj = LA.multi_dot([OMEGA_1, a, OMEGA_1.T]) + I2
    return b - LA.multi_dot([c.T, adj, c]) / zeta


def condition_on_quadratures(cm, measured: Sequence[int], keep_modes: Sequence[int]) -> np.ndarray:
    """
    Conditional covariance matrix after homodyning individual quadratures.

    Generic Schur complement V_keep - C (V_meas)^+ C^T, with the Moore-Penrose inverse
    so that a measured block of reduced rank is handled. Quadratures of measured modes
    that are not in 'measured' are discarded.

    Args:
        cm: Full covariance matrix
        measured (Sequence[int]): Quadrature indices that are measured
        keep_modes (Sequence[int]): Modes whose conditional state is returned
    """
    V = np.asarray(cm, dtype=float)
    keep = _quadrature_indices(keep_modes)
    meas = list(measured)
    C = V[np.ix_(keep, meas)]
    M = V[np.ix_(meas, meas)]
    return V[np.ix_(keep, keep)] - LA.multi_dot([C, LA.pinv(M), C.T])


def condition_on_bell(cm_abAB, tol: float = 1e-12) -> np.ndarray:
    """
    Conditional covariance matrix of modes a, b after Bell detection of A', B'.

    The input is ordered (a, b, A', B') with blocks V_ab (4x4), C1 and C2 (cross-correlations
    of ab with A' and B'), A, B and D (A'B' cross block). Bell detection measures
    q- = (q_A - q_B)/sqrt(2) and p+ = (p_A + p_B)/sqrt(2).

    Returns:
        np.ndarray: V_ab - (2 det Theta)^-1 sum_ij C_i (X_i^T Theta X_j) C_j^T,
        with Theta = (Z A Z + B - Z D - D^T Z) / 2

    Raises:
        DegenerateDetectionError: If det Theta <= tol
    """
    V = np.asarray(cm_abAB, dtype=float)
    if V.shape != (8, 8):
        raise DomainError(f"Bell conditioning needs a 4-mode CM, got shape {V.shape}")

    V_ab = V[:4, :4]
    C = (V[:4, 4:6], V[:4, 6:8])

    theta = bell_theta(V)
    det_theta = LA.det(theta)
    if det_theta <= tol:
        logger.error(f"degenerate Bell detection: det(theta) = {det_theta:.3e}")
        raise DegenerateDetectionError(f"degenerate Bell detection: det(theta) = {det_theta:.3e}")

    X = (X1, X2)
    correction = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            correction += LA.multi_dot([C[i], X[i].T @ theta @ X[j], C[j].T])
    return V_ab - correction / (2.0 * det_theta)


def bell_theta(cm_abAB) -> np.ndarray:
    """
    Theta = (Z A Z + B - Z D - D^T Z) / 2 of the A'B' blocks of a 4-mode CM.

    Its diagonal holds Var(q-) and Var(p+) and its determinant equals that of the (q-, p+)
    covariance; the off-diagonal entry is -Cov(q-, p+).
    """
    V = np.asarray(cm_abAB, dtype=float)
    A, B, D = V[4:6, 4:6], V[6:8, 6:8], V[4:6, 6:8]
    return 0.5 * (Z @ A @ Z + B - Z @ D - D.T @ Z)


def symplectic_eigenvalues(cm) -> SymplecticSpectrum:
    """
    Symplectic spectrum: moduli of the eigenvalues of i Omega V, each listed once, ascending.

    Unphysical matrices may return values below 1; callers decide what to do with them.
    """
    V = np.asarray(cm, dtype=float)
    omega = symplectic_form(n_modes(V))
    moduli = np.sort(np.abs(LA.eigvals(1j * omega @ V)))
    return moduli[::2]


def _two_mode_invariants(cm, transpose: bool = False):
    V = np.asarray(cm, dtype=float)
    if V.shape != (4, 4):
        raise DomainError(f"two-mode formula needs a 4x4 CM, got shape {V.shape}")
    sign = -1.0 if transpose else 1.0
    delta = LA.det(V[:2, :2]) + LA.det(V[2:, 2:]) + sign * 2.0 * LA.det(V[:2, 2:])
    return delta, LA.det(V)


def _least_squared_eigenvalue(delta: float, det: float) -> float:
    disc = max(delta * delta - 4.0 * det, 0.0)
    denom = delta + np.sqrt(disc)
    if denom <= 0:
        return 0.0
    # 2 det / (delta + sqrt(disc)) avoids the cancellation in (delta - sqrt(disc)) / 2
    return 2.0 * det / denom


def symplectic_eigenvalues_two_mode(cm) -> SymplecticSpectrum:
    """
    Closed-form two-mode spectrum: 2 nu_{-/+}^2 = Delta -/+ sqrt(Delta^2 - 4 det V),
    Delta = det A + det B + 2 det C.
    """
    delta, det = _two_mode_invariants(cm)
    nu_minus_sq = _least_squared_eigenvalue(delta, det)
    nu_plus_sq = 0.5 * (delta + np.sqrt(max(delta * delta - 4.0 * det, 0.0)))
    return np.sqrt(np.maximum([nu_minus_sq, nu_plus_sq], 0.0))


def least_eigenvalue_squared(cm) -> float:
    """nu_-^2 of a two-mode CM."""
    return _least_squared_eigenvalue(*_two_mode_invariants(cm))


def partial_transpose_eigenvalue_squared(cm) -> float:
    """Squared least symplectic eigenvalue of the partial transpose (Delta uses -2 det C)."""
    return _least_squared_eigenvalue(*_two_mode_invariants(cm, transpose=True))


def is_physical(cm, tol: float = PHYSICAL_TOL) -> bool:
    V = np.asarray(cm, dtype=float)
    if np.any(LA.eigvalsh(0.5 * (V + V.T)) <= 0):
        return False
    return bool(np.all(symplectic_eigenvalues(V) >= 1.0 - tol))


def h_entropy(x: float, tol: float = PHYSICAL_TOL) -> float:
    """
    Entropy function h(x) = ((x+1)/2) log2((x+1)/2) - ((x-1)/2) log2((x-1)/2), in bits.

    Args:
        x (float): Symplectic eigenvalue
        tol (float): Values in [1 - tol, 1] are clamped to 1

    Returns:
        float: h(x), with h(1) = 0

    Raises:
        DomainError: If x < 1 - tol
    """
    x = float(x)
    if x < 1.0 - tol or np.isnan(x):
        raise DomainError(f"h(x) undefined for symplectic eigenvalue {x} < 1")
    if x <= 1.0:
        return 0.0
    a = 0.5 * (x + 1.0)
    b = 0.5 * (x - 1.0)
    # a log a - b log b = log a + b log(1 + 1/b)
    return float(np.log2(a) + b * np.log1p(1.0 / b) / np.log(2.0))


def h_entropy_vec(x, tol: float = PHYSICAL_TOL) -> np.ndarray:
    """Array version of h_entropy; entries below 1 - tol become NaN instead of raising."""
    x = np.asarray(x, dtype=float)
    b = 0.5 * (x - 1.0)
    with np.errstate(divide='ignore', invalid='ignore'):
        val = np.log2(0.5 * (x + 1.0)) + b * np.log1p(1.0 / b) / np.log(2.0)
    val = np.where(x <= 1.0, 0.0, val)
    return np.where((x < 1.0 - tol) | np.isnan(x), np.nan, val)


def von_neumann_entropy(cm, tol: float = PHYSICAL_TOL) -> float:
    """Entropy in bits: sum of h over the symplectic spectrum."""
    return float(sum(h_entropy(nu, tol) for nu in symplectic_eigenvalues(cm)))


def random_symplectic(n: int, rng: np.random.Generator, layers: int = 3,
                      max_squeezing: float = 0.6) -> np.ndarray:
    """
    Random symplectic matrix built from layers of phase rotations, single-mode squeezers
    and beam splitters between random pairs.
    """
    S = np.eye(2 * n)
    for _ in range(layers):
        local = block_diag(*[
            rotation_symplectic(rng.uniform(0, 2 * np.pi))
            @ squeezing_symplectic(rng.uniform(-max_squeezing, max_squeezing))
            @ rotation_symplectic(rng.uniform(0, 2 * np.pi))
            for _ in range(n)
        ])
        S = local @ S
        if n > 1:
            i, j = rng.choice(n, size=2, replace=False)
            S = beam_splitter_symplectic(rng.uniform(0, 1), int(i), int(j), n) @ S
    return S


def random_physical_cm(n: int, rng: np.random.Generator, max_thermal: float = 5.0,
                       spectrum: Optional[Sequence[float]] = None) -> np.ndarray:
    """Thermal spectrum conjugated by a random symplectic."""
    if spectrum is None:
        spectrum = rng.uniform(1.0, max_thermal, size=n)
    thermal = np.diag(np.repeat(np.asarray(spectrum, dtype=float), 2))
    return apply_symplectic(thermal, random_symplectic(n, rng))
