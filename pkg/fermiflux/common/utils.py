"""
dense complex matrix kernel

Eigendecompositions, Hermitian functional calculus, the Stein equation
V - M V M* = X and the small helpers the physics modules share.
"""
import logging
from typing import Callable, NamedTuple
from warnings import warn

import numpy as np
import scipy.linalg

from fermiflux.common.exceptions import NotHermitian, SpectralRadiusTooLarge, SpectrumOutOfRange
from fermiflux.common.merging import merge_objects

logger = logging.getLogger(__name__)

TOL_EIG = 1e-10
TOL_HERM = 1e-10
TOL_SP = 1e-9
TOL_STEIN = 1e-11
TOL_CLIP = 1e-9
TOL_UNIT = 1e-10
TOL_RANK = 1e-10
TOL_CLUSTER = 1e-8

# largest d with d**2 <= 4096 handled by the Kronecker solve
_DIRECT_STEIN_DIM = 64


class HermitianEig(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


class GeneralEig(NamedTuple):
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    simple: np.ndarray


def dagger(X: np.ndarray) -> np.ndarray:
    """
    conjugate transpose, acting on the last two axes

    Parameters:
    - X: matrix or stack of matrices

    Returns:
        X*
    """
    return np.conj(np.swapaxes(X, -1, -2))


def as_matrix(X, name: str = "matrix") -> np.ndarray:
    """
    convert input to a finite complex 2d array

    Parameters:
    - X: array like
    - name: used in the error message

    Returns:
        complex128 array
    """
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    assert X.ndim == 2, f"{name} must be two dimensional, got shape {X.shape}"
    assert np.all(np.isfinite(X)), f"{name} has non finite entries"
    return X


def hermitian_residual(H: np.ndarray) -> float:
    return float(np.linalg.norm(H - dagger(H)))


def herm_eig(H: np.ndarray, tol_herm: float = TOL_HERM) -> HermitianEig:
    """
    eigendecomposition of a Hermitian matrix

    Parameters:
    - H: Hermitian matrix
    - tol_herm: relative tolerance on ||H - H*||

    Returns:
        ascending eigenvalues and unitary matrix of eigenvectors (columns)
    """
    H = np.asarray(H, dtype=np.complex128)
    asym = hermitian_residual(H)
    if asym > tol_herm * np.linalg.norm(H):
        raise NotHermitian(f"||H - H*|| = {asym:.3e} exceeds {tol_herm:.1e} * ||H||")
    w, V = scipy.linalg.eigh(0.5 * (H + dagger(H)))
    return HermitianEig(w, V)


def hermitian_function(
        H: np.ndarray,
        func: Callable[[np.ndarray], np.ndarray],
        tol_herm: float = TOL_HERM
) -> np.ndarray:
    """
    apply a scalar function to a Hermitian matrix by functional calculus

    Parameters:
    - H: Hermitian matrix
    - func: vectorized function of the real eigenvalues
    - tol_herm: relative tolerance on ||H - H*||

    Returns:
        V func(Λ) V*
    """
    w, V = herm_eig(H, tol_herm=tol_herm)
    return (V * func(w)) @ dagger(V)


def matrix_log_clamped(
        H: np.ndarray,
        eps_clip: float,
        tol_clip: float = TOL_CLIP,
        tol_herm: float = TOL_HERM
) -> np.ndarray:
    """
    logarithm of a Hermitian matrix whose spectrum lies in [eps_clip, 1 - eps_clip]

    eigenvalues within tol_clip outside the interval are clamped onto it

    Parameters:
    - H: Hermitian matrix
    - eps_clip: distance of the admissible spectrum from 0 and 1
    - tol_clip: slack before a violation is an error
    - tol_herm: relative tolerance on ||H - H*||

    Returns:
        log H
    """
    w, V = herm_eig(H, tol_herm=tol_herm)
    if w.size and (w[0] < eps_clip - tol_clip or w[-1] > 1 - eps_clip + tol_clip):
        raise SpectrumOutOfRange(
            f"spectrum [{w[0]:.3e}, {w[-1]:.3e}] leaves [{eps_clip:.1e}, {1 - eps_clip:.1e}]"
        )
    w = np.clip(w, eps_clip, 1 - eps_clip)
    return (V * np.log(w)) @ dagger(V)


def log_odds(H: np.ndarray, eps_clip: float, tol_clip: float = TOL_CLIP) -> np.ndarray:
    """
    log H - log(1 - H) for a symbol with spectrum inside (0, 1)

    Parameters:
    - H: Hermitian matrix
    - eps_clip: distance of the admissible spectrum from 0 and 1
    - tol_clip: slack before a violation is an error

    Returns:
        log-odds matrix
    """
    eye = np.eye(H.shape[0])
    return matrix_log_clamped(H, eps_clip, tol_clip) - matrix_log_clamped(eye - H, eps_clip, tol_clip)


def spectral_radius(M: np.ndarray) -> float:
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(scipy.linalg.eigvals(M))))


def numerical_rank(K: np.ndarray, tol_rank: float = TOL_RANK) -> int:
    """
    rank counting singular values above tol_rank times the largest one

    Parameters:
    - K: matrix
    - tol_rank: relative threshold

    Returns:
        numerical rank
    """
    s = scipy.linalg.svdvals(K)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol_rank * s[0]))


def cluster_eigenvalues(values: np.ndarray, tol_cluster: float = TOL_CLUSTER) -> list[list[int]]:
    """
    group eigenvalues that coincide up to tol_cluster (transitively)

    Parameters:
    - values: complex eigenvalues
    - tol_cluster: distance below which two eigenvalues are one

    Returns:
        index groups
    """
    return merge_objects(list(values), lambda a, b: abs(a - b) < tol_cluster)


def general_eig(M: np.ndarray, tol_cluster: float = TOL_CLUSTER) -> GeneralEig:
    """
    eigenvalues with right and left eigenvectors of a general square matrix

    left vectors are rescaled so that L* R has unit diagonal

    Parameters:
    - M: square matrix
    - tol_cluster: clustering threshold deciding simplicity

    Returns:
        eigenvalues, right vectors, left vectors, simplicity flags
    """
    w, vl, vr = scipy.linalg.eig(M, left=True, right=True)
    overlaps = np.einsum("ij,ij->j", np.conj(vl), vr)
    vl = vl / np.conj(overlaps)
    simple = np.zeros(len(w), dtype=bool)
    for group in cluster_eigenvalues(w, tol_cluster):
        if len(group) == 1:
            simple[group[0]] = True
    return GeneralEig(w, vr, vl, simple)


def stein_residual(M: np.ndarray, V: np.ndarray, RHS: np.ndarray) -> float:
    return float(np.linalg.norm(V - M @ V @ dagger(M) - RHS))


def solve_stein(
        M: np.ndarray,
        RHS: np.ndarray,
        tol_sp: float = TOL_SP,
        tol_stein: float = TOL_STEIN
) -> np.ndarray:
    """
    solve V - M V M* = RHS, i.e. V = sum_k M^k RHS (M*)^k

    Parameters:
    - M: square matrix with spectral radius below 1 - tol_sp
    - RHS: right hand side
    - tol_sp: margin to the unit circle
    - tol_stein: relative residual bound

    Returns:
        V
    """
    M = np.asarray(M, dtype=np.complex128)
    RHS = np.asarray(RHS, dtype=np.complex128)
    rho = spectral_radius(M)
    if rho >= 1 - tol_sp:
        raise SpectralRadiusTooLarge(f"spectral radius {rho:.12f} is not below 1 - {tol_sp:.1e}")

    method = "direct" if M.shape[0] <= _DIRECT_STEIN_DIM else "bilinear"
    V = scipy.linalg.solve_discrete_lyapunov(M, RHS, method=method)
    scale = np.linalg.norm(RHS)
    residual = stein_residual(M, V, RHS)
    if residual > tol_stein * scale:
        # one step of iterative refinement on the residual equation
        V = V + scipy.linalg.solve_discrete_lyapunov(M, RHS - V + M @ V @ dagger(M), method=method)
        residual = stein_residual(M, V, RHS)
        if residual > tol_stein * scale:
            warn(f"Stein residual {residual:.3e} above {tol_stein:.1e} * ||RHS|| (spectral radius {rho:.9f})")
    logger.debug("stein solve: d=%d method=%s rho=%.6f residual=%.3e", M.shape[0], method, rho, residual)

    if hermitian_residual(RHS) <= TOL_HERM * max(scale, 1e-300):
        V = 0.5 * (V + dagger(V))
    return V
