"""
scattering amplitudes of the sample

A walker entering the sample at time 0 leaves it after m steps with amplitude
Y_m, Y_0 = C and Y_m = Z_BS M^{m-1} Z_SB. In frequency space the series sums to
    Ŷ(θ) = Σ_m e^{-imθ} Y_m = C - Z_BS (M - e^{iθ})^{-1} Z_SB,
which is unitary for every θ when the spectral radius of M is below one.
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Union
from warnings import warn

import numpy as np

from fermiflux.common.exceptions import SingularResolvent, SpectralRadiusTooLarge
from fermiflux.common.utils import TOL_SP, TOL_STEIN, dagger, solve_stein, spectral_radius
from fermiflux.model.BlockUnitary import BlockUnitary

logger = logging.getLogger(__name__)

_MAX_SEQUENCE_LENGTH = 1_000_000


@dataclass(frozen=True)
class ScatteringSequence:
    Y: list[np.ndarray]
    rate: float
    constant: float
    tail_tol: float

    @property
    def length(self) -> int:
        return len(self.Y) - 1

    def partial_sum(self, theta: float) -> np.ndarray:
        """
        Σ_{m <= L_Y} e^{-imθ} Y_m

        Parameters:
        - theta: angle

        Returns:
            truncated Fourier series of Ŷ
        """
        return sum(np.exp(-1j * m * theta) * Y for m, Y in enumerate(self.Y))


def _power_norm_bound(M: np.ndarray) -> tuple[float, float]:
    # ||M^m|| <= c r^m with r = ||M^q||^(1/q) for the first q where ||M^q|| <= 1/2
    P = np.eye(M.shape[0], dtype=np.complex128)
    largest = 1.0
    for q in range(1, _MAX_SEQUENCE_LENGTH):
        P = P @ M
        norm = float(np.linalg.norm(P, 2))
        if norm <= 0.5:
            if norm == 0.0:
                return 0.0, largest
            r = norm ** (1.0 / q)
            return r, largest / r ** (q - 1)
        largest = max(largest, norm)
    raise SpectralRadiusTooLarge("powers of M do not contract")


def scattering_sequence(Z: BlockUnitary, tail_tol: float = 1e-12, tol_sp: float = TOL_SP) -> ScatteringSequence:
    """
    time domain scattering amplitudes up to a certified tail

    Parameters:
    - Z: block unitary
    - tail_tol: bound on the norm of the last amplitude
    - tol_sp: margin of the spectral radius to the unit circle

    Returns:
        Y_0..Y_{L_Y} with a decay bound ||Y_m|| <= c r^{m-1} ||Z_BS|| ||Z_SB||
    """
    rho = spectral_radius(Z.M)
    if rho >= 1 - tol_sp:
        raise SpectralRadiusTooLarge(f"spectral radius {rho:.12f} is not below 1 - {tol_sp:.1e}")

    Y = [Z.C.copy()]
    coupling = float(np.linalg.norm(Z.Z_BS, 2) * np.linalg.norm(Z.Z_SB, 2))
    if coupling == 0.0:
        return ScatteringSequence(Y + [np.zeros_like(Z.C)], 0.0, 0.0, tail_tol)

    r, c = _power_norm_bound(Z.M)
    if r == 0.0:
        length = 1
        while np.any(np.linalg.matrix_power(Z.M, length)):
            length += 1
        length += 1
    else:
        length = 1
        while coupling * c * r ** (length - 1) > tail_tol:
            length += 1
    assert length < _MAX_SEQUENCE_LENGTH, f"scattering sequence of length {length} is not practical"

    left = Z.Z_BS
    for _ in range(1, length + 1):
        Y.append(left @ Z.Z_SB)
        left = left @ Z.M
    logger.debug("scattering sequence: L_Y=%d rate=%.6f", length, r)
    return ScatteringSequence(Y, r, c, tail_tol)


def scattering_matrices(Z: BlockUnitary, thetas: Union[Sequence[float], np.ndarray], tol_sp: float = TOL_SP) -> np.ndarray:
    """
    Ŷ(θ) on a batch of angles by the resolvent formula

    Parameters:
    - Z: block unitary
    - thetas: angles
    - tol_sp: resolvents with condition number above 1/tol_sp are rejected

    Returns:
        stack of d_B x d_B unitaries, angle index first
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    if Z.is_decoupled:
        return np.broadcast_to(Z.C, (thetas.size,) + Z.C.shape).copy()

    z = np.exp(1j * thetas)
    resolvent = Z.M[None, :, :] - z[:, None, None] * np.eye(Z.d_S)[None, :, :]
    condition = np.linalg.cond(resolvent)
    worst = int(np.argmax(condition))
    if not np.isfinite(condition[worst]) or condition[worst] > 1.0 / tol_sp:
        raise SingularResolvent(
            f"M - e^(iθ) is singular to working precision at θ = {thetas[worst]:.6f} "
            f"(condition {condition[worst]:.3e})"
        )
    rhs = np.broadcast_to(Z.Z_SB, (thetas.size,) + Z.Z_SB.shape)
    return Z.C[None, :, :] - Z.Z_BS[None, :, :] @ np.linalg.solve(resolvent, rhs)


def scattering_matrix(Z: BlockUnitary, theta: float, tol_sp: float = TOL_SP) -> np.ndarray:
    return scattering_matrices(Z, [theta], tol_sp=tol_sp)[0]


def transmission_from_scattering(Y: np.ndarray, projectors: Sequence[np.ndarray]) -> np.ndarray:
    # C_{k,k'} = tr[Ŷ* Π_k Ŷ Π_k'] for a stack of scattering matrices
    Yh = dagger(Y)
    n_B = len(projectors)
    C = np.empty(Y.shape[:-2] + (n_B, n_B))
    for k, P in enumerate(projectors):
        left = Yh @ P @ Y
        for kp, Pp in enumerate(projectors):
            C[..., k, kp] = np.real(np.einsum("...ij,ji->...", left, Pp))
    return C


def transmission(Z: BlockUnitary, projectors: Sequence[np.ndarray], theta: Union[float, np.ndarray], tol_sp: float = TOL_SP) -> np.ndarray:
    """
    transmission coefficients C_{k,k'}(θ) = tr[Ŷ*(θ) Π_k Ŷ(θ) Π_k']

    rows and columns sum to rank Π_k, i.e. to one in the rank one case

    Parameters:
    - Z: block unitary
    - projectors: reservoir projectors
    - theta: angle or array of angles
    - tol_sp: resolvent conditioning bound

    Returns:
        n_B x n_B matrix, or a stack with the angle index first
    """
    scalar = np.ndim(theta) == 0
    C = transmission_from_scattering(scattering_matrices(Z, theta, tol_sp=tol_sp), projectors)
    ranks = [int(round(np.real(np.trace(P)))) for P in projectors]
    if any(r != 1 for r in ranks):
        warn(f"transmission rows sum to the projector ranks {ranks}, not to one")
    return C[0] if scalar else C


def mean_transmission(Z: BlockUnitary, projectors: Sequence[np.ndarray], tol_sp: float = TOL_SP, tol_stein: float = TOL_STEIN) -> np.ndarray:
    """
    ∫ C_{k,k'}(θ) dθ/2π = Σ_l tr[Y_l* Π_k Y_l Π_k'] without quadrature

    Σ_{l>=1} Y_l* Π_k Y_l = Z_SB* V_k Z_SB where V_k - M* V_k M = Z_BS* Π_k Z_BS

    Parameters:
    - Z: block unitary
    - projectors: reservoir projectors
    - tol_sp: spectral radius margin
    - tol_stein: Stein residual bound

    Returns:
        n_B x n_B matrix
    """
    n_B = len(projectors)
    C = np.empty((n_B, n_B))
    for k, P in enumerate(projectors):
        left = dagger(Z.C) @ P @ Z.C
        if not Z.is_decoupled:
            V = solve_stein(dagger(Z.M), dagger(Z.Z_BS) @ P @ Z.Z_BS, tol_sp=tol_sp, tol_stein=tol_stein)
            left = left + dagger(Z.Z_SB) @ V @ Z.Z_SB
        for kp, Pp in enumerate(projectors):
            C[k, kp] = float(np.real(np.trace(left @ Pp)))
    return C
