"""
asymptotic and finite time symbols of the sample and the environment

Sample symbol after t steps, with K_d = Z_SB Ξ_d Z_SB*:
    Δ^t = M^t Δ M*^t + Σ_{m,n<t} M^m K_{m-n} M*^n
and its limit Δ∞ = Σ_k M^k (G + G*) M*^k, the solution of a Stein equation.
Environment blocks are returned in the Ξ-gauge.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Union
from warnings import warn

import numpy as np

from fermiflux.common.PeriodicGrid import PeriodicGrid, suggest_grid_size
from fermiflux.common.utils import TOL_SP, TOL_STEIN, dagger, solve_stein, spectral_radius, stein_residual
from fermiflux.model.BlockUnitary import BlockUnitary, validate_sample
from fermiflux.model.ReservoirSymbol import ReservoirSymbol
from fermiflux.scattering.ScatteringMatrix import scattering_matrices

logger = logging.getLogger(__name__)

_STATE_SLACK = 1e-10


@dataclass(frozen=True)
class SteadySampleState:
    delta: np.ndarray
    G: np.ndarray
    residual: float
    spectrum: np.ndarray

    @property
    def is_state(self) -> bool:
        return bool(self.spectrum[0] >= -_STATE_SLACK and self.spectrum[-1] <= 1 + _STATE_SLACK)


def _coupled_blocks(Z: BlockUnitary, res: ReservoirSymbol, d: int) -> np.ndarray:
    return Z.Z_SB @ res.block(d) @ dagger(Z.Z_SB)


def steady_generator(Z: BlockUnitary, res: ReservoirSymbol) -> np.ndarray:
    """
    G = ½ Z_SB Ξ_0 Z_SB* + Σ_{l=1}^{L_Ξ} M^l Z_SB Ξ_l Z_SB*

    Parameters:
    - Z: block unitary
    - res: reservoir symbol

    Returns:
        G
    """
    G = 0.5 * _coupled_blocks(Z, res, 0)
    power = np.eye(Z.d_S, dtype=np.complex128)
    for l in range(1, res.band + 1):
        power = power @ Z.M
        G = G + power @ _coupled_blocks(Z, res, l)
    return G


def steady_sample(
        Z: BlockUnitary,
        res: ReservoirSymbol,
        tol_sp: float = TOL_SP,
        tol_stein: float = TOL_STEIN
) -> SteadySampleState:
    """
    asymptotic sample symbol Δ∞

    Parameters:
    - Z: block unitary
    - res: reservoir symbol
    - tol_sp: spectral radius margin
    - tol_stein: Stein residual bound

    Returns:
        Δ∞ together with its generator, fixed point residual and spectrum
    """
    G = steady_generator(Z, res)
    RHS = G + dagger(G)
    delta = solve_stein(Z.M, RHS, tol_sp=tol_sp, tol_stein=tol_stein)
    residual = stein_residual(Z.M, delta, RHS)
    spectrum = np.linalg.eigvalsh(delta)
    state = SteadySampleState(delta, G, residual, spectrum)
    if not state.is_state:
        warn(f"Δ∞ spectrum [{spectrum[0]:.3e}, {spectrum[-1]:.3e}] leaves [0, 1]")
    logger.debug("steady sample: residual=%.3e spectrum=[%.6f, %.6f]", residual, spectrum[0], spectrum[-1])
    return state


def _stein_partial(M: np.ndarray, K: np.ndarray, count: int) -> np.ndarray:
    # Σ_{n<count} M^n K M*^n
    total = np.zeros_like(K, dtype=np.complex128)
    term = K.astype(np.complex128)
    Mh = dagger(M)
    for _ in range(count):
        total = total + term
        term = M @ term @ Mh
    return total


def _time_evolved(
        Z: BlockUnitary,
        res: ReservoirSymbol,
        delta0: Union[float, np.ndarray],
        t: int,
        band: int
) -> np.ndarray:
    assert int(t) == t and t >= 0, f"time must be a non-negative integer, got {t}"
    t = int(t)
    delta0 = validate_sample(delta0, Z.d_S)
    Mt = np.linalg.matrix_power(Z.M, t)
    delta = Mt @ delta0 @ dagger(Mt)
    power = np.eye(Z.d_S, dtype=np.complex128)
    for d in range(0, min(band, t - 1) + 1):
        if d > 0:
            power = power @ Z.M
        term = power @ _stein_partial(Z.M, _coupled_blocks(Z, res, d), t - d)
        delta = delta + (term if d == 0 else term + dagger(term))
    return 0.5 * (delta + dagger(delta))


def sample_at_time(Z: BlockUnitary, res: ReservoirSymbol, delta0: Union[float, np.ndarray], t: int) -> np.ndarray:
    """
    exact sample symbol Δ^t

    Parameters:
    - Z: block unitary
    - res: reservoir symbol
    - delta0: initial sample symbol, scalar or matrix
    - t: number of steps

    Returns:
        Δ^t
    """
    return _time_evolved(Z, res, delta0, t, res.band)


def sample_at_time_ris(Z: BlockUnitary, res: ReservoirSymbol, delta0: Union[float, np.ndarray], t: int) -> np.ndarray:
    """
    repeated interaction approximation of Δ^t, keeping only the diagonal Ξ_0 term

    Parameters:
    - Z: block unitary
    - res: reservoir symbol
    - delta0: initial sample symbol, scalar or matrix
    - t: number of steps

    Returns:
        Δ^t_RIS
    """
    return _time_evolved(Z, res, delta0, t, 0)


def xi_infty(Z: BlockUnitary, res: ReservoirSymbol, theta: Union[float, np.ndarray], tol_sp: float = TOL_SP) -> np.ndarray:
    """
    asymptotic environment symbol Ξ̂∞(θ) = Ŷ(θ) Ξ̂(θ) Ŷ(θ)*

    Parameters:
    - Z: block unitary
    - res: reservoir symbol
    - theta: angle or array of angles
    - tol_sp: resolvent conditioning bound

    Returns:
        Hermitian matrix, or a stack with the angle index first
    """
    scalar = np.ndim(theta) == 0
    Y = scattering_matrices(Z, theta, tol_sp=tol_sp)
    xi = np.atleast_1d(np.asarray(theta, dtype=float))
    value = Y @ res.xi_hat(xi) @ dagger(Y)
    value = 0.5 * (value + dagger(value))
    return value[0] if scalar else value


def default_grid(Z: BlockUnitary, res: ReservoirSymbol) -> PeriodicGrid:
    # resolves both the reservoir band and the resolvent poles
    size = suggest_grid_size(spectral_radius(Z.M))
    while size <= 2 * res.band:
        size *= 2
    return PeriodicGrid(size)


def xi_infty_blocks(
        Z: BlockUnitary,
        res: ReservoirSymbol,
        grid: Optional[PeriodicGrid] = None,
        m_values: Iterable[int] = (0,),
        tol_sp: float = TOL_SP
) -> dict[int, np.ndarray]:
    """
    Fourier blocks Ξ∞_m of the asymptotic environment symbol by quadrature

    Parameters:
    - Z: block unitary
    - res: reservoir symbol
    - grid: periodic grid, sized from the spectral radius of M when omitted
    - m_values: requested frequencies
    - tol_sp: resolvent conditioning bound

    Returns:
        map m -> Ξ∞_m
    """
    grid = default_grid(Z, res) if grid is None else grid
    samples = xi_infty(Z, res, grid.nodes, tol_sp=tol_sp)
    return {int(m): grid.fourier_coefficient(samples, int(m)) for m in m_values}


def xi_infty_zero_block(
        Z: BlockUnitary,
        res: ReservoirSymbol,
        steady: Optional[SteadySampleState] = None,
        tol_sp: float = TOL_SP,
        tol_stein: float = TOL_STEIN
) -> np.ndarray:
    """
    quadrature free diagonal block
        Ξ∞_0 = C Ξ_0 C* + Σ_{l=1}^{L_Ξ} (Y_l Ξ_l C* + h.c.) + Z_BS Δ∞ Z_BS*

    Parameters:
    - Z: block unitary
    - res: reservoir symbol
    - steady: precomputed Δ∞, computed when omitted
    - tol_sp: spectral radius margin
    - tol_stein: Stein residual bound

    Returns:
        Ξ∞_0
    """
    Ch = dagger(Z.C)
    block = Z.C @ res.block(0) @ Ch
    if Z.is_decoupled:
        return 0.5 * (block + dagger(block))
    if steady is None:
        steady = steady_sample(Z, res, tol_sp=tol_sp, tol_stein=tol_stein)
    left = Z.Z_BS
    for l in range(1, res.band + 1):
        term = left @ Z.Z_SB @ res.block(l) @ Ch
        block = block + term + dagger(term)
        left = left @ Z.M
    block = block + Z.Z_BS @ steady.delta @ dagger(Z.Z_BS)
    return 0.5 * (block + dagger(block))


def env_block(
        Z: BlockUnitary,
        res: ReservoirSymbol,
        n: int,
        m: int,
        grid: Optional[PeriodicGrid] = None,
        tol_sp: float = TOL_SP
) -> np.ndarray:
    """
    block (n, m) of the asymptotic environment symbol in the Ξ-gauge

    - n, m >= 0: Ξ_{m-n}, the incoming region is untouched
    - n < 0 <= m: Σ_l Y_l Ξ_{l+m-n}
    - n, m < 0: Ξ∞_{m-n}
    - n >= 0 > m: adjoint of block (m, n)

    Parameters:
    - Z: block unitary
    - res: reservoir symbol
    - n: row site
    - m: column site
    - grid: quadrature grid for off diagonal outgoing blocks
    - tol_sp: spectral radius margin

    Returns:
        d_B x d_B block
    """
    n, m = int(n), int(m)
    if n >= 0 and m >= 0:
        return res.block(m - n).copy()
    if n >= 0 > m:
        return dagger(env_block(Z, res, m, n, grid=grid, tol_sp=tol_sp))
    if m >= 0:
        shift = m - n
        block = np.zeros((Z.d_B, Z.d_B), dtype=np.complex128)
        if shift <= res.band:
            block = block + Z.C @ res.block(shift)
        left = Z.Z_BS
        for l in range(1, res.band - shift + 1):
            block = block + left @ Z.Z_SB @ res.block(l + shift)
            left = left @ Z.M
        return block
    if m == n:
        return xi_infty_zero_block(Z, res, tol_sp=tol_sp)
    return xi_infty_blocks(Z, res, grid=grid, m_values=[m - n], tol_sp=tol_sp)[m - n]
