"""
entropy production of the non equilibrium steady state

The asymptotic rate is an integral of nodal relative entropies,
    σ⁺ = ∫ S[ŶΞ̂Ŷ* | Ξ̂] + S[1 - ŶΞ̂Ŷ* | 1 - Ξ̂] dθ/2π,
and for rank one reservoirs it equals Σ_k ∫ μ_k ĵ_k dθ/2π with the
log-odds μ_k = log((1 - f_k)/f_k). The finite time rate on the truncated
lattice only needs the log-odds of the initial symbol.
"""
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional
from warnings import warn

import numpy as np

from fermiflux.common.PeriodicGrid import PeriodicGrid
from fermiflux.common.exceptions import NotRankOne
from fermiflux.common.utils import TOL_CLIP, TOL_SP, TOL_STEIN, dagger, log_odds, matrix_log_clamped
from fermiflux.model.BlockUnitary import BlockUnitary
from fermiflux.model.ReservoirSymbol import ReservoirSymbol
from fermiflux.scattering.ScatteringMatrix import mean_transmission
from fermiflux.steady.SteadyState import default_grid, xi_infty

if TYPE_CHECKING:
    from fermiflux.oracle.LatticeOracle import LatticeState

logger = logging.getLogger(__name__)

EPS_SYM = 1e-6
EPS_CLIP = EPS_SYM / 10
KLEIN_TOL = 1e-12


@dataclass
class EntropyReport:
    sigma_plus: float
    sigma_plus_flux_form: Optional[float]
    thetas: np.ndarray
    integrand: np.ndarray
    mu: Optional[np.ndarray]
    min_nodal: float
    max_deviation: float

    @property
    def forms_agree(self) -> Optional[float]:
        if self.sigma_plus_flux_form is None:
            return None
        return abs(self.sigma_plus - self.sigma_plus_flux_form)

    def to_dict(self) -> dict:
        return {
            "sigma_plus": float(self.sigma_plus),
            "sigma_plus_flux_form": None if self.sigma_plus_flux_form is None else float(self.sigma_plus_flux_form),
            "min_nodal": float(self.min_nodal),
            "max_deviation": float(self.max_deviation),
        }


def relative_entropy(A: np.ndarray, B: np.ndarray, eps_clip: float = EPS_CLIP, tol_clip: float = TOL_CLIP) -> float:
    """
    S[A|B] = tr[A (log A - log B)] for symbols with spectrum in (0, 1)

    Parameters:
    - A: Hermitian matrix
    - B: Hermitian matrix
    - eps_clip: clamp of the logarithms
    - tol_clip: slack before a spectrum violation is an error

    Returns:
        relative entropy
    """
    diff = matrix_log_clamped(A, eps_clip, tol_clip) - matrix_log_clamped(B, eps_clip, tol_clip)
    return float(np.real(np.trace(A @ diff)))


def nodal_entropy(A: np.ndarray, B: np.ndarray, eps_clip: float = EPS_CLIP, tol_clip: float = TOL_CLIP) -> float:
    eye = np.eye(A.shape[0])
    return relative_entropy(A, B, eps_clip, tol_clip) + relative_entropy(eye - A, eye - B, eps_clip, tol_clip)


def log_odds_densities(f: np.ndarray, eps_clip: float = EPS_CLIP) -> np.ndarray:
    """
    μ = log((1 - f)/f) with f clamped to [eps_clip, 1 - eps_clip]

    Parameters:
    - f: densities
    - eps_clip: clamp

    Returns:
        log-odds
    """
    f = np.clip(np.asarray(f, dtype=float), eps_clip, 1 - eps_clip)
    return np.log1p(-f) - np.log(f)


def entropy_rate(
        Z: BlockUnitary,
        res: ReservoirSymbol,
        grid: Optional[PeriodicGrid] = None,
        eps_clip: float = EPS_CLIP,
        tol_clip: float = TOL_CLIP,
        tol_sp: float = TOL_SP
) -> EntropyReport:
    """
    asymptotic entropy production rate σ⁺

    Parameters:
    - Z: block unitary
    - res: reservoir symbol with spectrum inside (0, 1)
    - grid: quadrature grid, sized from the spectral radius of M when omitted
    - eps_clip: clamp of the logarithms
    - tol_clip: slack before a spectrum violation is an error
    - tol_sp: resolvent conditioning bound

    Returns:
        entropy report, with the flux form when every projector has rank one
    """
    grid = default_grid(Z, res) if grid is None else grid
    xi = res.xi_hat(grid.nodes)
    xi_inf = xi_infty(Z, res, grid.nodes, tol_sp=tol_sp)
    integrand = np.array([
        nodal_entropy(A, B, eps_clip, tol_clip) for A, B in zip(xi_inf, xi)
    ])
    min_nodal = float(integrand.min())
    if min_nodal < -KLEIN_TOL:
        warn(f"nodal relative entropy {min_nodal:.3e} is negative")
    deviation = float(np.max(np.linalg.norm(xi_inf - xi, ord=2, axis=(1, 2))))
    sigma = float(integrand.mean())

    flux_form, mu = None, None
    if res.rank_one:
        mu = log_odds_densities(res.densities_at(grid.nodes), eps_clip)
        excess = xi_inf - xi
        j_hat = np.stack([np.real(np.einsum("nij,ji->n", excess, P)) for P in res.projectors])
        flux_form = float(np.sum(mu * j_hat, axis=0).mean())
    logger.debug("entropy rate on %r: sigma=%.6e flux form=%s", grid, sigma, flux_form)
    return EntropyReport(sigma, flux_form, grid.nodes, integrand, mu, min_nodal, deviation)


def entropy_constant_density(
        Z: BlockUnitary,
        res: ReservoirSymbol,
        eps_clip: float = EPS_CLIP,
        tol_sp: float = TOL_SP,
        tol_stein: float = TOL_STEIN
) -> float:
    """
    quadrature free σ⁺ for frequency independent rank one reservoirs
        Σ_k Σ_k' μ_k (f_k' - f_k) ∫ C_{k,k'} dθ/2π

    Parameters:
    - Z: block unitary
    - res: frequency flat reservoir symbol
    - eps_clip: clamp of the log-odds
    - tol_sp: spectral radius margin
    - tol_stein: Stein residual bound

    Returns:
        σ⁺
    """
    if not res.rank_one:
        raise NotRankOne(f"constant density entropy needs rank one projectors, got ranks {res.ranks}")
    assert res.frequency_flat, "constant density entropy needs a frequency independent reservoir symbol"
    f = res.densities_at(0.0)
    mu = log_odds_densities(f, eps_clip)
    C = mean_transmission(Z, res.projectors, tol_sp=tol_sp, tol_stein=tol_stein)
    return float(np.sum(mu[:, None] * C * (f[None, :] - f[:, None])))


def lattice_log_odds(state: "LatticeState", eps_clip: float = EPS_CLIP, method: str = "circulant", tol_clip: float = TOL_CLIP) -> np.ndarray:
    """
    log T - log(1 - T) of the initial lattice symbol

    the circulant path applies the log-odds on each of the 2L+1 lattice
    frequencies of the block circulant environment symbol and separately on
    the sample block; the dense path diagonalizes the whole symbol

    Parameters:
    - state: lattice state at t = 0
    - eps_clip: clamp of the logarithms
    - method: "circulant" or "dense"
    - tol_clip: slack before a spectrum violation is an error

    Returns:
        dense log-odds matrix
    """
    assert method in ["circulant", "dense"], f"unknown log-odds method {method!r}"
    if method == "dense":
        return log_odds(state.T, eps_clip, tol_clip)

    N, d_B = state.n_sites, state.d_B
    thetas = 2 * np.pi * np.arange(N) / N
    symbol = np.zeros((N, d_B, d_B), dtype=np.complex128)
    for l, X in state.xi_blocks.items():
        symbol += np.exp(1j * l * thetas)[:, None, None] * X
    nodal = np.stack([log_odds(0.5 * (S + dagger(S)), eps_clip, tol_clip) for S in symbol])
    # block (n, m) of f(T) is K_{(m - n) mod N}
    K = np.fft.fft(nodal, axis=0) / N
    result = np.zeros_like(state.T)
    for n in range(N):
        for m in range(N):
            result[n * d_B:(n + 1) * d_B, m * d_B:(m + 1) * d_B] = K[(m - n) % N]
    sample = state.index(None)
    result[sample, sample] = log_odds(state.delta0, eps_clip, tol_clip)
    return 0.5 * (result + dagger(result))


def finite_time_entropy(initial: np.ndarray, current: np.ndarray, log_odds_initial: np.ndarray, t: int) -> float:
    """
    σ(t) = t⁻¹ tr[(T(0) - T(t)) (log T(0) - log(1 - T(0)))]

    Parameters:
    - initial: T(0)
    - current: T(t)
    - log_odds_initial: log T(0) - log(1 - T(0))
    - t: time

    Returns:
        σ(t), zero at t = 0
    """
    if t == 0:
        return 0.0
    return float(np.real(np.sum((initial - current) * log_odds_initial.T))) / t


def entropy_increment(previous: np.ndarray, current: np.ndarray, log_odds_initial: np.ndarray) -> float:
    """
    S(t+1) - S(t) = tr[(T(t) - T(t+1)) (log T(0) - log(1 - T(0)))]

    Parameters:
    - previous: T(t)
    - current: T(t+1)
    - log_odds_initial: log-odds of T(0)

    Returns:
        entropy produced in one step
    """
    return float(np.real(np.sum((previous - current) * log_odds_initial.T)))


def entropy_vanishes(report: EntropyReport, tol: float = 1e-8) -> bool:
    return report.sigma_plus <= tol

