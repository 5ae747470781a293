"""
steady state particle currents into the reservoirs

J_X = tr[X ∫ (Ŷ Ξ̂ Ŷ* - Ξ̂) dθ/2π] for an observable X commuting with every
reservoir projector. J_k > 0 means particles enter reservoir k.
"""
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from fermiflux.common.PeriodicGrid import PeriodicGrid
from fermiflux.common.exceptions import NotHermitian, ObservableNotBlockDiagonal
from fermiflux.common.utils import TOL_HERM, TOL_SP, TOL_STEIN, as_matrix, dagger
from fermiflux.model.BlockUnitary import BlockUnitary
from fermiflux.model.ReservoirSymbol import ReservoirSymbol
from fermiflux.steady.SteadyState import SteadySampleState, default_grid, xi_infty, xi_infty_zero_block

if TYPE_CHECKING:
    from fermiflux.oracle.LatticeOracle import LatticeState

logger = logging.getLogger(__name__)

CONSERVATION_TOL = 1e-10


@dataclass
class CurrentReport:
    J: np.ndarray
    thetas: np.ndarray
    integrand: np.ndarray
    conservation_defect: float
    ranks: list[int] = field(default_factory=list)
    method: str = "quadrature"

    @property
    def conserved(self) -> bool:
        return self.conservation_defect <= CONSERVATION_TOL

    def to_dict(self) -> dict:
        return {
            "J": [float(j) for j in self.J],
            "conservation_defect": float(self.conservation_defect),
            "ranks": list(self.ranks),
            "method": self.method,
            "grid_size": int(self.thetas.size),
        }


def check_observable(X: np.ndarray, projectors: list[np.ndarray], tol: float = TOL_HERM) -> np.ndarray:
    """
    validate a flux observable

    Parameters:
    - X: candidate observable on the environment cell
    - projectors: reservoir projectors
    - tol: tolerance on Hermiticity and on the commutators

    Returns:
        X as a complex matrix
    """
    X = as_matrix(X, "observable")
    scale = max(float(np.linalg.norm(X)), 1.0)
    if np.linalg.norm(X - dagger(X)) > tol * scale:
        raise NotHermitian("flux observable is not Hermitian")
    for k, P in enumerate(projectors):
        if np.linalg.norm(X @ P - P @ X) > tol * scale:
            raise ObservableNotBlockDiagonal(f"flux observable does not commute with projector {k}")
    return X


def _excess(Z: BlockUnitary, res: ReservoirSymbol, grid: PeriodicGrid, tol_sp: float) -> np.ndarray:
    return xi_infty(Z, res, grid.nodes, tol_sp=tol_sp) - res.xi_hat(grid.nodes)


def flux_general(
        Z: BlockUnitary,
        res: ReservoirSymbol,
        X: np.ndarray,
        grid: Optional[PeriodicGrid] = None,
        tol_sp: float = TOL_SP
) -> float:
    """
    steady flux of a reservoir observable

    Parameters:
    - Z: block unitary
    - res: reservoir symbol
    - X: Hermitian observable commuting with every Π_k
    - grid: quadrature grid, sized from the spectral radius of M when omitted
    - tol_sp: resolvent conditioning bound

    Returns:
        J_X
    """
    X = check_observable(X, res.projectors)
    grid = default_grid(Z, res) if grid is None else grid
    excess = grid.quadrature(_excess(Z, res, grid, tol_sp))
    return float(np.real(np.trace(X @ excess)))


def currents(
        Z: BlockUnitary,
        res: ReservoirSymbol,
        grid: Optional[PeriodicGrid] = None,
        tol_sp: float = TOL_SP
) -> CurrentReport:
    """
    per reservoir currents with their frequency resolved integrand
        ĵ_k(θ) = tr[Π_k (Ŷ Ξ̂ Ŷ* - Ξ̂)(θ)]
    which in the rank one case is Σ_k' C_{k,k'}(θ)(f_k'(θ) - f_k(θ))

    Parameters:
    - Z: block unitary
    - res: reservoir symbol
    - grid: quadrature grid, sized from the spectral radius of M when omitted
    - tol_sp: resolvent conditioning bound

    Returns:
        current report
    """
    grid = default_grid(Z, res) if grid is None else grid
    excess = _excess(Z, res, grid, tol_sp)
    integrand = np.stack([np.real(np.einsum("nij,ji->n", excess, P)) for P in res.projectors])
    J = integrand.mean(axis=1)
    defect = float(abs(J.sum()))
    logger.debug("currents on %r: J=%s defect=%.3e", grid, np.array2string(J, precision=6), defect)
    return CurrentReport(J, grid.nodes, integrand, defect, ranks=res.ranks)


def currents_time_domain(
        Z: BlockUnitary,
        res: ReservoirSymbol,
        steady: Optional[SteadySampleState] = None,
        tol_sp: float = TOL_SP,
        tol_stein: float = TOL_STEIN
) -> CurrentReport:
    """
    currents J_k = tr[Π_k (Ξ∞_0 - Ξ_0)] from the quadrature free diagonal block

    Parameters:
    - Z: block unitary
    - res: reservoir symbol
    - steady: precomputed Δ∞
    - tol_sp: spectral radius margin
    - tol_stein: Stein residual bound

    Returns:
        current report without integrand samples
    """
    excess = xi_infty_zero_block(Z, res, steady=steady, tol_sp=tol_sp, tol_stein=tol_stein) - res.block(0)
    J = np.array([float(np.real(np.trace(P @ excess))) for P in res.projectors])
    return CurrentReport(
        J, np.zeros(0), np.zeros((res.n_B, 0)), float(abs(J.sum())), ranks=res.ranks, method="time_domain"
    )


def flux_difference_blocks(Z: BlockUnitary, P: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    non vanishing blocks of 𝔘*(1⊗P ⊕ 0)𝔘 - (1⊗P ⊕ 0)

    Parameters:
    - Z: block unitary
    - P: reservoir observable on one cell

    Returns:
        (site 0 block C*PC - P, site 0 to sample block C*P Z_BS, sample block Z_BS* P Z_BS)
    """
    Ch = dagger(Z.C)
    return Ch @ P @ Z.C - P, Ch @ P @ Z.Z_BS, dagger(Z.Z_BS) @ P @ Z.Z_BS


def finite_time_flux(lattice: "LatticeState", Z: BlockUnitary, k: int) -> float:
    """
    expected number of particles entering reservoir k in the next step

    Parameters:
    - lattice: truncated lattice state at time t
    - Z: block unitary the lattice evolves with
    - k: reservoir index

    Returns:
        tr[T_tot(t) (𝔘*(1⊗Π_k ⊕ 0)𝔘 - 1⊗Π_k ⊕ 0)]
    """
    lattice.check_horizon()
    assert 0 <= k < len(lattice.projectors), f"reservoir index {k} out of range"
    site, cross, sample = flux_difference_blocks(Z, lattice.projectors[k])
    T00 = lattice.block(0, 0)
    TS0 = lattice.block(None, 0)
    TSS = lattice.block(None, None)
    value = np.trace(T00 @ site) + 2 * np.real(np.trace(TS0 @ cross)) + np.trace(TSS @ sample)
    return float(np.real(value))
