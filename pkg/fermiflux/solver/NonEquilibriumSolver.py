"""
non equilibrium steady state of a sample coupled to its reservoirs
"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from fermiflux.common.BaseSolver import BaseSolver
from fermiflux.common.PeriodicGrid import PeriodicGrid
from fermiflux.common.utils import TOL_SP, TOL_STEIN, spectral_radius
from fermiflux.entropy.EntropyProduction import EPS_CLIP, EPS_SYM, EntropyReport, entropy_rate
from fermiflux.model.BlockUnitary import BlockUnitary
from fermiflux.model.ReservoirSymbol import ReservoirSymbol
from fermiflux.steady.SteadyState import SteadySampleState, default_grid, steady_sample
from fermiflux.transport.Currents import CurrentReport, currents, currents_time_domain

logger = logging.getLogger(__name__)


@dataclass
class SteadyReport:
    steady: SteadySampleState
    currents: CurrentReport
    currents_exact: CurrentReport
    entropy: Optional[EntropyReport]
    grid_size: int
    spectral_radius: float

    @property
    def delta(self) -> np.ndarray:
        return self.steady.delta

    @property
    def quadrature_gap(self) -> float:
        # quadrature currents against the exact zero block
        return float(np.max(np.abs(self.currents.J - self.currents_exact.J), initial=0.0))

    def to_dict(self) -> dict:
        summary = {
            "delta_infty": complex_matrix_to_list(self.steady.delta),
            "stein_residual": float(self.steady.residual),
            "delta_spectrum": [float(w) for w in self.steady.spectrum],
            "currents": self.currents.to_dict(),
            "currents_exact": [float(j) for j in self.currents_exact.J],
            "quadrature_gap": self.quadrature_gap,
            "conservation_defect": float(self.currents.conservation_defect),
            "grid_size": int(self.grid_size),
            "spectral_radius": float(self.spectral_radius),
        }
        summary["entropy"] = None if self.entropy is None else self.entropy.to_dict()
        return summary

    def rows(self) -> list[list[float]]:
        """
        θ-resolved integrands, one row per grid node

        Returns:
            rows [θ, ĵ_1, ..., ĵ_nB, entropy integrand]
        """
        rows = []
        for j, theta in enumerate(self.currents.thetas):
            row = [float(theta)] + [float(v) for v in self.currents.integrand[:, j]]
            row.append(float(self.entropy.integrand[j]) if self.entropy is not None else float("nan"))
            rows.append(row)
        return rows


def complex_matrix_to_list(X: np.ndarray) -> list:
    # nested [re, im] pairs
    return [[[float(np.real(v)), float(np.imag(v))] for v in row] for row in np.atleast_2d(X)]


class NonEquilibriumSolver(BaseSolver):
    # steady sample symbol, reservoir currents and entropy production
    def __init__(
            self,
            grid_size: Union[int, str] = "auto",
            with_entropy: bool = True,
            eps_sym: float = EPS_SYM,
            eps_clip: float = EPS_CLIP,
            tol_sp: float = TOL_SP,
            tol_stein: float = TOL_STEIN,
    ):
        """
        Parameters:
        - grid_size: number of quadrature nodes or "auto" to size the grid from ρ(M)
        - with_entropy: whether to compute σ⁺
        - eps_sym: required distance of the reservoir spectrum from 0 and 1 for σ⁺
        - eps_clip: clamp of the logarithms
        - tol_sp: spectral radius margin
        - tol_stein: Stein residual bound

        """
        params = {
            "grid_size": grid_size,
            "with_entropy": with_entropy,
            "eps_sym": eps_sym,
            "eps_clip": eps_clip,
            "tol_sp": tol_sp,
            "tol_stein": tol_stein,
        }
        super().__init__(params)

    @staticmethod
    def validate_params(params: dict):
        """
        validate solver parameters

        Parameters:
        - params: dict containing parameters for the solver

        """
        assert "grid_size" in params
        assert "with_entropy" in params
        assert "eps_sym" in params
        assert "eps_clip" in params
        assert "tol_sp" in params
        assert "tol_stein" in params
        if isinstance(params["grid_size"], str):
            assert params["grid_size"] == "auto"
        else:
            assert int(params["grid_size"]) == params["grid_size"] and params["grid_size"] >= 1
        assert isinstance(params["with_entropy"], bool)
        assert 0.0 < params["eps_sym"] < 0.5
        assert 0.0 < params["eps_clip"] <= params["eps_sym"]
        assert 0.0 < params["tol_sp"] < 1.0
        assert params["tol_stein"] > 0.0

    def grid(self, Z: BlockUnitary, res: ReservoirSymbol) -> PeriodicGrid:
        if self.grid_size == "auto":
            return default_grid(Z, res)
        return PeriodicGrid(int(self.grid_size))

    def fit(self, Z: BlockUnitary, res: ReservoirSymbol):
        """
        compute Δ∞, the currents and σ⁺

        Parameters:
        - Z: block unitary
        - res: reservoir symbol

        Returns:
            self
        """
        assert Z.d_B == res.d_B, f"block unitary acts on d_B={Z.d_B}, reservoirs on d_B={res.d_B}"
        self.Z_ = Z
        self.res_ = res
        self.rho_ = spectral_radius(Z.M)
        self.grid_ = self.grid(Z, res)
        logger.info(
            "non equilibrium solver: d_B=%d d_S=%d n_B=%d rho=%.6f grid=%d",
            Z.d_B, Z.d_S, res.n_B, self.rho_, len(self.grid_)
        )
        self.steady_ = steady_sample(Z, res, tol_sp=self.tol_sp, tol_stein=self.tol_stein)
        self.currents_ = currents(Z, res, self.grid_, tol_sp=self.tol_sp)
        self.currents_exact_ = currents_time_domain(
            Z, res, steady=self.steady_, tol_sp=self.tol_sp, tol_stein=self.tol_stein
        )
        self.entropy_ = None
        if self.with_entropy:
            res.check_bounds(self.grid_, self.eps_sym)
            self.entropy_ = entropy_rate(Z, res, self.grid_, eps_clip=self.eps_clip, tol_sp=self.tol_sp)
        return self

    def report(self) -> SteadyReport:
        self.check_fitted()
        return SteadyReport(
            self.steady_, self.currents_, self.currents_exact_, self.entropy_, len(self.grid_), self.rho_
        )
