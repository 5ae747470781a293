from fermiflux.common.BaseSolver import BaseSolver
from fermiflux.common.PeriodicGrid import PeriodicGrid
from fermiflux.common.exceptions import (
    FermiFluxError,
    ConfigError,
    AssumptionError,
    NumericalError,
)

from fermiflux.model.BlockUnitary import BlockUnitary, CouplingSpec, build_block_unitary
from fermiflux.model.ReservoirSymbol import Density, ReservoirSymbol

from fermiflux.scattering.ScatteringMatrix import scattering_matrix, scattering_matrices, transmission

from fermiflux.steady.SteadyState import steady_sample, sample_at_time, xi_infty

from fermiflux.transport.Currents import currents, currents_time_domain, flux_general

from fermiflux.entropy.EntropyProduction import entropy_rate

from fermiflux.perturbation.SmallCoupling import SmallCouplingExpansion, alpha_sweep
from fermiflux.perturbation.StarCircuit import StarCircuit

from fermiflux.oracle.LatticeOracle import LatticeOracle

from fermiflux.solver.NonEquilibriumSolver import NonEquilibriumSolver

from fermiflux.presets.CycleWalk import CycleModelParams, build_cycle_model

__all__ = [
    "BaseSolver",
    "PeriodicGrid",
    "FermiFluxError",
    "ConfigError",
    "AssumptionError",
    "NumericalError",
    "BlockUnitary",
    "CouplingSpec",
    "build_block_unitary",
    "Density",
    "ReservoirSymbol",
    "scattering_matrix",
    "scattering_matrices",
    "transmission",
    "steady_sample",
    "sample_at_time",
    "xi_infty",
    "currents",
    "currents_time_domain",
    "flux_general",
    "entropy_rate",
    "SmallCouplingExpansion",
    "alpha_sweep",
    "StarCircuit",
    "LatticeOracle",
    "NonEquilibriumSolver",
    "CycleModelParams",
    "build_cycle_model",
]
