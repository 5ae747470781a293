import numpy as np
import pytest
from scipy.stats import unitary_group

from fermiflux.common.utils import spectral_radius
from fermiflux.model.BlockUnitary import BlockUnitary
from fermiflux.model.ReservoirSymbol import Density, ReservoirSymbol, diagonal_projectors
from fermiflux.presets.CycleWalk import CycleModelParams, build_cycle_model


def haar_block_unitary(d_B: int, d_S: int, seed: int, rho_max: float) -> BlockUnitary:
    # first Haar unitary from seed on whose sample block mixes fast enough
    for s in range(seed, seed + 5000):
        U = unitary_group.rvs(d_B + d_S, random_state=s)
        Z = BlockUnitary.from_matrix(U, d_B)
        if spectral_radius(Z.M) <= rho_max:
            return Z
    raise RuntimeError(f"no Haar sample with spectral radius below {rho_max}")


def random_densities(n_B: int, seed: int, band: int = 0) -> list[Density]:
    rng = np.random.default_rng(seed)
    densities = []
    for _ in range(n_B):
        cos = [rng.uniform(0.25, 0.75)] + list(rng.uniform(-0.08, 0.08, band))
        sin = list(rng.uniform(-0.08, 0.08, band))
        densities.append(Density.fourier(cos, sin))
    return densities


@pytest.fixture
def make_block_unitary():
    def make(d_B: int = 2, d_S: int = 3, seed: int = 0, rho_max: float = 0.9) -> BlockUnitary:
        return haar_block_unitary(d_B, d_S, seed, rho_max)
    return make


@pytest.fixture
def make_reservoirs():
    def make(d_B: int = 2, seed: int = 0, band: int = 0) -> ReservoirSymbol:
        return ReservoirSymbol.from_densities(diagonal_projectors(d_B), random_densities(d_B, seed, band))
    return make


@pytest.fixture
def fast_model(make_block_unitary, make_reservoirs):
    Z = make_block_unitary(d_B=2, d_S=3, seed=11, rho_max=0.9)
    return Z, make_reservoirs(d_B=2, seed=3, band=1)


@pytest.fixture
def very_fast_model(make_block_unitary):
    # two sample modes, spectral radius at most one half
    Z = make_block_unitary(d_B=3, d_S=2, seed=5, rho_max=0.5)
    res = ReservoirSymbol.from_densities(
        diagonal_projectors(3), [Density.constant(0.8), Density.constant(0.5), Density.constant(0.2)]
    )
    return Z, res


@pytest.fixture
def cycle_params():
    return CycleModelParams()


@pytest.fixture
def cycle_model(cycle_params):
    return build_cycle_model(cycle_params)
