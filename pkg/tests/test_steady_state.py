import numpy as np
import pytest

from fermiflux.common.PeriodicGrid import PeriodicGrid
from fermiflux.common.exceptions import SpectralRadiusTooLarge
from fermiflux.common.utils import dagger, stein_residual
from fermiflux.model.BlockUnitary import CouplingSpec, build_block_unitary
from fermiflux.model.ReservoirSymbol import Density, ReservoirSymbol, diagonal_projectors
from fermiflux.steady.SteadyState import (
    default_grid,
    env_block,
    sample_at_time,
    sample_at_time_ris,
    steady_sample,
    xi_infty,
    xi_infty_blocks,
    xi_infty_zero_block,
)


def test_steady_sample_solves_fixed_point(fast_model):
    Z, res = fast_model
    steady = steady_sample(Z, res)
    RHS = steady.G + dagger(steady.G)
    assert stein_residual(Z.M, steady.delta, RHS) <= 1e-10
    assert steady.is_state
    np.testing.assert_allclose(steady.delta, dagger(steady.delta))


def test_equilibrium_steady_sample_is_scalar(make_block_unitary):
    """Ξ̂ ≡ f gives Δ∞ = f because Z_SB Z_SB* = 1 - M M*"""
    Z = make_block_unitary(d_B=2, d_S=3, seed=21)
    res = ReservoirSymbol.equilibrium(0.35, diagonal_projectors(2))
    np.testing.assert_allclose(steady_sample(Z, res).delta, 0.35 * np.eye(3), atol=1e-12)


def test_steady_sample_needs_mixing():
    spec = CouplingSpec(np.diag([1.0, -1.0]), np.array([[1.0], [0.0]]), 0.3)
    res = ReservoirSymbol.equilibrium(0.5, diagonal_projectors(1))
    with pytest.raises(SpectralRadiusTooLarge):
        steady_sample(build_block_unitary(spec), res)


def test_sample_at_time_starts_and_converges(fast_model):
    Z, res = fast_model
    delta0 = np.diag([0.1, 0.5, 0.9])
    np.testing.assert_allclose(sample_at_time(Z, res, delta0, 0), delta0)
    np.testing.assert_allclose(sample_at_time(Z, res, delta0, 400), steady_sample(Z, res).delta, atol=1e-10)


def test_ris_exact_for_frequency_flat_reservoirs(make_block_unitary, make_reservoirs):
    Z = make_block_unitary(d_B=2, d_S=3, seed=8)
    res = make_reservoirs(d_B=2, seed=4, band=0)
    for t in range(0, 101, 10):
        np.testing.assert_allclose(sample_at_time_ris(Z, res, 0.5, t), sample_at_time(Z, res, 0.5, t), atol=1e-12)


def test_ris_differs_with_time_correlations(fast_model):
    """a non zero Ξ_1 breaks the repeated interaction picture"""
    Z, res = fast_model
    gaps = [
        np.linalg.norm(sample_at_time_ris(Z, res, 0.5, t) - sample_at_time(Z, res, 0.5, t))
        for t in range(21)
    ]
    assert max(gaps) > 1e-6
    assert gaps[0] == 0.0 and gaps[1] == 0.0


def test_xi_infty_is_unitarily_equivalent(fast_model):
    """Ŷ Ξ̂ Ŷ* has the spectrum of Ξ̂ at every frequency"""
    Z, res = fast_model
    thetas = PeriodicGrid(32).nodes
    np.testing.assert_allclose(
        np.linalg.eigvalsh(xi_infty(Z, res, thetas)), np.linalg.eigvalsh(res.xi_hat(thetas)), atol=1e-12
    )


def test_zero_block_matches_quadrature(fast_model):
    Z, res = fast_model
    quadrature = xi_infty_blocks(Z, res, m_values=[0, 2])
    np.testing.assert_allclose(xi_infty_zero_block(Z, res), quadrature[0], atol=1e-10)
    assert set(quadrature) == {0, 2}


def test_default_grid_resolves_band(fast_model):
    Z, res = fast_model
    grid = default_grid(Z, res)
    assert len(grid) >= 512
    assert len(grid) > 2 * res.band


def test_env_block_cases(fast_model):
    Z, res = fast_model
    np.testing.assert_allclose(env_block(Z, res, 2, 3), res.block(1))
    np.testing.assert_allclose(env_block(Z, res, 1, -2), dagger(env_block(Z, res, -2, 1)))
    np.testing.assert_allclose(env_block(Z, res, -1, -1), xi_infty_zero_block(Z, res))
    # beyond the reservoir band the outgoing-incoming correlations vanish
    np.testing.assert_allclose(env_block(Z, res, -1, 1), np.zeros((2, 2)))
    np.testing.assert_allclose(env_block(Z, res, -1, 0), Z.C @ res.block(1))


def test_env_block_equilibrium_is_translation_invariant(make_block_unitary):
    Z = make_block_unitary(d_B=2, d_S=3, seed=2)
    res = ReservoirSymbol.from_densities(diagonal_projectors(2), [Density.constant(0.3)] * 2)
    np.testing.assert_allclose(env_block(Z, res, -3, -3), 0.3 * np.eye(2), atol=1e-12)
    np.testing.assert_allclose(env_block(Z, res, -3, -1, grid=PeriodicGrid(512)), np.zeros((2, 2)), atol=1e-12)
