import numpy as np
import pytest
from scipy.stats import unitary_group
from sklearn.exceptions import NotFittedError

from fermiflux.common.exceptions import KalmanFailed, NotSimple, UnresolvedSplitting
from fermiflux.entropy.EntropyProduction import entropy_constant_density
from fermiflux.model.BlockUnitary import CouplingSpec, build_block_unitary
from fermiflux.model.ReservoirSymbol import Density, ReservoirSymbol, diagonal_projectors
from fermiflux.perturbation.SmallCoupling import (
    SmallCouplingExpansion,
    alpha_sweep,
    circuit_conductances,
    circuit_transmission,
    currents_leading,
    entropy_leading,
    leading_current_matrix,
    splitting,
    star_circuit,
    steady_sample_leading,
)


def random_spec(d_S: int = 3, d_B: int = 2, seed: int = 7) -> CouplingSpec:
    rng = np.random.default_rng(seed)
    W = unitary_group.rvs(d_S, random_state=seed)
    A = rng.normal(size=(d_S, d_B)) + 1j * rng.normal(size=(d_S, d_B))
    return CouplingSpec(W, A / np.linalg.norm(A, 2), 0.1)


@pytest.fixture
def flat_reservoirs():
    return ReservoirSymbol.from_densities(diagonal_projectors(2), [Density.constant(0.8), Density.constant(0.3)])


def test_cycle_splitting_is_simple(cycle_model):
    spec, _ = cycle_model
    split = splitting(spec)
    assert split.simple
    assert len(split.groups) == spec.d_S
    assert np.all(split.weights > 0)
    assert np.all((split.phases >= 0) & (split.phases < 2 * np.pi))
    np.testing.assert_allclose(sum(split.projectors), np.eye(spec.d_S), atol=1e-10)


def test_degenerate_splitting_is_rejected():
    spec = CouplingSpec(np.eye(2), np.eye(2), 0.1)
    with pytest.raises(UnresolvedSplitting):
        splitting(spec)


def test_splitting_needs_kalman():
    spec = CouplingSpec(np.diag([1.0, -1.0]), np.array([[1.0], [0.0]]), 0.1)
    with pytest.raises(KalmanFailed):
        splitting(spec)


def test_degenerate_group_with_resolved_weights():
    """a repeated eigenvalue of W is fine as long as AA* splits it"""
    spec = CouplingSpec(np.eye(2), np.diag([1.0, 0.5]), 0.1)
    split = splitting(spec)
    assert not split.simple
    np.testing.assert_allclose(np.sort(split.weights), [0.25, 1.0])
    with pytest.raises(NotSimple):
        circuit_conductances(spec, ReservoirSymbol.equilibrium(0.5, diagonal_projectors(2)), split)


def test_leading_currents_are_conserved(make_reservoirs):
    spec = random_spec()
    res = make_reservoirs(d_B=2, seed=1, band=1)
    J2 = currents_leading(spec, res, splitting(spec))
    assert abs(J2.sum()) <= 1e-12


def test_equilibrium_leading_order():
    spec = random_spec(seed=3)
    res = ReservoirSymbol.equilibrium(0.4, diagonal_projectors(2))
    split = splitting(spec)
    np.testing.assert_allclose(steady_sample_leading(spec, res, split), 0.4 * np.eye(3), atol=1e-12)
    np.testing.assert_allclose(leading_current_matrix(spec, res, split), np.zeros((2, 2)), atol=1e-12)


def test_circuits_reproduce_leading_currents(cycle_model):
    spec, res = cycle_model
    split = splitting(spec)
    circuits = star_circuit(spec, res, split)
    total = np.sum([circuit.currents for circuit in circuits], axis=0)
    np.testing.assert_allclose(total, currents_leading(spec, res, split), atol=1e-12)
    # every momentum contributes |v_+|² over its two eigenvectors
    assert total[1] == pytest.approx(0.8 * 0.5, abs=1e-12)


def test_circuit_transmission_is_symmetric(cycle_model):
    spec, res = cycle_model
    C2 = circuit_transmission(spec, res, splitting(spec))
    np.testing.assert_allclose(C2, C2.T, atol=1e-14)
    assert C2[0, 1] == pytest.approx(0.5, abs=1e-12)


def test_expansion_fit(cycle_model):
    spec, res = cycle_model
    expansion = SmallCouplingExpansion().fit(spec, res)
    assert len(expansion.circuits_) == 16
    assert expansion.entropy_leading_ == pytest.approx(0.8 * np.log(9.0), abs=1e-10)
    assert expansion.delta_leading_.shape == (16, 16)


def test_expansion_without_rank_one_reservoirs():
    spec = random_spec(d_S=3, d_B=3, seed=5)
    res = ReservoirSymbol.from_densities(
        [np.diag([1.0, 1.0, 0.0]), np.diag([0.0, 0.0, 1.0])], [Density.constant(0.6), Density.constant(0.2)]
    )
    expansion = SmallCouplingExpansion().fit(spec, res)
    assert expansion.circuits_ is None
    assert expansion.entropy_leading_ is None
    assert abs(expansion.currents_leading_.sum()) <= 1e-12


def test_alpha_sweep_orders(flat_reservoirs):
    """currents and σ⁺ are α² times their leading terms up to O(α⁴), Δ∞ reaches its limit at O(α²)"""
    report = alpha_sweep(random_spec(), flat_reservoirs)
    assert report.slopes["currents"] == pytest.approx(4.0, abs=0.5)
    assert report.slopes["delta"] == pytest.approx(2.0, abs=0.4)
    assert report.slopes["entropy"] == pytest.approx(4.0, abs=0.5)
    assert report.entropy_residual is not None
    rows = report.rows()
    assert len(rows) == 3
    assert {"alpha", "delta_residual", "current_residual", "sigma", "sigma2", "J_1", "J2_1"} <= set(rows[0])


def test_expansion_sweep_requires_fit():
    with pytest.raises(NotFittedError):
        SmallCouplingExpansion().sweep()


def test_expansion_params():
    with pytest.raises(AssertionError):
        SmallCouplingExpansion(tol_cluster=0.0)


def test_leading_entropy_matches_weak_coupling(cycle_model):
    """σ⁺(α)/α² at α = 0.02 lies within ten percent of the circuit dissipation"""
    spec, res = cycle_model
    leading = entropy_leading(spec, res, splitting(spec))
    sigma = entropy_constant_density(build_block_unitary(spec.with_alpha(0.02)), res)
    assert sigma > 0.0
    assert sigma / 0.02 ** 2 == pytest.approx(leading, rel=0.1)
