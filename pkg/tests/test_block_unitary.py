import numpy as np
import pytest
import scipy.linalg
from scipy.stats import unitary_group

from fermiflux.common.exceptions import NotHermitian, NotUnitary, SpectrumOutOfRange
from fermiflux.common.utils import TOL_SP
from fermiflux.model.BlockUnitary import (
    BlockUnitary,
    CouplingSpec,
    build_block_unitary,
    check_kalman,
    check_sp,
    validate_sample,
)


def _random_spec(d_S, d_B, alpha, seed):
    rng = np.random.default_rng(seed)
    W = unitary_group.rvs(d_S, random_state=seed)
    A = rng.normal(size=(d_S, d_B)) + 1j * rng.normal(size=(d_S, d_B))
    return CouplingSpec(W, A, alpha)


@pytest.mark.parametrize("seed", range(5))
def test_build_block_unitary_is_unitary(seed):
    Z = build_block_unitary(_random_spec(4, 2, 0.7, seed))
    assert Z.unitarity_residual() <= 1e-12
    assert Z.C.shape == (2, 2)
    assert Z.M.shape == (4, 4)


def test_zero_coupling_is_decoupled():
    spec = _random_spec(3, 2, 0.0, seed=7)
    Z = build_block_unitary(spec)
    assert Z.is_decoupled
    np.testing.assert_allclose(Z.C, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(Z.M, spec.W, atol=1e-15)
    assert abs(check_sp(Z.M) - 1.0) < 1e-12


def test_small_coupling_shrinks_sample_block():
    """M(α) = W cos(α√(AA*)) is a strict contraction once the orbit condition holds"""
    spec = _random_spec(3, 2, 0.3, seed=1)
    assert check_kalman(spec.W, spec.A)
    assert check_sp(build_block_unitary(spec).M) < 1.0


def test_from_matrix_splits_blocks():
    U = unitary_group.rvs(5, random_state=3)
    Z = BlockUnitary.from_matrix(U, 2)
    np.testing.assert_allclose(Z.as_matrix(), U)
    assert (Z.d_B, Z.d_S) == (2, 3)


def test_non_unitary_blocks_rejected():
    with pytest.raises(NotUnitary):
        BlockUnitary.from_matrix(2 * np.eye(3), 1)


def test_coupling_spec_rejects_non_unitary_w():
    with pytest.raises(NotUnitary):
        CouplingSpec(np.array([[1.0, 1.0], [0.0, 1.0]]), np.ones((2, 1)), 0.1)


def test_kalman_fails_on_invariant_subspace():
    W = np.diag([1.0, -1.0])
    A = np.array([[1.0], [0.0]])
    assert not check_kalman(W, A)


def test_with_phase_and_alpha():
    spec = _random_spec(3, 1, 0.2, seed=2)
    shifted = spec.with_phase(np.pi / 2)
    np.testing.assert_allclose(shifted.W, 1j * spec.W)
    assert spec.with_alpha(0.05).alpha == 0.05


def test_validate_sample_scalar():
    np.testing.assert_allclose(validate_sample(0.3, 3), 0.3 * np.eye(3))


def test_validate_sample_rejects_out_of_range():
    with pytest.raises(SpectrumOutOfRange):
        validate_sample(1.5, 2)


def test_validate_sample_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        validate_sample(np.array([[0.5, 0.2], [0.0, 0.5]]), 2)


def test_sample_block_is_even_in_coupling():
    spec = _random_spec(4, 2, 0.35, seed=9)
    plus = build_block_unitary(spec)
    minus = build_block_unitary(spec.with_alpha(-0.35))
    np.testing.assert_array_equal(plus.M, minus.M)
    np.testing.assert_array_equal(plus.C, minus.C)
    np.testing.assert_allclose(plus.Z_SB, -minus.Z_SB, atol=1e-15)
    np.testing.assert_allclose(plus.Z_BS, -minus.Z_BS, atol=1e-15)


def _orbit_pair(seed: int) -> CouplingSpec:
    # odd seeds hide the lower half of C^4 from A behind a block diagonal W
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(4, 1)) + 1j * rng.normal(size=(4, 1))
    if seed % 2 == 0:
        return CouplingSpec(unitary_group.rvs(4, random_state=seed), a, 0.4)
    W = scipy.linalg.block_diag(unitary_group.rvs(2, random_state=seed), unitary_group.rvs(2, random_state=seed + 100))
    a[2:] = 0.0
    return CouplingSpec(W, a, 0.4)


def test_kalman_condition_is_mixing_condition():
    """the W-orbit of range A spans C^d exactly when M(α) is a strict contraction"""
    for seed in range(50):
        spec = _orbit_pair(seed)
        rho = check_sp(build_block_unitary(spec).M)
        assert check_kalman(spec.W, spec.A) == (rho < 1 - TOL_SP), f"seed {seed}: ρ(M) = {rho}"
        assert check_kalman(spec.W, spec.A) == (seed % 2 == 0)
