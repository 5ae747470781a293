import numpy as np
import pytest
import scipy.linalg

from fermiflux.common.exceptions import NotHermitian, SpectralRadiusTooLarge, SpectrumOutOfRange
from fermiflux.common.merging import merge_objects
from fermiflux.common.utils import (
    as_matrix,
    cluster_eigenvalues,
    dagger,
    general_eig,
    herm_eig,
    hermitian_function,
    log_odds,
    matrix_log_clamped,
    numerical_rank,
    solve_stein,
    spectral_radius,
    stein_residual,
)


def _random_hermitian(d, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return X + dagger(X)


def _contraction(d, rho, seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return rho * M / spectral_radius(M)


def test_as_matrix_promotes_scalars():
    """a scalar becomes a 1x1 complex matrix"""
    X = as_matrix(0.5)
    assert X.shape == (1, 1)
    assert X.dtype == np.complex128


def test_as_matrix_rejects_non_finite():
    with pytest.raises(AssertionError):
        as_matrix([[1.0, np.nan], [0.0, 1.0]])


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        herm_eig(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_hermitian_function_matches_expm():
    """functional calculus agrees with the matrix exponential"""
    H = _random_hermitian(4, seed=0)
    np.testing.assert_allclose(hermitian_function(H, np.exp), scipy.linalg.expm(H), atol=1e-10)


def test_log_odds_diagonal():
    H = np.diag([0.25, 0.5])
    np.testing.assert_allclose(log_odds(H, eps_clip=1e-7), np.diag([np.log(1 / 3), 0.0]), atol=1e-14)


def test_matrix_log_clamped_rejects_boundary_spectrum():
    with pytest.raises(SpectrumOutOfRange):
        matrix_log_clamped(np.diag([0.0, 0.5]), eps_clip=1e-7)


def test_matrix_log_clamped_clamps_within_slack():
    """eigenvalues within tol_clip below eps_clip are clamped onto it"""
    value = matrix_log_clamped(np.diag([1e-7 - 1e-10, 0.5]), eps_clip=1e-7)
    np.testing.assert_allclose(np.diag(value).real, [np.log(1e-7), np.log(0.5)])


def test_solve_stein_matches_series():
    M = _contraction(5, 0.8, seed=1)
    RHS = _random_hermitian(5, seed=2)
    V = solve_stein(M, RHS)
    series = np.zeros_like(V)
    term = RHS.astype(np.complex128)
    for _ in range(400):
        series += term
        term = M @ term @ dagger(M)
    np.testing.assert_allclose(V, series, atol=1e-9)
    assert stein_residual(M, V, RHS) <= 1e-10 * np.linalg.norm(RHS)
    np.testing.assert_allclose(V, dagger(V))


def test_solve_stein_rejects_unit_spectral_radius():
    with pytest.raises(SpectralRadiusTooLarge):
        solve_stein(np.eye(3), np.eye(3))


def test_cluster_eigenvalues_is_transitive():
    groups = cluster_eigenvalues(np.array([0.0, 0.6e-8, 1.2e-8, 1.0]), tol_cluster=1e-8)
    assert groups == [[0, 1, 2], [3]]


def test_merge_objects_groups_components():
    groups = merge_objects([1, 2, 10, 11, 20], lambda a, b: abs(a - b) <= 1)
    assert groups == [[0, 1], [2, 3], [4]]


def test_general_eig_biorthogonal():
    """left vectors are normalized against the right ones"""
    M = _contraction(4, 0.7, seed=3)
    eig = general_eig(M)
    overlaps = np.einsum("ij,ij->j", np.conj(eig.left), eig.right)
    np.testing.assert_allclose(overlaps, np.ones(4), atol=1e-10)
    np.testing.assert_allclose(M @ eig.right, eig.right * eig.eigenvalues, atol=1e-10)
    assert eig.simple.all()


def test_numerical_rank():
    K = np.outer([1.0, 2.0, 3.0], [1.0, 0.0, 1.0])
    assert numerical_rank(K) == 1
    assert numerical_rank(np.zeros((3, 3))) == 0
    assert numerical_rank(np.eye(3)) == 3
