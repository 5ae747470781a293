"""
coined walk on a cycle of n sites between a left and a right reservoir

The sample space ℓ²({0..n-1}) ⊗ C² carries W = W_1 W_2, the spin dependent
shift x_ν ⊗ e_τ -> x_{ν+τ} ⊗ e_τ after the coin
    C = [[e^{iβ} cos φ, sin φ], [-sin φ, e^{-iβ} cos φ]].
Spin up walkers at the sites 0 and n/2 are exchanged with the left and the
right reservoir. Basis index of x_ν ⊗ e_τ is 2ν + (0 if τ = +1 else 1).
"""
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Union
from warnings import warn

import numpy as np

from fermiflux.common.exceptions import ConfigError, NotSimple
from fermiflux.common.utils import TOL_CLUSTER, cluster_eigenvalues
from fermiflux.model.BlockUnitary import CouplingSpec
from fermiflux.model.ReservoirSymbol import Density, ReservoirSymbol, diagonal_projectors
from fermiflux.perturbation.SmallCoupling import splitting, star_circuit

logger = logging.getLogger(__name__)

LEFT, RIGHT = 0, 1
WEIGHT_TOL = 1e-9


@dataclass
class CycleModelParams:
    n: int = 8
    phi: float = np.pi / 3
    beta: float = 0.1
    alpha: float = 0.3
    f_L: Density = field(default_factory=lambda: Density.constant(0.9))
    f_R: Density = field(default_factory=lambda: Density.constant(0.1))
    gamma: float = 0.0

    def __post_init__(self):
        assert int(self.n) == self.n and self.n >= 2 and self.n % 2 == 0, \
            f"cycle length must be a positive even integer, got {self.n}"
        assert 0.0 < self.phi < np.pi / 2, f"phi must lie in (0, π/2), got {self.phi}"
        assert 0.0 < self.beta < np.pi / 2, f"beta must lie in (0, π/2), got {self.beta}"
        self.n = int(self.n)

    @classmethod
    def from_dict(cls, params: dict) -> "CycleModelParams":
        """
        read preset parameters

        Parameters:
        - params: mapping with optional keys n, phi, beta, alpha, f_L, f_R, gamma

        Returns:
            cycle model parameters
        """
        known = {"n", "phi", "beta", "alpha", "f_L", "f_R", "gamma"}
        unknown = set(params) - known
        if unknown:
            raise ConfigError(f"unknown cycle preset parameters {sorted(unknown)}")
        values = dict(params)
        for key in ("f_L", "f_R"):
            if key in values:
                values[key] = Density.from_dict(values[key])
        try:
            return cls(**values)
        except AssertionError as err:
            raise ConfigError(f"invalid cycle preset: {err}") from err

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "phi": float(self.phi),
            "beta": float(self.beta),
            "alpha": float(self.alpha),
            "gamma": float(self.gamma),
            "f_L": self.f_L.to_dict(),
            "f_R": self.f_R.to_dict(),
        }


def coin(phi: float, beta: float) -> np.ndarray:
    return np.array([
        [np.exp(1j * beta) * np.cos(phi), np.sin(phi)],
        [-np.sin(phi), np.exp(-1j * beta) * np.cos(phi)],
    ])


def _index(nu: int, tau: int, n: int) -> int:
    return 2 * (nu % n) + (0 if tau == 1 else 1)


def cycle_unitary(n: int, phi: float, beta: float, gamma: float = 0.0) -> np.ndarray:
    """
    W = e^{iγ} W_1 W_2 on ℓ²({0..n-1}) ⊗ C²

    Parameters:
    - n: cycle length
    - phi: coin angle
    - beta: coin phase
    - gamma: global phase

    Returns:
        2n x 2n unitary
    """
    shift = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    for nu in range(n):
        for tau in (1, -1):
            shift[_index(nu + tau, tau, n), _index(nu, tau, n)] = 1.0
    coins = np.kron(np.eye(n), coin(phi, beta))
    return np.exp(1j * gamma) * shift @ coins


def cycle_coupling(n: int) -> np.ndarray:
    # A = φ_L ψ_L* + φ_R ψ_R* with φ_L = x_0 ⊗ e_+, φ_R = x_{n/2} ⊗ e_+
    A = np.zeros((2 * n, 2), dtype=np.complex128)
    A[_index(0, 1, n), LEFT] = 1.0
    A[_index(n // 2, 1, n), RIGHT] = 1.0
    return A


def build_cycle_model(p: CycleModelParams) -> tuple[CouplingSpec, ReservoirSymbol]:
    """
    coupling specification and reservoirs of the cycle walk

    Parameters:
    - p: model parameters

    Returns:
        (coupling specification, reservoir symbol with Π_L, Π_R)
    """
    spec = CouplingSpec(cycle_unitary(p.n, p.phi, p.beta, p.gamma), cycle_coupling(p.n), p.alpha)
    res = ReservoirSymbol.from_densities(diagonal_projectors(2), [p.f_L, p.f_R])
    logger.debug("cycle model: n=%d phi=%.6f beta=%.6f alpha=%.6g gamma=%.6f", p.n, p.phi, p.beta, p.alpha, p.gamma)
    return spec, res


def displayed_weight(phi: float, eigenvalues: np.ndarray) -> np.ndarray:
    # sin²(2φ) |sin φ - 1 + λ²|² / 4
    return np.sin(2 * phi) ** 2 * np.abs(np.sin(phi) - 1 + eigenvalues ** 2) ** 2 / 4


def _simple_eigen(p: CycleModelParams, tol_cluster: float = TOL_CLUSTER) -> tuple[np.ndarray, np.ndarray]:
    W = cycle_unitary(p.n, p.phi, p.beta, p.gamma)
    eigenvalues, vectors = np.linalg.eig(W)
    if any(len(group) > 1 for group in cluster_eigenvalues(eigenvalues, tol_cluster)):
        raise NotSimple(f"W has repeated eigenvalues for beta={p.beta} and n={p.n}")
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    return eigenvalues, vectors


class CycleWeights(NamedTuple):
    eigenvalues: np.ndarray
    displayed: np.ndarray
    eigenvector: np.ndarray
    discrepancy: float


def cycle_weights(p: CycleModelParams, tol_cluster: float = TOL_CLUSTER) -> CycleWeights:
    """
    per eigenvalue weight of f_L - f_R in the leading J_R, from the displayed
    closed form and from the eigenvectors g_L g_R / (g_L + g_R)

    Parameters:
    - p: model parameters
    - tol_cluster: simplicity threshold

    Returns:
        both weight vectors and their largest difference
    """
    eigenvalues, vectors = _simple_eigen(p, tol_cluster)
    A = cycle_coupling(p.n)
    g = np.abs(A.conj().T @ vectors) ** 2
    total = g.sum(axis=0)
    eigenvector = np.divide(g[LEFT] * g[RIGHT], total, out=np.zeros_like(total), where=total > 0)
    displayed = displayed_weight(p.phi, eigenvalues)
    discrepancy = float(np.max(np.abs(displayed - eigenvector)))
    if discrepancy > WEIGHT_TOL:
        logger.info(
            "cycle weights: displayed sum %.6e, eigenvector sum %.6e", displayed.sum(), eigenvector.sum()
        )
        warn(f"displayed cycle weights differ from the eigenvector weights by {discrepancy:.3e}")
    return CycleWeights(eigenvalues, displayed, eigenvector, discrepancy)


def cycle_bloch_weights(p: CycleModelParams) -> tuple[np.ndarray, np.ndarray]:
    """
    eigenvector weights from the 2x2 momentum blocks diag(e^{-ik}, e^{ik}) C,
    k = 2πm/n, where g_L = g_R = |v_+|²/n so that g_L g_R/(g_L + g_R) = |v_+|²/(2n)

    Parameters:
    - p: model parameters

    Returns:
        (eigenvalues, weights)
    """
    eigenvalues, weights = [], []
    C = coin(p.phi, p.beta)
    for m in range(p.n):
        k = 2 * np.pi * m / p.n
        block = np.exp(1j * p.gamma) * np.diag([np.exp(-1j * k), np.exp(1j * k)]) @ C
        values, vectors = np.linalg.eig(block)
        vectors = vectors / np.linalg.norm(vectors, axis=0)
        eigenvalues.extend(values)
        weights.extend(np.abs(vectors[0]) ** 2 / (2 * p.n))
    return np.array(eigenvalues), np.array(weights)


def cycle_jr_closed_form(p: CycleModelParams, tol_cluster: float = TOL_CLUSTER) -> float:
    """
    α² coefficient of J_R with the displayed weights
        Σ_i sin²(2φ)|sin φ - 1 + λ_i²|²/4 (f_L - f_R)(-i log λ_i)

    a value away from cycle_jr_circuit is reported with a warning and
    returned as it is

    Parameters:
    - p: model parameters
    - tol_cluster: simplicity threshold

    Returns:
        leading coefficient
    """
    eigenvalues, _ = _simple_eigen(p, tol_cluster)
    theta = np.mod(np.angle(eigenvalues), 2 * np.pi)
    closed = float(np.sum(displayed_weight(p.phi, eigenvalues) * (p.f_L(theta) - p.f_R(theta))))
    circuit = cycle_jr_circuit(p)
    if abs(closed - circuit) > WEIGHT_TOL * max(1.0, abs(circuit)):
        logger.info("cycle J_R coefficient: displayed %.6e, star circuits %.6e", closed, circuit)
        warn(f"displayed J_R coefficient {closed:.6e} differs from the star circuit value {circuit:.6e}")
    return closed


def cycle_jr_circuit(p: CycleModelParams) -> float:
    """
    α² coefficient of J_R from the star circuits of the general expansion

    Parameters:
    - p: model parameters

    Returns:
        Σ_i J^(2)_{R,i}
    """
    spec, res = build_cycle_model(p)
    circuits = star_circuit(spec, res, splitting(spec))
    return float(sum(circuit.currents[RIGHT] for circuit in circuits))


def cycle_preset(params: Union[dict, CycleModelParams, None] = None) -> tuple[CouplingSpec, ReservoirSymbol]:
    if params is None:
        params = CycleModelParams()
    elif isinstance(params, dict):
        params = CycleModelParams.from_dict(params)
    return build_cycle_model(params)


PRESETS = {
    "cycle": cycle_preset,
}
