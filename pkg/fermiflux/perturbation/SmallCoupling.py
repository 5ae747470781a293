"""
small coupling expansion of the steady state

As α -> 0 the eigenvalues of M(α) approach those of W and split as
λ_j(α) = λ_i (1 - ½ α² c_j) + O(α⁴), c_j = tr[Q_j(0) AA*]. The leading
sample symbol, the α² coefficient of the currents and of the entropy
production only involve W, A and Ξ̂ at the eigenphases of W.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from fermiflux.common.BaseSolver import BaseSolver
from fermiflux.common.exceptions import KalmanFailed, NotRankOne, NotSimple, UnresolvedSplitting
from fermiflux.common.utils import TOL_CLUSTER, TOL_RANK, cluster_eigenvalues, dagger
from fermiflux.entropy.EntropyProduction import EPS_CLIP, entropy_constant_density, log_odds_densities
from fermiflux.model.BlockUnitary import CouplingSpec, build_block_unitary, check_kalman
from fermiflux.model.ReservoirSymbol import ReservoirSymbol
from fermiflux.perturbation.StarCircuit import StarCircuit, build_star_circuit
from fermiflux.steady.SteadyState import steady_sample
from fermiflux.transport.Currents import currents_time_domain

logger = logging.getLogger(__name__)

DEFAULT_ALPHAS = (0.04, 0.02, 0.01)


@dataclass(frozen=True)
class SplittingData:
    vectors: np.ndarray
    weights: np.ndarray
    groups: list[list[int]]
    group_eigenvalues: np.ndarray
    group_of: np.ndarray

    @property
    def simple(self) -> bool:
        return all(len(group) == 1 for group in self.groups)

    @property
    def phases(self) -> np.ndarray:
        return np.mod(np.angle(self.group_eigenvalues), 2 * np.pi)

    @property
    def projectors(self) -> list[np.ndarray]:
        return [np.outer(chi, np.conj(chi)) for chi in self.vectors.T]

    def group_projector(self, i: int) -> np.ndarray:
        V = self.vectors[:, self.groups[i]]
        return V @ dagger(V)


def splitting(spec: CouplingSpec, tol_cluster: float = TOL_CLUSTER, tol_rank: float = TOL_RANK) -> SplittingData:
    """
    eigenvalue groups of W with the first order splitting data

    Parameters:
    - spec: coupling specification
    - tol_cluster: eigenvalues of W (and within group weights) closer than this coincide
    - tol_rank: weights c_j at or below this are zero

    Returns:
        splitting data
    """
    if not check_kalman(spec.W, spec.A, tol_rank):
        raise KalmanFailed("the W-orbit of range A does not span the sample space")
    schur_form, basis = scipy.linalg.schur(spec.W, output="complex")
    eigenvalues = np.diag(schur_form)
    AAstar = spec.A @ dagger(spec.A)

    vectors = np.zeros_like(basis)
    weights = np.zeros(spec.d_S)
    groups: list[list[int]] = []
    group_eigenvalues = []
    group_of = np.zeros(spec.d_S, dtype=int)
    j = 0
    for i, members in enumerate(cluster_eigenvalues(eigenvalues, tol_cluster)):
        V = basis[:, members]
        c, u = scipy.linalg.eigh(dagger(V) @ AAstar @ V)
        if len(c) > 1 and np.min(np.diff(c)) < tol_cluster:
            raise UnresolvedSplitting(
                f"degenerate first order splitting in the eigenvalue group {i}: weights {np.array2string(c)}"
            )
        if c[0] <= tol_rank:
            raise KalmanFailed(f"vanishing splitting weight {c[0]:.3e} in the eigenvalue group {i}")
        lam = np.mean(eigenvalues[members])
        group_eigenvalues.append(lam / abs(lam))
        indices = list(range(j, j + len(members)))
        vectors[:, indices] = V @ u
        weights[indices] = c
        group_of[indices] = i
        groups.append(indices)
        j += len(members)
    logger.debug("splitting: %d groups, min weight %.3e", len(groups), weights.min())
    return SplittingData(vectors, weights, groups, np.array(group_eigenvalues), group_of)


def _pair_weights(c: np.ndarray) -> np.ndarray:
    return 2.0 / (c[:, None] + c[None, :])


def steady_sample_leading(spec: CouplingSpec, res: ReservoirSymbol, split: SplittingData) -> np.ndarray:
    """
    α independent limit of Δ∞
        Σ_i Σ_{j,j'∈I_i} 2/(c_j + c_j') Q_j A Ξ̂(θ_i) A* Q_j'

    Parameters:
    - spec: coupling specification
    - res: reservoir symbol
    - split: splitting data of W

    Returns:
        leading sample symbol
    """
    delta = np.zeros((spec.d_S, spec.d_S), dtype=np.complex128)
    for i, (members, theta) in enumerate(zip(split.groups, split.phases)):
        chi = split.vectors[:, members]
        inner = dagger(chi) @ spec.A @ res.xi_hat(theta) @ dagger(spec.A) @ chi
        delta += chi @ (_pair_weights(split.weights[members]) * inner) @ dagger(chi)
    return 0.5 * (delta + dagger(delta))


def leading_current_matrix(spec: CouplingSpec, res: ReservoirSymbol, split: SplittingData) -> np.ndarray:
    """
    D = Σ_h (-A* Q_h A Ξ̂(θ_h) + Σ_{j,j'∈I_h} 2/(c_j + c_j') A* Q_j A Ξ̂(θ_h) A* Q_j' A)

    Parameters:
    - spec: coupling specification
    - res: reservoir symbol
    - split: splitting data of W

    Returns:
        D on the environment cell
    """
    A, Ah = spec.A, dagger(spec.A)
    D = np.zeros((spec.d_B, spec.d_B), dtype=np.complex128)
    for members, theta in zip(split.groups, split.phases):
        chi = split.vectors[:, members]
        xi = res.xi_hat(theta)
        left = Ah @ chi
        D -= left @ dagger(left) @ xi
        inner = dagger(chi) @ A @ xi @ Ah @ chi
        D += left @ (_pair_weights(split.weights[members]) * inner) @ dagger(left)
    return D


def currents_leading(spec: CouplingSpec, res: ReservoirSymbol, split: SplittingData) -> np.ndarray:
    """
    α² coefficients J_k^(2) = Re tr(Π_k D)

    Parameters:
    - spec: coupling specification
    - res: reservoir symbol
    - split: splitting data of W

    Returns:
        one coefficient per reservoir
    """
    D = leading_current_matrix(spec, res, split)
    return np.array([float(np.real(np.trace(P @ D))) for P in res.projectors])


def reservoir_vectors(res: ReservoirSymbol) -> np.ndarray:
    """
    unit vectors ψ_k spanning the rank one projectors, as columns

    Parameters:
    - res: reservoir symbol with rank one projectors

    Returns:
        d_B x n_B matrix
    """
    if not res.rank_one:
        raise NotRankOne(f"reservoir projectors have ranks {res.ranks}")
    columns = []
    for P in res.projectors:
        j = int(np.argmax(np.linalg.norm(P, axis=0)))
        columns.append(P[:, j] / np.linalg.norm(P[:, j]))
    return np.stack(columns, axis=1)


def circuit_conductances(spec: CouplingSpec, res: ReservoirSymbol, split: SplittingData) -> np.ndarray:
    """
    g_{k,i} = |⟨φ_k, χ_i⟩|² with φ_k = Aψ_k

    Parameters:
    - spec: coupling specification
    - res: reservoir symbol with rank one projectors
    - split: simple splitting data

    Returns:
        n_B x (number of eigenvalues) matrix
    """
    if not split.simple:
        raise NotSimple("star circuits need simple eigenvalues of W")
    phi = spec.A @ reservoir_vectors(res)
    return np.abs(dagger(phi) @ split.vectors) ** 2


def star_circuit(spec: CouplingSpec, res: ReservoirSymbol, split: SplittingData) -> list[StarCircuit]:
    """
    one Kirchhoff star per eigenvalue of W

    Parameters:
    - spec: coupling specification
    - res: reservoir symbol with rank one projectors
    - split: simple splitting data

    Returns:
        circuits ordered like the eigenvalues
    """
    g = circuit_conductances(spec, res, split)
    sources = res.densities_at(split.phases)
    return [
        build_star_circuit(split.group_eigenvalues[i], split.phases[i], g[:, i], sources[:, i])
        for i in range(len(split.groups))
    ]


def circuit_transmission(spec: CouplingSpec, res: ReservoirSymbol, split: SplittingData) -> np.ndarray:
    """
    C^(2)_{k,k'} = Σ_i g_{k,i} g_{k',i} / Σ_k'' g_{k'',i}

    Parameters:
    - spec: coupling specification
    - res: reservoir symbol with rank one projectors
    - split: simple splitting data

    Returns:
        symmetric n_B x n_B matrix
    """
    g = circuit_conductances(spec, res, split)
    total = g.sum(axis=0)
    keep = total > 0
    return (g[:, keep] / total[keep]) @ g[:, keep].T


def entropy_leading(spec: CouplingSpec, res: ReservoirSymbol, split: SplittingData, eps_clip: float = EPS_CLIP) -> float:
    """
    α² coefficient of σ⁺ for constant densities
        ½ Σ_{k≠k'} (μ_k - μ_k')(f_k' - f_k) C^(2)_{k,k'}

    Parameters:
    - spec: coupling specification
    - res: frequency flat reservoir symbol with rank one projectors
    - split: simple splitting data
    - eps_clip: clamp of the log-odds

    Returns:
        leading coefficient, non negative
    """
    assert res.frequency_flat, "leading entropy production needs frequency independent densities"
    C2 = circuit_transmission(spec, res, split)
    f = res.densities_at(0.0)
    mu = log_odds_densities(f, eps_clip)
    terms = (mu[:, None] - mu[None, :]) * (f[None, :] - f[:, None]) * C2
    np.fill_diagonal(terms, 0.0)
    return 0.5 * float(terms.sum())


@dataclass
class AlphaSweepReport:
    alphas: np.ndarray
    delta_residual: np.ndarray
    current_residual: np.ndarray
    entropy_residual: Optional[np.ndarray]
    exact_currents: np.ndarray
    leading_currents: np.ndarray
    exact_entropy: Optional[np.ndarray] = None
    leading_entropy: Optional[float] = None
    slopes: dict[str, float] = field(default_factory=dict)

    def rows(self) -> list[dict]:
        rows = []
        for n, alpha in enumerate(self.alphas):
            row = {
                "alpha": float(alpha),
                "delta_residual": float(self.delta_residual[n]),
                "current_residual": float(self.current_residual[n]),
            }
            if self.entropy_residual is not None:
                row["entropy_residual"] = float(self.entropy_residual[n])
                row["sigma"] = float(self.exact_entropy[n])
                row["sigma2"] = float(alpha ** 2 * self.leading_entropy)
            for k, (exact, leading) in enumerate(zip(self.exact_currents[n], self.leading_currents)):
                row[f"J_{k + 1}"] = float(exact)
                row[f"J2_{k + 1}"] = float(alpha ** 2 * leading)
            rows.append(row)
        return rows


def _order_slope(alphas: np.ndarray, residuals: np.ndarray) -> float:
    positive = residuals > 0
    if np.count_nonzero(positive) < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(alphas[positive]), np.log(residuals[positive]), 1)
    return float(slope)


def alpha_sweep(
        spec: CouplingSpec,
        res: ReservoirSymbol,
        alphas: Sequence[float] = DEFAULT_ALPHAS,
        split: Optional[SplittingData] = None,
        eps_clip: float = EPS_CLIP
) -> AlphaSweepReport:
    """
    exact against leading order quantities on a set of couplings

    Parameters:
    - spec: coupling specification, its own α is ignored
    - res: reservoir symbol
    - alphas: couplings
    - split: precomputed splitting data
    - eps_clip: clamp of the log-odds

    Returns:
        residuals per α and their log-log slopes
    """
    alphas = np.asarray(alphas, dtype=float)
    assert alphas.size >= 1 and np.all(alphas > 0), "couplings must be positive"
    split = splitting(spec) if split is None else split
    delta_lead = steady_sample_leading(spec, res, split)
    J2 = currents_leading(spec, res, split)
    with_entropy = res.rank_one and res.frequency_flat and split.simple
    sigma2 = entropy_leading(spec, res, split, eps_clip) if with_entropy else None

    delta_residual, current_residual, entropy_residual, exact, sigmas = [], [], [], [], []
    for alpha in alphas:
        Z = build_block_unitary(spec.with_alpha(alpha))
        steady = steady_sample(Z, res)
        J = currents_time_domain(Z, res, steady=steady).J
        exact.append(J)
        delta_residual.append(float(np.linalg.norm(steady.delta - delta_lead, 2)))
        current_residual.append(float(np.max(np.abs(J - alpha ** 2 * J2))))
        if with_entropy:
            sigma = entropy_constant_density(Z, res, eps_clip=eps_clip)
            sigmas.append(sigma)
            entropy_residual.append(abs(sigma - alpha ** 2 * sigma2))
        logger.debug("alpha sweep: alpha=%.4g residuals %.3e %.3e", alpha, delta_residual[-1], current_residual[-1])

    report = AlphaSweepReport(
        alphas,
        np.array(delta_residual),
        np.array(current_residual),
        np.array(entropy_residual) if with_entropy else None,
        np.array(exact),
        J2,
        exact_entropy=np.array(sigmas) if with_entropy else None,
        leading_entropy=sigma2,
    )
    report.slopes["delta"] = _order_slope(alphas, report.delta_residual)
    report.slopes["currents"] = _order_slope(alphas, report.current_residual)
    if with_entropy:
        report.slopes["entropy"] = _order_slope(alphas, report.entropy_residual)
    return report


class SmallCouplingExpansion(BaseSolver):
    # leading order steady state, currents, circuits and entropy production
    def __init__(self, tol_cluster: float = TOL_CLUSTER, tol_rank: float = TOL_RANK, eps_clip: float = EPS_CLIP):
        """
        Parameters:
        - tol_cluster: eigenvalue clustering threshold
        - tol_rank: threshold for vanishing splitting weights
        - eps_clip: clamp of the log-odds

        """
        params = {
            "tol_cluster": tol_cluster,
            "tol_rank": tol_rank,
            "eps_clip": eps_clip,
        }
        super().__init__(params)

    @staticmethod
    def validate_params(params: dict):
        """
        validate solver parameters

        Parameters:
        - params: dict containing parameters for the solver

        """
        assert "tol_cluster" in params
        assert "tol_rank" in params
        assert "eps_clip" in params
        assert params["tol_cluster"] > 0.0
        assert params["tol_rank"] > 0.0
        assert 0.0 < params["eps_clip"] < 0.5

    def fit(self, spec: CouplingSpec, res: ReservoirSymbol):
        """
        compute the leading order quantities

        Parameters:
        - spec: coupling specification
        - res: reservoir symbol

        Returns:
            self
        """
        self.spec_ = spec
        self.res_ = res
        self.split_ = splitting(spec, self.tol_cluster, self.tol_rank)
        self.delta_leading_ = steady_sample_leading(spec, res, self.split_)
        self.currents_leading_ = currents_leading(spec, res, self.split_)
        self.circuits_ = None
        self.entropy_leading_ = None
        if self.split_.simple and res.rank_one:
            self.circuits_ = star_circuit(spec, res, self.split_)
            if res.frequency_flat:
                self.entropy_leading_ = entropy_leading(spec, res, self.split_, self.eps_clip)
        logger.info(
            "small coupling expansion: d_S=%d groups=%d simple=%s",
            spec.d_S, len(self.split_.groups), self.split_.simple
        )
        return self

    def sweep(self, alphas: Sequence[float] = DEFAULT_ALPHAS) -> AlphaSweepReport:
        self.check_fitted()
        return alpha_sweep(self.spec_, self.res_, alphas, split=self.split_, eps_clip=self.eps_clip)
