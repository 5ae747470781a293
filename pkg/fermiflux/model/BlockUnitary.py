"""
one step interaction unitary of the sample and the site 0 of the reservoirs

Z acts on H_B ⊕ H_S and is stored through its four blocks
    Z = [[C, Z_BS], [Z_SB, M]].
For the weak coupling family Z(α) = diag(1, W) exp(-iα [[0, A*], [A, 0]]) the
blocks follow from functional calculus on A*A and AA*.
"""
import logging
from typing import Union

import numpy as np

from fermiflux.common.exceptions import NotHermitian, NotUnitary, SpectrumOutOfRange
from fermiflux.common.utils import (
    TOL_HERM, TOL_RANK, TOL_UNIT, as_matrix, dagger, herm_eig, hermitian_function, numerical_rank,
    spectral_radius
)

logger = logging.getLogger(__name__)


class BlockUnitary:
    # implementation of the block decomposition of Z
    def __init__(
            self,
            C: np.ndarray,
            Z_BS: np.ndarray,
            Z_SB: np.ndarray,
            M: np.ndarray,
            tol_unit: float = TOL_UNIT,
    ):
        """
        Parameters:
        - C: environment to environment block (d_B x d_B)
        - Z_BS: sample to environment block (d_B x d_S)
        - Z_SB: environment to sample block (d_S x d_B)
        - M: sample to sample block (d_S x d_S)
        - tol_unit: tolerance on the unitarity relations

        """
        self.C = as_matrix(C, "C")
        self.Z_BS = as_matrix(Z_BS, "Z_BS")
        self.Z_SB = as_matrix(Z_SB, "Z_SB")
        self.M = as_matrix(M, "M")
        d_B, d_S = self.d_B, self.d_S
        assert self.C.shape == (d_B, d_B), f"C must be square, got {self.C.shape}"
        assert self.M.shape == (d_S, d_S), f"M must be square, got {self.M.shape}"
        assert self.Z_BS.shape == (d_B, d_S), f"Z_BS must be {d_B}x{d_S}, got {self.Z_BS.shape}"
        assert self.Z_SB.shape == (d_S, d_B), f"Z_SB must be {d_S}x{d_B}, got {self.Z_SB.shape}"
        self.validate(tol_unit)

    @property
    def d_B(self) -> int:
        return self.C.shape[0]

    @property
    def d_S(self) -> int:
        return self.M.shape[0]

    @classmethod
    def from_matrix(cls, Z: np.ndarray, d_B: int, tol_unit: float = TOL_UNIT) -> "BlockUnitary":
        """
        split a unitary on H_B ⊕ H_S into its blocks

        Parameters:
        - Z: unitary matrix, environment coordinates first
        - d_B: dimension of the environment cell
        - tol_unit: tolerance on the unitarity relations

        Returns:
            block unitary
        """
        Z = as_matrix(Z, "Z")
        return cls(Z[:d_B, :d_B], Z[:d_B, d_B:], Z[d_B:, :d_B], Z[d_B:, d_B:], tol_unit=tol_unit)

    def as_matrix(self) -> np.ndarray:
        return np.block([[self.C, self.Z_BS], [self.Z_SB, self.M]])

    @property
    def is_decoupled(self) -> bool:
        return not (np.any(self.Z_BS) or np.any(self.Z_SB))

    def unitarity_residual(self) -> float:
        """
        largest violation among the Z*Z = 1 and ZZ* = 1 block relations

        Returns:
            residual norm
        """
        Z = self.as_matrix()
        eye = np.eye(Z.shape[0])
        return float(max(np.linalg.norm(dagger(Z) @ Z - eye), np.linalg.norm(Z @ dagger(Z) - eye)))

    def validate(self, tol_unit: float = TOL_UNIT):
        residual = self.unitarity_residual()
        if residual > tol_unit:
            raise NotUnitary(f"unitarity residual {residual:.3e} exceeds {tol_unit:.1e}")


class CouplingSpec:
    # sample dynamics W, coupling operator A: H_B -> H_S and strength α
    def __init__(self, W: np.ndarray, A: np.ndarray, alpha: float, tol_unit: float = TOL_UNIT):
        """
        Parameters:
        - W: unitary sample dynamics (d_S x d_S)
        - A: coupling operator (d_S x d_B)
        - alpha: coupling strength
        - tol_unit: tolerance on the unitarity of W

        """
        self.W = as_matrix(W, "W")
        self.A = as_matrix(A, "A")
        self.alpha = float(alpha)
        assert self.W.shape[0] == self.W.shape[1], f"W must be square, got {self.W.shape}"
        assert self.A.shape[0] == self.W.shape[0], \
            f"A must have {self.W.shape[0]} rows, got shape {self.A.shape}"
        residual = float(np.linalg.norm(dagger(self.W) @ self.W - np.eye(self.d_S)))
        if residual > tol_unit:
            raise NotUnitary(f"W is not unitary, ||W*W - 1|| = {residual:.3e}")

    @property
    def d_S(self) -> int:
        return self.W.shape[0]

    @property
    def d_B(self) -> int:
        return self.A.shape[1]

    def with_alpha(self, alpha: float) -> "CouplingSpec":
        return CouplingSpec(self.W, self.A, alpha)

    def with_phase(self, gamma: float) -> "CouplingSpec":
        """
        multiply the sample dynamics by the global phase e^{iγ}

        Parameters:
        - gamma: phase

        Returns:
            new coupling spec
        """
        return CouplingSpec(np.exp(1j * gamma) * self.W, self.A, self.alpha)


def _sqrt_clipped(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.clip(x, 0.0, None))


def build_block_unitary(spec: CouplingSpec, tol_unit: float = TOL_UNIT) -> BlockUnitary:
    """
    blocks of Z(α) = diag(1, W) exp(-iα [[0, A*], [A, 0]])

    Parameters:
    - spec: coupling specification
    - tol_unit: tolerance on the unitarity of the result

    Returns:
        C = cos(α√(A*A)), Z_BS = -i A* sin(α√(AA*))/√(AA*),
        Z_SB = -i W sin(α√(AA*))/√(AA*) A, M = W cos(α√(AA*))
    """
    alpha, A, W = spec.alpha, spec.A, spec.W
    a = abs(alpha)
    AstarA = dagger(A) @ A
    AAstar = A @ dagger(A)

    C = hermitian_function(AstarA, lambda x: np.cos(a * _sqrt_clipped(x)))
    cos_S = hermitian_function(AAstar, lambda x: np.cos(a * _sqrt_clipped(x)))
    # sin(α√x)/√x = α sinc(α√x), numpy's sinc is normalized by π
    sin_S = hermitian_function(AAstar, lambda x: alpha * np.sinc(alpha * _sqrt_clipped(x) / np.pi))

    Z_BS = -1j * dagger(A) @ sin_S
    Z_SB = -1j * W @ sin_S @ A
    M = W @ cos_S
    logger.debug("built block unitary d_B=%d d_S=%d alpha=%.6g", spec.d_B, spec.d_S, alpha)
    return BlockUnitary(C, Z_BS, Z_SB, M, tol_unit=tol_unit)


def check_sp(M: np.ndarray) -> float:
    """
    spectral radius of the sample block

    Parameters:
    - M: sample block of Z

    Returns:
        ρ(M), the mixing assumption asks for ρ(M) < 1
    """
    return spectral_radius(M)


def kalman_matrix(W: np.ndarray, A: np.ndarray) -> np.ndarray:
    blocks = [A]
    for _ in range(W.shape[0] - 1):
        blocks.append(W @ blocks[-1])
    return np.hstack(blocks)


def check_kalman(W: np.ndarray, A: np.ndarray, tol_rank: float = TOL_RANK) -> bool:
    """
    whether the W-orbit of range A spans the sample space

    Parameters:
    - W: unitary sample dynamics
    - A: coupling operator
    - tol_rank: relative singular value threshold

    Returns:
        rank [A | WA | ... | W^{d_S-1}A] == d_S
    """
    W = as_matrix(W, "W")
    A = as_matrix(A, "A")
    return numerical_rank(kalman_matrix(W, A), tol_rank) == W.shape[0]


def validate_sample(delta: Union[float, np.ndarray], d_S: int, tol_herm: float = TOL_HERM) -> np.ndarray:
    """
    validated initial sample symbol

    Parameters:
    - delta: scalar f (meaning f·1) or Hermitian matrix
    - d_S: sample dimension
    - tol_herm: tolerance on Hermiticity and on the spectrum lying in [0, 1]

    Returns:
        Δ as a d_S x d_S matrix
    """
    if np.ndim(delta) == 0:
        delta = float(np.real(delta)) * np.eye(d_S)
    delta = as_matrix(delta, "sample symbol")
    assert delta.shape == (d_S, d_S), f"sample symbol must be {d_S}x{d_S}, got {delta.shape}"
    try:
        w, _ = herm_eig(delta, tol_herm=tol_herm)
    except NotHermitian as err:
        raise NotHermitian(f"sample symbol: {err}") from err
    if w.size and (w[0] < -tol_herm or w[-1] > 1 + tol_herm):
        raise SpectrumOutOfRange(f"sample symbol spectrum [{w[0]:.3e}, {w[-1]:.3e}] leaves [0, 1]")
    return 0.5 * (delta + dagger(delta))
