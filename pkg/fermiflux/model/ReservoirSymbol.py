"""
translation invariant reservoir symbol in the Ξ-gauge

The reservoirs enter only through the Fourier blocks Ξ_l of the twisted symbol,
Ξ̂(θ) = Σ_l e^{ilθ} Ξ_l, and through the orthogonal projectors Π_k that split
the environment cell into reservoirs. Scalar densities f_k(θ) are converted
to blocks Ξ_l = Σ_k f̂_k(l) Π_k so that the blocks are the only source of truth.
"""
import logging
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from fermiflux.common.PeriodicGrid import PeriodicGrid
from fermiflux.common.exceptions import ConfigError, InvalidReservoir, SpectrumOutOfRange
from fermiflux.common.utils import TOL_UNIT, as_matrix, dagger

logger = logging.getLogger(__name__)

# coefficients below this are treated as absent
_COEFFICIENT_FLOOR = 1e-15


class Density:
    # 2π-periodic real density f(θ) = Σ_l c_l e^{ilθ}
    def __init__(self, coefficients: dict[int, complex]):
        """
        Parameters:
        - coefficients: map l -> c_l, with c_{-l} = conj(c_l)

        """
        scale = max([abs(c) for c in coefficients.values()] + [0.0])
        self.coefficients = {
            int(l): complex(c) for l, c in coefficients.items()
            if abs(c) > _COEFFICIENT_FLOOR * max(scale, 1.0)
        }
        for l, c in self.coefficients.items():
            partner = self.coefficients.get(-l, 0.0)
            assert abs(partner - np.conj(c)) <= 1e-12 * max(scale, 1.0), \
                f"density coefficients are not those of a real function at l={l}"

    @classmethod
    def constant(cls, value: float) -> "Density":
        return cls({0: float(value)})

    @classmethod
    def fourier(cls, cos: Sequence[float], sin: Sequence[float] = ()) -> "Density":
        """
        build f(θ) = a_0 + Σ_{l>=1} a_l cos(lθ) + b_l sin(lθ)

        Parameters:
        - cos: a_0, a_1, ...
        - sin: b_1, b_2, ...

        Returns:
            density
        """
        coefficients: dict[int, complex] = {}
        for l, a in enumerate(cos):
            if l == 0:
                coefficients[0] = float(a)
            else:
                coefficients[l] = coefficients.get(l, 0.0) + 0.5 * a
                coefficients[-l] = coefficients.get(-l, 0.0) + 0.5 * a
        for l, b in enumerate(sin, start=1):
            coefficients[l] = coefficients.get(l, 0.0) - 0.5j * b
            coefficients[-l] = coefficients.get(-l, 0.0) + 0.5j * b
        return cls(coefficients)

    @classmethod
    def grid(cls, values: Sequence[float]) -> "Density":
        """
        trigonometric interpolant of samples at θ_j = 2πj/N

        Parameters:
        - values: f(θ_j), j = 0..N-1

        Returns:
            density
        """
        values = np.asarray(values, dtype=float)
        assert values.ndim == 1 and values.size >= 1, "grid density needs a flat list of samples"
        coefficients = PeriodicGrid(values.size).fourier_coefficients(values)
        return cls({l: complex(c) for l, c in coefficients.items()})

    @classmethod
    def from_dict(cls, spec: Union[dict, float]) -> "Density":
        """
        parse {"type": "constant" | "fourier" | "grid", ...}

        Parameters:
        - spec: density description, a bare number means a constant

        Returns:
            density
        """
        if isinstance(spec, (int, float)):
            return cls.constant(spec)
        if not isinstance(spec, dict) or "type" not in spec:
            raise ConfigError(f"density must be a number or an object with a 'type', got {spec!r}")
        kind = spec["type"]
        try:
            if kind == "constant":
                return cls.constant(spec["value"])
            if kind == "fourier":
                return cls.fourier(spec.get("cos", [0.0]), spec.get("sin", []))
            if kind == "grid":
                return cls.grid(spec["values"])
        except KeyError as err:
            raise ConfigError(f"density of type {kind!r} is missing {err}") from err
        raise ConfigError(f"unknown density type {kind!r}")

    def to_dict(self) -> dict:
        if self.is_constant:
            return {"type": "constant", "value": float(np.real(self.coefficients.get(0, 0.0)))}
        cos = [float(np.real(self.coefficients.get(0, 0.0)))]
        sin = []
        for l in range(1, self.band + 1):
            c = self.coefficients.get(l, 0.0)
            cos.append(2 * float(np.real(c)))
            sin.append(-2 * float(np.imag(c)))
        return {"type": "fourier", "cos": cos, "sin": sin}

    @property
    def band(self) -> int:
        return max([abs(l) for l in self.coefficients] + [0])

    @property
    def is_constant(self) -> bool:
        return self.band == 0

    def __call__(self, theta: Union[float, np.ndarray]) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        value = np.zeros(theta.shape, dtype=np.complex128)
        for l, c in self.coefficients.items():
            value = value + c * np.exp(1j * l * theta)
        return np.real(value)

    def shifted(self, gamma: float) -> "Density":
        return Density({l: c * np.exp(1j * l * gamma) for l, c in self.coefficients.items()})


class ReservoirSymbol:
    # implementation of the reservoir symbol Ξ with its reservoir projectors
    def __init__(
            self,
            blocks: dict[int, np.ndarray],
            projectors: Sequence[np.ndarray],
            densities: Optional[Sequence[Density]] = None,
            tol: float = TOL_UNIT,
    ):
        """
        Parameters:
        - blocks: map l -> Ξ_l, missing negative frequencies are filled with Ξ_{-l} = Ξ_l*
        - projectors: orthogonal projectors Π_k summing to the identity
        - densities: scalar densities the blocks were built from, if any
        - tol: tolerance for the structural checks

        """
        self.projectors = [as_matrix(P, f"projector {k}") for k, P in enumerate(projectors)]
        assert len(self.projectors) >= 1, "at least one reservoir projector is required"
        d_B = self.projectors[0].shape[0]

        full: dict[int, np.ndarray] = {}
        for l, X in blocks.items():
            full[int(l)] = as_matrix(X, f"block {l}")
        for l in list(full):
            if -l not in full:
                full[-l] = dagger(full[l])
        if 0 not in full:
            full[0] = np.zeros((d_B, d_B), dtype=np.complex128)
        scale = max(np.linalg.norm(X) for X in full.values())
        self.blocks = {
            l: X for l, X in sorted(full.items()) if l == 0 or np.linalg.norm(X) > _COEFFICIENT_FLOOR * max(scale, 1.0)
        }
        self.densities = list(densities) if densities is not None else None
        self.validate(tol)

    @classmethod
    def from_densities(cls, projectors: Sequence[np.ndarray], densities: Sequence[Density]) -> "ReservoirSymbol":
        """
        blocks Ξ_l = Σ_k f̂_k(l) Π_k from per reservoir densities

        Parameters:
        - projectors: reservoir projectors
        - densities: one density per projector

        Returns:
            reservoir symbol
        """
        assert len(projectors) == len(densities), \
            f"{len(projectors)} projectors but {len(densities)} densities"
        projectors = [as_matrix(P, f"projector {k}") for k, P in enumerate(projectors)]
        blocks: dict[int, np.ndarray] = {}
        for P, density in zip(projectors, densities):
            for l, c in density.coefficients.items():
                blocks[l] = blocks.get(l, np.zeros_like(P)) + c * P
        return cls(blocks, projectors, densities=densities)

    @classmethod
    def equilibrium(cls, f: float, projectors: Sequence[np.ndarray]) -> "ReservoirSymbol":
        return cls.from_densities(projectors, [Density.constant(f) for _ in projectors])

    @property
    def d_B(self) -> int:
        return self.projectors[0].shape[0]

    @property
    def n_B(self) -> int:
        return len(self.projectors)

    @property
    def band(self) -> int:
        return max(abs(l) for l in self.blocks)

    @property
    def ranks(self) -> list[int]:
        return [int(round(np.real(np.trace(P)))) for P in self.projectors]

    @property
    def rank_one(self) -> bool:
        return all(r == 1 for r in self.ranks)

    @property
    def frequency_flat(self) -> bool:
        return self.band == 0

    def block(self, l: int) -> np.ndarray:
        if l in self.blocks:
            return self.blocks[l]
        return np.zeros((self.d_B, self.d_B), dtype=np.complex128)

    def validate(self, tol: float = TOL_UNIT):
        d_B = self.d_B
        eye = np.eye(d_B)
        for k, P in enumerate(self.projectors):
            assert P.shape == (d_B, d_B), f"projector {k} must be {d_B}x{d_B}, got {P.shape}"
            if np.linalg.norm(P - dagger(P)) > tol or np.linalg.norm(P @ P - P) > tol:
                raise InvalidReservoir(f"projector {k} is not an orthogonal projection")
            if np.real(np.trace(P)) < 0.5:
                raise InvalidReservoir(f"projector {k} has rank zero")
            for j in range(k):
                if np.linalg.norm(P @ self.projectors[j]) > tol:
                    raise InvalidReservoir(f"projectors {j} and {k} are not orthogonal")
        if np.linalg.norm(sum(self.projectors) - eye) > tol:
            raise InvalidReservoir("reservoir projectors do not sum to the identity")

        for l, X in self.blocks.items():
            assert X.shape == (d_B, d_B), f"block {l} must be {d_B}x{d_B}, got {X.shape}"
            if np.linalg.norm(self.block(-l) - dagger(X)) > tol * max(np.linalg.norm(X), 1.0):
                raise InvalidReservoir(f"blocks violate Ξ_(-l) = Ξ_l* at l={l}")
            for k, P in enumerate(self.projectors):
                if np.linalg.norm(X @ P - P @ X) > tol * max(np.linalg.norm(X), 1.0):
                    raise InvalidReservoir(f"block {l} does not commute with projector {k}")

        if self.densities is not None:
            assert len(self.densities) == self.n_B, \
                f"{self.n_B} projectors but {len(self.densities)} densities"

    def xi_hat(self, theta: Union[float, np.ndarray]) -> np.ndarray:
        """
        evaluate Ξ̂(θ) = Σ_l e^{ilθ} Ξ_l

        Parameters:
        - theta: angle or array of angles

        Returns:
            d_B x d_B matrix, or a stack with the angle index first
        """
        theta = np.asarray(theta, dtype=float)
        flat = np.atleast_1d(theta)
        value = np.zeros((flat.size, self.d_B, self.d_B), dtype=np.complex128)
        for l, X in self.blocks.items():
            value += np.exp(1j * l * flat)[:, None, None] * X
        value = 0.5 * (value + dagger(value))
        return value[0] if theta.ndim == 0 else value

    def densities_at(self, theta: Union[float, np.ndarray]) -> np.ndarray:
        """
        per reservoir densities tr[Π_k Ξ̂(θ)] / rank Π_k

        Parameters:
        - theta: angle or array of angles

        Returns:
            array of shape (n_B,) or (n_B, len(theta))
        """
        xi = self.xi_hat(theta)
        values = np.stack([
            np.real(np.einsum("...ij,ji->...", xi, P)) / r for P, r in zip(self.projectors, self.ranks)
        ])
        return values

    def shifted(self, gamma: float) -> "ReservoirSymbol":
        """
        common phase shift of the reservoir dynamics, f_k(θ) -> f_k(θ + γ)

        Parameters:
        - gamma: shift

        Returns:
            reservoir symbol with blocks e^{ilγ} Ξ_l
        """
        blocks = {l: np.exp(1j * l * gamma) * X for l, X in self.blocks.items()}
        densities = None if self.densities is None else [d.shifted(gamma) for d in self.densities]
        return ReservoirSymbol(blocks, self.projectors, densities=densities)

    def spectrum_bounds(self, grid: PeriodicGrid) -> tuple[float, float]:
        """
        extreme eigenvalues of Ξ̂ over the grid nodes

        Parameters:
        - grid: periodic grid

        Returns:
            (min, max)
        """
        w = np.linalg.eigvalsh(self.xi_hat(grid.nodes))
        return float(w.min()), float(w.max())

    def check_bounds(self, grid: PeriodicGrid, eps_sym: float):
        low, high = self.spectrum_bounds(grid)
        if low < eps_sym or high > 1 - eps_sym:
            raise SpectrumOutOfRange(
                f"reservoir symbol spectrum [{low:.3e}, {high:.3e}] leaves [{eps_sym:.1e}, {1 - eps_sym:.1e}]"
            )


def eval_xi_hat(res: ReservoirSymbol, theta: float) -> np.ndarray:
    return res.xi_hat(theta)


def diagonal_projectors(d_B: int) -> list[np.ndarray]:
    """
    rank one projectors on the standard basis of the environment cell

    Parameters:
    - d_B: dimension of the cell

    Returns:
        [e_k e_k*]
    """
    projectors = []
    for k in range(d_B):
        P = np.zeros((d_B, d_B), dtype=np.complex128)
        P[k, k] = 1.0
        projectors.append(P)
    return projectors


def projectors_from_ranks(ranks: Iterable[int]) -> list[np.ndarray]:
    ranks = list(ranks)
    d_B = sum(ranks)
    projectors = []
    start = 0
    for r in ranks:
        P = np.zeros((d_B, d_B), dtype=np.complex128)
        P[start:start + r, start:start + r] = np.eye(r)
        projectors.append(P)
        start += r
    return projectors
