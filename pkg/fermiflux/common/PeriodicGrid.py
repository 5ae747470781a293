"""
uniform quadrature on the circle

The trapezoid rule on N equispaced nodes integrates e^{ilθ}/2π exactly for
|l| < N and converges geometrically for integrands analytic in a strip.
"""
import math
from typing import Callable, Union

import numpy as np


class PeriodicGrid:
    # implementation of the periodic trapezoid rule for ∫ g(θ) dθ/2π
    def __init__(self, N: int = 512):
        """
        Parameters:
        - N: number of nodes

        """
        assert int(N) == N and N >= 1, f"grid size must be a positive integer, got {N}"
        self.N = int(N)

    def __len__(self) -> int:
        return self.N

    def __repr__(self) -> str:
        return f"PeriodicGrid(N={self.N})"

    @property
    def nodes(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.N) / self.N

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.N, 2 * np.pi / self.N)

    def sample(self, g: Callable[[float], np.ndarray]) -> np.ndarray:
        """
        evaluate a function at every node

        Parameters:
        - g: function of θ

        Returns:
            array with the node index on axis 0
        """
        return np.stack([np.asarray(g(theta)) for theta in self.nodes])

    def quadrature(self, samples: np.ndarray) -> np.ndarray:
        """
        integrate grid samples against dθ/2π

        Parameters:
        - samples: values at the nodes, node index on axis 0

        Returns:
            (1/N) Σ_j g(θ_j)
        """
        samples = np.asarray(samples)
        assert samples.shape[0] == self.N, f"expected {self.N} samples, got {samples.shape[0]}"
        return samples.mean(axis=0)

    def fourier_coefficient(self, samples: np.ndarray, l: int) -> np.ndarray:
        """
        extract the coefficient of e^{ilθ}

        Parameters:
        - samples: values at the nodes, node index on axis 0
        - l: frequency

        Returns:
            ∫ e^{-ilθ} g(θ) dθ/2π by quadrature
        """
        phase = np.exp(-1j * l * self.nodes)
        samples = np.asarray(samples)
        return np.tensordot(phase, samples, axes=(0, 0)) / self.N

    def fourier_coefficients(self, samples: np.ndarray) -> dict[int, np.ndarray]:
        """
        all resolvable Fourier coefficients of grid samples

        the Nyquist coefficient of an even grid is split evenly between ±N/2

        Parameters:
        - samples: values at the nodes, node index on axis 0

        Returns:
            map l -> coefficient of e^{ilθ}, for |l| <= N/2
        """
        coefficients = np.fft.fft(np.asarray(samples), axis=0) / self.N
        result: dict[int, np.ndarray] = {}
        for j in range(self.N):
            l = j if j <= self.N // 2 else j - self.N
            result[l] = coefficients[j]
        if self.N % 2 == 0 and self.N > 1:
            half = self.N // 2
            result[half] = 0.5 * coefficients[half]
            result[-half] = 0.5 * coefficients[half]
        return result


def periodic_quadrature(g: Union[np.ndarray, Callable[[float], np.ndarray]], grid: PeriodicGrid) -> np.ndarray:
    """
    integrate a matrix valued function over the circle against dθ/2π

    Parameters:
    - g: samples at the grid nodes or a function of θ
    - grid: the periodic grid

    Returns:
        (1/N) Σ_j g(θ_j)
    """
    samples = grid.sample(g) if callable(g) else g
    return grid.quadrature(samples)


def suggest_grid_size(rho: float, tol: float = 1e-13, minimum: int = 512, maximum: int = 2 ** 16) -> int:
    """
    power of two grid size resolving resolvent poles at modulus rho

    an integrand analytic in |Im θ| < -log rho is integrated to about
    rho^N, so N >= log(1/tol) / (-log rho) suffices

    Parameters:
    - rho: spectral radius of the sample matrix M
    - tol: target aliasing error
    - minimum: smallest size returned
    - maximum: largest size returned

    Returns:
        grid size
    """
    if rho <= 0.0:
        return minimum
    if rho >= 1.0:
        return maximum
    needed = math.log(1.0 / tol) / -math.log(rho)
    size = max(minimum, 2 ** math.ceil(math.log2(max(needed, 1.0))))
    return int(min(size, maximum))
