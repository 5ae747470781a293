"""
star shaped circuits of the leading order currents

For simple eigenvalues λ_i of W and rank one reservoirs, every eigenvalue is a
circuit: branch k joins a common node to the ground through the voltage source
f_k(-i log λ_i) and the conductance g_k = |⟨φ_k, χ_i⟩|², φ_k = Aψ_k.
"""
import logging
from dataclasses import dataclass
from warnings import warn

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StarCircuit:
    eigenvalue: complex
    theta: float
    sources: np.ndarray
    conductances: np.ndarray
    currents: np.ndarray
    currents_kirchhoff: np.ndarray

    @property
    def node_defect(self) -> float:
        return float(abs(self.currents.sum()))

    def to_dict(self) -> dict:
        return {
            "theta": float(self.theta),
            "sources": [float(v) for v in self.sources],
            "conductances": [float(g) for g in self.conductances],
            "currents": [float(j) for j in self.currents],
        }


def star_closed_form(conductances: np.ndarray, sources: np.ndarray) -> np.ndarray:
    """
    branch currents J_k = Σ_k' g_k g_k' / G (f_k' - f_k), G = Σ_k g_k

    Parameters:
    - conductances: g_k >= 0
    - sources: voltages f_k

    Returns:
        branch currents, zero when every conductance vanishes
    """
    g = np.asarray(conductances, dtype=float)
    f = np.asarray(sources, dtype=float)
    assert g.shape == f.shape, f"{g.size} conductances but {f.size} sources"
    G = g.sum()
    if G <= 0.0:
        return np.zeros_like(g)
    return g * (np.dot(g, f) / G - f)


def kirchhoff_currents(conductances: np.ndarray, sources: np.ndarray) -> np.ndarray:
    """
    nodal analysis of the star: unknowns are the common node potential V and
    the branch currents I_k, with I_k = g_k (V - f_k) and Σ_k I_k = 0

    Parameters:
    - conductances: g_k >= 0
    - sources: voltages f_k

    Returns:
        branch currents, zero when every conductance vanishes
    """
    g = np.asarray(conductances, dtype=float)
    f = np.asarray(sources, dtype=float)
    assert g.shape == f.shape, f"{g.size} conductances but {f.size} sources"
    n = g.size
    if g.sum() <= 0.0:
        return np.zeros(n)
    system = np.zeros((n + 1, n + 1))
    rhs = np.zeros(n + 1)
    system[:n, 0] = -g
    system[:n, 1:] = np.eye(n)
    rhs[:n] = -g * f
    system[n, 1:] = 1.0
    solution = scipy.linalg.solve(system, rhs)
    return solution[1:]


def build_star_circuit(eigenvalue: complex, theta: float, conductances: np.ndarray, sources: np.ndarray) -> StarCircuit:
    g = np.asarray(conductances, dtype=float)
    f = np.asarray(sources, dtype=float)
    closed = star_closed_form(g, f)
    solved = kirchhoff_currents(g, f)
    gap = float(np.max(np.abs(closed - solved))) if g.size else 0.0
    if gap > 1e-12 * max(1.0, float(np.max(np.abs(closed), initial=0.0))):
        warn(f"star circuit at θ={theta:.6f}: closed form and nodal solve differ by {gap:.3e}")
    logger.debug("star circuit at θ=%.6f: %d branches, nodal gap %.3e", theta, g.size, gap)
    return StarCircuit(complex(eigenvalue), float(theta), f, g, closed, solved)
