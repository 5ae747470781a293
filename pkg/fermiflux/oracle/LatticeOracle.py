"""
brute force evolution of the quasi-free state on a truncated lattice

The environment keeps the sites -L..L, each carrying a copy of the cell H_B,
and the sample is appended last. The truncated walk 𝔘 shifts δ_n -> δ_{n-1},
wraps the site -L onto L, and lets the site 0 interact with the sample
through Z. The initial environment symbol is block circulant, so it is
invariant under the free periodic shift and every block with |m - n| <= L
equals Ξ_{m-n}.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.sparse

from fermiflux.common.BaseSolver import BaseSolver
from fermiflux.common.exceptions import ConfigError, TruncationExceeded
from fermiflux.common.utils import dagger
from fermiflux.model.BlockUnitary import BlockUnitary, validate_sample
from fermiflux.model.ReservoirSymbol import ReservoirSymbol

logger = logging.getLogger(__name__)

DUMP_MAGIC = 0x46464C58

Site = Optional[int]


@dataclass
class LatticeState:
    L: int
    d_B: int
    d_S: int
    T: np.ndarray
    projectors: list[np.ndarray]
    xi_blocks: dict[int, np.ndarray] = field(default_factory=dict)
    delta0: Optional[np.ndarray] = None
    t: int = 0
    margin: int = 0

    @property
    def n_sites(self) -> int:
        return 2 * self.L + 1

    @property
    def dim(self) -> int:
        return self.n_sites * self.d_B + self.d_S

    @property
    def horizon(self) -> int:
        return self.L - self.margin

    def index(self, n: Site) -> slice:
        """
        coordinates of a site, None standing for the sample

        Parameters:
        - n: site in -L..L or None

        Returns:
            slice into T
        """
        if n is None:
            start = self.n_sites * self.d_B
            return slice(start, start + self.d_S)
        assert -self.L <= n <= self.L, f"site {n} outside -{self.L}..{self.L}"
        start = (n + self.L) * self.d_B
        return slice(start, start + self.d_B)

    def block(self, n: Site, m: Site) -> np.ndarray:
        return self.T[self.index(n), self.index(m)]

    def sample_block(self) -> np.ndarray:
        return self.block(None, None)

    def check_horizon(self):
        if self.t >= self.horizon:
            raise TruncationExceeded(
                f"time {self.t} reached the truncation horizon L - margin = {self.horizon}"
            )

    def dump(self, path: Union[str, Path]):
        """
        write the symbol with a header of four little endian int32 (magic, L, d_B, d_S)
        followed by the row major complex128 entries

        Parameters:
        - path: output file

        """
        header = np.array([DUMP_MAGIC, self.L, self.d_B, self.d_S], dtype="<i4")
        with open(path, "wb") as handle:
            handle.write(header.tobytes())
            handle.write(np.ascontiguousarray(self.T, dtype="<c16").tobytes())


def load_dump(path: Union[str, Path]) -> tuple[int, int, int, np.ndarray]:
    """
    read a lattice dump

    Parameters:
    - path: dump file

    Returns:
        (L, d_B, d_S, T)
    """
    raw = Path(path).read_bytes()
    magic, L, d_B, d_S = (int(v) for v in np.frombuffer(raw[:16], dtype="<i4"))
    if magic != DUMP_MAGIC:
        raise ConfigError(f"{path} is not a lattice dump (magic {magic:#x})")
    dim = (2 * L + 1) * d_B + d_S
    T = np.frombuffer(raw[16:], dtype="<c16")
    if T.size != dim * dim:
        raise ConfigError(f"{path} holds {T.size} entries, expected {dim * dim}")
    return L, d_B, d_S, T.reshape(dim, dim).copy()


def build_lattice_unitary(Z: BlockUnitary, L: int) -> scipy.sparse.csr_matrix:
    """
    one step of the truncated walk on ℓ²({-L..L}) ⊗ H_B ⊕ H_S

    Parameters:
    - Z: block unitary
    - L: truncation, L >= 1

    Returns:
        sparse unitary
    """
    assert int(L) == L and L >= 1, f"truncation must be a positive integer, got {L}"
    d_B, d_S = Z.d_B, Z.d_S
    n_sites = 2 * L + 1
    sample = n_sites * d_B

    def start(n: int) -> int:
        return (n + L) * d_B

    rows, cols, values = [], [], []
    for n in range(-L, L + 1):
        if n == 0:
            continue
        target = L if n == -L else n - 1
        rows.extend(start(target) + b for b in range(d_B))
        cols.extend(start(n) + b for b in range(d_B))
        values.extend([1.0] * d_B)

    def place(block: np.ndarray, row0: int, col0: int):
        r, c = np.nonzero(block)
        rows.extend(row0 + r)
        cols.extend(col0 + c)
        values.extend(block[r, c])

    place(Z.C, start(-1), start(0))
    place(Z.Z_SB, sample, start(0))
    place(Z.Z_BS, start(-1), sample)
    place(Z.M, sample, sample)
    dim = sample + d_S
    return scipy.sparse.coo_matrix(
        (np.asarray(values, dtype=np.complex128), (np.asarray(rows), np.asarray(cols))), shape=(dim, dim)
    ).tocsr()


def init_lattice_state(
        res: ReservoirSymbol,
        delta0: Union[float, np.ndarray],
        d_S: int,
        L: int,
        margin: Optional[int] = None,
        extra_margin: int = 2
) -> LatticeState:
    """
    block circulant environment symbol T_{n,m} = Ξ_{(m-n) mod (2L+1)} next to Δ0

    Parameters:
    - res: reservoir symbol
    - delta0: initial sample symbol
    - d_S: sample dimension
    - L: truncation
    - margin: sites reserved against boundary effects, L_Ξ + extra_margin when omitted
    - extra_margin: additional sites on top of the reservoir band

    Returns:
        lattice state at t = 0
    """
    assert int(L) == L and L >= 1, f"truncation must be a positive integer, got {L}"
    assert res.band <= L, f"reservoir band {res.band} exceeds the truncation {L}"
    delta0 = validate_sample(delta0, d_S)
    d_B = res.d_B
    n_sites = 2 * L + 1
    dim = n_sites * d_B + d_S
    T = np.zeros((dim, dim), dtype=np.complex128)
    for n in range(n_sites):
        for m in range(n_sites):
            d = (m - n + L) % n_sites - L
            if abs(d) <= res.band:
                T[n * d_B:(n + 1) * d_B, m * d_B:(m + 1) * d_B] = res.block(d)
    T[n_sites * d_B:, n_sites * d_B:] = delta0
    margin = res.band + extra_margin if margin is None else int(margin)
    assert 0 <= margin < L, f"margin {margin} must lie in [0, {L})"
    logger.debug("lattice state: L=%d dim=%d margin=%d", L, dim, margin)
    return LatticeState(
        L, d_B, d_S, T, [P.copy() for P in res.projectors],
        xi_blocks={l: X.copy() for l, X in res.blocks.items()}, delta0=delta0, t=0, margin=margin
    )


def step(U: scipy.sparse.csr_matrix, state: LatticeState) -> LatticeState:
    # T <- 𝔘 T 𝔘*
    T = U @ np.asarray(U @ state.T).conj().T
    state.T = 0.5 * (T + dagger(T))
    state.t += 1
    return state


def evolve(U: scipy.sparse.csr_matrix, state: LatticeState, steps: int, check: bool = True) -> LatticeState:
    """
    advance the lattice state

    Parameters:
    - U: truncated walk from build_lattice_unitary
    - state: lattice state, updated in place
    - steps: number of steps
    - check: refuse to pass the truncation horizon

    Returns:
        the updated state
    """
    assert int(steps) == steps and steps >= 0, f"steps must be a non-negative integer, got {steps}"
    if check and state.t + steps >= state.horizon:
        raise TruncationExceeded(
            f"evolving to t={state.t + steps} passes the horizon {state.horizon} (L={state.L}, margin={state.margin})"
        )
    for _ in range(int(steps)):
        step(U, state)
    return state


def _scattering_amplitude(Z: BlockUnitary, k: int) -> np.ndarray:
    if k == 0:
        return Z.C.copy()
    return Z.Z_BS @ np.linalg.matrix_power(Z.M, k - 1) @ Z.Z_SB


def lattice_power_block(Z: BlockUnitary, t: int, n: Site, m: Site) -> np.ndarray:
    """
    block ⟨n, 𝔘^t m⟩ of the walk on the infinite lattice, None standing for the sample

    Parameters:
    - Z: block unitary
    - t: power
    - n: row site
    - m: column site

    Returns:
        block of size dim(n) x dim(m)
    """
    assert int(t) == t and t >= 0, f"power must be a non-negative integer, got {t}"
    rows = Z.d_S if n is None else Z.d_B
    cols = Z.d_S if m is None else Z.d_B
    zero = np.zeros((rows, cols), dtype=np.complex128)

    if m is None:
        if n is None:
            return np.linalg.matrix_power(Z.M, t)
        if -t <= n <= -1:
            return Z.Z_BS @ np.linalg.matrix_power(Z.M, t + n)
        return zero
    if m < 0 or m >= t:
        if n is not None and n == m - t:
            return np.eye(Z.d_B, dtype=np.complex128)
        return zero
    if n is None:
        return np.linalg.matrix_power(Z.M, t - m - 1) @ Z.Z_SB
    if m - t <= n <= -1:
        return _scattering_amplitude(Z, n - m + t)
    return zero


class LatticeOracle(BaseSolver):
    # brute force reference for the sample symbol, the currents and the entropy production
    def __init__(self, L: int = 200, extra_margin: int = 2, eps_clip: float = 1e-7, log_odds_method: str = "circulant"):
        """
        Parameters:
        - L: truncation, sites -L..L
        - extra_margin: sites reserved on top of the reservoir band
        - eps_clip: clamp of the initial log-odds
        - log_odds_method: "circulant" or "dense"

        """
        params = {
            "L": L,
            "extra_margin": extra_margin,
            "eps_clip": eps_clip,
            "log_odds_method": log_odds_method,
        }
        super().__init__(params)

    @staticmethod
    def validate_params(params: dict):
        """
        validate solver parameters

        Parameters:
        - params: dict containing parameters for the solver

        """
        assert "L" in params
        assert "extra_margin" in params
        assert "eps_clip" in params
        assert "log_odds_method" in params
        assert int(params["L"]) == params["L"] and params["L"] >= 1
        assert params["extra_margin"] >= 0
        assert 0.0 < params["eps_clip"] < 0.5
        assert params["log_odds_method"] in ["circulant", "dense"]

    def fit(self, Z: BlockUnitary, res: ReservoirSymbol, delta0: Union[float, np.ndarray] = 0.5):
        """
        set up the truncated lattice at t = 0

        Parameters:
        - Z: block unitary
        - res: reservoir symbol
        - delta0: initial sample symbol

        Returns:
            self
        """
        from fermiflux.entropy.EntropyProduction import lattice_log_odds

        self.Z_ = Z
        self.unitary_ = build_lattice_unitary(Z, self.L)
        self.state_ = init_lattice_state(res, delta0, Z.d_S, self.L, extra_margin=self.extra_margin)
        self.initial_ = self.state_.T.copy()
        self.log_odds_ = lattice_log_odds(self.state_, self.eps_clip, method=self.log_odds_method)
        logger.info(
            "lattice oracle: L=%d dim=%d horizon=%d", self.L, self.state_.dim, self.state_.horizon
        )
        return self

    @property
    def t(self) -> int:
        self.check_fitted()
        return self.state_.t

    def step(self, steps: int = 1):
        self.check_fitted()
        evolve(self.unitary_, self.state_, steps)
        return self

    def evolve_to(self, t: int):
        self.check_fitted()
        assert t >= self.state_.t, f"cannot evolve backwards from {self.state_.t} to {t}"
        return self.step(t - self.state_.t)

    def sample_block(self) -> np.ndarray:
        self.check_fitted()
        return self.state_.sample_block()

    def env_block(self, n: int, m: int) -> np.ndarray:
        self.check_fitted()
        return self.state_.block(n, m)

    def flux(self, k: int) -> float:
        from fermiflux.transport.Currents import finite_time_flux

        self.check_fitted()
        return finite_time_flux(self.state_, self.Z_, k)

    def fluxes(self) -> np.ndarray:
        return np.array([self.flux(k) for k in range(len(self.state_.projectors))])

    def entropy(self) -> float:
        from fermiflux.entropy.EntropyProduction import finite_time_entropy

        self.check_fitted()
        self.state_.check_horizon()
        return finite_time_entropy(self.initial_, self.state_.T, self.log_odds_, self.state_.t)

    def dump(self, path: Union[str, Path]):
        self.check_fitted()
        self.state_.dump(path)
