"""
run configuration of the command line front end

One JSON document with the sections model, reservoirs, sample, numerics and
outputs. Matrices are nested arrays whose entries are [re, im] pairs, real
matrices may also be given as plain nested numbers.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from fermiflux.common.PeriodicGrid import PeriodicGrid
from fermiflux.common.exceptions import ConfigError
from fermiflux.common.utils import TOL_CLUSTER, TOL_RANK, TOL_SP, TOL_STEIN, TOL_UNIT
from fermiflux.entropy.EntropyProduction import EPS_CLIP, EPS_SYM
from fermiflux.model.BlockUnitary import BlockUnitary, CouplingSpec, build_block_unitary
from fermiflux.model.ReservoirSymbol import (
    Density,
    ReservoirSymbol,
    diagonal_projectors,
    projectors_from_ranks,
)
from fermiflux.perturbation.SmallCoupling import DEFAULT_ALPHAS
from fermiflux.presets.CycleWalk import PRESETS

logger = logging.getLogger(__name__)

SECTIONS = ("model", "reservoirs", "sample", "numerics", "outputs")

# model sources, each a set of keys that must appear together
MODEL_SOURCES = {
    "preset": ({"preset"}, {"params"}),
    "coupling": ({"W", "A", "alpha"}, set()),
    "blocks": ({"C", "Z_BS", "Z_SB", "M"}, set()),
    "matrix": ({"Z", "d_B"}, set()),
}


def parse_matrix(value, name: str = "matrix") -> np.ndarray:
    """
    read a matrix given as nested [re, im] pairs or as real numbers

    Parameters:
    - value: nested lists
    - name: used in error messages

    Returns:
        complex 2d array
    """
    try:
        array = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{name} is not a rectangular numeric array") from err
    if array.ndim == 3 and array.shape[-1] == 2:
        return array[..., 0] + 1j * array[..., 1]
    if array.ndim == 2:
        return array.astype(np.complex128)
    raise ConfigError(f"{name} must be a matrix of numbers or of [re, im] pairs, got shape {array.shape}")


def _check_keys(section: dict, allowed: set, name: str):
    if not isinstance(section, dict):
        raise ConfigError(f"section {name!r} must be an object")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")


@dataclass
class NumericsConfig:
    grid_size: Union[int, str] = "auto"
    L: int = 200
    extra_margin: int = 2
    t_max: int = 150
    alpha_sweep: tuple = DEFAULT_ALPHAS
    entropy: bool = True
    log_odds_method: str = "circulant"
    eps_sym: float = EPS_SYM
    eps_clip: float = EPS_CLIP
    tol_sp: float = TOL_SP
    tol_stein: float = TOL_STEIN
    tol_unit: float = TOL_UNIT
    tol_cluster: float = TOL_CLUSTER
    tol_rank: float = TOL_RANK

    def __post_init__(self):
        if isinstance(self.grid_size, str):
            assert self.grid_size == "auto", f"grid_size must be an integer or 'auto', got {self.grid_size!r}"
        else:
            assert int(self.grid_size) == self.grid_size and self.grid_size >= 1, "grid_size must be positive"
        assert int(self.L) == self.L and self.L >= 1, f"L must be a positive integer, got {self.L}"
        assert int(self.extra_margin) == self.extra_margin and self.extra_margin >= 0
        assert int(self.t_max) == self.t_max and self.t_max >= 0, "t_max must be a non-negative integer"
        self.alpha_sweep = tuple(float(a) for a in self.alpha_sweep)
        assert len(self.alpha_sweep) >= 1 and all(a > 0 for a in self.alpha_sweep), \
            "alpha_sweep must list positive couplings"
        assert isinstance(self.entropy, bool), "entropy must be true or false"
        assert self.log_odds_method in ["circulant", "dense"]
        assert 0.0 < self.eps_sym < 0.5
        assert 0.0 < self.eps_clip <= self.eps_sym
        for name in ("tol_sp", "tol_stein", "tol_unit", "tol_cluster", "tol_rank"):
            assert getattr(self, name) > 0.0, f"{name} must be positive"

    def grid(self) -> Optional[PeriodicGrid]:
        return None if self.grid_size == "auto" else PeriodicGrid(int(self.grid_size))


@dataclass
class OutputsConfig:
    dump_lattice: bool = False

    def __post_init__(self):
        assert isinstance(self.dump_lattice, bool), "dump_lattice must be true or false"


@dataclass
class RunConfig:
    model: dict
    reservoirs: Optional[dict] = None
    sample: dict = field(default_factory=dict)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)

    def __post_init__(self):
        _check_keys(self.model, set().union(*(req | opt for req, opt in MODEL_SOURCES.values())), "model")
        present = [name for name, (required, _) in MODEL_SOURCES.items() if required & set(self.model)]
        if len(present) != 1:
            raise ConfigError(f"model needs exactly one source among {list(MODEL_SOURCES)}, got {present}")
        self.source = present[0]
        required, optional = MODEL_SOURCES[self.source]
        missing = required - set(self.model)
        if missing:
            raise ConfigError(f"model source {self.source!r} is missing {sorted(missing)}")
        extra = set(self.model) - required - optional
        if extra:
            raise ConfigError(f"model source {self.source!r} does not accept {sorted(extra)}")
        if self.source == "preset":
            if self.model["preset"] not in PRESETS:
                raise ConfigError(f"unknown preset {self.model['preset']!r}, known: {sorted(PRESETS)}")
            if self.reservoirs is not None:
                raise ConfigError("a preset brings its own reservoirs, drop the reservoirs section")
        elif self.reservoirs is None:
            raise ConfigError("explicit models need a reservoirs section")
        if self.reservoirs is not None:
            _check_keys(self.reservoirs, {"projectors", "ranks", "densities", "blocks"}, "reservoirs")
            if ("densities" in self.reservoirs) == ("blocks" in self.reservoirs):
                raise ConfigError("reservoirs need exactly one of 'densities' and 'blocks'")
            if "projectors" in self.reservoirs and "ranks" in self.reservoirs:
                raise ConfigError("reservoirs accept 'projectors' or 'ranks', not both")
        _check_keys(self.sample, {"initial"}, "sample")
        self._preset = None

    @classmethod
    def from_dict(cls, document: dict) -> "RunConfig":
        """
        parse a configuration document

        Parameters:
        - document: decoded JSON

        Returns:
            run configuration
        """
        _check_keys(document, set(SECTIONS), "config")
        if "model" not in document:
            raise ConfigError("config has no model section")
        numerics = document.get("numerics", {})
        outputs = document.get("outputs", {})
        _check_keys(numerics, set(NumericsConfig.__dataclass_fields__), "numerics")
        _check_keys(outputs, set(OutputsConfig.__dataclass_fields__), "outputs")
        try:
            return cls(
                model=document["model"],
                reservoirs=document.get("reservoirs"),
                sample=document.get("sample", {}),
                numerics=NumericsConfig(**numerics),
                outputs=OutputsConfig(**outputs),
            )
        except (AssertionError, TypeError, ValueError) as err:
            raise ConfigError(f"invalid configuration: {err}") from err

    def preset(self) -> tuple[CouplingSpec, ReservoirSymbol]:
        if self._preset is None:
            self._preset = PRESETS[self.model["preset"]](self.model.get("params", {}))
        return self._preset

    def coupling_spec(self) -> Optional[CouplingSpec]:
        """
        sample dynamics and coupling operator when the model provides them

        Returns:
            coupling specification, None for models given by their blocks
        """
        if self.source == "preset":
            return self.preset()[0]
        if self.source == "coupling":
            try:
                alpha = float(self.model["alpha"])
            except (TypeError, ValueError) as err:
                raise ConfigError(f"alpha must be a number, got {self.model['alpha']!r}") from err
            return CouplingSpec(
                parse_matrix(self.model["W"], "W"), parse_matrix(self.model["A"], "A"), alpha,
                tol_unit=self.numerics.tol_unit,
            )
        return None

    def block_unitary(self, tol_unit: Optional[float] = None) -> BlockUnitary:
        """
        Z of the configured model

        Parameters:
        - tol_unit: unitarity tolerance, numerics.tol_unit when omitted

        Returns:
            block unitary
        """
        tol_unit = self.numerics.tol_unit if tol_unit is None else tol_unit
        spec = self.coupling_spec()
        if spec is not None:
            return build_block_unitary(spec, tol_unit=tol_unit)
        if self.source == "blocks":
            blocks = [parse_matrix(self.model[name], name) for name in ("C", "Z_BS", "Z_SB", "M")]
            return BlockUnitary(*blocks, tol_unit=tol_unit)
        d_B = self.model["d_B"]
        if not isinstance(d_B, int) or d_B < 1:
            raise ConfigError(f"d_B must be a positive integer, got {d_B!r}")
        return BlockUnitary.from_matrix(parse_matrix(self.model["Z"], "Z"), d_B, tol_unit=tol_unit)

    def reservoir_symbol(self, d_B: int) -> ReservoirSymbol:
        """
        reservoir symbol of the configured model

        Parameters:
        - d_B: dimension of the environment cell

        Returns:
            reservoir symbol
        """
        if self.source == "preset":
            return self.preset()[1]
        section = self.reservoirs
        if "projectors" in section:
            projectors = [parse_matrix(P, f"projector {k}") for k, P in enumerate(section["projectors"])]
        elif "ranks" in section:
            projectors = projectors_from_ranks(section["ranks"])
        else:
            projectors = diagonal_projectors(d_B)
        if projectors[0].shape != (d_B, d_B):
            raise ConfigError(f"projectors must be {d_B}x{d_B}, got {projectors[0].shape}")
        try:
            if "densities" in section:
                densities = [Density.from_dict(d) for d in section["densities"]]
                return ReservoirSymbol.from_densities(projectors, densities)
            blocks = {int(l): parse_matrix(X, f"block {l}") for l, X in section["blocks"].items()}
            return ReservoirSymbol(blocks, projectors)
        except (AssertionError, ValueError) as err:
            raise ConfigError(f"invalid reservoirs: {err}") from err

    def initial_sample(self) -> Union[float, np.ndarray]:
        initial = self.sample.get("initial", 0.5)
        if isinstance(initial, (int, float)):
            return float(initial)
        return parse_matrix(initial, "sample.initial")


def load_config(path: Union[str, Path]) -> RunConfig:
    """
    read and parse a configuration file

    Parameters:
    - path: JSON file

    Returns:
        run configuration
    """
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    try:
        document = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    if not isinstance(document, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    config = RunConfig.from_dict(document)
    logger.debug("loaded config %s with model source %s", path, config.source)
    return config
