"""
command line front end

    fermiflux validate|steady|evolve|sweep --config <path> [--out <dir>]

Exit codes: 0 success, 1 usage or configuration error, 2 a model assumption
fails, 3 a numerical procedure fails.
"""
import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from fermiflux.cli.config import RunConfig, load_config
from fermiflux.common.PeriodicGrid import PeriodicGrid
from fermiflux.common.exceptions import (
    AssumptionError,
    ConfigError,
    FermiFluxError,
    TruncationExceeded,
)
from fermiflux.model.BlockUnitary import check_kalman, check_sp, validate_sample
from fermiflux.oracle.LatticeOracle import LatticeOracle
from fermiflux.perturbation.SmallCoupling import SmallCouplingExpansion
from fermiflux.solver.NonEquilibriumSolver import NonEquilibriumSolver
from fermiflux.steady.SteadyState import steady_sample

logger = logging.getLogger(__name__)

THREADS_ENV = "FERMIFLUX_THREADS"
_IC_GRID = 512


def _finite(value: float) -> Optional[float]:
    value = float(value)
    return value if math.isfinite(value) else None


def _format(value) -> str:
    if isinstance(value, str):
        return value
    return format(float(value), ".17g")


def write_json(path: Path, payload: dict):
    with open(path, "w") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")
    logger.info("wrote %s", path)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])
    logger.info("wrote %s (%d rows)", path, len(rows))


def _check(name: str, passed: Optional[bool], hard: bool, value=None, message: str = "") -> dict:
    return {
        "name": name,
        "passed": passed,
        "hard": hard,
        "value": None if value is None else _finite(value),
        "message": message,
    }


def cmd_validate(config: RunConfig, out: Path, args: argparse.Namespace) -> int:
    """
    run the structural checks of the configured model

    Parameters:
    - config: run configuration
    - out: output directory
    - args: parsed command line

    Returns:
        0 when every hard check passes, 2 otherwise
    """
    numerics = config.numerics
    checks = []
    spec, failure = None, None
    try:
        spec = config.coupling_spec()
        Z = config.block_unitary(tol_unit=np.inf)
    except AssumptionError as err:
        checks.append(_check("zunitary", False, True, message=str(err)))
        Z, failure = None, err

    if Z is not None:
        residual = Z.unitarity_residual()
        checks.append(_check("zunitary", residual <= numerics.tol_unit, True, residual))
        rho = check_sp(Z.M)
        checks.append(_check("Sp", rho < 1 - numerics.tol_sp, True, rho))
        try:
            res = config.reservoir_symbol(Z.d_B)
        except AssumptionError as err:
            checks.append(_check("Bl", False, True, message=str(err)))
            res = None
        if res is not None:
            checks.append(_check("Bl", True, True))
            grid = PeriodicGrid(max(_IC_GRID, 4 * res.band + 1))
            low, high = res.spectrum_bounds(grid)
            checks.append(_check(
                "IC+", bool(low >= numerics.eps_sym and high <= 1 - numerics.eps_sym), False, min(low, 1 - high),
                message=f"reservoir spectrum in [{low:.6g}, {high:.6g}]",
            ))
        try:
            validate_sample(config.initial_sample(), Z.d_S)
            checks.append(_check("sample", True, True))
        except AssumptionError as err:
            checks.append(_check("sample", False, True, message=str(err)))

    if spec is not None:
        checks.append(_check("Kalman", check_kalman(spec.W, spec.A, numerics.tol_rank), False))
    elif failure is not None:
        checks.append(_check("Kalman", None, False, message=f"{type(failure).__name__}: {failure}"))
    else:
        checks.append(_check("Kalman", None, False, message="no coupling specification"))

    passed = all(c["passed"] for c in checks if c["hard"])
    for c in checks:
        level = logging.INFO if c["passed"] is not False else logging.WARNING
        logger.log(level, "check %s: %s %s", c["name"], {True: "PASS", False: "FAIL", None: "SKIP"}[c["passed"]],
                   c["message"])
    write_json(out / "validation.json", {"checks": checks, "passed": passed})
    return 0 if passed else 2


def cmd_steady(config: RunConfig, out: Path, args: argparse.Namespace) -> int:
    numerics = config.numerics
    Z = config.block_unitary()
    res = config.reservoir_symbol(Z.d_B)
    solver = NonEquilibriumSolver(
        grid_size=numerics.grid_size,
        with_entropy=numerics.entropy,
        eps_sym=numerics.eps_sym,
        eps_clip=numerics.eps_clip,
        tol_sp=numerics.tol_sp,
        tol_stein=numerics.tol_stein,
    )
    report = solver.fit(Z, res).report()
    write_json(out / "steady.json", report.to_dict())
    header = ["theta"] + [f"jhat_{k + 1}" for k in range(res.n_B)] + ["entropy_integrand"]
    write_csv(out / "steady.csv", header, report.rows())
    return 0


def cmd_evolve(config: RunConfig, out: Path, args: argparse.Namespace) -> int:
    """
    run the truncated lattice and record the approach to the steady state

    Parameters:
    - config: run configuration
    - out: output directory
    - args: parsed command line, --t-max overrides numerics.t_max

    Returns:
        0
    """
    numerics = config.numerics
    t_max = numerics.t_max if args.t_max is None else args.t_max
    if t_max < 0:
        raise ConfigError(f"t_max must be non-negative, got {t_max}")
    Z = config.block_unitary()
    res = config.reservoir_symbol(Z.d_B)
    delta_inf = steady_sample(Z, res, tol_sp=numerics.tol_sp, tol_stein=numerics.tol_stein).delta

    oracle = LatticeOracle(
        L=numerics.L,
        extra_margin=numerics.extra_margin,
        eps_clip=numerics.eps_clip,
        log_odds_method=numerics.log_odds_method,
    )
    oracle.fit(Z, res, config.initial_sample())
    if t_max >= oracle.state_.horizon:
        raise TruncationExceeded(
            f"t_max={t_max} reaches the truncation horizon {oracle.state_.horizon} of L={numerics.L}"
        )

    rows = []
    for t in range(t_max + 1):
        if t > 0:
            oracle.step()
        distance = float(np.linalg.norm(oracle.sample_block() - delta_inf, 2))
        rows.append([t] + list(oracle.fluxes()) + [oracle.entropy(), distance])
        logger.debug("evolve: t=%d dist=%.3e", t, distance)
    header = ["t"] + [f"flux_{k + 1}" for k in range(res.n_B)] + ["sigma_t", "dist_to_Dinf"]
    write_csv(out / "evolve.csv", header, rows)
    if config.outputs.dump_lattice:
        oracle.dump(out / "lattice.bin")
        logger.info("wrote %s", out / "lattice.bin")
    return 0


def cmd_sweep(config: RunConfig, out: Path, args: argparse.Namespace) -> int:
    numerics = config.numerics
    spec = config.coupling_spec()
    if spec is None:
        raise ConfigError("sweep needs a model with W, A and alpha or a preset")
    res = config.reservoir_symbol(spec.d_B)
    expansion = SmallCouplingExpansion(
        tol_cluster=numerics.tol_cluster, tol_rank=numerics.tol_rank, eps_clip=numerics.eps_clip
    )
    expansion.fit(spec, res)
    report = expansion.sweep(numerics.alpha_sweep)
    rows = report.rows()
    header = list(rows[0])
    write_csv(out / "sweep.csv", header, [[row[key] for key in header] for row in rows])
    summary = {
        "alphas": [float(a) for a in report.alphas],
        "slopes": {key: _finite(value) for key, value in report.slopes.items()},
        "currents_leading": [float(j) for j in report.leading_currents],
        "entropy_leading": None if report.leading_entropy is None else float(report.leading_entropy),
        "simple": bool(expansion.split_.simple),
        "circuits": None if expansion.circuits_ is None else [c.to_dict() for c in expansion.circuits_],
    }
    write_json(out / "sweep.json", summary)
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "steady": cmd_steady,
    "evolve": cmd_evolve,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", default=".", help="output directory, created if missing")
    common.add_argument("--verbose", action="store_true", help="log at DEBUG level")

    parser = argparse.ArgumentParser(prog="fermiflux", description="steady states of fermionic walkers between reservoirs")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("validate", parents=[common], help="check the model assumptions")
    commands.add_parser("steady", parents=[common], help="steady state, currents and entropy production")
    evolve = commands.add_parser("evolve", parents=[common], help="finite time evolution on the truncated lattice")
    evolve.add_argument("--t-max", type=int, default=None, help="last time step, overrides numerics.t_max")
    commands.add_parser("sweep", parents=[common], help="exact against leading order on small couplings")
    return parser


def _thread_limit() -> Optional[int]:
    value = os.environ.get(THREADS_ENV)
    if value is None or value == "":
        return None
    try:
        limit = int(value)
    except ValueError as err:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {value!r}") from err
    if limit < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    return limit


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        config = load_config(args.config)
        with threadpool_limits(limits=_thread_limit()):
            return COMMANDS[args.command](config, out, args)
    except FermiFluxError as err:
        logger.error("%s: %s", type(err).__name__, err)
        return err.exit_code
    except np.linalg.LinAlgError as err:
        logger.error("linear algebra failure: %s", err)
        return 3
    except AssertionError as err:
        logger.error("invalid input: %s", err)
        return 1


if __name__ == "__main__":
    sys.exit(main())
