import csv
import json

import numpy as np
import pytest

from fermiflux.cli.main import build_parser, main


def pairs(X: np.ndarray) -> list:
    return np.stack([np.real(X), np.imag(X)], axis=-1).tolist()


def write_config(tmp_path, document: dict, name: str = "run.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(document))
    return str(path)


def read_csv(path) -> list[list[str]]:
    with open(path, newline="") as f:
        return list(csv.reader(f))


@pytest.fixture
def blocks_config(tmp_path, make_block_unitary):
    Z = make_block_unitary(d_B=3, d_S=2, seed=5, rho_max=0.5)
    document = {
        "model": {"C": pairs(Z.C), "Z_BS": pairs(Z.Z_BS), "Z_SB": pairs(Z.Z_SB), "M": pairs(Z.M)},
        "reservoirs": {"densities": [
            {"type": "constant", "value": 0.8},
            {"type": "fourier", "cos": [0.3, 0.05]},
            {"type": "constant", "value": 0.5},
        ]},
        "sample": {"initial": 0.05},
        "numerics": {"L": 12, "grid_size": 256},
    }
    return write_config(tmp_path, document)


def test_parser_requires_config():
    parser = build_parser()
    args = parser.parse_args(["evolve", "--config", "run.json", "--t-max", "4"])
    assert args.command == "evolve" and args.t_max == 4 and args.out == "."
    assert main(["steady"]) == 1
    assert main([]) == 1


def test_validate_cycle(tmp_path):
    config = write_config(tmp_path, {"model": {"preset": "cycle"}})
    assert main(["validate", "--config", config, "--out", str(tmp_path / "out")]) == 0
    report = json.loads((tmp_path / "out" / "validation.json").read_text())
    assert report["passed"]
    checks = {c["name"]: c for c in report["checks"]}
    assert {"zunitary", "Sp", "Bl", "IC+", "sample", "Kalman"} <= set(checks)
    assert checks["Kalman"]["passed"]
    assert checks["Sp"]["value"] < 1.0


def test_validate_fails_without_coupling(tmp_path):
    config = write_config(tmp_path, {"model": {"preset": "cycle", "params": {"alpha": 0.0}}})
    assert main(["validate", "--config", config, "--out", str(tmp_path)]) == 2
    report = json.loads((tmp_path / "validation.json").read_text())
    checks = {c["name"]: c for c in report["checks"]}
    assert checks["Sp"]["passed"] is False
    assert not report["passed"]


def test_validate_skips_kalman_for_blocks(tmp_path, blocks_config):
    assert main(["validate", "--config", blocks_config, "--out", str(tmp_path)]) == 0
    checks = {c["name"]: c for c in json.loads((tmp_path / "validation.json").read_text())["checks"]}
    assert checks["Kalman"]["passed"] is None


def test_validate_reports_non_unitary_sample_dynamics(tmp_path):
    config = write_config(tmp_path, {
        "model": {"W": [[1, 1], [0, 1]], "A": [[1], [0]], "alpha": 0.2},
        "reservoirs": {"densities": [{"type": "constant", "value": 0.3}]},
    })
    assert main(["validate", "--config", config, "--out", str(tmp_path)]) == 2
    checks = {c["name"]: c for c in json.loads((tmp_path / "validation.json").read_text())["checks"]}
    assert checks["zunitary"]["passed"] is False
    assert checks["Kalman"]["passed"] is None
    assert checks["Kalman"]["message"].startswith("NotUnitary")


@pytest.mark.parametrize("text", ["{model", '{"model": {"preset": "cycle"}, "plots": true}'])
def test_bad_configs(tmp_path, text):
    path = tmp_path / "run.json"
    path.write_text(text)
    assert main(["steady", "--config", str(path), "--out", str(tmp_path)]) == 1


def test_missing_config(tmp_path):
    assert main(["steady", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 1


def test_bad_thread_limit(tmp_path, monkeypatch):
    monkeypatch.setenv("FERMIFLUX_THREADS", "many")
    config = write_config(tmp_path, {"model": {"preset": "cycle"}})
    assert main(["validate", "--config", config, "--out", str(tmp_path)]) == 1


def test_steady_blocks_model(tmp_path, blocks_config):
    assert main(["steady", "--config", blocks_config, "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "steady.json").read_text())
    J = summary["currents"]["J"]
    assert abs(sum(J)) <= 1e-10
    assert J[0] < 0.0
    assert summary["quadrature_gap"] <= 1e-9
    assert summary["entropy"]["sigma_plus"] > 0.0
    rows = read_csv(tmp_path / "steady.csv")
    assert rows[0] == ["theta", "jhat_1", "jhat_2", "jhat_3", "entropy_integrand"]
    assert len(rows) == 257


def test_steady_equilibrium_preset(tmp_path):
    config = write_config(tmp_path, {
        "model": {"preset": "cycle", "params": {
            "f_L": {"type": "constant", "value": 0.4}, "f_R": {"type": "constant", "value": 0.4}
        }},
        "numerics": {"grid_size": 1024},
    })
    assert main(["steady", "--config", config, "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "steady.json").read_text())
    assert max(abs(j) for j in summary["currents"]["J"]) <= 1e-11
    assert max(abs(j) for j in summary["currents_exact"]) <= 1e-10
    assert abs(summary["entropy"]["sigma_plus"]) <= 1e-11


def test_evolve_initial_row(tmp_path, blocks_config):
    assert main(["evolve", "--config", blocks_config, "--out", str(tmp_path), "--t-max", "0"]) == 0
    rows = read_csv(tmp_path / "evolve.csv")
    assert rows[0] == ["t", "flux_1", "flux_2", "flux_3", "sigma_t", "dist_to_Dinf"]
    assert len(rows) == 2
    assert float(rows[1][4]) == 0.0


def test_evolve_records_approach(tmp_path, blocks_config):
    assert main(["evolve", "--config", blocks_config, "--out", str(tmp_path), "--t-max", "8"]) == 0
    rows = read_csv(tmp_path / "evolve.csv")[1:]
    assert [int(float(r[0])) for r in rows] == list(range(9))
    assert float(rows[-1][5]) < float(rows[0][5])
    assert not (tmp_path / "lattice.bin").exists()


def test_evolve_past_horizon(tmp_path, blocks_config):
    # L = 12 and a band one reservoir leave nine usable steps
    assert main(["evolve", "--config", blocks_config, "--out", str(tmp_path), "--t-max", "9"]) == 3


def test_evolve_dumps_lattice(tmp_path, make_block_unitary):
    Z = make_block_unitary(d_B=1, d_S=2, seed=4)
    config = write_config(tmp_path, {
        "model": {"Z": pairs(Z.as_matrix()), "d_B": 1},
        "reservoirs": {"densities": [{"type": "constant", "value": 0.6}]},
        "numerics": {"L": 6, "t_max": 2},
        "outputs": {"dump_lattice": True},
    })
    assert main(["evolve", "--config", config, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "lattice.bin").stat().st_size == 16 + 16 * (13 + 2) ** 2


def test_sweep_cycle(tmp_path):
    config = write_config(tmp_path, {"model": {"preset": "cycle"}, "numerics": {"alpha_sweep": [0.04, 0.02]}})
    assert main(["sweep", "--config", config, "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "sweep.json").read_text())
    assert summary["simple"]
    assert len(summary["circuits"]) == 16
    assert summary["currents_leading"][1] == pytest.approx(0.4, abs=1e-10)
    rows = read_csv(tmp_path / "sweep.csv")
    assert rows[0][:3] == ["alpha", "delta_residual", "current_residual"]
    assert len(rows) == 3


def test_sweep_needs_coupling(tmp_path, blocks_config):
    assert main(["sweep", "--config", blocks_config, "--out", str(tmp_path)]) == 1
