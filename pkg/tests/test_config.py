import json

import numpy as np
import pytest

from fermiflux.cli.config import RunConfig, load_config, parse_matrix
from fermiflux.common.exceptions import ConfigError, NotUnitary


def pairs(X: np.ndarray) -> list:
    return np.stack([np.real(X), np.imag(X)], axis=-1).tolist()


@pytest.fixture
def blocks_document(make_block_unitary):
    Z = make_block_unitary(d_B=2, d_S=3, seed=11)
    return {
        "model": {"C": pairs(Z.C), "Z_BS": pairs(Z.Z_BS), "Z_SB": pairs(Z.Z_SB), "M": pairs(Z.M)},
        "reservoirs": {"densities": [{"type": "constant", "value": 0.7}, {"type": "constant", "value": 0.2}]},
    }


def test_parse_matrix():
    X = np.array([[1 + 2j, 0.5], [-1j, 3.0]])
    np.testing.assert_array_equal(parse_matrix(pairs(X)), X)
    np.testing.assert_array_equal(parse_matrix([[1, 2], [3, 4]]), np.array([[1, 2], [3, 4]], dtype=complex))
    for bad in ([1, 2, 3], [[1, 2], [3]], "eye", [[[1, 2, 3]]]):
        with pytest.raises(ConfigError):
            parse_matrix(bad)


def test_preset_config():
    config = RunConfig.from_dict({"model": {"preset": "cycle", "params": {"n": 4}}, "numerics": {"L": 40}})
    assert config.source == "preset"
    Z = config.block_unitary()
    assert Z.d_S == 8 and Z.d_B == 2
    assert config.reservoir_symbol(2).n_B == 2
    assert config.numerics.L == 40
    assert config.initial_sample() == 0.5


def test_blocks_config(blocks_document):
    config = RunConfig.from_dict(blocks_document)
    assert config.source == "blocks"
    assert config.coupling_spec() is None
    Z = config.block_unitary()
    res = config.reservoir_symbol(Z.d_B)
    np.testing.assert_allclose(res.densities_at(0.0), [0.7, 0.2])


def test_matrix_config(make_block_unitary):
    Z = make_block_unitary(d_B=1, d_S=2, seed=2)
    config = RunConfig.from_dict({
        "model": {"Z": pairs(Z.as_matrix()), "d_B": 1},
        "reservoirs": {"densities": [{"type": "fourier", "cos": [0.5, 0.1], "sin": [0.05]}]},
        "sample": {"initial": [[0.2, 0.0], [0.0, 0.6]]},
    })
    np.testing.assert_allclose(config.block_unitary().M, Z.M)
    np.testing.assert_allclose(config.initial_sample(), np.diag([0.2, 0.6]))


def test_coupling_config():
    config = RunConfig.from_dict({
        "model": {"W": [[0, 1], [1, 0]], "A": [[1], [0]], "alpha": 0.2},
        "reservoirs": {"ranks": [1], "densities": [{"type": "constant", "value": 0.3}]},
    })
    spec = config.coupling_spec()
    assert spec.alpha == pytest.approx(0.2)
    assert config.block_unitary().d_B == 1


def test_non_unitary_model():
    config = RunConfig.from_dict({
        "model": {"W": [[1, 1], [0, 1]], "A": [[1], [0]], "alpha": 0.2},
        "reservoirs": {"densities": [{"type": "constant", "value": 0.3}]},
    })
    with pytest.raises(NotUnitary):
        config.coupling_spec()


@pytest.mark.parametrize("document", [
    {},
    {"model": {"preset": "cycle"}, "extra": {}},
    {"model": {"preset": "ladder"}},
    {"model": {"preset": "cycle", "W": [[1]]}},
    {"model": {"preset": "cycle"}, "reservoirs": {"densities": []}},
    {"model": {"W": [[1]], "A": [[1]], "alpha": 0.1}},
    {"model": {"W": [[1]], "A": [[1]]}, "reservoirs": {"densities": []}},
    {"model": {"C": [[1]], "Z_BS": [[0]], "Z_SB": [[0]], "M": [[1]]}, "reservoirs": {}},
    {"model": {"preset": "cycle"}, "numerics": {"grid": 12}},
    {"model": {"preset": "cycle"}, "numerics": {"L": 0}},
    {"model": {"preset": "cycle"}, "numerics": {"alpha_sweep": [0.1, -0.1]}},
    {"model": {"preset": "cycle"}, "outputs": {"dump_lattice": "yes"}},
    {"model": {"preset": "cycle"}, "sample": {"final": 0.5}},
])
def test_invalid_documents(document):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(document)


def test_projectors_and_ranks_exclude_each_other():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({
            "model": {"W": [[1]], "A": [[1]], "alpha": 0.1},
            "reservoirs": {"ranks": [1], "projectors": [[[1]]], "densities": [{"type": "constant", "value": 0.5}]},
        })


def test_load_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"model": {"preset": "cycle"}}))
    assert load_config(path).source == "preset"
    path.write_text("{model")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
