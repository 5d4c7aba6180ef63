import json

import numpy as np
import pytest

from ymbubble import config
from ymbubble.config import ConfigError, load_config
from ymbubble.polyforms import PolyForm


def test_defaults_validate():
    cfg = load_config()
    assert cfg.tolerances["r1_slope"] == 2.7
    assert cfg.digest() == load_config().digest()


def test_overrides_and_profiles(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"grids": {"landscape_n": 3}, "seed": 4}))
    cfg = load_config(path, tolerance_profile="strict")
    assert cfg.grids["landscape_n"] == 3 and cfg.grids["reduced_nr"] == 12
    assert cfg.seed == 4 and cfg.tolerances["r1_slope"] == 2.8
    assert load_config(path, seed=9).seed == 9


@pytest.mark.parametrize("data", [
    {"d0": 0.3},                          # 2 lam0 >= d0
    {"D1": 3.0},                          # D1 >= D2
    {"eps_max": 0.5},                     # beyond the Picard guard
    {"tolerance_profile": "loose"},
    {"bogus": 1},
    {"boundary": {"family": "file"}},
    {"boundary": {"c": [[1, 2]]}},
    {"fixture": {"p": [0.6, 0, 0, 0]}},
    {"fixture": {"g": "best"}},
    {"eps_list": [0.08, 0.04, 0.02]},     # lam outside (0, lam0)
])
def test_invalid_configs(tmp_path, data):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ConfigError):
        load_config(path)


def test_unreadable_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_boundary_family():
    A = config.boundary_family({"family": "linear", "c_seed": 3})
    ref = np.random.default_rng(3).normal(size=(3, 4, 4))
    assert np.allclose(A.coef, PolyForm.linear(ref).coef)
    Q = config.boundary_family({"family": "linear", "c_seed": 3, "delta": 0.5})
    assert Q.degree == 2
    assert np.all(config.boundary_family({"family": "zero"}).coef == 0)


def test_fixture_needs_resolved_gauge():
    cfg = load_config()
    with pytest.raises(ConfigError):
        cfg.fixture_q(0.01)
    q = cfg.fixture_q(0.01, [1, 0, 0, 0])
    assert np.isclose(q.lam ** 2, 0.01)


def test_boundary_csv_round_trip(tmp_path):
    A = config.boundary_family({"family": "linear", "c_seed": 1})
    b = config.sample_boundary(A)
    path = tmp_path / "b.csv"
    config.write_boundary_csv(path, b)
    back = config.read_boundary_csv(path)
    assert np.array_equal(back.values, b.values)
    assert np.array_equal(back.nodes, b.nodes)


def test_boundary_csv_hash_mismatch(tmp_path):
    b = config.sample_boundary(config.boundary_family({"family": "linear", "c_seed": 1}))
    path = tmp_path / "b.csv"
    config.write_boundary_csv(path, b)
    lines = path.read_text().splitlines()
    lines[0] = "# node_hash=" + "0" * 64
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ConfigError):
        config.read_boundary_csv(path)
