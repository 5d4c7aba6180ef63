import json

import pytest

from ymbubble import cli


def _run(tmp_path, command, data=None, *extra):
    args = [command, "--out", str(tmp_path / "out")]
    if data is not None:
        path = tmp_path / "c.json"
        path.write_text(json.dumps(data))
        args += ["--config", str(path)]
    return cli.main(args + list(extra))


def test_instanton_check_passes(tmp_path, capsys):
    assert _run(tmp_path, "instanton-check") == cli.EXIT_PASS
    rep = json.loads((tmp_path / "out" / "instanton_check.json").read_text())
    assert rep["action_rel_error"] < 5e-3
    assert rep["scale_invariance"]["diff"] < 1e-8
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert set(man) >= {"config_hash", "grid_hashes", "seed", "versions", "outputs"}
    assert "PASS" in capsys.readouterr().out


def test_coarse_grid_keeps_gluing_residual(tmp_path):
    fine = tmp_path / "fine"
    coarse = tmp_path / "coarse"
    cli.main(["instanton-check", "--out", str(fine)])
    data = {"grids": {"instanton_n_per": 10, "instanton_n_outer": 20, "instanton_sphere": [4, 4, 8]}}
    (tmp_path / "c.json").write_text(json.dumps(data))
    cli.main(["instanton-check", "--config", str(tmp_path / "c.json"), "--out", str(coarse)])
    f = json.loads((fine / "instanton_check.json").read_text())
    c = json.loads((coarse / "instanton_check.json").read_text())
    assert c["nodes"] < f["nodes"]
    assert c["action_rel_error"] >= f["action_rel_error"]
    assert c["gluing_residual"] == f["gluing_residual"]


def test_config_errors_exit_2(tmp_path):
    assert _run(tmp_path, "instanton-check", {"bogus": 1}) == cli.EXIT_CONFIG
    assert _run(tmp_path, "expansion-study", {"eps_list": [0.01]}) == cli.EXIT_CONFIG


def test_non_contraction_exit_3(tmp_path, capsys):
    assert _run(tmp_path, "small-solution", {"small_eps_list": [0.02, 0.2, 0.08]}) == cli.EXIT_SOLVER
    assert "eps = 0.2" in capsys.readouterr().err


def test_zero_boundary_landscape_is_degenerate(tmp_path):
    data = {"boundary": {"family": "zero"}, "grids": {"landscape_n": 3}}
    assert _run(tmp_path, "landscape", data) == cli.EXIT_PASS
    crit = json.loads((tmp_path / "out" / "critical_points.json").read_text())
    assert crit["critical_points"] == [] and crit["info"]["degenerate"]


def test_bad_flag_values():
    with pytest.raises(SystemExit):
        cli.main(["probe", "--tolerance-profile", "loose"])
    with pytest.raises(SystemExit):
        cli.main(["nonsense"])
