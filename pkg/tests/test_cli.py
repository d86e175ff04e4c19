import json

import numpy as np
import pytest

from bvtomo import io
from bvtomo.cli import main


def run(*argv):
    return main([str(a) for a in argv])


def test_no_command_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        run()
    assert exc.value.code == 2


@pytest.mark.parametrize("argv", [["mesh", "--h", "0"], ["synth", "--pairs", "0"],
                                  ["invert", "--mu", "-1"], ["invert", "--jobs", "0"]])
def test_bad_values_exit_2(tmp_path, argv):
    try:
        code = run(*argv, "--out", tmp_path)
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_mesh_writes_csv(tmp_path, capsys):
    assert run("mesh", "--h", 0.5, "--out", tmp_path) == 0
    header, rows = io.read_csv(tmp_path / "nodes.csv")
    assert header == ["id", "x", "y", "tag"]
    assert "nodes" in capsys.readouterr().out


def test_synth_exact_concentric_row(tmp_path):
    assert run("synth", "--h", 0.5, "--out", tmp_path) == 0
    header, rows = io.read_csv(tmp_path / "boundary_data.csv")
    arr = np.array(rows, dtype=float)
    assert header == ["angle", "f_1", "g_1"]
    np.testing.assert_allclose(arr[:, 1], 1 + 2.75 * np.cos(arr[:, 0]), atol=1e-14)
    np.testing.assert_allclose(arr[:, 2], 1.625 * np.cos(arr[:, 0]), atol=1e-14)
    # the default disc has a boundary node on the positive x axis, where f = 3.75
    run("synth", "--out", tmp_path / "fine")
    header, rows = io.read_csv(tmp_path / "fine/boundary_data.csv")
    arr = np.array(rows, dtype=float)
    at_zero = np.isclose(np.cos(arr[:, 0]), 1.0, rtol=0, atol=1e-15)
    assert at_zero.sum() == 1
    assert arr[at_zero, 1][0] == pytest.approx(3.75, abs=1e-12)


def test_synth_is_deterministic(tmp_path):
    for d in ("a", "b"):
        assert run("synth", "--h", 0.5, "--pairs", 3, "--theta", 0.05, "--seed", 7, "--out", tmp_path / d) == 0
    assert (tmp_path / "a/boundary_data.csv").read_bytes() == (tmp_path / "b/boundary_data.csv").read_bytes()


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("BVTOMO_SEED", "7")
    run("synth", "--h", 0.5, "--theta", 0.05, "--out", tmp_path / "env")
    monkeypatch.delenv("BVTOMO_SEED")
    run("synth", "--h", 0.5, "--theta", 0.05, "--seed", 7, "--out", tmp_path / "flag")
    assert (tmp_path / "env/boundary_data.csv").read_bytes() == (tmp_path / "flag/boundary_data.csv").read_bytes()
    monkeypatch.setenv("BVTOMO_SEED", "x")
    assert run("synth", "--h", 0.5, "--out", tmp_path / "bad") == 2


def test_synth_rejects_multiple_pairs_for_eccentric(tmp_path):
    assert run("synth", "--h", 0.5, "--geometry", "mild_eccentric", "--pairs", 2, "--out", tmp_path) == 1


def test_forward_reports_errors(tmp_path):
    assert run("forward", "--h", 0.5, "--out", tmp_path) == 0
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["l2_error_u"] < 0.05
    assert (tmp_path / "forward.vtk").exists()


def test_forward_rejects_incompatible_flux(tmp_path):
    run("synth", "--h", 0.5, "--out", tmp_path / "d")
    header, rows = io.read_csv(tmp_path / "d/boundary_data.csv")
    for r in rows:
        r[2] = repr(float(r[2]) + 1.0)
    io.write_csv(tmp_path / "bad.csv", header, rows)
    assert run("forward", "--h", 0.5, "--data", tmp_path / "bad.csv", "--out", tmp_path / "o") == 1


def test_invert_with_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\nh = 0.5\nmu = 1\nmax_iters = 1\nmax_evals = 20\n")
    assert run("invert", "--config", cfg, "--out", tmp_path / "r") == 0
    hist = io.read_history(tmp_path / "r/history.csv")
    assert len(hist) == 1
    m = json.loads((tmp_path / "r/manifest.json").read_text())
    assert m["config"]["max_evals"] == 20 and m["mesh"]["h"] == 0.5
    for name in ("alpha.csv", "omega.csv", "fields.vtk"):
        assert (tmp_path / "r" / name).exists()
    assert "alpha_in=" in capsys.readouterr().out


def test_invert_unknown_setting(tmp_path):
    assert run("invert", "--h", 0.5, "--set", "nope=1", "--out", tmp_path) == 2
    assert run("invert", "--h", 0.5, "--set", "max_iters=x", "--out", tmp_path) == 2


def test_grid_and_report(tmp_path, capsys):
    assert run("invert", "--h", 0.5, "--mu", 0.5, 1, "--set", "max_iters=1", "--set", "max_evals=10",
               "--out", tmp_path / "g") == 0
    dirs = sorted(p.name for p in (tmp_path / "g").iterdir())
    assert dirs == ["concentric_ell0.2_mu0.5_N1_theta0", "concentric_ell0.2_mu1_N1_theta0"]
    capsys.readouterr()
    assert run("report", tmp_path / "g", "--out", tmp_path / "t.md") == 0
    table = (tmp_path / "t.md").read_text().splitlines()
    assert table[0].startswith("| run |") and len(table) == 4


def test_report_on_empty_directory(tmp_path):
    assert run("report", tmp_path) == 2
    assert run("report", tmp_path / "missing") == 2
