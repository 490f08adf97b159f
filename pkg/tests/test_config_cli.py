import csv
import json

import numpy as np
import pytest

from stochstab import cli, experiments as ex
from stochstab.config import parse_config
from stochstab.errors import ParseError, ValidationError

MINIMAL = "system.name = doubling\nkernel.epsilons = 0.05\n"

SMALL = """# small doubling sweep
system.name = doubling
kernel.epsilons = 0.1, 0.05, 0.01
budget.n = 20000
budget.starts = 4
budget.mc_samples = 20000
budget.samples = 500
budget.n_max = 20
grid.bins = 64
"""


# -- configuration --------------------------------------------------------------

def test_minimal_config_parses():
    cfg = parse_config(MINIMAL)
    assert cfg.system_name == "doubling" and cfg.epsilons == [0.05]
    assert cfg["budget.n"] >= 1


def test_system_params_parse():
    cfg = parse_config("system.name = viana\nsystem.kappa = 0.01\nsystem.interval = -1.8, 1.8\n"
                       "kernel.epsilons = 0.001\n")
    assert cfg.system_params == {"kappa": 0.01, "interval": (-1.8, 1.8)}
    assert cfg.build_system().params["kappa"] == 0.01


def test_epsilon_grid_must_decrease():
    with pytest.raises(ValidationError):
        parse_config("system.name = doubling\nkernel.epsilons = 0.01, 0.05\n")


def test_unknown_key_named():
    with pytest.raises(ParseError) as err:
        parse_config(MINIMAL + "kernel.epsilonn = 0.1\n")
    assert "kernel.epsilonn" in str(err.value) and "line 3" in str(err.value)


def test_parse_errors():
    for text in (MINIMAL + "garbage\n", MINIMAL + "budget.n = many\n", MINIMAL + "system.name = fig1\n",
                 MINIMAL + "system.colour = red\n"):
        with pytest.raises(ParseError):
            parse_config(text)


def test_validation_lists_every_problem():
    with pytest.raises(ValidationError) as err:
        parse_config("system.name = doubling\nkernel.epsilons = 0.05\nbudget.n = 0\nthresholds.merge = -1\n"
                     "hyp.alpha = 2\n")
    msg = str(err.value)
    assert "budget.n" in msg and "thresholds.merge" in msg and "hyp.alpha" in msg


def test_invalid_system_params_rejected():
    with pytest.raises(ValidationError):
        parse_config("system.name = viana\nsystem.d = 4\nkernel.epsilons = 0.001\n")


# -- drivers -------------------------------------------------------------------

def test_stability_doubling_consistent():
    cfg = parse_config(SMALL.replace("budget.n = 20000", "budget.n = 200000"))
    rep = ex.run_stability_sweep(cfg)
    assert rep.p == 1 and rep.reference == "closed-form"
    assert [r["l_clusters"] for r in rep.rows] == [1, 1, 1]
    assert rep.rows[-1]["d_weakstar"] < 0.02
    assert rep.verdict == "stable-consistent"
    assert rep.rows[-1]["verdict_row"] == rep.verdict


def test_count_known_cases():
    cfg = parse_config(SMALL)
    rep = ex.run_physical_count(cfg)
    assert rep.p == 1 and rep.l_le_p and all(r["l"] == 1 for r in rep.rows)


def test_fig1_sweep_mixes_basins():
    cfg = parse_config("system.name = fig1\nkernel.mode = rotational\nkernel.epsilons = 0.1, 0.05, 0.02\n"
                       "budget.n = 200000\nbudget.starts = 20\nbudget.mc_samples = 50000\n")
    rep = ex.run_stability_sweep(cfg)
    assert rep.p == 2
    for r in rep.rows:
        assert r["l_clusters"] == 1
        assert min(r["weights"]) > 0.1
    # the residual shrinks with the noise; at 0.1 the noise smooths the edge cells too much
    assert rep.rows[1]["fit_residual"] < 0.05 and rep.rows[2]["fit_residual"] < 0.05


def test_fig2_sweep_two_clusters():
    cfg = parse_config("system.name = fig2\nkernel.epsilons = 0.1, 0.05\nbudget.n = 100000\n"
                       "budget.starts = 20\nbudget.mc_samples = 20000\n")
    rep = ex.run_stability_sweep(cfg)
    for r in rep.rows:
        assert r["l_clusters"] == 2
        assert max(r["cluster_ref_distances"]) < 0.05


def test_start_points_avoid_critical_set():
    cfg = parse_config("system.name = fig1\nkernel.mode = rotational\nkernel.epsilons = 0.05\n")
    s = cfg.build_system()
    P = ex.start_points(s, 50, 1)
    assert np.all(s.critical_distance(P) > 1e-3)
    f2 = parse_config("system.name = fig2\nkernel.epsilons = 0.05\n").build_system()
    P = ex.start_points(f2, 10, 1)[:, 0]
    (a, b), (c, d) = f2.trapping_intervals
    assert np.all((P[:5] > a) & (P[:5] < b)) and np.all((P[5:] > c) & (P[5:] < d))


def test_trap_escapes_detects_leaving():
    cfg = parse_config("system.name = fig2\nkernel.epsilons = 0.05\n")
    f2 = cfg.build_system()
    k = ex.make_kernel(f2, cfg, 0.05)
    lo, hi = f2.trapping_intervals[1]
    assert not ex.trap_escapes(f2, k, np.linspace(lo, hi, 12)[1:-1], 500, (lo, hi), 1).any()
    assert ex.trap_escapes(f2, k, [0.3], 50, (0.25, 0.35), 1).all()


# -- command line -------------------------------------------------------------

def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_stability_outputs(tmp_path):
    cfg = _write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert cli.main(["stability", "--config", cfg, "--out", str(out)]) == 0
    with open(out / "stability.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epsilon", "d_weakstar", "d_wasserstein", "l_clusters", "w1", "fit_residual",
                       "stationarity_residual", "verdict_row"]
    assert len(rows) == 4
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok" and man["config"]["system.name"] == "doubling"
    assert len(man["seeds"]) == 3 and all("stream0" in s for s in man["seeds"])
    assert (out / "d_weakstar.dat").read_text().count("\n") == 3


@pytest.mark.parametrize("command", ["stability", "count", "tail", "orbit"])
def test_cli_rerun_byte_identical(tmp_path, command):
    cfg = _write(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main([command, "--config", cfg, "--out", str(a)]) == 0
    assert cli.main([command, "--threads", "2", "--config", cfg, "--out", str(b)]) == 0
    files = sorted(p.name for p in a.glob("*.csv"))
    assert files
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_cli_seed_override_changes_output(tmp_path):
    cfg = _write(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["orbit", "--config", cfg, "--out", str(a)])
    cli.main(["orbit", "--config", cfg, "--out", str(b), "--seed", "99"])
    assert (a / "orbit.csv").read_bytes() != (b / "orbit.csv").read_bytes()
    assert json.loads((b / "manifest.json").read_text())["seeds"][0]["seed"] == 99


def test_cli_global_flags_before_command(tmp_path):
    cfg = _write(tmp_path, SMALL)
    out = tmp_path / "o"
    assert cli.main(["--config", cfg, "--out", str(out), "count"]) == 0
    assert (out / "count.csv").exists()


def test_cli_config_errors(tmp_path, capsys):
    bad = _write(tmp_path, MINIMAL + "kernel.epsilonn = 1\n")
    assert cli.main(["stability", "--config", bad, "--out", str(tmp_path / "o")]) == 2
    assert "kernel.epsilonn" in capsys.readouterr().err
    assert cli.main(["stability", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert cli.main(["stability"]) == 2


def test_cli_runtime_error_flushes_partial_rows(tmp_path, monkeypatch):
    cfg = _write(tmp_path, SMALL)
    real = ex.stationarity_residual
    calls = {"n": 0}

    def flaky(*args, **kw):
        calls["n"] += 1
        if calls["n"] == 2:
            raise FloatingPointError("simulated failure")
        return real(*args, **kw)

    monkeypatch.setattr(ex, "stationarity_residual", flaky)
    out = tmp_path / "o"
    assert cli.main(["stability", "--config", cfg, "--out", str(out)]) == 3
    rows = (out / "stability.csv").read_text().splitlines()
    assert len(rows) == 2  # header plus the finished row
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "error" and "simulated failure" in man["error"]


def test_cli_inconsistent_verdict_exit_code(tmp_path, monkeypatch):
    cfg = _write(tmp_path, SMALL)
    monkeypatch.setattr(ex, "verdict", lambda d, s, tol: "inconsistent")
    assert cli.main(["stability", "--config", cfg, "--out", str(tmp_path / "o")]) == 4


def test_cli_viana_diag(tmp_path):
    text = ("system.name = viana\nsystem.kappa = 0.01\nkernel.epsilons = 0.001\nbudget.n = 2000\n"
            "budget.orbits = 10\nbudget.depth_samples = 100\nbudget.depth_ns = 100, 400\n"
            "budget.deficit_ns = 200, 400\nfoliation.ns = 32\nfoliation.nx = 16\n")
    out = tmp_path / "v"
    assert cli.main(["viana-diag", "--config", _write(tmp_path, text), "--out", str(out)]) == 0
    with open(out / "foliation.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["s_index", "x_index", "xi_value"] and len(rows) == 1 + 32 * 16
    with open(out / "depth.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["sample", "n", "g_sum", "deep_return_flag"] and len(rows) == 1 + 200
