import json

import pytest

from gardnerlab.cli import main


def _run(tmp_path, command, text="", seed=None, name="out"):
    cfg = tmp_path / f"{name}.cfg"
    cfg.write_text(text)
    out = tmp_path / name
    argv = [command, "--config", str(cfg), "--out", str(out)]
    if seed is not None:
        argv += ["--seed", str(seed)]
    code = main(argv)
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, out, report


def test_soliton_check(tmp_path):
    code, out, rep = _run(tmp_path, "soliton-check", "grid.n = 4096\neigen.n = 512\n")
    assert code == 0
    res = rep["result"]
    assert res["peak"] == pytest.approx(0.148528, abs=1e-6)
    assert res["residual_second_order"] <= 1e-9 and res["residual_first_integral"] <= 1e-9
    assert res["lowest_eigenvalue"] < 0
    assert rep["config"]["grid.n"] == 4096
    assert (out / "profile.csv").read_text().startswith("x,value\n")
    assert (out / "spectrum.csv").exists()


def test_convexity_sweep(tmp_path):
    code, out, rep = _run(tmp_path, "convexity", "convexity.count = 7\n")
    assert code == 0
    lines = (out / "convexity.csv").read_text().splitlines()
    assert lines[0].startswith("c0,d2_numeric,d2_closed_form,abs_err")
    assert len(lines) == 8
    assert rep["result"]["max_abs_err"] <= 1e-4 and rep["result"]["all_positive"]


def test_local_time(tmp_path):
    code, _, rep = _run(tmp_path, "local-time", "local.v0_norm = 1\nlocal.c0_const = 1\n")
    assert code == 0 and rep["result"]["T"] == 0.015625


def test_evolve_writes_snapshots(tmp_path):
    text = "grid.n = 512\ndt = 0.01\nt_end = 1\nlog_every = 20\nsnapshot_times = 0.5\n"
    code, out, rep = _run(tmp_path, "evolve", text)
    assert code == 0
    assert (out / "snapshot_t0.5.csv").exists() and (out / "final.csv").exists()
    assert rep["result"]["l2_error_vs_oracle"] < 1e-6
    assert (out / "run_log.csv").read_text().splitlines()[0] == "t,mean,mass,energy,l2_error_vs_oracle"


def test_scaling_check(tmp_path):
    code, _, rep = _run(tmp_path, "scaling-check", "grid.n = 512\nscaling.lambda = 1.5\nscaling.t = 0.5\n")
    assert code == 0 and rep["result"]["covariance_l2_error"] < 1e-10


def test_xsb_and_stability_are_deterministic(tmp_path):
    xsb_cfg = "xsb.count = 3\nxsb.n = 128\nxsb.s_values = 0.5\n"
    stab_cfg = "grid.n = 512\nt_end = 2\nperturbation.shape = noise\nperturbation.delta = 0.01\n"
    for cmd, text, files in [("xsb-sample", xsb_cfg, ["trilinear_ratios.csv", "bilinear_summary.csv"]),
                             ("stability", stab_cfg, ["trace.csv"])]:
        _, a, ra = _run(tmp_path, cmd, text, seed=11, name=cmd + "a")
        _, b, rb = _run(tmp_path, cmd, text, seed=11, name=cmd + "b")
        _, c, _ = _run(tmp_path, cmd, text, seed=12, name=cmd + "c")
        assert ra["config"]["seed"] == 11 and ra["result"] == rb["result"]
        for f in files:
            assert (a / f).read_bytes() == (b / f).read_bytes()
        assert (a / files[0]).read_bytes() != (c / files[0]).read_bytes()


def test_unknown_key_is_validation_error(tmp_path):
    code, _, rep = _run(tmp_path, "evolve", "bogus = 1\n")
    assert code == 2 and rep is None


def test_invalid_parameters_exit_2(tmp_path):
    code, _, rep = _run(tmp_path, "soliton-check", "branch = defocusing\nsigma = 0\n")
    assert code == 2 and rep["status"] == "invalid"
    code, _, _ = _run(tmp_path, "xsb-sample", "xsb.b = 0.5\n", name="b")
    assert code == 2


def test_missing_config_exit_2(tmp_path):
    assert main(["local-time", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path / "o")]) == 2


def test_root_lost_exit_3(tmp_path):
    text = "grid.n = 512\nt_end = 20\nperturbation.shape = bump\nperturbation.delta = 4\n"
    code, _, rep = _run(tmp_path, "stability", text)
    assert code == 3
    assert rep["status"] == "failed" and rep["failure"] == "RootLost"
    assert rep["result"]["failure_time"] is not None


def test_bad_subcommand():
    with pytest.raises(SystemExit):
        main(["explode", "--out", "x"])
