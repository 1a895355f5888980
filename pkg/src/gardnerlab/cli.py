"""Command-line front end.

    gardnerlab <subcommand> --config <path> --out <dir> [--seed N]

Exit status: 0 success, 2 invalid configuration, 3 runtime failure
(non-finite state, lost modulation root, degenerate phase-ODE denominator).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import evolve as ev
from . import stability as stab
from . import xsb
from .config import ConfigError, float_list, load_config
from .grid import Field, GridSpec, derivative_values, write_field_csv
from .solitons import (
    SolitonParams,
    build_linearized_operator,
    ode_residuals,
    soliton_profile,
    soliton_speed,
    soliton_state,
    wave_velocity,
    write_spectrum_csv,
)

log = logging.getLogger("gardnerlab")

COMMANDS = ("soliton-check", "evolve", "stability", "convexity", "scaling-check", "local-time", "xsb-sample")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _params(cfg) -> SolitonParams:
    return SolitonParams(cfg["sigma"], cfg["c0"], cfg["branch"])


def _grid(cfg, p: SolitonParams, n_key="grid.n") -> GridSpec:
    n = cfg[n_key]
    if cfg["grid.L"] is None:
        return GridSpec.for_soliton(p.c0, n)
    return GridSpec(n, cfg["grid.L"])


def _write_json(path: Path, data: dict) -> None:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        raise TypeError(type(o))

    path.write_text(json.dumps(data, indent=1, sort_keys=True, default=default, allow_nan=True) + "\n")


def _l2(a, grid) -> float:
    return float(np.sqrt(np.sum(np.asarray(a) ** 2) * grid.dx))


# ---------------------------------------------------------------------------


def cmd_soliton_check(cfg, out: Path) -> dict:
    p = _params(cfg)
    grid = _grid(cfg, p)
    second, first = ode_residuals(p, grid)
    prof = soliton_state(p, grid)
    write_field_csv(prof, out / "profile.csv")
    egrid = _grid(cfg, p, "eigen.n")
    op = build_linearized_operator(p, egrid)
    evals = op.eigenvalues(cfg["eigen.count"])
    write_spectrum_csv(evals, out / "spectrum.csv")
    op_fine = build_linearized_operator(p, grid)
    dphi = derivative_values(soliton_profile(p, grid).values, grid, 1)
    kernel = _l2(op_fine.apply(dphi).values, grid) / _l2(dphi, grid)
    return {
        "peak": p.peak,
        "peak_sampled": float(np.abs(prof.values).max()),
        "residual_second_order": second,
        "residual_first_integral": first,
        "speed_c_sigma": soliton_speed(p),
        "velocity_mkdv_frame": wave_velocity(p, "mkdv"),
        "velocity_gardner_frame": wave_velocity(p, "gardner"),
        "kernel_relative_residual": kernel,
        "lowest_eigenvalue": float(evals[0]),
    }


def _initial(cfg, p, grid):
    v0 = soliton_state(p, grid).values
    delta = cfg["perturbation.delta"]
    if delta:
        v0 = v0 + delta * stab.perturbation(cfg["perturbation.shape"], p, grid, seed=cfg["seed"])
    return Field(grid, v0)


def cmd_evolve(cfg, out: Path) -> dict:
    p = _params(cfg)
    grid = _grid(cfg, p)
    ecfg = ev.EvolveConfig(cfg["dt"], cfg["t_end"], cfg["dealias"], cfg["log_every"], cfg["frame"])
    v0 = _initial(cfg, p, grid)
    oracle = None
    if not cfg["perturbation.delta"]:
        V = wave_velocity(p, cfg["frame"])
        oracle = lambda t: soliton_state(p, grid, V * t).values  # noqa: E731
    sim = ev.Simulation(v0, ev.Equation.for_frame(p.sigma, p.branch, cfg["frame"]), ecfg, oracle)

    def snap(t, f):
        write_field_csv(f, out / f"snapshot_t{t:g}.csv")

    try:
        final = sim.run(float_list(cfg["snapshot_times"]), snap)
    finally:
        sim.log.write_csv(out / "run_log.csv")
    write_field_csv(final, out / "final.csv")
    res = {"t_final": sim.t, "steps": sim.steps, "relative_drift": sim.log.max_relative_drift()}
    if oracle is not None:
        res["l2_error_vs_oracle"] = _l2(final.values - oracle(sim.t), grid)
    return res


def cmd_stability(cfg, out: Path) -> dict:
    p = _params(cfg)
    run = stab.StabilityRun(p, cfg["perturbation.shape"], cfg["perturbation.delta"], n=cfg["grid.n"],
                            dt=cfg["dt"], t_end=cfg["t_end"], sample_dt=cfg["track.sample_dt"],
                            seed=cfg["seed"], K=cfg["stability.K"])
    report, trace = stab.stability_experiment(run)
    trace.write_csv(out / "trace.csv")
    res = report.flat()
    if report.failure:
        raise _RuntimeFailure(report.failure, res)
    return res


def cmd_convexity(cfg, out: Path) -> dict:
    c0s = np.geomspace(cfg["convexity.c0_min"], cfg["convexity.c0_max"], cfg["convexity.count"])
    if cfg["branch"] == "defocusing":
        c0s = c0s[c0s < 0.9 * 4 * cfg["sigma"] ** 2]
    rows = stab.convexity_sweep(cfg["sigma"], c0s, cfg["branch"], cfg["convexity.n"])
    p = _params(cfg)
    single = stab.d_second(p)
    with (out / "convexity.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["c0", "d2_numeric", "d2_closed_form", "abs_err", "d2_quadrature"])
        for r in rows:
            w.writerow([f"{r[k]:.17g}" for k in ("c0", "d2_numeric", "d2_closed_form", "abs_err", "d2_quadrature")])
    return {
        "max_abs_err": max(r["abs_err"] for r in rows) if rows else float("nan"),
        "all_positive": all(r["d2_numeric"] > 0 for r in rows),
        "c0": p.c0,
        "d2_second_difference": single.second_difference,
        "d2_quadrature": single.quadrature,
        "d2_closed_form": single.closed_form,
    }


def scaling_check(p: SolitonParams, grid: GridSpec, sp: ev.ScalingParams, t: float, dt: float) -> dict:
    """Evolve v for time t directly and through the rescaled problem; compare."""
    v0 = soliton_state(p, grid)
    rt = ev.scale_up(ev.scale_down(v0, sp), sp)
    direct, _ = ev.evolve(v0, p.sigma, ev.EvolveConfig(dt, t, frame="gardner", log_every=10 ** 9),
                          equation=ev.Equation.gardner(p.sigma))
    w0 = ev.scale_down(v0, sp)
    s_end = sp.lam ** 3 * t
    w_end, _ = ev.evolve(w0, p.sigma, ev.EvolveConfig(dt * sp.lam ** 3, s_end, log_every=10 ** 9),
                         equation=ev.Equation.scaled(p.sigma, sp))
    back = ev.scale_up(w_end, sp)
    return {
        "roundtrip_max_error": float(np.abs(rt.values - v0.values).max()),
        "covariance_l2_error": _l2(back.values - direct.values, grid),
        "scaled_time": s_end,
    }


def cmd_scaling_check(cfg, out: Path) -> dict:
    p = _params(cfg)
    grid = _grid(cfg, p)
    sp = ev.ScalingParams(cfg["scaling.lambda"], cfg["scaling.alpha"])
    return scaling_check(p, grid, sp, cfg["scaling.t"], cfg["dt"])


def cmd_local_time(cfg, out: Path) -> dict:
    lt = ev.local_time_estimate(cfg["local.v0_norm"], cfg["local.s"], cfg["local.c0_const"], cfg["local.alpha"])
    return {"d1": lt.d1, "d2": lt.d2, "lambda0": lt.lambda0, "T": lt.T, "regime": lt.regime}


def cmd_xsb_sample(cfg, out: Path) -> dict:
    spec = xsb.EnsembleSpec(count=cfg["xsb.count"], kind=cfg["xsb.kind"], seed=cfg["seed"], s=cfg["xsb.s"],
                            b=cfg["xsb.b"], grid=GridSpec(cfg["xsb.n"], cfg["xsb.L"]), nt=cfg["xsb.nt"],
                            t_half=cfg["xsb.t_half"], band=cfg["xsb.band"])
    tri = xsb.tabulate_trilinear(spec, float_list(cfg["xsb.s_values"]) or (spec.s,))
    bil_a, bil_b = xsb.sample_bilinear_ratio(spec)
    xsb.write_ratio_csv(tri, out / "trilinear_ratios.csv")
    xsb.write_summary_csv(tri, out / "trilinear_summary.csv")
    xsb.write_ratio_csv([bil_a], out / "bilinear_l2_ratios.csv")
    xsb.write_ratio_csv([bil_b], out / "bilinear_kdv_ratios.csv")
    xsb.write_summary_csv([bil_a, bil_b], out / "bilinear_summary.csv")
    fit = xsb.fit_localization_exponent(xsb.default_free_data(spec.grid, spec.band), spec.grid, spec.s, spec.b,
                                        nt=spec.nt, t_half=spec.t_half)
    return {
        "trilinear_max": {f"{st.s:g}": st.max for st in tri},
        "bilinear_l2_max": bil_a.max,
        "bilinear_kdv_max": bil_b.max,
        "localization_deltas": fit.deltas.tolist(),
        "localization_norms": fit.norms.tolist(),
        "localization_exponent": fit.exponent,
        "localization_exponent_predicted": fit.predicted,
        "localization_constants": fit.constants.tolist(),
    }


HANDLERS = {
    "soliton-check": cmd_soliton_check,
    "evolve": cmd_evolve,
    "stability": cmd_stability,
    "convexity": cmd_convexity,
    "scaling-check": cmd_scaling_check,
    "local-time": cmd_local_time,
    "xsb-sample": cmd_xsb_sample,
}


class _RuntimeFailure(Exception):
    def __init__(self, kind, result):
        super().__init__(kind)
        self.kind = kind
        self.result = result


def run(command: str, config_path, out_dir, seed: int | None = None) -> int:
    out = Path(out_dir)
    report = {"command": command}
    try:
        cfg = load_config(config_path)
        if seed is not None:
            cfg["seed"] = seed
        report["config"] = cfg
        out.mkdir(parents=True, exist_ok=True)
        if not out.is_dir():
            raise ConfigError(f"{out} is not a directory")
    except (ConfigError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    status = EXIT_OK
    try:
        report["result"] = HANDLERS[command](cfg, out)
        report["status"] = "ok"
    except _RuntimeFailure as exc:
        report.update(result=exc.result, status="failed", failure=exc.kind)
        status = EXIT_RUNTIME
    except (ev.NonFiniteError, stab.RootLost, stab.DegenerateDenominator) as exc:
        report.update(status="failed", failure=type(exc).__name__, message=str(exc))
        if getattr(exc, "t", None) is not None:
            report["failure_time"] = exc.t
        state = getattr(exc, "state", None)
        if state is not None:
            write_field_csv(state, out / "last_valid_state.csv")
        status = EXIT_RUNTIME
    except (ValueError, ZeroDivisionError) as exc:
        report.update(status="invalid", message=str(exc))
        status = EXIT_CONFIG
    _write_json(out / "report.json", report)
    if status:
        log.error("%s: %s", report["status"], report.get("failure") or report.get("message"))
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gardnerlab", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", default=None, help="flat key = value config file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    return run(args.command, args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
