"""Orbital-stability experiments: modulation phase, phase ODE, convexity of d(c0).

Sign convention: the reference wave is  v_r(x) = sigma + kappa*phi(x + r),  so a
hump moving with velocity V is tracked by r(t) = -V t.  In the mKdV frame that
gives r' = -(6 sigma^2 + c0) for the focusing wave and r' = 6 sigma^2 - c0 for the
defocusing one.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from .evolve import Equation, EvolveConfig, Simulation
from .grid import Field, GridSpec, sobolev_norm_values
from .solitons import (
    SolitonParams,
    profile_derivative_values,
    profile_second_derivative_values,
    profile_values,
    soliton_profile,
    wave_velocity,
)


class RootLost(RuntimeError):
    def __init__(self, msg, t: float | None = None, trace: "ModulationTrace | None" = None):
        super().__init__(msg)
        self.t = t
        self.trace = trace


class DegenerateDenominator(ArithmeticError):
    pass


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, Field) else np.asarray(u, dtype=float)


def reference_wave(p: SolitonParams, grid: GridSpec, r: float) -> np.ndarray:
    """sigma + kappa*phi(x + r) on the grid."""
    return p.sigma + p.kappa * profile_values(p, grid.wrap(grid.x + r))


def modulation_F(u: Field, p: SolitonParams, r: float) -> float:
    h = u.values - reference_wave(p, u.grid, r)
    return float(0.5 * np.sum(h * h) * u.grid.dx)


def modulation_G(u: Field, p: SolitonParams, r: float) -> float:
    """dF/dr = -int (u - v_r) v_r' dx, with v_r' = kappa*phi'(x + r)."""
    return _G(u.values, u.grid, p, r)


def _G(u: np.ndarray, grid: GridSpec, p: SolitonParams, r: float) -> float:
    y = grid.wrap(grid.x + r)
    vr = p.sigma + p.kappa * profile_values(p, y)
    dvr = p.kappa * profile_derivative_values(p, y)
    return float(-np.sum((u - vr) * dvr) * grid.dx)


def modulation_dG(u: Field, p: SolitonParams, r: float) -> float:
    """dG/dr = int (v_r')^2 - int h v_r''."""
    y = u.grid.wrap(u.grid.x + r)
    vr = p.sigma + p.kappa * profile_values(p, y)
    d1 = p.kappa * profile_derivative_values(p, y)
    d2 = p.kappa * profile_second_derivative_values(p, y)
    return float(np.sum(d1 * d1 - (u.values - vr) * d2) * u.grid.dx)


def find_phase(u, p: SolitonParams, guess: float, grid: GridSpec | None = None,
               halfwidth: float | None = None, xtol: float = 1e-13) -> float:
    """Root of G(., t) within guess +/- halfwidth (default 2/sqrt(c0)); brentq bracket."""
    uv = _values(u)
    grid = grid or u.grid
    hw = 2.0 / p.k if halfwidth is None else halfwidth
    a, b = guess - hw, guess + hw
    ga, gb = _G(uv, grid, p, a), _G(uv, grid, p, b)
    if ga == 0:
        return a
    if gb == 0:
        return b
    if ga * gb > 0:
        raise RootLost(f"no sign change of G in [{a:.6g}, {b:.6g}]")
    return float(optimize.brentq(lambda r: _G(uv, grid, p, r), a, b, xtol=xtol, rtol=4 * np.finfo(float).eps))


def phase_ode_rhs(u: Field, p: SolitonParams, r: float) -> float:
    """Right-hand side of the phase ODE obtained by differentiating G(r(t), t) = 0.

    r' = -V - int h (-12 k v v'^2 + 6 k h v v'' + 2 k h^2 v'') / int (-(v')^2 + h v''),
    with v = v_r, h = u - v, k = kappa and V the mKdV-frame velocity.
    """
    g = u.grid
    y = g.wrap(g.x + r)
    k = p.kappa
    v = p.sigma + k * profile_values(p, y)
    d1 = k * profile_derivative_values(p, y)
    d2 = k * profile_second_derivative_values(p, y)
    h = u.values - v
    num = np.sum(h * (-12 * k * v * d1 ** 2 + 6 * k * h * v * d2 + 2 * k * h ** 2 * d2)) * g.dx
    den = np.sum(-(d1 ** 2) + h * d2) * g.dx
    scale = np.sum(d1 ** 2) * g.dx
    if abs(den) < 1e-10 * scale:
        raise DegenerateDenominator(f"phase ODE denominator {den:.3g} vanishes")
    return float(-wave_velocity(p, "mkdv") - num / den)


# ---------------------------------------------------------------------------
# convexity of d(c0)


def d_functional(p: SolitonParams, grid: GridSpec | None = None) -> float:
    """Lyapunov functional at the soliton: int phi_x^2 - kappa phi^4 - 4 sigma phi^3 + c0 phi^2."""
    grid = grid or GridSpec.for_soliton(p.c0, 2048)
    y = grid.x
    phi = profile_values(p, y)
    dphi = profile_derivative_values(p, y)
    integrand = dphi ** 2 - p.kappa * phi ** 4 - 4 * p.sigma * phi ** 3 + p.c0 * phi ** 2
    return float(np.sum(integrand) * grid.dx)


@dataclass(frozen=True)
class ConvexityEstimate:
    second_difference: float
    quadrature: float
    closed_form: float


def d_second_closed_form(p: SolitonParams) -> float:
    """sqrt(c0) / (4 sigma^2 + kappa c0)."""
    return math.sqrt(p.c0) / (4 * p.sigma ** 2 + p.kappa * p.c0)


def d_second(p: SolitonParams, h_c0: float | None = None, grid: GridSpec | None = None) -> ConvexityEstimate:
    """d''(c0) two ways: second difference of d, and 2 int phi d(phi)/dc0."""
    h = 1e-4 * p.c0 if h_c0 is None else h_c0
    if p.c0 - h <= 0:
        raise ValueError("c0 - h_c0 must stay positive")
    if p.kappa < 0 and p.c0 + h >= 4 * p.sigma ** 2:
        raise ValueError("c0 + h_c0 leaves the defocusing interval")
    grid = grid or GridSpec.for_soliton(p.c0, 2048)
    lo, hi = p.with_c0(p.c0 - h), p.with_c0(p.c0 + h)
    dm, d0, dp = d_functional(lo, grid), d_functional(p, grid), d_functional(hi, grid)
    second = (dp - 2 * d0 + dm) / h ** 2
    phi = profile_values(p, grid.x)
    dphi_dc = (profile_values(hi, grid.x) - profile_values(lo, grid.x)) / (2 * h)
    quad = 2 * float(np.sum(phi * dphi_dc) * grid.dx)
    return ConvexityEstimate(float(second), quad, d_second_closed_form(p))


def convexity_sweep(sigma: float, c0_values, branch: str = "focusing", n: int = 1024) -> list[dict]:
    rows = []
    for c0 in c0_values:
        p = SolitonParams(sigma, float(c0), branch)
        est = d_second(p, grid=GridSpec.for_soliton(p.c0, n))
        rows.append({
            "c0": p.c0,
            "d2_numeric": est.second_difference,
            "d2_quadrature": est.quadrature,
            "d2_closed_form": est.closed_form,
            "abs_err": abs(est.second_difference - est.closed_form),
        })
    return rows


# ---------------------------------------------------------------------------
# perturbations and tracking

SHAPES = ("soliton", "bump", "noise")


def perturbation(shape: str, p: SolitonParams, grid: GridSpec, seed: int = 0,
                 dc0: float | None = None, band: float | None = None) -> np.ndarray:
    """Unit-H^1 perturbation direction.

    soliton: along-family mismatch phi_{c0+dc0} - phi_{c0};
    bump:    Gaussian of width 1/sqrt(c0) offset by one width from the crest;
    noise:   seeded random Fourier modes with |xi| <= band (default 2 sqrt(c0)), smooth taper.
    """
    x = grid.x
    if shape == "soliton":
        dc = 0.05 * p.c0 if dc0 is None else dc0
        if p.kappa < 0:
            dc = min(dc, 0.5 * (4 * p.sigma ** 2 - p.c0))
        g = p.kappa * (profile_values(p.with_c0(p.c0 + dc), x) - profile_values(p, x))
    elif shape == "bump":
        w = 1.0 / p.k
        g = np.exp(-((x - w) / w) ** 2)
    elif shape == "noise":
        rng = np.random.default_rng(seed)
        kmax = 2.0 * p.k if band is None else band
        xi = grid.rwavenumbers
        coeff = (rng.standard_normal(xi.size) + 1j * rng.standard_normal(xi.size))
        coeff *= np.exp(-((xi / kmax) ** 8))
        coeff[0] = 0.0
        coeff[-1] = 0.0
        g = np.fft.irfft(coeff, n=grid.n)
    else:
        raise ValueError(f"unknown perturbation shape {shape!r}; expected one of {SHAPES}")
    return g / sobolev_norm_values(g, grid, 1.0)


@dataclass
class ModulationTrace:
    t: list = field(default_factory=list)
    r: list = field(default_factory=list)
    r_prime: list = field(default_factory=list)
    h1_distance: list = field(default_factory=list)
    conserved: list = field(default_factory=list)
    r_prime_ode: list = field(default_factory=list)
    dG: list = field(default_factory=list)

    def arrays(self) -> dict:
        return {k: np.asarray(getattr(self, k), dtype=float)
                for k in ("t", "r", "r_prime", "h1_distance", "r_prime_ode", "dG")}

    def finalize(self):
        t = np.asarray(self.t)
        r = np.asarray(self.r)
        if len(t) >= 3:
            self.r_prime = list(np.gradient(r, t, edge_order=2))
        elif len(t) == 2:
            d = (r[1] - r[0]) / (t[1] - t[0])
            self.r_prime = [d, d]
        else:
            self.r_prime = [float("nan")] * len(t)

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "r", "r_prime", "h1_distance", "mean", "mass", "energy"])
            for i in range(len(self.t)):
                c = self.conserved[i]
                w.writerow([f"{v:.17g}" for v in (self.t[i], self.r[i], self.r_prime[i],
                                                   self.h1_distance[i], c.mean, c.mass, c.energy)])


def track_phase(sim: Simulation, p: SolitonParams, sample_dt: float, t_end: float,
                r0_guess: float = 0.0) -> ModulationTrace:
    """Advance ``sim`` to t_end, locating r(t) as the root of G(., t) every sample_dt.

    The simulation must evolve u - sigma in the mKdV frame.
    """
    grid = sim.grid
    trace = ModulationTrace()
    nsamples = int(round(t_end / sample_dt))
    r_prev = r0_guess
    slope = -wave_velocity(p, "mkdv" if sim.eq.drift else "gardner")
    t_prev = sim.t
    for i in range(nsamples + 1):
        ti = i * sample_dt if i < nsamples else t_end
        if ti > sim.t:
            sim.advance(ti)
        u = sim.values + p.sigma
        guess = r_prev + slope * (sim.t - t_prev) if i else r0_guess
        try:
            r = find_phase(u, p, guess, grid)
        except RootLost as exc:
            trace.finalize()
            raise RootLost(str(exc), t=sim.t, trace=trace) from None
        if i:
            slope = (r - r_prev) / (sim.t - t_prev)
        ufield = Field(grid, u)
        h = u - reference_wave(p, grid, r)
        trace.t.append(sim.t)
        trace.r.append(r)
        trace.h1_distance.append(sobolev_norm_values(h, grid, 1.0))
        trace.conserved.append(sim.conserved())
        try:
            trace.r_prime_ode.append(phase_ode_rhs(ufield, p, r) if sim.eq.drift else float("nan"))
        except DegenerateDenominator:
            trace.r_prime_ode.append(float("nan"))
        trace.dG.append(modulation_dG(ufield, p, r))
        r_prev, t_prev = r, sim.t
    trace.finalize()
    return trace


@dataclass
class StabilityReport:
    params: SolitonParams
    shape: str
    delta: float
    initial_h1: float
    epsilon_observed: float
    speed_deviation: float
    ode_speed_deviation: float
    K_distance: float
    K_speed: float
    bound: float
    passed: bool
    failure_time: float | None = None
    failure: str | None = None

    def flat(self) -> dict:
        d = asdict(self)
        prm = d.pop("params")
        return {"sigma": prm["sigma"], "c0": prm["c0"], "branch": prm["branch"], **d}


@dataclass(frozen=True)
class StabilityRun:
    params: SolitonParams
    shape: str
    delta: float
    n: int = 1024
    dt: float = 5e-3
    t_end: float = 50.0
    sample_dt: float = 0.25
    seed: int = 0
    K: float = 50.0
    tail: float = 50.0


def perturbed_initial_state(run: StabilityRun) -> tuple[GridSpec, np.ndarray]:
    p = run.params
    grid = GridSpec.for_soliton(p.c0, run.n, run.tail)
    v0 = p.kappa * soliton_profile(p, grid).values
    if run.delta:
        v0 = v0 + run.delta * perturbation(run.shape, p, grid, seed=run.seed)
    return grid, v0


def stability_experiment(run: StabilityRun) -> tuple[StabilityReport, ModulationTrace]:
    p = run.params
    grid, v0 = perturbed_initial_state(run)
    cfg = EvolveConfig(run.dt, run.t_end, frame="mkdv", log_every=10 ** 9)
    sim = Simulation(Field(grid, v0), Equation.mkdv_frame(p.sigma, p.branch), cfg)
    failure, ftime = None, None
    try:
        trace = track_phase(sim, p, run.sample_dt, run.t_end)
    except RootLost as exc:
        trace, failure, ftime = exc.trace, "RootLost", exc.t
    a = trace.arrays()
    V = wave_velocity(p, "mkdv")
    eps = float(np.max(a["h1_distance"])) if a["h1_distance"].size else float("nan")
    speed_dev = float(np.max(np.abs(a["r_prime"] + V))) if a["r_prime"].size else float("nan")
    ode_dev = float(np.nanmax(np.abs(a["r_prime_ode"] + V))) if a["r_prime_ode"].size else float("nan")
    d = run.delta if run.delta else float("nan")
    bound = run.K * run.delta
    passed = failure is None and np.isfinite(eps) and eps <= bound and speed_dev <= bound
    rep = StabilityReport(p, run.shape, run.delta, float(a["h1_distance"][0]) if a["h1_distance"].size else float("nan"),
                          eps, speed_dev, ode_dev, eps / d, speed_dev / d, bound, bool(passed), ftime, failure)
    return rep, trace


def run_stability_grid(runs, workers: int = 1):
    """Run independent experiments, optionally in worker processes; order preserved."""
    runs = list(runs)
    if workers <= 1:
        return [stability_experiment(r) for r in runs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(stability_experiment, runs))


def write_report(report: StabilityReport, path, config: dict | None = None) -> None:
    import json
    d = {**(config or {}), **report.flat()}
    Path(path).write_text(json.dumps(d, indent=1, sort_keys=True) + "\n")
