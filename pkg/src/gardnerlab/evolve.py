"""Time integration of Gardner / mKdV on the periodic grid.

All evolutions are of the form

    v_t + v_xxx + drift v_x + quadratic (v^2)_x + cubic (v^3)_x = 0.

The bare Gardner equation has (drift, quadratic, cubic) = (0, 6 sigma, 2).  Writing
the focusing mKdV solution as u = sigma + v gives the same equation plus a
background drift 6 sigma^2 v_x ("mkdv" frame); the defocusing branch flips every
sign.  The linear part (dispersion and drift) is integrated exactly by the
integrating factor; the nonlinear part is marched with classical RK4.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.polynomial import legendre

from .grid import Field, GridSpec, derivative_values

log = logging.getLogger(__name__)


class NonFiniteError(RuntimeError):
    """A step produced NaN/Inf; ``state`` is the last finite field and ``t`` its time."""

    def __init__(self, msg, state: Field | None = None, t: float | None = None):
        super().__init__(msg)
        self.state = state
        self.t = t


class StepGuardError(ValueError):
    pass


@dataclass(frozen=True)
class Equation:
    quadratic: float
    cubic: float
    drift: float = 0.0
    sigma: float = 0.0
    kappa: int = 1

    @classmethod
    def gardner(cls, sigma: float, branch: str = "focusing") -> "Equation":
        k = _kappa(branch)
        return cls(6 * k * sigma, 2 * k, 0.0, sigma, k)

    @classmethod
    def mkdv_frame(cls, sigma: float, branch: str = "focusing") -> "Equation":
        k = _kappa(branch)
        return cls(6 * k * sigma, 2 * k, 6 * k * sigma ** 2, sigma, k)

    @classmethod
    def for_frame(cls, sigma: float, branch: str = "focusing", frame: str = "mkdv") -> "Equation":
        if frame == "mkdv":
            return cls.mkdv_frame(sigma, branch)
        if frame == "gardner":
            return cls.gardner(sigma, branch)
        raise ValueError(f"unknown frame {frame!r}")

    @classmethod
    def scaled(cls, sigma: float, scaling: "ScalingParams") -> "Equation":
        """Gardner equation satisfied by w(y, s) = lambda^-alpha v(y/lambda, s/lambda^3)."""
        lam, a = scaling.lam, scaling.alpha
        return cls(6 * sigma * lam ** (a - 2), 2 * lam ** (2 * (a - 1)), 0.0, sigma, 1)


def _kappa(branch: str) -> int:
    if branch == "focusing":
        return 1
    if branch == "defocusing":
        return -1
    raise ValueError(f"branch must be 'focusing' or 'defocusing', got {branch!r}")


@dataclass(frozen=True)
class EvolveConfig:
    dt: float
    t_end: float
    dealias: bool = True
    log_every: int = 100
    frame: str = "mkdv"
    safety: float = 1.0
    scheme: str = "ifrk4"

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt != 0):
            raise ValueError(f"dt must be finite and nonzero, got {self.dt}")
        if not (np.isfinite(self.t_end) and self.t_end >= 0):
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        if self.frame not in ("mkdv", "gardner"):
            raise ValueError(f"frame must be 'mkdv' or 'gardner', got {self.frame!r}")
        if self.scheme != "ifrk4":
            raise ValueError("only the integrating-factor RK4 scheme is available")


@dataclass(frozen=True)
class ConservedTriple:
    mean: float
    mass: float
    energy: float

    def as_tuple(self):
        return (self.mean, self.mass, self.energy)


@dataclass(frozen=True)
class ScalingParams:
    lam: float
    alpha: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.alpha > 2:
            raise ValueError(f"alpha must exceed 2, got {self.alpha}")


# ---------------------------------------------------------------------------
# linear group


def free_propagate(f: Field, t: float) -> Field:
    """W(t) f: solution at time t of v_t + v_xxx = 0."""
    k = f.grid.odd_wavenumbers()
    return Field(f.grid, np.fft.irfft(np.exp(1j * k ** 3 * t) * np.fft.rfft(f.values), n=f.grid.n))


# ---------------------------------------------------------------------------
# stepping


class _Stepper:
    """IF-RK4 in rfft space; caches exponentials per time step."""

    def __init__(self, grid: GridSpec, eq: Equation, dealias: bool = True):
        self.grid = grid
        self.eq = eq
        self.dealias = dealias
        self.k = grid.odd_wavenumbers()
        # v_hat' = i(xi^3 - drift xi) v_hat + N(v_hat)
        self.symbol = 1j * (self.k ** 3 - eq.drift * self.k)
        self.m = 2 * grid.n if dealias else grid.n
        self._dt = None

    def _exps(self, dt):
        if dt != self._dt:
            self._E = np.exp(self.symbol * dt)
            self._E2 = np.exp(self.symbol * dt / 2)
            self._dt = dt
        return self._E, self._E2

    def nonlinear(self, vh: np.ndarray) -> np.ndarray:
        n, m = self.grid.n, self.m
        if m != n:
            pad = np.zeros(m // 2 + 1, dtype=complex)
            pad[: n // 2] = vh[: n // 2]
            v = np.fft.irfft(pad, n=m) * (m / n)
        else:
            v = np.fft.irfft(vh, n=n)
        v2 = v * v
        prod = self.eq.quadratic * v2 + self.eq.cubic * v2 * v
        ph = np.fft.rfft(prod)[: n // 2 + 1] * (n / m)
        return -1j * self.k * ph

    def step(self, vh: np.ndarray, dt: float) -> np.ndarray:
        E, E2 = self._exps(dt)
        N = self.nonlinear
        a = N(vh)
        b = N(E2 * (vh + 0.5 * dt * a))
        c = N(E2 * vh + 0.5 * dt * b)
        d = N(E * vh + dt * (E2 * c))
        return E * vh + (dt / 6.0) * (E * a + 2.0 * E2 * (b + c) + d)

    def guard(self, v: np.ndarray, dt: float, safety: float) -> float:
        vmax = float(np.abs(v).max())
        kmax = float(np.abs(self.k).max())
        return abs(dt) * kmax * (abs(self.eq.quadratic) * vmax + abs(self.eq.cubic) * vmax ** 2) * safety


def step(v: Field, sigma: float, cfg: EvolveConfig, branch: str = "focusing",
         equation: Equation | None = None) -> Field:
    """One IF-RK4 step of size cfg.dt."""
    eq = equation or Equation.for_frame(sigma, branch, cfg.frame)
    st = _Stepper(v.grid, eq, cfg.dealias)
    g = st.guard(v.values, cfg.dt, cfg.safety)
    if g > 1:
        raise StepGuardError(f"nonlinear step guard violated: {g:.3g} > 1")
    out = np.fft.irfft(st.step(np.fft.rfft(v.values), cfg.dt), n=v.grid.n)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("step produced non-finite values", state=v, t=0.0)
    return Field(v.grid, out)


@dataclass
class RunLog:
    rows: list = field(default_factory=list)
    has_error: bool = False

    def append(self, t, c: ConservedTriple, err=None):
        self.rows.append((t, c.mean, c.mass, c.energy, err))
        self.has_error = self.has_error or err is not None

    @property
    def t(self):
        return np.array([r[0] for r in self.rows])

    def column(self, name: str) -> np.ndarray:
        i = {"t": 0, "mean": 1, "mass": 2, "energy": 3, "l2_error_vs_oracle": 4}[name]
        return np.array([r[i] for r in self.rows], dtype=float)

    def max_relative_drift(self) -> dict:
        out = {}
        for name in ("mean", "mass", "energy"):
            col = self.column(name)
            scale = abs(col[0]) if col[0] != 0 else 1.0
            out[name] = float(np.abs(col - col[0]).max() / scale)
        return out

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["t", "mean", "mass", "energy"]
            if self.has_error:
                header.append("l2_error_vs_oracle")
            w.writerow(header)
            for r in self.rows:
                vals = [f"{x:.17g}" for x in r[:4]]
                if self.has_error:
                    vals.append("" if r[4] is None else f"{r[4]:.17g}")
                w.writerow(vals)


class Simulation:
    """Stateful time marcher for one initial condition.

    ``oracle`` (optional) maps t to the exact field values, logged as an L2 error.
    """

    def __init__(self, v0: Field, equation: Equation, cfg: EvolveConfig,
                 oracle: Callable[[float], np.ndarray] | None = None):
        self.grid = v0.grid
        self.eq = equation
        self.cfg = cfg
        self.oracle = oracle
        self._st = _Stepper(v0.grid, equation, cfg.dealias)
        self._vh = np.fft.rfft(v0.values)
        self.t = 0.0
        self.steps = 0
        self.log = RunLog()
        self._record()

    @property
    def values(self) -> np.ndarray:
        return np.fft.irfft(self._vh, n=self.grid.n)

    @property
    def field(self) -> Field:
        return Field(self.grid, self.values)

    def conserved(self) -> ConservedTriple:
        return conserved_for(self.values, self.grid, self.eq)

    def _record(self):
        err = None
        if self.oracle is not None:
            diff = self.values - self.oracle(self.t)
            err = float(np.sqrt(np.sum(diff ** 2) * self.grid.dx))
        self.log.append(self.t, self.conserved(), err)

    def advance(self, t_target: float) -> Field:
        """March to ``t_target`` with steps of cfg.dt (last step shortened to land exactly)."""
        dt = self.cfg.dt
        direction = math.copysign(1.0, dt)
        remaining = t_target - self.t
        if remaining * direction < -1e-12 * max(1.0, abs(t_target)):
            raise ValueError("target time lies behind the current time for this dt sign")
        nfull = int(math.floor(remaining / dt + 1e-9))
        rest = remaining - nfull * dt
        if abs(rest) < 1e-12 * max(1.0, abs(dt)):
            rest = 0.0
        v = self.values
        g = self._st.guard(v, dt, self.cfg.safety)
        if g > 1:
            raise StepGuardError(f"nonlinear step guard violated at t={self.t}: {g:.3g} > 1")
        t0, s0 = self.t, self.steps
        for i in range(nfull):
            self._one(dt, t0 + (i + 1) * dt)
        if rest:
            self._one(rest, t_target, count=False)
        if nfull or rest:
            self.t = t_target
        log.debug("advanced %d steps to t=%g", self.steps - s0, self.t)
        return self.field

    def _one(self, dt, t_new, count=True):
        new = self._st.step(self._vh, dt)
        if not np.all(np.isfinite(new)):
            raise NonFiniteError(f"non-finite state after t={self.t}", state=self.field, t=self.t)
        self._vh = new
        self.t = t_new
        if not count:
            return
        self.steps += 1
        if self.steps % self.cfg.log_every == 0:
            self._record()

    def run(self, snapshot_times=(), on_snapshot=None) -> Field:
        for ts in sorted(snapshot_times):
            if ts <= self.t or ts > self.cfg.t_end:
                continue
            f = self.advance(ts)
            if on_snapshot:
                on_snapshot(ts, f)
        out = self.advance(self.cfg.t_end)
        if not self.log.rows or self.log.rows[-1][0] != self.t:
            self._record()
        return out


def evolve(v0: Field, sigma: float, cfg: EvolveConfig, branch: str = "focusing",
           equation: Equation | None = None, oracle=None) -> tuple[Field, RunLog]:
    eq = equation or Equation.for_frame(sigma, branch, cfg.frame)
    sim = Simulation(v0, eq, cfg, oracle)
    out = sim.run()
    return out, sim.log


# ---------------------------------------------------------------------------
# conservation


def conserved_for(values: np.ndarray, grid: GridSpec, eq: Equation) -> ConservedTriple:
    """mean, F = 1/2 int v^2, E = int v_x^2 - (2q/3) v^3 - (c/2) v^4."""
    dx = grid.dx
    vx = derivative_values(values, grid, 1)
    mean = np.sum(values) * dx
    mass = 0.5 * np.sum(values ** 2) * dx
    energy = np.sum(vx ** 2 - (2 * eq.quadratic / 3) * values ** 3 - 0.5 * eq.cubic * values ** 4) * dx
    return ConservedTriple(float(mean), float(mass), float(energy))


def conserved(v: Field, sigma: float, branch: str = "focusing") -> ConservedTriple:
    """Focusing: E = int v_x^2 - v^4 - 4 sigma v^3; defocusing flips the potential terms."""
    return conserved_for(v.values, v.grid, Equation.gardner(sigma, branch))


# ---------------------------------------------------------------------------
# scaling


def scale_down(v0: Field, p: ScalingParams) -> Field:
    """w(y) = lambda^-alpha v(y / lambda) on the box [-lambda L, lambda L)."""
    g = GridSpec(v0.grid.n, v0.grid.half_length * p.lam)
    return Field(g, v0.values * p.lam ** (-p.alpha))


def scale_up(w: Field, p: ScalingParams) -> Field:
    """v(x) = lambda^alpha w(lambda x) on the box [-L/lambda, L/lambda)."""
    g = GridSpec(w.grid.n, w.grid.half_length / p.lam)
    return Field(g, w.values * p.lam ** p.alpha)


# ---------------------------------------------------------------------------
# local existence time


@dataclass(frozen=True)
class LocalTime:
    d1: float
    d2: float
    lambda0: float
    T: float
    regime: str


def lambda_bound(w0_norm: float, c0_const: float = 1.0, alpha: float = 3.0) -> tuple[float, float, float]:
    """(d1, d2, lambda0) with lambda0 = min(d1 r^{-1/(alpha-2)}, d2 r^{-1/(alpha-1)})."""
    if not alpha > 2:
        raise ValueError(f"alpha must exceed 2, got {alpha}")
    if not c0_const > 0:
        raise ValueError("estimate constant must be positive")
    d1 = (1.0 / (4 * c0_const)) ** (1.0 / (alpha - 2))
    d2 = (1.0 / (4 * c0_const ** 2)) ** (1.0 / (2 * (alpha - 1)))
    if w0_norm == 0:
        return d1, d2, math.inf
    lam0 = min(d1 * w0_norm ** (-1.0 / (alpha - 2)), d2 * w0_norm ** (-1.0 / (alpha - 1)))
    return d1, d2, lam0


def local_time_estimate(v0_norm: float, s: float = 1.0, c0_const: float = 1.0,
                        alpha: float = 3.0) -> LocalTime:
    """Existence time T = lambda^-3 for data of H^s size ``v0_norm``.

    ``lambda0`` here is the admissible lambda for the v-problem, T**(-1/3);
    d1, d2 are the constants of the lambda bound for the rescaled problem.
    """
    if not alpha > 2:
        raise ValueError(f"alpha must exceed 2, got {alpha}")
    if not s > 0.25:
        raise ValueError(f"s must exceed 1/4, got {s}")
    if not c0_const > 0:
        raise ValueError("estimate constant must be positive")
    if not v0_norm >= 0:
        raise ValueError("norm must be nonnegative")
    d1, d2, _ = lambda_bound(1.0, c0_const, alpha)
    if v0_norm == 0:
        return LocalTime(d1, d2, 0.0, math.inf, "small")
    big = (1.0 / (4 * c0_const ** 2 * v0_norm ** 2)) ** 3
    small = (1.0 / (4 * c0_const * v0_norm)) ** (6.0 / (3 + 2 * s))
    if v0_norm > 1:
        T, regime = big, "large"
    elif v0_norm < 1:
        T, regime = small, "small"
    else:
        T, regime = min(big, small), ("large" if big <= small else "small")
    return LocalTime(d1, d2, T ** (-1.0 / 3.0), T, regime)


# ---------------------------------------------------------------------------
# Duhamel / Picard diagnostic


def picard_solution(v0: Field, eq: Equation, t_end: float, iterations: int = 5,
                    nodes: int = 10) -> Field:
    """Picard iterates of the Duhamel formula in the interaction picture.

    g(t) = W(-t) v(t) satisfies g' = W(-t) N(W(t) g); each iterate integrates the
    previous one with Legendre collocation on [0, t_end].
    """
    st = _Stepper(v0.grid, eq, dealias=True)
    x, _ = legendre.leggauss(nodes)
    tn = 0.5 * t_end * (x + 1)
    g0 = np.fft.rfft(v0.values)
    g = np.tile(g0, (nodes, 1))
    V = legendre.legvander(x, nodes - 1)
    for _ in range(iterations):
        integrand = np.array([np.exp(-st.symbol * t) * st.nonlinear(np.exp(st.symbol * t) * gi)
                              for t, gi in zip(tn, g)])
        coef = np.linalg.solve(V, integrand)
        icoef = legendre.legint(coef, lbnd=-1) * (0.5 * t_end)
        g = g0 + legendre.legval(x, icoef).T
        g_end = g0 + legendre.legval(1.0, icoef)
    vh = np.exp(st.symbol * t_end) * g_end
    return Field(v0.grid, np.fft.irfft(vh, n=v0.grid.n))


def with_dt(cfg: EvolveConfig, dt: float) -> EvolveConfig:
    return replace(cfg, dt=dt)
