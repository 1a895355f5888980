"""Empirical ratios for the bilinear and trilinear X^{s,b} estimates.

Each sample is a tuple of space-time functions phi_i, smooth and compactly
supported in time inside the window, spatially band-limited by a super-Gaussian
taper so that products stay resolved.  The localized inputs are u_i = psi(t) phi_i.
The sampler only measures; it proves nothing.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .grid import GridSpec, SpaceTimeField, bump, time_axis, xsb_norm_values

KINDS = ("generic-random", "airy-concentrated", "near-resonant-pair")


@dataclass(frozen=True)
class EnsembleSpec:
    count: int = 64
    kind: str = "airy-concentrated"
    seed: int = 0
    s: float = 0.5
    b: float = 0.51
    grid: GridSpec = field(default_factory=lambda: GridSpec(256, 16.0))
    nt: int = 256
    t_half: float = 2.0
    band: float = 2.5
    allow_endpoint: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.count < 1:
            raise ValueError("count must be positive")
        if not (self.s > 0.25 or (self.allow_endpoint and self.s == 0.25)):
            raise ValueError(f"s must exceed 1/4, got {self.s}")
        if not 0.5 < self.b < 1:
            raise ValueError(f"b must lie in (1/2, 1), got {self.b}")
        if self.t_half < 1:
            raise ValueError("time window must contain [-1, 1]")
        # temporal resolution: cubic products of band-limited Airy waves
        tau_nyq = np.pi * self.nt / (2 * self.t_half)
        if 3 * (1.3 * self.band) ** 3 > tau_nyq:
            raise ValueError(f"nt={self.nt} under-resolves tau ~ xi^3 for band {self.band}")
        if 3 * 1.3 * self.band > np.pi / self.grid.dx:
            raise ValueError("spatial grid under-resolves cubic products")

    @property
    def t(self) -> np.ndarray:
        return time_axis(self.nt, self.t_half)

    def refined(self, space: int = 1, time: int = 1) -> "EnsembleSpec":
        return replace(self, grid=self.grid.refined(space), nt=self.nt * time)


@dataclass(frozen=True)
class RatioStats:
    ratios: np.ndarray
    kind: str
    s: float
    b: float
    label: str = "ratio"

    @property
    def max(self) -> float:
        return float(np.max(self.ratios))

    @property
    def mean(self) -> float:
        return float(np.mean(self.ratios))

    @property
    def p50(self) -> float:
        return float(np.percentile(self.ratios, 50))

    @property
    def p95(self) -> float:
        return float(np.percentile(self.ratios, 95))

    def summary_row(self) -> dict:
        return {"s": self.s, "b": self.b, "kind": self.kind, "max": self.max,
                "mean": self.mean, "p50": self.p50, "p95": self.p95}


# ---------------------------------------------------------------------------
# sample construction


def _taper(grid: GridSpec, band: float) -> np.ndarray:
    return np.exp(-((grid.rwavenumbers / band) ** 16))


def _bandlimit(rows: np.ndarray, grid: GridSpec, band: float) -> np.ndarray:
    return np.fft.irfft(np.fft.rfft(rows, axis=-1) * _taper(grid, band), n=grid.n, axis=-1)


def _packet(x, center, width, freq, phase):
    return np.cos(freq * x + phase) * np.exp(-0.5 * ((x - center) / width) ** 2)


def _envelope(spec: EnsembleSpec) -> np.ndarray:
    # phi itself is compactly supported inside the window; psi(t) then localizes to (-1, 1)
    return bump(spec.t / (0.9 * spec.t_half), 0.5, 1.0)


def _airy(spec: EnsembleSpec, g: np.ndarray) -> np.ndarray:
    grid = spec.grid
    k = grid.odd_wavenumbers()
    gh = np.fft.rfft(g) * _taper(grid, spec.band)
    phases = np.exp(1j * np.outer(spec.t, k ** 3))
    return np.fft.irfft(gh[None, :] * phases, n=grid.n, axis=-1) * _envelope(spec)[:, None]


def _draw_packet(rng, spec: EnsembleSpec, freq=None):
    L = spec.grid.half_length
    return dict(
        center=rng.uniform(-0.5 * L, 0.5 * L),
        width=rng.uniform(1.5, 3.0),
        freq=rng.uniform(-0.6 * spec.band, 0.6 * spec.band) if freq is None else freq,
        phase=rng.uniform(0, 2 * np.pi),
    )


def sample_functions(spec: EnsembleSpec, index: int, count: int = 3) -> list[np.ndarray]:
    """The ``count`` space-time arrays phi_i (shape nt x n) of sample ``index``.

    Parameters are drawn from a per-sample stream seeded by (seed, index), and the
    functions are evaluated analytically, so refined grids see the same functions.
    """
    rng = np.random.default_rng([spec.seed, index])
    x, t = spec.grid.x, spec.t
    out = []
    if spec.kind == "generic-random":
        env = _envelope(spec)
        for _ in range(count):
            arr = np.zeros((spec.nt, spec.grid.n))
            for _ in range(3):
                pk = _draw_packet(rng, spec)
                tau = rng.uniform(-10.0, 10.0)
                amp = rng.uniform(0.5, 1.5)
                arr += amp * np.cos(pk["freq"] * x[None, :] + tau * t[:, None] + pk["phase"]) \
                    * np.exp(-0.5 * ((x[None, :] - pk["center"]) / pk["width"]) ** 2)
            out.append(_bandlimit(arr * env[:, None], spec.grid, spec.band))
    elif spec.kind == "airy-concentrated":
        for _ in range(count):
            pk = _draw_packet(rng, spec)
            out.append(_airy(spec, _packet(x, **pk)))
    else:
        # high-frequency packets whose cubic interaction lands on the Airy surface,
        # completed by a low-frequency partner for the quadratic (pair) case
        xi0 = rng.uniform(0.4, 0.6) * spec.band
        freqs = [xi0, xi0, -xi0] if count == 3 else [xi0, rng.uniform(0.0, 0.1) * spec.band]
        for f in freqs[:count]:
            pk = _draw_packet(rng, spec, freq=f)
            pk["width"] = rng.uniform(2.5, 3.5)
            out.append(_airy(spec, _packet(x, **pk)))
    return out


# ---------------------------------------------------------------------------
# ratios


def _dx(rows: np.ndarray, grid: GridSpec) -> np.ndarray:
    k = grid.odd_wavenumbers()
    return np.fft.irfft(1j * k * np.fft.rfft(rows, axis=-1), n=grid.n, axis=-1)


def _norm(arr, spec: EnsembleSpec, s, b) -> float:
    return xsb_norm_values(arr, spec.grid, spec.t_half, s, b)


def _localize(arr, spec: EnsembleSpec) -> np.ndarray:
    return arr * bump(spec.t)[:, None]


def trilinear_ratio(phis, spec: EnsembleSpec) -> float:
    """||d_x(u1 u2 u3)||_{X^{s,b-1}} / prod ||phi_i||_{X^{s,b}}."""
    u1, u2, u3 = (_localize(p, spec) for p in phis)
    num = _norm(_dx(u1 * u2 * u3, spec.grid), spec, spec.s, spec.b - 1)
    den = np.prod([_norm(p, spec, spec.s, spec.b) for p in phis])
    if den == 0:
        raise ZeroDivisionError("zero X^{s,b} norm in sample")
    return float(num / den)


def bilinear_ratios(phis, spec: EnsembleSpec) -> tuple[float, float]:
    """(||u1 u2||_L2 / ||phi1||_{X^{s,b}} ||phi2||_{X^{-1/2,1-b}},
        ||d_x(u1 u2)||_{X^{s,b-1}} / ||phi1||_{X^{s,b}} ||phi2||_{X^{s,b}})."""
    phi1, phi2 = phis
    u1, u2 = _localize(phi1, spec), _localize(phi2, spec)
    prod = u1 * u2
    dt = 2 * spec.t_half / spec.nt
    l2 = np.sqrt(np.sum(prod ** 2) * spec.grid.dx * dt)
    n1 = _norm(phi1, spec, spec.s, spec.b)
    d_a = n1 * _norm(phi2, spec, -0.5, 1 - spec.b)
    d_b = n1 * _norm(phi2, spec, spec.s, spec.b)
    if d_a == 0 or d_b == 0:
        raise ZeroDivisionError("zero X^{s,b} norm in sample")
    r_b = _norm(_dx(prod, spec.grid), spec, spec.s, spec.b - 1) / d_b
    return float(l2 / d_a), float(r_b)


def sample_trilinear_ratio(spec: EnsembleSpec) -> RatioStats:
    r = [trilinear_ratio(sample_functions(spec, i, 3), spec) for i in range(spec.count)]
    return RatioStats(np.array(r), spec.kind, spec.s, spec.b, "trilinear")


def sample_bilinear_ratio(spec: EnsembleSpec) -> tuple[RatioStats, RatioStats]:
    ra, rb = zip(*(bilinear_ratios(sample_functions(spec, i, 2), spec) for i in range(spec.count)))
    return (RatioStats(np.array(ra), spec.kind, spec.s, spec.b, "bilinear_l2"),
            RatioStats(np.array(rb), spec.kind, spec.s, spec.b, "bilinear_kdv"))


def tabulate_trilinear(spec: EnsembleSpec, s_values=(0.25, 0.26, 0.3, 0.5, 1.0)) -> list[RatioStats]:
    return [sample_trilinear_ratio(replace(spec, s=s, allow_endpoint=True)) for s in s_values]


# ---------------------------------------------------------------------------
# free-group localization scaling


def localized_free_norm(g: np.ndarray, grid: GridSpec, delta: float, s: float, b: float,
                        nt: int = 256, t_half: float = 2.0) -> float:
    """||psi(t/delta) W(t) g||_{X^{s,b}} on the space-time grid."""
    t = time_axis(nt, t_half)
    k = grid.odd_wavenumbers()
    gh = np.fft.rfft(g)
    arr = np.fft.irfft(gh[None, :] * np.exp(1j * np.outer(t, k ** 3)), n=grid.n, axis=-1)
    arr *= bump(t / delta)[:, None]
    return xsb_norm_values(arr, grid, t_half, s, b)


@dataclass(frozen=True)
class ScalingFit:
    deltas: np.ndarray
    norms: np.ndarray
    exponent: float
    predicted: float
    data_norm: float

    @property
    def constants(self) -> np.ndarray:
        """Empirical c in ||.|| <= c delta^{(1-2b)/2} ||g||_{H^s} at each delta."""
        return self.norms / (self.deltas ** self.predicted * self.data_norm)


def fit_localization_exponent(g: np.ndarray, grid: GridSpec, s: float = 0.5, b: float = 0.51,
                              deltas=(1.0, 0.5, 0.25), nt: int = 256, t_half: float = 2.0) -> ScalingFit:
    from .grid import sobolev_norm_values

    deltas = np.asarray(deltas, dtype=float)
    norms = np.array([localized_free_norm(g, grid, d, s, b, nt, t_half) for d in deltas])
    slope = np.polyfit(np.log(deltas), np.log(norms), 1)[0]
    return ScalingFit(deltas, norms, float(slope), (1 - 2 * b) / 2, sobolev_norm_values(g, grid, s))


def default_free_data(grid: GridSpec, band: float = 2.5) -> np.ndarray:
    """Band-limited Gaussian used as W(t) data in the localization check."""
    g = np.exp(-0.5 * (grid.x / 2.0) ** 2)
    return np.fft.irfft(np.fft.rfft(g) * _taper(grid, band), n=grid.n)


# ---------------------------------------------------------------------------
# reports


def write_ratio_csv(stats_list, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "kind", "s", "b", "ratio"])
        for st in stats_list:
            for i, r in enumerate(st.ratios):
                w.writerow([i, st.kind, f"{st.s:.17g}", f"{st.b:.17g}", f"{r:.17g}"])


def write_summary_csv(stats_list, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s", "b", "kind", "max", "mean", "p50", "p95"])
        for st in stats_list:
            row = st.summary_row()
            w.writerow([f"{row['s']:.17g}", f"{row['b']:.17g}", row["kind"]]
                       + [f"{row[k]:.17g}" for k in ("max", "mean", "p50", "p95")])


def space_time_field(arr: np.ndarray, spec: EnsembleSpec) -> SpaceTimeField:
    return SpaceTimeField(spec.grid, spec.t_half, arr)
