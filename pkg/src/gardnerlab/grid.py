"""Periodic grid, Fourier transforms, spectral derivatives and Sobolev-type norms.

The real line is approximated by the periodic box [-L, L) sampled at n points.
Transforms use the convention  f_hat(xi) = sum_j f(x_j) exp(-i xi x_j) dx,
so that Parseval reads  ||f||_2^2 = (1/2pi) sum |f_hat|^2 dxi  with dxi = pi/L.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    n: int
    half_length: float

    def __post_init__(self):
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise ValueError(f"grid point count must be a power of two >= 8, got {self.n}")
        if not (np.isfinite(self.half_length) and self.half_length > 0):
            raise ValueError(f"half_length must be positive, got {self.half_length}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "half_length", float(self.half_length))

    @classmethod
    def for_soliton(cls, c0: float, n: int = 4096, tail: float = 50.0) -> "GridSpec":
        """Box wide enough that exp(-sqrt(c0) L) = exp(-tail)."""
        return cls(n, tail / np.sqrt(c0))

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n

    @property
    def x(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.n)

    @property
    def dxi(self) -> float:
        return np.pi / self.half_length

    @property
    def wavenumbers(self) -> np.ndarray:
        """xi_k = pi k / L in numpy FFT order (k = 0..n/2-1, -n/2..-1)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, self.dx)

    @property
    def rwavenumbers(self) -> np.ndarray:
        """Non-negative wavenumbers matching ``np.fft.rfft`` output (Nyquist last)."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n, self.dx)

    def odd_wavenumbers(self) -> np.ndarray:
        """rfft wavenumbers with the Nyquist mode zeroed, for odd-order symbols."""
        k = self.rwavenumbers.copy()
        k[-1] = 0.0
        return k

    def wrap(self, x):
        """Map coordinates into [-L, L)."""
        L = self.half_length
        return np.mod(np.asarray(x) + L, 2.0 * L) - L

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.n * factor, self.half_length)

    def field(self, values) -> "Field":
        return Field(self, values)


@dataclass(frozen=True, eq=False)
class Field:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.dx)

    def __add__(self, other):
        return Field(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return Field(self.grid, self.values - _vals(other))

    def __mul__(self, a):
        return Field(self.grid, self.values * _vals(a))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)


def _vals(obj):
    return obj.values if isinstance(obj, Field) else obj


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)

    @property
    def wavenumbers(self) -> np.ndarray:
        return self.grid.wavenumbers

    def is_conjugate_symmetric(self, rtol: float = 1e-12) -> bool:
        c = self.coeffs
        mirrored = np.conj(np.roll(c[::-1], 1))
        return bool(np.allclose(c, mirrored, rtol=0, atol=rtol * max(np.abs(c).max(), 1e-300)))


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Samples f(x_j, t_m) with t_m = -t_half + m*dt, dt = 2 t_half / nt (rows are times)."""

    grid: GridSpec
    t_half: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != self.grid.n:
            raise ValueError(f"expected (nt, {self.grid.n}) samples, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("space-time field contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def nt(self) -> int:
        return self.values.shape[0]

    @property
    def dt(self) -> float:
        return 2.0 * self.t_half / self.nt

    @property
    def t(self) -> np.ndarray:
        return time_axis(self.nt, self.t_half)

    @property
    def frequencies(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.nt, self.dt)


def time_axis(nt: int, t_half: float) -> np.ndarray:
    return -t_half + (2.0 * t_half / nt) * np.arange(nt)


def _check_finite(f: Field):
    if not np.all(np.isfinite(f.values)):
        raise ValueError("field contains non-finite values")


def forward(f: Field) -> SpectralField:
    return SpectralField(f.grid, np.fft.fft(f.values) * f.grid.dx)


def inverse(F: SpectralField) -> Field:
    return Field(F.grid, np.fft.ifft(F.coeffs / F.grid.dx).real)


def derivative_values(values: np.ndarray, grid: GridSpec, order: int = 1) -> np.ndarray:
    """Array-level spectral derivative; odd orders drop the Nyquist mode."""
    k = grid.odd_wavenumbers() if order % 2 else grid.rwavenumbers
    return np.fft.irfft((1j * k) ** order * np.fft.rfft(values), n=grid.n)


def spectral_derivative(f: Field, order: int = 1) -> Field:
    if int(order) != order or order < 1:
        raise ValueError(f"derivative order must be a positive integer, got {order}")
    _check_finite(f)
    return Field(f.grid, derivative_values(f.values, f.grid, int(order)))


def sobolev_norm(f: Field, s: float = 0.0) -> float:
    """(1/2pi * sum (1+|xi|)^{2s} |f_hat|^2 dxi)^{1/2}; s=0 is the L2 norm."""
    _check_finite(f)
    return sobolev_norm_values(f.values, f.grid, s)


def sobolev_norm_values(values: np.ndarray, grid: GridSpec, s: float = 0.0) -> float:
    F = np.fft.fft(values) * grid.dx
    w = (1.0 + np.abs(grid.wavenumbers)) ** (2.0 * s)
    return float(np.sqrt(np.sum(w * np.abs(F) ** 2) * grid.dxi / (2.0 * np.pi)))


def xsb_norm(f: SpaceTimeField, s: float, b: float) -> float:
    """Discrete Bourgain norm with weight (1+|tau - xi^3|)^{2b} (1+|xi|)^{2s}."""
    return xsb_norm_values(f.values, f.grid, f.t_half, s, b)


def xsb_norm_values(values: np.ndarray, grid: GridSpec, t_half: float, s: float, b: float) -> float:
    nt = values.shape[0]
    dt = 2.0 * t_half / nt
    F = np.fft.fft2(values) * (grid.dx * dt)
    xi = grid.wavenumbers[None, :]
    tau = 2.0 * np.pi * np.fft.fftfreq(nt, dt)[:, None]
    w = (1.0 + np.abs(tau - xi ** 3)) ** (2.0 * b) * (1.0 + np.abs(xi)) ** (2.0 * s)
    dtau = np.pi / t_half
    return float(np.sqrt(np.sum(w * np.abs(F) ** 2) * grid.dxi * dtau) / (2.0 * np.pi))


def _smooth_step(x):
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def bump(t, inner: float = 0.5, outer: float = 1.0) -> np.ndarray:
    """Smooth cutoff: 1 on [-inner, inner], 0 outside (-outer, outer), C-infinity."""
    a = np.abs(np.asarray(t, dtype=float))
    up = _smooth_step(outer - a)
    down = _smooth_step(a - inner)
    return up / (up + down)


def write_field_csv(f: Field, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "value"])
        for xv, v in zip(f.x, f.values):
            w.writerow([f"{xv:.17g}", f"{v:.17g}"])


def read_field_csv(path, half_length: float | None = None) -> Field:
    """Read a field written by :func:`write_field_csv`.

    The half-length is recovered from the first abscissa (x_0 = -L) unless given.
    """
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["x", "value"]:
        raise ValueError(f"{path}: expected header 'x,value'")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    L = -data[0, 0] if half_length is None else half_length
    return Field(GridSpec(len(data), L), data[:, 1])
