"""Explicit Gardner solitons, their ODE residuals, and the linearized operator.

Both branches share one algebraic form.  With kappa = +1 (focusing) or -1
(defocusing) the positive hump phi solves

    phi'' = c0 phi - 6 sigma phi^2 - 2 kappa phi^3,
    (phi')^2 = c0 phi^2 - 4 sigma phi^3 - kappa phi^4,

and is given by  phi = c0 / (2 sigma + A cosh(sqrt(c0) x)),  A = sqrt(4 sigma^2 + kappa c0).
The mKdV solution is u = sigma + kappa*phi travelling with velocity c0 + 6 kappa sigma^2.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg

from .grid import Field, GridSpec, derivative_values

FOCUSING = "focusing"
DEFOCUSING = "defocusing"


@dataclass(frozen=True)
class SolitonParams:
    sigma: float
    c0: float
    branch: str = FOCUSING

    def __post_init__(self):
        if self.branch not in (FOCUSING, DEFOCUSING):
            raise ValueError(f"branch must be 'focusing' or 'defocusing', got {self.branch!r}")
        if not (np.isfinite(self.sigma) and np.isfinite(self.c0)):
            raise ValueError("sigma and c0 must be finite")
        if self.c0 <= 0:
            raise ValueError(f"c0 must be positive, got {self.c0}")
        if self.branch == DEFOCUSING:
            if self.sigma <= 0:
                # sigma = 0 leaves the empty interval (0, 0); sigma < 0 makes the
                # denominator vanish (mirror image of the sigma > 0 wave).
                raise ValueError(f"defocusing branch needs sigma > 0, got {self.sigma}")
            if self.c0 >= 4 * self.sigma ** 2:
                raise ValueError(f"defocusing branch needs c0 < 4 sigma^2 = {4 * self.sigma ** 2}")
        # principal branch: sqrt(4 sigma^2 + c0) > 2|sigma| keeps the focusing denominator positive
        assert 2 * self.sigma + self.amplitude > 0

    @property
    def kappa(self) -> int:
        return 1 if self.branch == FOCUSING else -1

    @property
    def amplitude(self) -> float:
        return float(np.sqrt(4 * self.sigma ** 2 + self.kappa * self.c0))

    @property
    def k(self) -> float:
        return float(np.sqrt(self.c0))

    @property
    def peak(self) -> float:
        if self.sigma < 0:
            return (self.amplitude - 2 * self.sigma) / self.kappa
        return self.c0 / (2 * self.sigma + self.amplitude)

    def with_c0(self, c0: float) -> "SolitonParams":
        return SolitonParams(self.sigma, c0, self.branch)


def soliton_speed(p: SolitonParams) -> float:
    """c_sigma: 6 sigma^2 + c0 (focusing) or 6 sigma^2 - c0 (defocusing)."""
    return 6 * p.sigma ** 2 + p.kappa * p.c0


def wave_velocity(p: SolitonParams, frame: str = "mkdv") -> float:
    """Signed velocity of the hump for the given evolution frame.

    In the mKdV frame (u = sigma + v) the focusing wave moves right at c_sigma and
    the defocusing wave moves left at c_sigma.  In the bare Gardner frame the
    background drift 6 kappa sigma^2 is absent and both move right at c0.
    """
    if frame == "mkdv":
        return p.c0 + 6 * p.kappa * p.sigma ** 2
    if frame == "gardner":
        return p.c0
    raise ValueError(f"unknown frame {frame!r}")


def _denominator(p: SolitonParams, arg) -> np.ndarray:
    if p.sigma >= 0:
        return 2 * p.sigma + p.amplitude * np.cosh(arg)
    # 2 sigma + A cancels for sigma < 0; use 2 sigma + A = kappa c0 / (A - 2 sigma)
    # and cosh - 1 = 2 sinh^2(arg / 2)
    return p.kappa * p.c0 / (p.amplitude - 2 * p.sigma) + 2 * p.amplitude * np.sinh(0.5 * arg) ** 2


def profile_values(p: SolitonParams, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    # cosh overflows past |ky| ~ 710; the profile is exactly 0 in double precision there
    arg = np.minimum(np.abs(p.k * y), 700.0)
    return p.c0 / _denominator(p, arg)


def profile_derivative_values(p: SolitonParams, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    arg = np.clip(p.k * y, -350.0, 350.0)
    den = _denominator(p, arg)
    return -p.c0 * p.amplitude * p.k * np.sinh(arg) / den ** 2


def profile_second_derivative_values(p: SolitonParams, y) -> np.ndarray:
    phi = profile_values(p, y)
    return p.c0 * phi - 6 * p.sigma * phi ** 2 - 2 * p.kappa * phi ** 3


def soliton_profile(p: SolitonParams, grid: GridSpec, center: float = 0.0) -> Field:
    """Positive hump phi(x - center), periodised onto the grid."""
    return Field(grid, profile_values(p, grid.wrap(grid.x - center)))


def soliton_state(p: SolitonParams, grid: GridSpec, center: float = 0.0) -> Field:
    """Deviation v = u - sigma of the mKdV soliton: +phi focusing, -phi defocusing."""
    return p.kappa * soliton_profile(p, grid, center)


def ode_residuals(p: SolitonParams, grid: GridSpec | None = None) -> tuple[float, float]:
    """Max-norm residuals (second-order ODE, first integral) of the sampled profile."""
    grid = grid or GridSpec.for_soliton(p.c0)
    phi = soliton_profile(p, grid).values
    d1 = derivative_values(phi, grid, 1)
    d2 = derivative_values(phi, grid, 2)
    s, c0, kap = p.sigma, p.c0, p.kappa
    second = d2 - (c0 * phi - 6 * s * phi ** 2 - 2 * kap * phi ** 3)
    first = d1 ** 2 + kap * phi ** 4 + 4 * s * phi ** 3 - c0 * phi ** 2
    return float(np.abs(second).max()), float(np.abs(first).max())


@dataclass(frozen=True, eq=False)
class LinearizedOperator:
    """L f = -f'' + V f with V = c0 - 12 sigma phi - 6 kappa phi^2.

    For the focusing branch V = c_sigma - 6 (sigma + phi)^2.
    """

    grid: GridSpec
    params: SolitonParams
    potential: Field

    def apply(self, f: Field | np.ndarray) -> Field:
        v = f.values if isinstance(f, Field) else np.asarray(f, dtype=float)
        return Field(self.grid, -derivative_values(v, self.grid, 2) + self.potential.values * v)

    def matrix(self) -> np.ndarray:
        """Dense symmetric matrix in the grid basis (Fourier second-derivative kernel)."""
        g = self.grid
        n = g.n
        # circulant kernel of -d^2/dx^2 including the Nyquist mode
        xi = g.wavenumbers
        col = np.fft.ifft(xi ** 2).real
        idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        K = col[idx]
        return K + np.diag(self.potential.values)

    def eigenvalues(self, count: int | None = None) -> np.ndarray:
        if self.grid.n > 2048:
            raise ValueError("dense eigensolve limited to n <= 2048")
        M = self.matrix()
        if count is None:
            return linalg.eigh(M, eigvals_only=True)
        return linalg.eigh(M, eigvals_only=True, subset_by_index=[0, count - 1])


def build_linearized_operator(p: SolitonParams, grid: GridSpec) -> LinearizedOperator:
    phi = soliton_profile(p, grid).values
    V = p.c0 - 12 * p.sigma * phi - 6 * p.kappa * phi ** 2
    return LinearizedOperator(grid, p, Field(grid, V))


def write_spectrum_csv(eigenvalues, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "eigenvalue"])
        for i, ev in enumerate(eigenvalues):
            w.writerow([i, f"{ev:.17g}"])
