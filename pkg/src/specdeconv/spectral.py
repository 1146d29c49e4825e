"""Frequency grids, spectral functions and Sobolev-weighted quadrature.

Fourier convention throughout is the unitary one,

    [Fg](t) = (2 pi)^(-1/2) * integral exp(-i t x) g(x) dx,

so every density has ``Fg(0) = (2 pi)^(-1/2)``.  Integrals over the
frequency line are composite trapezoid sums over the grid nodes; the
integrands produced by spectral cut-off have jumps, which the trapezoid
rule tolerates where FFT-based evaluation does not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

from .errors import GridMismatchError, NumericalError

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
SQRT_2PI = math.sqrt(2.0 * math.pi)

# default experiment grid
DEFAULT_T_MAX = 64.0
DEFAULT_N_POINTS = 8193

HERMITIAN_ATOL = 1e-12
IMAG_RESIDUE_TOL = 1e-9


@dataclass(frozen=True)
class FrequencyGrid:
    """Symmetric uniform grid ``t_j = -T + j*dt`` with an odd node count."""

    t_max: float
    n_points: int

    def __post_init__(self):
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            raise ValueError(f"t_max must be positive and finite, got {self.t_max!r}")
        if int(self.n_points) != self.n_points or self.n_points < 3 or self.n_points % 2 == 0:
            raise ValueError(f"n_points must be an odd integer >= 3, got {self.n_points!r}")
        object.__setattr__(self, "t_max", float(self.t_max))
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def half(self) -> int:
        """Index of the t = 0 node (also the number of strictly positive nodes)."""
        return (self.n_points - 1) // 2

    @property
    def dt(self) -> float:
        return self.t_max / self.half

    @cached_property
    def positive_nodes(self) -> np.ndarray:
        """Nodes ``k*dt`` for ``k = 0 .. half`` (t = 0 included)."""
        pos = np.arange(self.half + 1) * self.dt
        pos.flags.writeable = False
        return pos

    @cached_property
    def nodes(self) -> np.ndarray:
        pos = self.positive_nodes
        t = np.concatenate([-pos[:0:-1], pos])
        t.flags.writeable = False
        return t

    @cached_property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights."""
        w = np.full(self.n_points, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        w.flags.writeable = False
        return w

    def mirror(self, half_values: np.ndarray) -> np.ndarray:
        """Full hermitian array from values at the nonnegative nodes."""
        half_values = np.asarray(half_values)
        if half_values.shape != (self.half + 1,):
            raise ValueError("expected one value per nonnegative node")
        return np.concatenate([np.conj(half_values[:0:-1]), half_values])

    def nonnegative(self, full: np.ndarray) -> np.ndarray:
        return np.asarray(full)[self.half:]


def make_grid(t_max: float, n_points: int) -> FrequencyGrid:
    return FrequencyGrid(t_max, n_points)


def default_grid() -> FrequencyGrid:
    return FrequencyGrid(DEFAULT_T_MAX, DEFAULT_N_POINTS)


@dataclass(frozen=True)
class SobolevWeight:
    """The weight ``l_s(t) = (1 + t^2)^(s/2)``."""

    s: float = 0.0

    def __post_init__(self):
        if not self.s >= 0:
            raise ValueError(f"Sobolev index must be nonnegative, got {self.s!r}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.s == 0:
            return np.ones_like(t)
        return (1.0 + t * t) ** (0.5 * self.s)

    def squared(self, t):
        t = np.asarray(t, dtype=float)
        if self.s == 0:
            return np.ones_like(t)
        return (1.0 + t * t) ** self.s


def sobolev_weight_eval(w: SobolevWeight, t):
    out = w(t)
    return float(out) if np.ndim(out) == 0 else out


WeightLike = Union[SobolevWeight, float, int]


def as_weight(w: WeightLike) -> SobolevWeight:
    return w if isinstance(w, SobolevWeight) else SobolevWeight(float(w))


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """Complex samples of a function on the nodes of a ``FrequencyGrid``.

    ``hermitian=True`` asserts ``values[j] == conj(values[n-1-j])``, i.e. the
    Fourier transform of a real function; it is checked on construction.
    """

    grid: FrequencyGrid
    values: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.grid.n_points,):
            raise ValueError(
                f"expected {self.grid.n_points} values, got shape {v.shape}"
            )
        if self.hermitian:
            err = np.max(np.abs(v - np.conj(v[::-1])))
            if err > HERMITIAN_ATOL:
                raise ValueError(f"values are not hermitian (max asymmetry {err:.3g})")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: FrequencyGrid, fn: Callable, hermitian: bool = True):
        return cls(grid, fn(grid.nodes), hermitian=hermitian)

    @classmethod
    def zeros(cls, grid: FrequencyGrid):
        return cls(grid, np.zeros(grid.n_points, dtype=complex), hermitian=True)

    def _check(self, other: "SpectralFunction"):
        if other.grid != self.grid:
            raise GridMismatchError(f"grid {other.grid} does not match {self.grid}")

    def __add__(self, other):
        if isinstance(other, SpectralFunction):
            self._check(other)
            return SpectralFunction(self.grid, self.values + other.values,
                                    self.hermitian and other.hermitian)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SpectralFunction):
            self._check(other)
            return SpectralFunction(self.grid, self.values - other.values,
                                    self.hermitian and other.hermitian)
        return NotImplemented

    def __mul__(self, c):
        if np.isscalar(c):
            herm = self.hermitian and np.imag(c) == 0
            return SpectralFunction(self.grid, self.values * c, herm)
        return NotImplemented

    __rmul__ = __mul__

    def modulus_sq(self) -> np.ndarray:
        return self.values.real ** 2 + self.values.imag ** 2


def weighted_l2_norm_sq(f: SpectralFunction, w: WeightLike = 0.0) -> float:
    """Trapezoid approximation of ``integral l_s(t)^2 |f(t)|^2 dt``."""
    w = as_weight(w)
    g = f.grid
    return float(np.sum(g.weights * w.squared(g.nodes) * f.modulus_sq()))


def tail_check(f: SpectralFunction, w: WeightLike = 0.0, tol: float = 1e-6):
    """Share of the weighted norm carried by nodes with ``|t| >= 0.9 T``.

    Returns ``(ok, fraction)`` with ``ok`` true iff ``fraction < tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    w = as_weight(w)
    g = f.grid
    integrand = g.weights * w.squared(g.nodes) * f.modulus_sq()
    total = float(np.sum(integrand))
    if total == 0.0:
        return True, 0.0
    outer = np.abs(g.nodes) >= 0.9 * g.t_max
    frac = float(np.sum(integrand[outer]) / total)
    return frac < tol, frac


def inverse_transform_at(f: SpectralFunction, points, block: int = 1 << 20) -> np.ndarray:
    """Evaluate ``(2 pi)^(-1/2) integral exp(i t x) f(t) dt`` at real ``points``."""
    if not f.hermitian:
        raise ValueError("inverse transform requires a hermitian spectral function")
    x = np.atleast_1d(np.asarray(points, dtype=float))
    g = f.grid
    wf = g.weights * f.values
    out = np.empty(x.size)
    worst = 0.0
    step = max(1, block // g.n_points)
    for i0 in range(0, x.size, step):
        ph = np.outer(x[i0:i0 + step], g.nodes)
        c, s = np.cos(ph), np.sin(ph)
        re = c @ wf.real - s @ wf.imag
        im = s @ wf.real + c @ wf.imag
        out[i0:i0 + step] = INV_SQRT_2PI * re
        worst = max(worst, float(np.max(np.abs(im))) * INV_SQRT_2PI)
    if worst > IMAG_RESIDUE_TOL:
        raise NumericalError(
            f"imaginary residue {worst:.3g} exceeds {IMAG_RESIDUE_TOL:g}; grid inadequate"
        )
    return out
