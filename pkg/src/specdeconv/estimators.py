r"""Fourier-domain estimators for deconvolution with spectral cut-off.

Kernel density spectrum
-----------------------
For a symmetric kernel ``K`` and bandwidth ``h`` the kernel estimator
``fY(y) = (n h)^-1 sum_j K((Y_j - y)/h)`` has the exact transform

    [F fY](t) = (2 pi)^(-1/2) (n h)^-1 sum_j integral exp(-i t y) K((Y_j - y)/h) dy
              = (n)^-1 sum_j exp(-i t Y_j) [FK](h t)          (u = (y - Y_j)/h, K even)
              = sqrt(2 pi) [FK](h t) * ecf_Y(t),

with ``ecf_Y(t) = (n sqrt(2 pi))^-1 sum_j exp(-i t Y_j)``.  No spatial binning
is involved, so the spectrum is exact up to floating point.

Cut-off deconvolution
---------------------
Given a spectrum of ``fY`` and a transform ``phi`` of the error density
(exact or empirical), the estimate keeps

    F fY * conj(phi) / (sqrt(2 pi) |phi|^2)      where |phi / l_s|^2 >= alpha

and is zero elsewhere.  On kept nodes ``|phi|^2 >= alpha l_s^2 >= alpha``, so
the division never needs a separate guard.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _backend
from .errors import GridMismatchError, UnguaranteedDerivativeError
from .spectral import (INV_SQRT_2PI, SQRT_2PI, FrequencyGrid, SobolevWeight,
                       SpectralFunction)


@dataclass(frozen=True)
class KernelSpec:
    """A symmetric kernel described through its Fourier transform.

    ``defect(t)`` is ``1 - sqrt(2 pi) ft(t)`` in a cancellation-free form;
    ``kappa_r = lim |defect(t)| / |t|^r`` at ``t -> 0``.  ``support`` is the
    half-width of the transform's support (``inf`` if unbounded).
    """

    name: str
    ft: Callable
    defect: Callable
    r: float
    kappa_r: float
    support: float = math.inf


def _sinc_ft(t):
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) <= 1.0, INV_SQRT_2PI, 0.0)


def _quartic_ft(t):
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) <= 1.0, INV_SQRT_2PI * (1.0 - t ** 4), 0.0)


KERNELS = {
    # ft flat on [-1, 1]: in every class with zero limit constant
    "sinc": KernelSpec(
        "sinc", _sinc_ft,
        lambda t: np.where(np.abs(np.asarray(t, float)) <= 1.0, 0.0, 1.0),
        r=math.inf, kappa_r=0.0, support=1.0),
    "gaussian": KernelSpec(
        "gaussian", lambda t: INV_SQRT_2PI * np.exp(-0.5 * np.asarray(t, float) ** 2),
        lambda t: -np.expm1(-0.5 * np.asarray(t, float) ** 2),
        r=2.0, kappa_r=0.5),
    "quartic": KernelSpec(
        "quartic", _quartic_ft,
        lambda t: np.where(np.abs(np.asarray(t, float)) <= 1.0,
                           np.asarray(t, float) ** 4, 1.0),
        r=4.0, kappa_r=1.0, support=1.0),
}


def get_kernel(name: str) -> KernelSpec:
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; known: {', '.join(sorted(KERNELS))}") from None


@dataclass(frozen=True, eq=False)
class EcfEstimate:
    spectrum: SpectralFunction
    m: int


@dataclass(frozen=True, eq=False)
class DeconvEstimate:
    spectrum: SpectralFunction
    s: float
    alpha: float
    keep_mask: np.ndarray
    provenance: str  # "known_eps" | "estimated_eps"

    @property
    def mask_fraction(self) -> float:
        return float(np.mean(self.keep_mask))

    def mask_edge(self) -> Optional[float]:
        """Largest kept |t|, or None when nothing is kept."""
        if not self.keep_mask.any():
            return None
        return float(np.max(np.abs(self.spectrum.grid.nodes[self.keep_mask])))


def _as_samples(samples) -> np.ndarray:
    x = np.ascontiguousarray(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("empty sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def ecf_half(samples, grid: FrequencyGrid, n_nodes: Optional[int] = None) -> np.ndarray:
    """ECF at the first ``n_nodes`` nonnegative nodes ``0, dt, 2 dt, ...``."""
    x = _as_samples(samples)
    k = grid.half + 1 if n_nodes is None else int(n_nodes)
    if k <= 0:
        return np.zeros(0, dtype=complex)
    re, im = _backend.ecf_sums_uniform(x, grid.dt, k)
    scale = INV_SQRT_2PI / x.size
    out = (re / x.size) * INV_SQRT_2PI + 1j * (im * scale)
    return out


def ecf_at(samples, t) -> np.ndarray:
    """ECF at arbitrary frequencies."""
    x = _as_samples(samples)
    t = np.ascontiguousarray(np.atleast_1d(np.asarray(t, dtype=float)))
    re, im = _backend.ecf_sums_points(x, t)
    return (re / x.size) * INV_SQRT_2PI + 1j * (im * (INV_SQRT_2PI / x.size))


def ecf(samples, grid: FrequencyGrid) -> EcfEstimate:
    """``(m sqrt(2 pi))^-1 sum_k exp(-i t eps_k)`` at every grid node."""
    x = _as_samples(samples)
    half = ecf_half(x, grid)
    return EcfEstimate(SpectralFunction(grid, grid.mirror(half), hermitian=True), x.size)


def _needed_half_nodes(grid: FrequencyGrid, active_half: np.ndarray) -> int:
    idx = np.flatnonzero(active_half)
    return 0 if idx.size == 0 else int(idx[-1]) + 1


def kde_spectrum(samples, kernel: KernelSpec, h: float, grid: FrequencyGrid,
                 where: Optional[np.ndarray] = None) -> SpectralFunction:
    """Exact transform of the kernel density estimate of the sample.

    ``where`` (optional boolean mask over the grid) restricts evaluation to the
    nodes a caller will actually read; the returned spectrum is zero elsewhere.
    It must be symmetric in t.
    """
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h!r}")
    x = _as_samples(samples)
    pos = grid.positive_nodes
    ft_half = np.asarray(kernel.ft(h * pos), dtype=float)
    active = ft_half != 0
    if where is not None:
        where = np.asarray(where, dtype=bool)
        if where.shape != (grid.n_points,):
            raise ValueError("where mask must match the grid")
        active &= grid.nonnegative(where)
    k = _needed_half_nodes(grid, active)
    half = np.zeros(grid.half + 1, dtype=complex)
    if k:
        half[:k] = SQRT_2PI * ft_half[:k] * ecf_half(x, grid, k)
    half[~active] = 0.0
    return SpectralFunction(grid, grid.mirror(half), hermitian=True)


def bandwidth_rule(n: int, r: float, c: float = 1.0) -> float:
    """``h = c n^(-1/(2r+1))``."""
    if n < 1 or not r > 0 or not c > 0:
        raise ValueError("bandwidth rule needs n >= 1, r > 0, c > 0")
    return c * float(n) ** (-1.0 / (2.0 * r + 1.0))


def keep_mask(phi: SpectralFunction, s: float, alpha: float) -> np.ndarray:
    """Nodes with ``|phi / l_s|^2 >= alpha`` (ties kept)."""
    if not alpha > 0:
        raise ValueError(f"threshold must be positive, got {alpha!r}")
    w2 = SobolevWeight(s).squared(phi.grid.nodes)
    return phi.modulus_sq() / w2 >= alpha


def _check_grid(a: SpectralFunction, b: SpectralFunction):
    if a.grid != b.grid:
        raise GridMismatchError(f"grids differ: {a.grid} vs {b.grid}")


def regularized_target(x_cf: SpectralFunction, eps_cf: SpectralFunction,
                       s: float, alpha: float) -> DeconvEstimate:
    """Noise-free cut-off target: ``F fX`` restricted to the kept nodes."""
    _check_grid(x_cf, eps_cf)
    keep = keep_mask(eps_cf, s, alpha)
    vals = np.where(keep, x_cf.values, 0.0)
    return DeconvEstimate(SpectralFunction(x_cf.grid, vals, x_cf.hermitian and eps_cf.hermitian),
                          s, alpha, keep, "known_eps")


def _cutoff(y: SpectralFunction, phi: SpectralFunction, s: float, alpha: float, provenance: str):
    _check_grid(y, phi)
    keep = keep_mask(phi, s, alpha)
    vals = np.zeros(y.grid.n_points, dtype=complex)
    p = phi.values[keep]
    vals[keep] = y.values[keep] * np.conj(p) / (SQRT_2PI * (p.real ** 2 + p.imag ** 2))
    spec = SpectralFunction(y.grid, vals, y.hermitian and phi.hermitian)
    return DeconvEstimate(spec, s, alpha, keep, provenance)


def deconv_known(y_spectrum: SpectralFunction, eps_cf: SpectralFunction,
                 s: float, alpha: float) -> DeconvEstimate:
    return _cutoff(y_spectrum, eps_cf, s, alpha, "known_eps")


def deconv_unknown(y_spectrum: SpectralFunction, eps_ecf: EcfEstimate,
                   s: float, alpha: float) -> DeconvEstimate:
    return _cutoff(y_spectrum, eps_ecf.spectrum, s, alpha, "estimated_eps")


def derivative_spectrum(est: DeconvEstimate, k: int) -> SpectralFunction:
    """Transform of the k-th derivative: multiply by ``(i t)^k`` (forward kernel exp(-i t x))."""
    if int(k) != k or k < 0:
        raise ValueError("derivative order must be a nonnegative integer")
    if k > est.s:
        raise UnguaranteedDerivativeError(
            f"derivative order {k} exceeds Sobolev index s={est.s}; no risk guarantee")
    if k == 0:
        return est.spectrum
    t = est.spectrum.grid.nodes
    return SpectralFunction(est.spectrum.grid, (1j * t) ** int(k) * est.spectrum.values,
                            est.spectrum.hermitian)
