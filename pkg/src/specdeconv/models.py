"""Catalog of symmetric densities with closed-form characteristic functions.

Each model carries its pdf, its unitary Fourier transform, ``log|Fg|`` in
closed form (so tails far beyond double-precision underflow stay usable),
an exact sampler, and the smoothness candidate used by
:func:`classify_smoothness`.

Models are addressable by string, e.g. ``"sym_chi2:k=2"`` or
``"gaussian:sigma=1.5"``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy import special

from .spectral import (INV_SQRT_2PI, SQRT_2PI, FrequencyGrid, SpectralFunction,
                       default_grid)

LOG_INV_SQRT_2PI = math.log(INV_SQRT_2PI)

# classify_smoothness: smallest admissible empirical d
D_FLOOR = 1e-8
# sobolev_membership: half-widths of the nested probe and the growth allowance
MEMBERSHIP_T = (64.0, 128.0, 256.0)
MEMBERSHIP_DT = 1.0 / 64.0
MEMBERSHIP_GROWTH = 0.01


@dataclass(frozen=True)
class SmoothnessTag:
    kind: str  # "ordinary" | "super" | "unclassified"
    a: Optional[float] = None
    d: Optional[float] = None

    def __str__(self):
        if self.kind == "unclassified":
            return "unclassified"
        return f"{self.kind}(a={self.a:g}, d={self.d:.6g})"


@dataclass(frozen=True, eq=False)
class DensityModel:
    name: str
    params: dict
    pdf: Callable
    cf: Callable
    log_abs_cf: Callable
    sampler: Callable
    # (kind, a) tried by classify_smoothness
    candidate: Optional[tuple] = None
    variance: Optional[float] = None

    @property
    def spec(self) -> str:
        body = ",".join(f"{k}={_fmt(v)}" for k, v in self.params.items())
        return f"{self.name}:{body}"

    def __repr__(self):
        return f"DensityModel({self.spec!r})"

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return np.asarray(self.sampler(rng, int(count)), dtype=float)

    def spectrum(self, grid: FrequencyGrid) -> SpectralFunction:
        return SpectralFunction(grid, self.cf(grid.nodes), hermitian=True)

    @cached_property
    def smoothness(self) -> SmoothnessTag:
        return classify_smoothness(self, default_grid())


def _fmt(v):
    return repr(float(v)) if not float(v).is_integer() else str(int(v))


def _real_cf(fn):
    def cf(t):
        t = np.asarray(t, dtype=float)
        return fn(t).astype(complex)
    return cf


def sym_chi2(k: int) -> DensityModel:
    """Difference of two independent chi-square(k) variables.

    ``Fg(t) = (2 pi)^(-1/2) (1 + 4 t^2)^(-k/2)``.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {k!r}")
    k = int(k)
    nu = 0.5 * (k - 1)
    log_norm = -k * math.log(2.0) - 0.5 * math.log(math.pi) - math.lgamma(0.5 * k)

    def pdf(x):
        x = np.abs(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.exp(log_norm) * x ** nu * special.kv(nu, 0.5 * x)
        at0 = x == 0
        if np.any(at0):
            # |x|^nu K_nu(|x|/2) -> Gamma(nu) 2^(2 nu - 1) for nu > 0
            out = np.where(at0, np.exp(log_norm) * math.gamma(nu) * 2 ** (2 * nu - 1)
                           if nu > 0 else np.inf, out)
        return out

    return DensityModel(
        name="sym_chi2",
        params={"k": k},
        pdf=pdf,
        cf=_real_cf(lambda t: INV_SQRT_2PI * (1.0 + 4.0 * t * t) ** (-0.5 * k)),
        log_abs_cf=lambda t: LOG_INV_SQRT_2PI - 0.5 * k * np.log1p(4.0 * np.asarray(t, float) ** 2),
        sampler=lambda rng, n: rng.chisquare(k, n) - rng.chisquare(k, n),
        candidate=("ordinary", float(k)),
        variance=4.0 * k,
    )


def cauchy(gamma: float) -> DensityModel:
    """Centered Cauchy, ``Fg(t) = (2 pi)^(-1/2) exp(-gamma |t|)``."""
    if not gamma > 0:
        raise ValueError(f"scale must be positive, got {gamma!r}")
    g = float(gamma)
    return DensityModel(
        name="cauchy",
        params={"gamma": g},
        pdf=lambda x: g / (math.pi * (np.asarray(x, float) ** 2 + g * g)),
        cf=_real_cf(lambda t: INV_SQRT_2PI * np.exp(-g * np.abs(t))),
        log_abs_cf=lambda t: LOG_INV_SQRT_2PI - g * np.abs(np.asarray(t, float)),
        sampler=lambda rng, n: g * np.tan(math.pi * (rng.random(n) - 0.5)),
        candidate=("super", 0.5),
    )


def gaussian(sigma: float) -> DensityModel:
    """Centered normal, ``Fg(t) = (2 pi)^(-1/2) exp(-sigma^2 t^2 / 2)``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    s = float(sigma)
    return DensityModel(
        name="gaussian",
        params={"sigma": s},
        pdf=lambda x: INV_SQRT_2PI / s * np.exp(-0.5 * (np.asarray(x, float) / s) ** 2),
        cf=_real_cf(lambda t: INV_SQRT_2PI * np.exp(-0.5 * s * s * t * t)),
        log_abs_cf=lambda t: LOG_INV_SQRT_2PI - 0.5 * s * s * np.asarray(t, float) ** 2,
        sampler=lambda rng, n: s * rng.standard_normal(n),
        candidate=("super", 1.0),
        variance=s * s,
    )


def laplace(b: float) -> DensityModel:
    """Laplace density ``exp(-|x|/b) / (2b)``; ``Fg(t) = (2 pi)^(-1/2) / (1 + b^2 t^2)``."""
    if not b > 0:
        raise ValueError(f"scale must be positive, got {b!r}")
    b = float(b)
    return DensityModel(
        name="laplace",
        params={"b": b},
        pdf=lambda x: np.exp(-np.abs(np.asarray(x, float)) / b) / (2.0 * b),
        cf=_real_cf(lambda t: INV_SQRT_2PI / (1.0 + b * b * t * t)),
        log_abs_cf=lambda t: LOG_INV_SQRT_2PI - np.log1p(b * b * np.asarray(t, float) ** 2),
        sampler=lambda rng, n: b * (rng.standard_exponential(n) - rng.standard_exponential(n)),
        candidate=("ordinary", 2.0),
        variance=2.0 * b * b,
    )


def uniform(half_width: float) -> DensityModel:
    """Uniform on ``[-w, w]``. Its transform has zeros; used only for classification."""
    if not half_width > 0:
        raise ValueError(f"half_width must be positive, got {half_width!r}")
    w = float(half_width)

    def cf(t):
        t = np.asarray(t, dtype=float)
        return (INV_SQRT_2PI * np.sinc(w * t / math.pi)).astype(complex)

    def log_abs_cf(t):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(cf(t).real))

    return DensityModel(
        name="uniform",
        params={"half_width": w},
        pdf=lambda x: np.where(np.abs(np.asarray(x, float)) <= w, 0.5 / w, 0.0),
        cf=cf,
        log_abs_cf=log_abs_cf,
        sampler=lambda rng, n: rng.uniform(-w, w, n),
        candidate=("ordinary", 1.0),
        variance=w * w / 3.0,
    )


CATALOG = {
    "sym_chi2": (sym_chi2, {"k": int}),
    "cauchy": (cauchy, {"gamma": float}),
    "gaussian": (gaussian, {"sigma": float}),
    "laplace": (laplace, {"b": float}),
    "uniform": (uniform, {"half_width": float}),
}

_SPEC_RE = re.compile(r"^\s*([a-z_0-9]+)\s*:\s*(.*?)\s*$")
_REAL_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def parse_model(spec: str) -> DensityModel:
    """Build a model from ``name:key=value,...``."""
    m = _SPEC_RE.match(spec or "")
    if not m:
        raise ValueError(f"malformed model spec {spec!r}; expected name:key=value,...")
    name, body = m.groups()
    if name not in CATALOG:
        raise ValueError(f"unknown model {name!r}; known: {', '.join(sorted(CATALOG))}")
    factory, types = CATALOG[name]
    kwargs = {}
    for item in filter(None, (p.strip() for p in body.split(","))):
        if "=" not in item:
            raise ValueError(f"malformed parameter {item!r} in {spec!r}")
        key, val = (s.strip() for s in item.split("=", 1))
        if key not in types:
            raise ValueError(f"unknown parameter {key!r} for {name}")
        if key in kwargs:
            raise ValueError(f"duplicate parameter {key!r} in {spec!r}")
        if not _REAL_RE.match(val):
            raise ValueError(f"parameter {key}={val!r} is not a decimal real")
        num = float(val)
        if types[key] is int:
            if not num.is_integer():
                raise ValueError(f"parameter {key} must be an integer, got {val!r}")
            num = int(num)
        kwargs[key] = num
    missing = set(types) - set(kwargs)
    if missing:
        raise ValueError(f"missing parameter(s) {sorted(missing)} for {name}")
    return factory(**kwargs)


@dataclass(frozen=True, eq=False)
class ConvolutionPair:
    """Signal model, error model and the transform of ``Y = X + eps``."""

    x_model: DensityModel
    eps_model: DensityModel
    y_cf: Callable = field(repr=False)

    def y_spectrum(self, grid: FrequencyGrid) -> SpectralFunction:
        return SpectralFunction(grid, self.y_cf(grid.nodes), hermitian=True)

    def sample_y(self, rng: np.random.Generator, count: int) -> np.ndarray:
        x = self.x_model.sample(rng, count)
        return x + self.eps_model.sample(rng, count)

    def log_abs_y_cf(self, t):
        return math.log(SQRT_2PI) + self.x_model.log_abs_cf(t) + self.eps_model.log_abs_cf(t)


def convolve(x: DensityModel, eps: DensityModel) -> ConvolutionPair:
    def y_cf(t):
        return SQRT_2PI * x.cf(t) * eps.cf(t)
    return ConvolutionPair(x, eps, y_cf)


def _has_zero_crossing(model: DensityModel, grid: FrequencyGrid) -> bool:
    v = model.cf(grid.nodes)
    if np.max(np.abs(v.imag)) == 0:
        sgn = np.sign(v.real)
        return bool(np.any(sgn[1:] * sgn[:-1] < 0))
    return False


def classify_smoothness(model: DensityModel, grid: Optional[FrequencyGrid] = None) -> SmoothnessTag:
    """Empirical smoothness constant for the model's candidate degree ``a``.

    ordinary:  d <= (1+t^2)^a |Fg|^2 <= 1/d
    super:     d <= (1+t^2)^a / |log |Fg|^2| <= 1/d

    ``d`` is the tightest value over the grid nodes. A sign change of a real
    transform between nodes is a zero, which forces ``d = 0``.
    """
    grid = grid or default_grid()
    if model.candidate is None or _has_zero_crossing(model, grid):
        return SmoothnessTag("unclassified")
    kind, a = model.candidate
    t = grid.nodes
    log_w = a * np.log1p(t * t)
    log_mod_sq = 2.0 * model.log_abs_cf(t)
    if kind == "ordinary":
        if not a > 0.5:
            return SmoothnessTag("unclassified")
        log_g = log_w + log_mod_sq
    elif kind == "super":
        if not a > 0:
            return SmoothnessTag("unclassified")
        with np.errstate(divide="ignore"):
            log_g = log_w - np.log(np.abs(log_mod_sq))
    else:
        raise ValueError(f"unknown smoothness kind {kind!r}")
    if not np.all(np.isfinite(log_g)):
        return SmoothnessTag("unclassified")
    d = float(min(np.exp(np.min(log_g)), np.exp(-np.max(log_g))))
    if d < D_FLOOR:
        return SmoothnessTag("unclassified")
    return SmoothnessTag(kind, a, d)


@dataclass(frozen=True)
class Membership:
    finite: bool
    value: Optional[float]
    partials: tuple

    def __str__(self):
        return f"finite({self.value:.6g})" if self.finite else "divergent"


def _trapezoid_log(log_f: np.ndarray, dt: float) -> float:
    f = np.exp(log_f)
    return float(dt * (np.sum(f) - 0.5 * (f[0] + f[-1])))


def nested_integral(log_integrand: Callable, t_values=MEMBERSHIP_T, dt=MEMBERSHIP_DT):
    """Partial integrals of ``exp(log_integrand(t))`` over ``[-T, T]`` for nested T."""
    out = []
    for T in t_values:
        k = int(round(T / dt))
        t = np.arange(-k, k + 1) * dt
        with np.errstate(over="ignore", invalid="ignore"):
            out.append(_trapezoid_log(log_integrand(t), dt))
    return tuple(out)


def growth_verdict(partials) -> bool:
    """True when the last doubling of T grew the partial integral by at most 1%."""
    last, prev = partials[-1], partials[-2]
    if not (math.isfinite(last) and math.isfinite(prev)):
        return False
    if prev == 0.0:
        return last == 0.0
    return (last - prev) <= MEMBERSHIP_GROWTH * prev


def sobolev_membership(model: DensityModel, p: float) -> Membership:
    """Whether ``integral (1+t^2)^p |Fg|^2 dt`` is finite, by nested quadrature."""
    if not p >= 0:
        raise ValueError("p must be nonnegative")
    partials = nested_integral(lambda t: p * np.log1p(t * t) + 2.0 * model.log_abs_cf(t))
    if growth_verdict(partials):
        return Membership(True, partials[-1], partials)
    return Membership(False, None, partials)
