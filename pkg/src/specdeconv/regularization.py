"""Source conditions, index functions, threshold rules and bias audits.

An index function ``kappa: (0, 1] -> R+`` is continuous, strictly increasing
and vanishes at 0+.  ``Phi`` is its inverse and ``omega`` is defined through
``omega^-1(t) = t * Phi(t)``; ``omega(MISE_Y)`` is the risk rate under the
general source condition.

The bias audits evaluate the truncated tail

    lhs(alpha) = || w Ff_X 1{ |phi / w|^2 < alpha } ||^2

by trapezoid quadrature on a frequency grid and compare it with the
source-condition bound.  Only the polynomial bound is free of unknown
constants; for the other kinds the audits return ratios whose boundedness is
what can be checked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, NumericalError
from .estimators import ecf_half
from .models import DensityModel, growth_verdict, nested_integral
from .rng import ROLE_AUDIT, stream
from .spectral import FrequencyGrid, SpectralFunction, default_grid

PROBE = np.logspace(-12, 0, 61)
OMEGA_LOWER = 1e-15
BISECT_MAX_ITER = 200


# --------------------------------------------------------------------------
# index functions

@dataclass(frozen=True, eq=False)
class IndexFunction:
    kind: str  # polynomial | logarithmic | sqrt_log_exp | custom
    beta: Optional[float] = None
    table: Optional[tuple] = None  # (u, kappa(u)) for custom, increasing in u

    def __post_init__(self):
        if self.kind in ("polynomial", "logarithmic", "sqrt_log_exp"):
            if self.beta is None or not self.beta > 0:
                raise ValueError(f"{self.kind} index function needs beta > 0")
        elif self.kind == "custom":
            u, k = (np.asarray(a, dtype=float) for a in self.table)
            if u.ndim != 1 or u.shape != k.shape or u.size < 2:
                raise ValueError("custom table needs two equal-length 1-d sequences")
            if not (np.all(np.diff(u) > 0) and np.all(np.diff(k) > 0)):
                raise ValueError("custom table must be strictly increasing in both columns")
            if u[0] != 0 or k[0] != 0 or u[-1] != 1 or not np.all(k[1:] > 0):
                raise ValueError("custom table must run from (0, 0) to u = 1 with positive values")
            object.__setattr__(self, "table", (u, k))
        else:
            raise ValueError(f"unknown index function kind {self.kind!r}")

    @property
    def c(self) -> Optional[float]:
        if self.kind == "logarithmic":
            return math.exp(-1.0 - self.beta)
        if self.kind == "sqrt_log_exp":
            return math.exp(-max(self.beta ** 2, 2.0))
        return None

    def __str__(self):
        if self.kind == "custom":
            return f"custom({len(self.table[0])} points)"
        return f"{self.kind}(beta={self.beta:g})"

    # evaluation ----------------------------------------------------------

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "polynomial":
            return u ** self.beta
        if self.kind == "logarithmic":
            return np.abs(np.log(self.c * u)) ** (-self.beta)
        if self.kind == "sqrt_log_exp":
            return np.exp(-self.beta * np.sqrt(np.abs(np.log(self.c * u))))
        return np.interp(u, *self.table)

    def log_from_log(self, log_u):
        """``log kappa(u)`` given ``log u``; stays finite far below underflow."""
        log_u = np.asarray(log_u, dtype=float)
        if self.kind == "polynomial":
            return self.beta * log_u
        if self.kind == "logarithmic":
            return -self.beta * np.log(-(math.log(self.c) + log_u))
        if self.kind == "sqrt_log_exp":
            return -self.beta * np.sqrt(-(math.log(self.c) + log_u))
        with np.errstate(divide="ignore"):
            return np.log(np.interp(np.exp(log_u), *self.table))

    @property
    def upper(self) -> float:
        """``kappa(1)``, the top of the range."""
        return float(self(1.0))

    def inverse(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "polynomial":
            return s ** (1.0 / self.beta)
        if self.kind == "logarithmic":
            return np.exp(-s ** (-1.0 / self.beta)) / self.c
        if self.kind == "sqrt_log_exp":
            return np.exp(-(np.log(s) / self.beta) ** 2) / self.c
        u, k = self.table
        return np.interp(s, k, u)

    def log_inverse(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "polynomial":
            return np.log(s) / self.beta
        if self.kind == "logarithmic":
            return -s ** (-1.0 / self.beta) - math.log(self.c)
        if self.kind == "sqrt_log_exp":
            return -(np.log(s) / self.beta) ** 2 - math.log(self.c)
        with np.errstate(divide="ignore"):
            return np.log(self.inverse(s))

    # shape checks --------------------------------------------------------

    def is_increasing(self) -> bool:
        v = self(PROBE)
        return bool(np.all(np.diff(v) > 0) and np.all(v > 0))

    @property
    def concave(self) -> bool:
        if self.kind == "polynomial":
            return self.beta <= 1.0
        if self.kind in ("logarithmic", "sqrt_log_exp"):
            return True
        return midpoint_concave(self)


def midpoint_concave(kappa: IndexFunction, probe=PROBE, rtol=1e-12) -> bool:
    """``kappa((u+v)/2) >= (kappa(u)+kappa(v))/2`` for all probe pairs."""
    u, v = np.meshgrid(probe, probe)
    lhs = kappa(0.5 * (u + v))
    rhs = 0.5 * (kappa(u) + kappa(v))
    return bool(np.all(lhs >= rhs * (1.0 - rtol)))


def polynomial(beta: float) -> IndexFunction:
    return IndexFunction("polynomial", float(beta))


def logarithmic(beta: float) -> IndexFunction:
    return IndexFunction("logarithmic", float(beta))


def sqrt_log_exp(beta: float) -> IndexFunction:
    return IndexFunction("sqrt_log_exp", float(beta))


def custom(u: Sequence[float], values: Sequence[float]) -> IndexFunction:
    return IndexFunction("custom", table=(u, values))


def index_eval(kappa: IndexFunction, t: float) -> float:
    if not 0 < t <= 1:
        raise ValueError(f"index functions are defined on (0, 1], got {t!r}")
    return float(kappa(t))


def index_inverse(kappa: IndexFunction, s: float) -> float:
    if not 0 < s <= kappa.upper * (1 + 1e-15):
        raise ValueError(f"{s!r} is outside the range (0, {kappa.upper!r}] of {kappa}")
    return float(min(kappa.inverse(s), 1.0))


def _omega_sqrt_log_exp(kappa: IndexFunction, delta: float) -> float:
    # omega^-1(t) = c' exp(-h(-log t)),  h(u) = (u/beta + beta/2)^2,
    # c' = exp(beta^2/4 + (beta^2 v 2));  h^-1(y) = beta sqrt(y) - beta^2/2.
    b = kappa.beta
    log_cp = b * b / 4.0 + max(b * b, 2.0)
    y = log_cp - math.log(delta)
    if y < b * b / 4.0:
        raise NumericalError(f"delta={delta!r} outside the closed-form branch")
    return math.exp(-(b * math.sqrt(y) - 0.5 * b * b))


def omega_eval(kappa: IndexFunction, delta: float, fast: bool = True) -> float:
    """Solve ``omega * Phi(omega) = delta`` for omega in ``(0, kappa(1)]``."""
    top = kappa.upper
    # omega^-1(kappa(1)) = kappa(1) * 1
    if not 0 < delta <= top:
        raise ValueError(f"delta={delta!r} outside the reachable range (0, {top!r}]")
    if kappa.kind == "polynomial":
        return delta ** (kappa.beta / (kappa.beta + 1.0))
    if fast and kappa.kind == "sqrt_log_exp":
        return _omega_sqrt_log_exp(kappa, delta)

    target = math.log(delta)

    def g(log_t):
        return log_t + float(kappa.log_inverse(math.exp(log_t))) - target

    lo, hi = math.log(OMEGA_LOWER), math.log(top)
    if g(lo) > 0:
        raise NumericalError(f"cannot bracket omega({delta!r}) above {OMEGA_LOWER:g}")
    if g(hi) < 0:
        raise NumericalError(f"cannot bracket omega({delta!r}) below {top!r}")
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    cands = [math.exp(lo), math.exp(hi)]
    return min(cands, key=lambda w: abs(w * float(kappa.inverse(w)) - delta))


# --------------------------------------------------------------------------
# source conditions

@dataclass(frozen=True, eq=False)
class SourceCondition:
    kind: str  # poly | log | general
    beta: Optional[float] = None
    kappa: Optional[IndexFunction] = None

    def __str__(self):
        return f"general({self.kappa})" if self.kind == "general" else f"{self.kind}(beta={self.beta:g})"

    def log_g(self, log_u):
        """Log of the source weight at ``u = |phi/l_s|^2``, given ``log u``."""
        if self.kind == "poly":
            return -self.beta * log_u
        if self.kind == "log":
            with np.errstate(divide="ignore"):
                return self.beta * np.log(np.abs(log_u))
        return -self.kappa.log_from_log(log_u)

    def rate(self, alpha: float) -> float:
        """Constant-free rate factor of the deterministic bias bound."""
        if self.kind == "poly":
            return alpha ** self.beta
        if self.kind == "log":
            return (-math.log(alpha)) ** (-self.beta)
        return float(self.kappa(alpha))


def poly(beta: float) -> SourceCondition:
    if not beta > 0:
        raise ValueError("beta must be positive")
    return SourceCondition("poly", float(beta))


def log_source(beta: float) -> SourceCondition:
    if not beta > 0:
        raise ValueError("beta must be positive")
    return SourceCondition("log", float(beta))


def general(kappa: IndexFunction) -> SourceCondition:
    return SourceCondition("general", kappa=kappa)


@dataclass(frozen=True)
class SourceReport:
    kind: str
    s: float
    parameter: str
    rho_sq: Optional[float]
    divergent: bool
    partials: tuple = ()
    provenance: str = ""


SpecLike = Union[DensityModel, SpectralFunction]


def _log_mod(obj: SpecLike, t) -> np.ndarray:
    if isinstance(obj, DensityModel):
        return np.asarray(obj.log_abs_cf(t), dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(obj.values))


def _log_terms(x: SpecLike, eps: SpecLike, s: float, t: np.ndarray):
    """``log(l_s^2 |Ff_X|^2)`` and ``log u`` with ``u = |phi / l_s|^2``."""
    log_w2 = s * np.log1p(t * t)
    log_x2 = log_w2 + 2.0 * _log_mod(x, t)
    log_u = 2.0 * _log_mod(eps, t) - log_w2
    return log_x2, log_u


def _source_log_integrand(x, eps, s, cond, t):
    log_x2, log_u = _log_terms(x, eps, s, t)
    with np.errstate(invalid="ignore"):
        out = log_x2 + cond.log_g(log_u)
    # |Ff_X| = 0 contributes nothing whatever the weight does
    return np.where(np.isneginf(log_x2), -np.inf, out)


def rho_compute(x: SpecLike, eps: SpecLike, s: float, cond: SourceCondition) -> SourceReport:
    """``rho^2 = integral l_s^2 |Ff_X|^2 g(|phi/l_s|^2) dt``.

    Closed-form models get the nested-T divergence probe; spectral functions
    are integrated on their own grid and flagged divergent only if the
    integrand is not finite.
    """
    param = str(cond)
    if isinstance(x, DensityModel) and isinstance(eps, DensityModel):
        partials = nested_integral(lambda t: _source_log_integrand(x, eps, s, cond, t))
        if growth_verdict(partials):
            return SourceReport(cond.kind, s, param, partials[-1], False, partials, "nested T=64,128,256")
        return SourceReport(cond.kind, s, param, None, True, partials, "nested T=64,128,256")
    grid = x.grid if isinstance(x, SpectralFunction) else eps.grid
    t = grid.nodes
    li = _source_log_integrand(x, eps, s, cond, t)
    with np.errstate(over="ignore"):
        val = float(np.sum(grid.weights * np.exp(li)))
    prov = f"grid T={grid.t_max:g} N={grid.n_points}"
    if not math.isfinite(val):
        return SourceReport(cond.kind, s, param, None, True, (val,), prov)
    return SourceReport(cond.kind, s, param, val, False, (val,), prov)


# --------------------------------------------------------------------------
# threshold rules

@dataclass(frozen=True)
class ThresholdRule:
    rule_id: str
    c: float = 1.0

    def __post_init__(self):
        if self.rule_id not in RULES:
            raise ConfigError(f"unknown threshold rule {self.rule_id!r}; known: {', '.join(RULES)}")
        if not self.c > 0:
            raise ConfigError("threshold constant c must be positive")

    @property
    def inputs(self) -> tuple:
        return RULES[self.rule_id][0]

    @property
    def needs_delta(self) -> bool:
        return "delta" in self.inputs

    @property
    def estimated_eps(self) -> bool:
        return "m" in self.inputs


def _omega_ratio(delta, kappa, c=1.0):
    # delta / omega(c delta) -> 0 as delta -> 0
    if delta == 0:
        return 0.0
    return delta / omega_eval(kappa, c * delta)


RULES = {
    # known error density, rate driven by the MISE_Y proxy delta
    "poly-source": (("delta", "beta"), lambda c, d: c * d["delta"] ** (1.0 / (d["beta"] + 1.0))),
    "log-source": (("delta",), lambda c, d: c * d["delta"] ** 0.5),
    "general-source": (("delta", "kappa"),
                       lambda c, d: c * _omega_ratio(d["delta"], d["kappa"], c)),
    # known error density, explicit sample-size schedules
    "ordinary-smooth": (("n", "a", "s", "p"),
                        lambda c, d: c * d["n"] ** (-2.0 * (d["a"] + d["s"]) / (2.0 * (d["p"] + d["a"]) + 1.0))),
    "supersmooth": (("n", "r"), lambda c, d: c * d["n"] ** (-d["r"] / (2.0 * d["r"] + 1.0))),
    # estimated error density
    "poly-source-est": (("delta", "beta", "m"),
                        lambda c, d: c * (d["delta"] ** (1.0 / (d["beta"] + 1.0)) + 1.0 / d["m"])),
    "log-source-est": (("delta", "m"), lambda c, d: c * (d["delta"] ** 0.5 + d["m"] ** -0.5)),
    "general-source-est": (("delta", "kappa", "m"),
                           lambda c, d: c * (_omega_ratio(d["delta"], d["kappa"]) + 1.0 / d["m"])),
    "ordinary-smooth-est": (("n", "a", "s", "p", "m"),
                            lambda c, d: c * (d["n"] ** (-2.0 * (d["s"] + d["a"]) / (2.0 * (d["p"] + d["a"]) + 1.0))
                                              + 1.0 / d["m"])),
    "supersmooth-est": (("n", "r", "m"),
                        lambda c, d: c * (d["n"] ** (-d["r"] / (2.0 * d["r"] + 1.0)) + d["m"] ** -0.5)),
}


def threshold(rule: ThresholdRule, **inputs) -> float:
    """Evaluate a threshold rule; every input it names must be supplied."""
    needed, fn = RULES[rule.rule_id]
    missing = [k for k in needed if inputs.get(k) is None]
    if missing:
        raise ConfigError(f"rule {rule.rule_id!r} is missing input(s): {', '.join(missing)}")
    if "delta" in needed and not inputs["delta"] >= 0:
        raise ConfigError("delta must be nonnegative")
    if "kappa" in needed and not inputs["kappa"].concave:
        raise ConfigError(f"rule {rule.rule_id!r} needs a concave index function, got {inputs['kappa']}")
    alpha = float(fn(rule.c, {k: inputs[k] for k in needed}))
    if not alpha > 0 or not math.isfinite(alpha):
        raise NumericalError(f"rule {rule.rule_id!r} produced alpha={alpha!r}")
    return alpha


# --------------------------------------------------------------------------
# bias audits

@dataclass(frozen=True)
class BiasAudit:
    alpha: float
    lhs: float
    rho_sq: float
    rhs: Optional[float]   # only for the constant-free polynomial bound
    ratio: float           # lhs / (rate(alpha) * rho^2)
    holds: Optional[bool]


def _audit_arrays(x, eps, s, cond, grid):
    t = grid.nodes
    log_x2, log_u = _log_terms(x, eps, s, t)
    with np.errstate(under="ignore"):
        x2 = np.exp(log_x2)
        rho_terms = np.exp(_source_log_integrand(x, eps, s, cond, t))
    rho_sq = float(np.sum(grid.weights * rho_terms))
    return t, x2, log_u, rho_sq


def bias_bound_audit(x: SpecLike, eps: SpecLike, s: float, alpha: float,
                     cond: SourceCondition, grid: Optional[FrequencyGrid] = None) -> BiasAudit:
    """Deterministic truncation bias against its source-condition bound."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if isinstance(x, DensityModel) and isinstance(eps, DensityModel):
        rep = rho_compute(x, eps, s, cond)
        if rep.divergent:
            raise NumericalError(f"rho diverges for {cond}; the bound is void")
        grid = grid or default_grid()
    else:
        grid = x.grid if isinstance(x, SpectralFunction) else eps.grid
    _, x2, log_u, rho_sq = _audit_arrays(x, eps, s, cond, grid)
    if not math.isfinite(rho_sq):
        raise NumericalError(f"rho diverges for {cond} on this grid")
    cut = log_u < math.log(alpha)
    lhs = float(np.sum(grid.weights[cut] * x2[cut]))
    rate = cond.rate(alpha)
    ratio = lhs / (rate * rho_sq) if rho_sq > 0 else 0.0
    if cond.kind == "poly":
        rhs = rate * rho_sq
        return BiasAudit(alpha, lhs, rho_sq, rhs, ratio, lhs <= rhs)
    return BiasAudit(alpha, lhs, rho_sq, None, ratio, None)


@dataclass(frozen=True)
class StochasticAudit:
    alpha: float
    m: int
    lhs_mc: float
    lhs_se: float
    rate_rhs: float   # rate factor times rho^2, without the unknown constant
    ratio: float
    replicates: int


def stochastic_rate(cond: SourceCondition, alpha: float, m: int) -> float:
    if cond.kind == "poly":
        return alpha ** cond.beta + float(m) ** (-cond.beta)
    if cond.kind == "log":
        return abs(math.log(alpha + 1.0 / m)) ** (-cond.beta)
    return float(cond.kappa(min(alpha + 1.0 / m, 1.0)))


def stochastic_bias_audit(x: DensityModel, eps: DensityModel, s: float, alpha: float,
                          cond: SourceCondition, m: int, replicates: int, seed: int = 0,
                          grid: Optional[FrequencyGrid] = None) -> StochasticAudit:
    """Monte Carlo truncation bias when the cut-off uses the ECF of m error draws."""
    if replicates < 2:
        raise ValueError("need at least two replicates")
    grid = grid or default_grid()
    rep = rho_compute(x, eps, s, cond)
    if rep.divergent:
        raise NumericalError(f"rho diverges for {cond}; the bound is void")
    t_half = grid.positive_nodes
    w_half = grid.nonnegative(grid.weights).copy()
    w_half[1:] *= 2.0  # fold the symmetric half
    log_w2 = s * np.log1p(t_half * t_half)
    with np.errstate(under="ignore"):
        x2 = np.exp(log_w2 + 2.0 * x.log_abs_cf(t_half))
    _, _, _, rho_sq = _audit_arrays(x, eps, s, cond, grid)
    vals = np.empty(replicates)
    for r in range(replicates):
        sample = eps.sample(stream(seed, ROLE_AUDIT, int(m), r), m)
        e = ecf_half(sample, grid)
        u = (e.real ** 2 + e.imag ** 2) / np.exp(log_w2)
        vals[r] = float(np.sum(w_half[u < alpha] * x2[u < alpha]))
    rate = stochastic_rate(cond, alpha, m) * rho_sq
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(replicates))
    return StochasticAudit(alpha, int(m), mean, se, rate, mean / rate, replicates)
