"""Monte Carlo risk estimation, rate fits, moment audits and diagnostics.

All risks are Fourier-domain quantities (Plancherel), so no inverse
transform enters any reported number.  Replicates are keyed by
``(seed, role, cell, replicate)`` counter-based streams and reduced in
replicate order, which makes every report independent of the worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigError
from .estimators import (bandwidth_rule, deconv_known, deconv_unknown, ecf, ecf_at,
                         get_kernel, kde_spectrum, keep_mask)
from .models import ConvolutionPair, DensityModel, convolve, parse_model
from .regularization import (IndexFunction, RULES, ThresholdRule, poly, rho_compute,
                             threshold)
from .rng import ROLE_EPS, ROLE_PILOT, ROLE_Y, stream
from .spectral import (INV_SQRT_2PI, FrequencyGrid, SobolevWeight, SpectralFunction,
                       make_grid, tail_check, weighted_l2_norm_sq)

TAIL_TOL = 1e-6
FRONTIER_INFLATION = 0.10


@dataclass(frozen=True)
class ExperimentConfig:
    x: str
    eps: str
    kernel: str = "sinc"
    kernel_order: float = 2.0
    bandwidth_c: float = 1.0
    s: float = 0.0
    rule: str = "ordinary-smooth"
    c: float = 1.0
    beta: Optional[float] = None
    p: Optional[float] = None
    a: Optional[float] = None
    kappa: Optional[IndexFunction] = None
    n_schedule: tuple = (256, 512, 1024, 2048)
    m_schedule: Optional[tuple] = None   # None: error density known
    replicates: int = 200
    seed: int = 0
    t_max: float = 64.0
    n_points: int = 8193
    delta_mode: str = "mc"               # mc | theory
    pilot_replicates: int = 100
    oracle_y: bool = False
    fit_model: str = "power"             # power | log_power
    fit_axis: str = "n"                  # n | m

    def __post_init__(self):
        for name in ("n_schedule", "m_schedule"):
            sched = getattr(self, name)
            if sched is None:
                continue
            sched = tuple(int(v) for v in sched)
            object.__setattr__(self, name, sched)
            if not sched:
                raise ConfigError(f"{name} must be nonempty")
            if any(b <= a for a, b in zip(sched, sched[1:])):
                raise ConfigError(f"{name} must be strictly increasing")
            if sched[0] < 1:
                raise ConfigError(f"{name} entries must be positive")
        if self.replicates < 2:
            raise ConfigError("replicates must be at least 2")
        if self.delta_mode not in ("mc", "theory"):
            raise ConfigError(f"delta_mode must be 'mc' or 'theory', got {self.delta_mode!r}")
        if self.fit_model not in ("power", "log_power"):
            raise ConfigError(f"fit_model must be 'power' or 'log_power', got {self.fit_model!r}")
        if self.fit_axis not in ("n", "m"):
            raise ConfigError(f"fit_axis must be 'n' or 'm', got {self.fit_axis!r}")
        rule = ThresholdRule(self.rule, self.c)
        if rule.estimated_eps and self.m_schedule is None:
            raise ConfigError(f"rule {self.rule!r} needs an m_schedule")
        if self.fit_axis == "m" and self.m_schedule is None:
            raise ConfigError("fit_axis = m needs an m_schedule")
        try:
            get_kernel(self.kernel)
            parse_model(self.x)
            parse_model(self.eps)
            make_grid(self.t_max, self.n_points)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @cached_property
    def pair(self) -> ConvolutionPair:
        return convolve(parse_model(self.x), parse_model(self.eps))

    @cached_property
    def grid(self) -> FrequencyGrid:
        return make_grid(self.t_max, self.n_points)

    @property
    def threshold_rule(self) -> ThresholdRule:
        return ThresholdRule(self.rule, self.c)

    def known_rule(self) -> ThresholdRule:
        """Known-error counterpart of the configured rule."""
        rid = self.rule[:-4] if self.rule.endswith("-est") else self.rule
        return ThresholdRule(rid, self.c)


@dataclass(frozen=True)
class RiskCell:
    n: int
    m: Optional[int]        # None: known error density
    mean: float
    se: float
    replicates: int
    alpha: float
    delta: float
    mask_size: float        # mean number of kept nodes

    @property
    def m_label(self) -> str:
        return "known" if self.m is None else str(self.m)


@dataclass
class RiskReport:
    cells: list
    meta: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([getattr(c, name) for c in self.cells], dtype=float)


@dataclass(frozen=True)
class RateFit:
    model: str
    exponent: float
    se: float
    r2: float
    points: int
    intercept: float


# --------------------------------------------------------------------------
# helpers

def _map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _summary(vals: np.ndarray):
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(vals.size))


class _Context:
    """Per-config deterministic quantities shared by every replicate."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.grid = cfg.grid
        self.pair = cfg.pair
        self.kernel = get_kernel(cfg.kernel)
        self.x_spec = cfg.pair.x_model.spectrum(self.grid)
        self.eps_spec = cfg.pair.eps_model.spectrum(self.grid)
        self.y_spec = cfg.pair.y_spectrum(self.grid)
        self.weight = SobolevWeight(cfg.s)

    def bandwidth(self, n: int) -> float:
        return bandwidth_rule(n, self.cfg.kernel_order, self.cfg.bandwidth_c)


def _delta(ctx: _Context, n: int, threads: int) -> float:
    cfg = ctx.cfg
    if cfg.oracle_y:
        return 0.0
    if cfg.delta_mode == "theory":
        r = cfg.kernel_order
        return float(n) ** (-2.0 * r / (2.0 * r + 1.0))
    vals = _map(lambda rep: _mise_y_replicate(ctx, n, rep, ROLE_PILOT), range(cfg.pilot_replicates), threads)
    return float(np.mean(vals))


def _alpha(ctx: _Context, rule: ThresholdRule, n: int, m: Optional[int], delta: float) -> float:
    cfg = ctx.cfg
    inputs = dict(delta=delta, beta=cfg.beta, p=cfg.p, a=cfg.a, s=cfg.s, r=cfg.kernel_order,
                  kappa=cfg.kappa, n=n, m=m)
    return threshold(rule, **inputs)


def _mise_y_replicate(ctx: _Context, n: int, rep: int, role: int = ROLE_Y) -> float:
    y = ctx.pair.sample_y(stream(ctx.cfg.seed, role, n, rep), n)
    fy = kde_spectrum(y, ctx.kernel, ctx.bandwidth(n), ctx.grid)
    return weighted_l2_norm_sq(fy - ctx.y_spec, 0.0)


def _hs_replicate(ctx: _Context, n: int, m: Optional[int], alpha: float, rep: int):
    cfg = ctx.cfg
    if m is None:
        phi = ctx.eps_spec
    else:
        eps = ctx.pair.eps_model.sample(stream(cfg.seed, ROLE_EPS, n, m, rep), m)
        phi = ecf(eps, ctx.grid).spectrum
    mask = keep_mask(phi, cfg.s, alpha)
    if cfg.oracle_y:
        y_spec = ctx.y_spec
    else:
        y = ctx.pair.sample_y(stream(cfg.seed, ROLE_Y, n, rep), n)
        y_spec = kde_spectrum(y, ctx.kernel, ctx.bandwidth(n), ctx.grid, where=mask)
    if m is None:
        est = deconv_known(y_spec, phi, cfg.s, alpha)
    else:
        est = deconv_unknown(y_spec, _Ecf(phi, m), cfg.s, alpha)
    risk = weighted_l2_norm_sq(est.spectrum - ctx.x_spec, ctx.weight)
    return risk, int(np.count_nonzero(est.keep_mask))


@dataclass(frozen=True)
class _Ecf:
    spectrum: SpectralFunction
    m: int


# --------------------------------------------------------------------------
# public operations

def mise_y(cfg: ExperimentConfig, n: int, threads: int = 1, _ctx=None) -> RiskCell:
    """Monte Carlo MISE of the kernel estimate of f_Y (Fourier domain)."""
    ctx = _ctx or _Context(cfg)
    if cfg.oracle_y:
        return RiskCell(n, None, 0.0, 0.0, cfg.replicates, math.nan, 0.0, math.nan)
    vals = np.array(_map(lambda rep: _mise_y_replicate(ctx, n, rep), range(cfg.replicates), threads))
    mean, se = _summary(vals)
    return RiskCell(n, None, mean, se, cfg.replicates, math.nan, math.nan, math.nan)


def hs_risk(cfg: ExperimentConfig, n: int, m: Optional[int] = None, threads: int = 1,
            rule: Optional[ThresholdRule] = None, _ctx=None, _delta_cache=None) -> RiskCell:
    """Monte Carlo H_s-risk of the cut-off estimate at sample sizes (n, m).

    ``m=None`` uses the true error transform; otherwise the ECF of ``m``
    fresh error draws per replicate.
    """
    ctx = _ctx or _Context(cfg)
    rule = rule or (cfg.threshold_rule if m is not None else cfg.known_rule())
    if rule.estimated_eps and m is None:
        raise ConfigError(f"rule {rule.rule_id!r} needs an error sample size m")
    if rule.needs_delta:
        if _delta_cache is not None and n in _delta_cache:
            delta = _delta_cache[n]
        else:
            delta = _delta(ctx, n, threads)
            if _delta_cache is not None:
                _delta_cache[n] = delta
    else:
        delta = math.nan
    alpha = _alpha(ctx, rule, n, m, delta)
    out = _map(lambda rep: _hs_replicate(ctx, n, m, alpha, rep), range(cfg.replicates), threads)
    vals = np.array([o[0] for o in out])
    sizes = np.array([o[1] for o in out], dtype=float)
    mean, se = _summary(vals)
    return RiskCell(n, m, mean, se, cfg.replicates, alpha, delta, float(np.mean(sizes)))


def diagnostics(cfg: ExperimentConfig) -> dict:
    """Grid adequacy and source-condition flags attached to every report."""
    x_spec = cfg.pair.x_model.spectrum(cfg.grid)
    ok, frac = tail_check(x_spec, cfg.s, TAIL_TOL)
    out = {"tail_ok": ok, "tail_fraction": frac}
    if cfg.beta is not None:
        rep = rho_compute(cfg.pair.x_model, cfg.pair.eps_model, cfg.s, poly(cfg.beta))
        out["rho_sq"] = rep.rho_sq
        out["rho_divergent"] = rep.divergent
    return out


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> RiskReport:
    """Every (n, m) cell of the configured schedules."""
    ctx = _Context(cfg)
    cache: dict = {}
    cells = []
    ms = cfg.m_schedule if cfg.threshold_rule.estimated_eps else None
    for n in cfg.n_schedule:
        if ms is None:
            cells.append(hs_risk(cfg, n, None, threads, _ctx=ctx, _delta_cache=cache))
        else:
            for m in ms:
                cells.append(hs_risk(cfg, n, m, threads, _ctx=ctx, _delta_cache=cache))
    return RiskReport(cells, diagnostics(cfg))


FIT_MODELS = ("power(n)", "log_power(n)", "power(m)", "log_power(m)")


def rate_fit(report, model: str = "power(n)") -> RateFit:
    """Least-squares slope of log risk against log n (power) or log log n (log_power).

    ``report`` is a RiskReport or a sequence of ``(size, risk)`` pairs.
    """
    if model not in FIT_MODELS:
        raise ValueError(f"unknown fit model {model!r}; known: {', '.join(FIT_MODELS)}")
    if isinstance(report, RiskReport):
        axis = model[-2]
        sizes = report.column(axis)
        risks = report.column("mean")
    else:
        pts = np.asarray(report, dtype=float)
        sizes, risks = pts[:, 0], pts[:, 1]
    if sizes.size < 4:
        raise ValueError(f"rate fit needs at least 4 points, got {sizes.size}")
    if np.any(risks <= 0) or np.any(~np.isfinite(sizes)):
        raise ValueError("rate fit needs positive risks and finite sizes")
    x = np.log(sizes) if model.startswith("power") else np.log(np.log(sizes))
    res = stats.linregress(x, np.log(risks))
    r2 = min(1.0, max(0.0, float(res.rvalue) ** 2))
    return RateFit(model, float(res.slope), float(res.stderr), r2, int(sizes.size), float(res.intercept))


# --------------------------------------------------------------------------
# moment audit

@dataclass(frozen=True)
class MomentRow:
    m: int
    t: float
    gamma: float
    scaled_mean: float      # m^gamma E|ECF(t) - cf(t)|^(2 gamma)
    scaled_se: float
    exact: Optional[float]  # gamma = 1: exact scaled second moment
    clt_limit: Optional[float]  # gamma = 2: Gaussian limit of the scaled fourth moment


PROBE_NODES = (0.0, 0.5, 1.0, 2.0, 5.0)


def ecf_component_variances(model: DensityModel, t):
    """Variances of the real and imaginary parts of one ECF term for a symmetric model."""
    t = np.asarray(t, dtype=float)
    phi_t = np.real(model.cf(t)) / INV_SQRT_2PI
    phi_2t = np.real(model.cf(2.0 * t)) / INV_SQRT_2PI
    v_re = (0.5 * (1.0 + phi_2t) - phi_t ** 2) / (2.0 * math.pi)
    v_im = 0.5 * (1.0 - phi_2t) / (2.0 * math.pi)
    return v_re, v_im


def exact_ecf_variance(model: DensityModel, t, m: int = 1):
    """``E|ECF(t) - cf(t)|^2 = (1 - 2 pi |cf(t)|^2) / (2 pi m)``."""
    c2 = np.abs(model.cf(np.asarray(t, dtype=float))) ** 2
    return (1.0 - 2.0 * math.pi * c2) / (2.0 * math.pi * m)


def moment_bound_audit(eps_model: DensityModel, m_schedule: Sequence[int],
                       gammas: Sequence[float] = (0.5, 1.0, 2.0), replicates: int = 1000,
                       nodes: Sequence[float] = PROBE_NODES, seed: int = 0,
                       s: float = 0.0) -> list:
    """Scaled ECF moments ``m^gamma E|ECF/w - cf/w|^(2 gamma)`` at probe nodes."""
    if any(g <= 0 for g in gammas):
        raise ValueError("moment orders must be positive")
    t = np.asarray(nodes, dtype=float)
    w = SobolevWeight(s)(t)
    cf = eps_model.cf(t)
    v_re, v_im = ecf_component_variances(eps_model, t)
    rows = []
    for m in m_schedule:
        dev = np.empty((replicates, t.size))
        for r in range(replicates):
            sample = eps_model.sample(stream(seed, ROLE_EPS, int(m), r), int(m))
            dev[r] = np.abs(ecf_at(sample, t) - cf) / w
        for g in gammas:
            vals = dev ** (2.0 * g) * float(m) ** g
            for j, tj in enumerate(t):
                mean, se = _summary(vals[:, j])
                exact = float(exact_ecf_variance(eps_model, tj) / w[j] ** 2) if g == 1.0 else None
                clt = None
                if g == 2.0:
                    a, b = v_re[j] / w[j] ** 2, v_im[j] / w[j] ** 2
                    clt = float(3.0 * a * a + 3.0 * b * b + 2.0 * a * b)
                rows.append(MomentRow(int(m), float(tj), float(g), mean, se, exact, clt))
    return rows


def moment_envelope(rows) -> dict:
    """``max/min`` of the scaled moment across m for each (t, gamma); 1.0 if identically 0."""
    out = {}
    keys = sorted({(r.t, r.gamma) for r in rows})
    for key in keys:
        v = np.array([r.scaled_mean for r in rows if (r.t, r.gamma) == key])
        if np.all(v == 0):
            out[key] = 1.0
        elif np.any(v == 0):
            out[key] = math.inf
        else:
            out[key] = float(v.max() / v.min())
    return out


# --------------------------------------------------------------------------
# lower-bound diagnostic

@dataclass(frozen=True)
class LowerBound:
    m: int
    value: float
    argmax: float


def lower_bound_diagnostic(f_cf: SpectralFunction, kappa: IndexFunction, m: int,
                           rtol: float = 1e-12) -> LowerBound:
    """Grid maximum of ``kappa(|Ff|^2) * min(1/(m |Ff|^2), 1)``.

    The maximum is often a plateau; the reported location is the largest
    nonnegative node within ``rtol`` of the maximum (the plateau edge).
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    u = f_cf.modulus_sq()
    with np.errstate(divide="ignore"):
        cap = np.where(u > 0, np.minimum(1.0 / (m * u), 1.0), 1.0)
    pos = u > 0
    delta = np.zeros_like(u)
    delta[pos] = kappa(np.minimum(u[pos], 1.0)) * cap[pos]
    top = float(np.max(delta))
    t = f_cf.grid.nodes
    near = (delta >= top * (1.0 - rtol)) & (t >= 0)
    if not near.any():
        near = delta >= top * (1.0 - rtol)
        return LowerBound(int(m), top, float(np.max(np.abs(t[near]))))
    return LowerBound(int(m), top, float(np.max(t[near])))


# --------------------------------------------------------------------------
# m frontier

@dataclass(frozen=True)
class FrontierRow:
    n: int
    m_min: Optional[int]       # None: no scheduled m qualifies
    known_mean: float
    known_se: float
    est_means: tuple


def m_frontier(cfg: ExperimentConfig, threads: int = 1, inflation: float = FRONTIER_INFLATION) -> list:
    """Smallest scheduled m whose risk is within ``inflation`` of the known-error risk.

    A cell qualifies when ``mean_est <= (1 + inflation) * mean_known + 2 * SE``
    with the SE of the difference of the two (independent) means.
    """
    if cfg.m_schedule is None:
        raise ConfigError("m_frontier needs an m_schedule")
    ctx = _Context(cfg)
    cache: dict = {}
    est_rule = cfg.threshold_rule if cfg.threshold_rule.estimated_eps else ThresholdRule(cfg.rule + "-est", cfg.c)
    if est_rule.rule_id not in RULES:
        raise ConfigError(f"no estimated-error counterpart for rule {cfg.rule!r}")
    rows = []
    for n in cfg.n_schedule:
        known = hs_risk(cfg, n, None, threads, rule=cfg.known_rule(), _ctx=ctx, _delta_cache=cache)
        m_min = None
        means = []
        for m in cfg.m_schedule:
            cell = hs_risk(cfg, n, m, threads, rule=est_rule, _ctx=ctx, _delta_cache=cache)
            means.append(cell.mean)
            se = math.hypot(cell.se, known.se)
            if m_min is None and cell.mean <= (1.0 + inflation) * known.mean + 2.0 * se:
                m_min = m
        rows.append(FrontierRow(n, m_min, known.mean, known.se, tuple(means)))
    return rows
