import math

import numpy as np
import pytest

from specdeconv.errors import ConfigError
from specdeconv.models import gaussian, laplace, sym_chi2
from specdeconv.regularization import bias_bound_audit, poly, polynomial
from specdeconv.risk import (ExperimentConfig, RiskCell, RiskReport, diagnostics, exact_ecf_variance,
                             hs_risk, lower_bound_diagnostic, m_frontier, mise_y, moment_bound_audit,
                             moment_envelope, rate_fit, run_experiment)
from specdeconv.spectral import INV_SQRT_2PI, SpectralFunction, make_grid

SMALL = dict(t_max=16.0, n_points=1025)


def cfg(**kw):
    base = dict(x="sym_chi2:k=3", eps="laplace:b=1", rule="ordinary-smooth", p=2.0, a=2.0,
                n_schedule=(256, 1024), replicates=10, seed=5, **SMALL)
    base.update(kw)
    return ExperimentConfig(**base)


def test_rate_fit_power_synthetic():
    n = np.array([2.0 ** k for k in range(8, 16)])
    fit = rate_fit(list(zip(n, 3.0 * n ** -0.8)))
    assert math.isclose(fit.exponent, -0.8, rel_tol=1e-12)
    assert math.isclose(fit.r2, 1.0)
    assert math.isclose(math.exp(fit.intercept), 3.0, rel_tol=1e-10)


def test_rate_fit_log_power_synthetic():
    n = np.array([10.0 ** k for k in range(2, 8)])
    fit = rate_fit(list(zip(n, np.log(n) ** -2.0)), "log_power(n)")
    assert math.isclose(fit.exponent, -2.0, rel_tol=1e-12)
    assert fit.points == 6


def test_rate_fit_rejects():
    with pytest.raises(ValueError, match="at least 4"):
        rate_fit([(1, 1), (2, 0.5), (4, 0.25)])
    with pytest.raises(ValueError, match="positive"):
        rate_fit([(1, 1), (2, 0.5), (4, 0.0), (8, 0.1)])
    with pytest.raises(ValueError, match="unknown fit model"):
        rate_fit([(1, 1)] * 4, "cubic")


def test_rate_fit_from_report_axis():
    cells = [RiskCell(1000, m, 1.0 / m, 0.0, 2, 0.1, 0.0, 1.0) for m in (10, 100, 1000, 10000)]
    assert math.isclose(rate_fit(RiskReport(cells), "power(m)").exponent, -1.0, rel_tol=1e-12)


def test_config_validation():
    with pytest.raises(ConfigError, match="increasing"):
        cfg(n_schedule=(512, 256))
    with pytest.raises(ConfigError, match="nonempty"):
        cfg(n_schedule=())
    with pytest.raises(ConfigError, match="replicates"):
        cfg(replicates=1)
    with pytest.raises(ConfigError, match="m_schedule"):
        cfg(rule="ordinary-smooth-est")
    with pytest.raises(ConfigError):
        cfg(x="normal:sigma=1")
    with pytest.raises(ConfigError):
        cfg(n_points=1024)
    assert cfg(rule="poly-source-est", m_schedule=(10, 100)).known_rule().rule_id == "poly-source"


def test_oracle_y_equals_bias_audit():
    # exact f_Y and known error: the risk is the pure truncation bias
    c = cfg(oracle_y=True, replicates=3)
    cell = hs_risk(c, 1024)
    assert cell.se < 1e-15 * cell.mean
    audit = bias_bound_audit(sym_chi2(3), laplace(1.0), 0, cell.alpha, poly(1.0), c.grid)
    assert abs(cell.mean - audit.lhs) < 1e-8


def test_bias_monotone_in_alpha():
    g = make_grid(*SMALL.values())
    lhs = [bias_bound_audit(sym_chi2(3), laplace(1.0), 0, a, poly(1.0), g).lhs for a in np.logspace(-5, -1, 9)]
    assert all(b >= a for a, b in zip(lhs, lhs[1:]))


def test_known_error_dominates_small_m():
    c = cfg(rule="ordinary-smooth-est", m_schedule=(10, 100000), replicates=20)
    known = hs_risk(c, 1024)
    small = hs_risk(c, 1024, 10)
    large = hs_risk(c, 1024, 100000)
    assert small.mean > known.mean
    assert abs(large.mean - known.mean) < 3 * math.hypot(large.se, known.se) + 0.05 * known.mean


def test_threads_deterministic():
    c = cfg(rule="poly-source-est", beta=1.0, m_schedule=(50, 500), delta_mode="mc", pilot_replicates=4)
    a = run_experiment(c, threads=1)
    b = run_experiment(c, threads=4)
    assert a.cells == b.cells
    assert a.meta == b.meta


def test_seed_changes_result():
    a = hs_risk(cfg(), 256)
    b = hs_risk(cfg(seed=6), 256)
    assert a.mean != b.mean


def test_mise_y_and_mask():
    c = cfg(x="gaussian:sigma=1", eps="gaussian:sigma=1", rule="supersmooth")
    cell = mise_y(c, 512)
    assert cell.mean > 0 and cell.se > 0
    assert mise_y(cfg(oracle_y=True), 512).mean == 0.0
    r = hs_risk(c, 512)
    assert 0 < r.mask_size <= c.n_points


def test_diagnostics_flags():
    d = diagnostics(cfg(beta=1.0))
    assert d["tail_ok"] and not d["rho_divergent"]
    assert diagnostics(cfg(beta=3.0))["rho_divergent"]


def test_moment_audit():
    rows = moment_bound_audit(laplace(1.0), (100, 1000), replicates=400, seed=2)
    for r in rows:
        if r.t == 0.0:
            assert r.scaled_mean == 0.0
        if r.gamma == 1.0:
            assert abs(r.scaled_mean - r.exact) <= 4 * r.scaled_se + 1e-15
            assert math.isclose(r.exact, float(exact_ecf_variance(laplace(1.0), r.t)), rel_tol=1e-12)
        if r.gamma == 2.0 and r.t > 0:
            assert abs(r.scaled_mean - r.clt_limit) <= 5 * r.scaled_se + 0.1 * r.clt_limit
    env = moment_envelope(rows)
    assert env[(0.0, 1.0)] == 1.0
    assert max(env.values()) < 2.0


def test_moment_audit_rejects():
    with pytest.raises(ValueError):
        moment_bound_audit(laplace(1.0), (10,), gammas=(0.0,))


def test_lower_bound_constant_function():
    g = make_grid(4.0, 9)
    f = SpectralFunction(g, np.full(9, 0.1 + 0j), hermitian=True)
    lb = lower_bound_diagnostic(f, polynomial(1.0), 10)
    assert math.isclose(lb.value, 0.01 * min(1 / (10 * 0.01), 1.0))
    assert lb.argmax == 4.0


def test_lower_bound_m_one():
    f = gaussian(1.0).spectrum(make_grid(8.0, 257))
    lb = lower_bound_diagnostic(f, polynomial(1.0), 1)
    assert lb.argmax == 0.0
    assert math.isclose(lb.value, INV_SQRT_2PI ** 2, rel_tol=1e-12)
    with pytest.raises(ValueError):
        lower_bound_diagnostic(f, polynomial(1.0), 0)


@pytest.mark.parametrize("m", [100, 10000])
def test_lower_bound_sym_chi2_root(m):
    g = make_grid(16.0, 4097)
    lb = lower_bound_diagnostic(sym_chi2(2).spectrum(g), polynomial(1.0), m)
    root = math.sqrt((math.sqrt(m / (2 * math.pi)) - 1) / 4)
    assert abs(lb.argmax - root) <= g.dt
    assert math.isclose(lb.value, 1 / m, rel_tol=1e-12)


def test_m_frontier_huge_m_qualifies():
    c = cfg(rule="ordinary-smooth", m_schedule=(1000000,), n_schedule=(512,), replicates=4)
    (row,) = m_frontier(c)
    assert row.m_min == 1000000
    assert len(row.est_means) == 1


def test_m_frontier_needs_schedule():
    with pytest.raises(ConfigError):
        m_frontier(cfg())
