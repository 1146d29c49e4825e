import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specdeconv.errors import GridMismatchError, UnguaranteedDerivativeError
from specdeconv.estimators import (KERNELS, EcfEstimate, bandwidth_rule, deconv_known,
                                   deconv_unknown, derivative_spectrum, ecf, ecf_at, ecf_half,
                                   get_kernel, kde_spectrum, keep_mask, regularized_target)
from specdeconv.models import convolve, gaussian, laplace, sym_chi2
from specdeconv.regularization import bias_bound_audit, poly
from specdeconv.risk import ExperimentConfig, hs_risk, mise_y
from specdeconv.rng import stream
from specdeconv.spectral import (INV_SQRT_2PI, SpectralFunction, default_grid,
                                 inverse_transform_at, make_grid, weighted_l2_norm_sq)

GRID = make_grid(16.0, 1025)


@pytest.mark.parametrize("name", sorted(KERNELS))
def test_kernel_ft_at_zero(name):
    assert KERNELS[name].ft(np.array([0.0]))[0] == INV_SQRT_2PI


@pytest.mark.parametrize("name", ["gaussian", "quartic"])
def test_kernel_order_limit(name):
    k = KERNELS[name]
    ratios = [float(k.defect(t) / t ** k.r) for t in (1e-2, 1e-3, 1e-4)]
    assert abs(ratios[-1] - k.kappa_r) <= 0.05 * k.kappa_r
    assert abs(ratios[-1] - ratios[-2]) <= 0.05 * abs(ratios[-2])


def test_sinc_defect_vanishes_near_zero():
    assert np.all(KERNELS["sinc"].defect(np.array([1e-2, 1e-3, 0.5])) == 0)


def test_unknown_kernel():
    with pytest.raises(ValueError, match="unknown kernel"):
        get_kernel("epanechnikov")


def test_ecf_point_samples():
    e = ecf([0.0], GRID).spectrum.values
    assert np.all(e == INV_SQRT_2PI)
    c = 0.7
    e = ecf([c], GRID).spectrum.values
    assert np.allclose(e, INV_SQRT_2PI * np.exp(-1j * GRID.nodes * c), atol=1e-14)
    assert np.allclose(np.abs(e), INV_SQRT_2PI, atol=1e-15)


def test_ecf_empty():
    with pytest.raises(ValueError, match="empty sample"):
        ecf([], GRID)


def test_ecf_half_matches_points():
    x = gaussian(1.0).sample(stream(1, 2), 777)
    half = ecf_half(x, GRID)
    assert np.allclose(half, ecf_at(x, GRID.positive_nodes), atol=1e-13)


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=60))
@settings(max_examples=40, deadline=None)
def test_ecf_pinning_and_modulus(xs):
    e = ecf(xs, GRID).spectrum
    assert e.values[GRID.half] == INV_SQRT_2PI
    assert np.all(np.abs(e.values) <= INV_SQRT_2PI * (1 + 1e-12))
    assert e.hermitian


def test_ecf_gaussian_accuracy():
    m = 100_000
    x = gaussian(1.0).sample(stream(3, 3), m)
    cf = INV_SQRT_2PI * math.exp(-0.5)
    sd = math.sqrt((1 - 2 * math.pi * cf * cf) / (2 * math.pi * m))
    assert abs(ecf_at(x, [1.0])[0] - cf) < 4 * sd


def test_kde_spectrum_sinc_support():
    y = gaussian(1.0).sample(stream(4, 1), 500)
    f = kde_spectrum(y, KERNELS["sinc"], 0.25, GRID)
    t = GRID.nodes
    assert np.all(f.values[np.abs(t) > 4] == 0)
    assert np.all(f.values[np.abs(t) <= 4] != 0)


def test_kde_spectrum_small_bandwidth_is_ecf():
    y = gaussian(1.0).sample(stream(4, 2), 300)
    f = kde_spectrum(y, KERNELS["gaussian"], 1e-9, GRID)
    assert np.allclose(f.values, ecf(y, GRID).spectrum.values, atol=1e-14)


def test_kde_spectrum_where_restricts():
    y = gaussian(1.0).sample(stream(4, 3), 300)
    full = kde_spectrum(y, KERNELS["gaussian"], 0.3, GRID)
    where = np.abs(GRID.nodes) <= 2
    part = kde_spectrum(y, KERNELS["gaussian"], 0.3, GRID, where=where)
    assert np.array_equal(part.values[where], full.values[where])
    assert np.all(part.values[~where] == 0)


def test_kde_plancherel_cross_check():
    # spatial ISE of the Gaussian-kernel estimate equals the Fourier-domain ISE
    pair = convolve(gaussian(1.0), gaussian(1.0))
    y = pair.sample_y(stream(9, 1), 10_000)
    h = 0.3
    g = make_grid(40.0, 8193)
    fy = kde_spectrum(y, KERNELS["gaussian"], h, g)
    fourier = weighted_l2_norm_sq(fy - pair.y_spectrum(g))
    x = np.linspace(-12, 12, 4801)
    est = np.zeros_like(x)
    for chunk in np.array_split(y, 20):
        est += np.exp(-0.5 * ((x[:, None] - chunk[None, :]) / h) ** 2).sum(axis=1)
    est /= y.size * h * math.sqrt(2 * math.pi)
    true = np.exp(-x * x / 4) / math.sqrt(4 * math.pi)
    spatial = np.trapezoid((est - true) ** 2, x)
    assert math.isclose(fourier, spatial, rel_tol=1e-6)


def test_bandwidth_rule():
    assert math.isclose(bandwidth_rule(1024, 2), 0.25, rel_tol=1e-15)
    assert bandwidth_rule(1, 3.0, 0.7) == 0.7
    assert bandwidth_rule(2048, 2) < bandwidth_rule(1024, 2)
    with pytest.raises(ValueError):
        bandwidth_rule(0, 2)


def test_regularized_target_extremes():
    g = default_grid()
    x, e = sym_chi2(2).spectrum(g), laplace(1.0).spectrum(g)
    assert np.all(regularized_target(x, e, 0, 1.0).spectrum.values == 0)
    full = regularized_target(x, e, 0, 1e-300)
    assert np.array_equal(full.spectrum.values, x.values)
    assert full.keep_mask.all()


def test_regularized_target_gaussian_edge():
    g = default_grid()
    alpha = 1e-3
    est = regularized_target(sym_chi2(2).spectrum(g), gaussian(1.0).spectrum(g), 0, alpha)
    t_alpha = math.sqrt(-math.log(2 * math.pi * alpha))
    t = g.nodes
    kept = t[est.keep_mask]
    assert np.array_equal(kept, -kept[::-1])
    assert np.all(np.diff(np.flatnonzero(est.keep_mask)) == 1)  # one interval
    assert abs(est.mask_edge() - t_alpha) <= g.dt


def test_ties_are_kept():
    g = make_grid(1.0, 3)
    phi = SpectralFunction(g, [0.5, 1.0, 0.5], hermitian=True)
    assert keep_mask(phi, 0, 0.25).all()
    assert list(keep_mask(phi, 0, 0.2500001)) == [False, True, False]


@given(st.floats(1e-8, 0.2), st.floats(0, 2))
@settings(max_examples=25, deadline=None)
def test_known_exactness(alpha, s):
    g = make_grid(32.0, 2049)
    pair = convolve(sym_chi2(2), laplace(1.0))
    x, e = pair.x_model.spectrum(g), pair.eps_model.spectrum(g)
    a = deconv_known(pair.y_spectrum(g), e, s, alpha)
    b = regularized_target(x, e, s, alpha)
    assert np.array_equal(a.keep_mask, b.keep_mask)
    scale = np.abs(b.spectrum.values).max()
    assert np.max(np.abs(a.spectrum.values - b.spectrum.values)) <= 1e-12 * scale
    assert np.all(a.spectrum.values[~a.keep_mask] == 0)


def test_deconv_zero_input():
    e = laplace(1.0).spectrum(GRID)
    out = deconv_known(SpectralFunction.zeros(GRID), e, 0, 0.01)
    assert np.all(out.spectrum.values == 0)


def test_deconv_grid_mismatch():
    with pytest.raises(GridMismatchError):
        deconv_known(SpectralFunction.zeros(GRID), laplace(1.0).spectrum(default_grid()), 0, 0.1)


def test_deconv_unknown_point_mass():
    y = gaussian(1.0).spectrum(GRID)
    eps = ecf(np.zeros(10), GRID)
    out = deconv_unknown(y, eps, 0, 0.01)
    assert out.keep_mask.all()
    assert np.allclose(out.spectrum.values, y.values, rtol=1e-14, atol=0)
    assert out.provenance == "estimated_eps"


def test_deconv_unknown_large_alpha_empty():
    eps = ecf(laplace(1.0).sample(stream(1, 1), 50), GRID)
    out = deconv_unknown(gaussian(1.0).spectrum(GRID), eps, 0, 1 / (2 * math.pi) * 1.000001)
    assert not out.keep_mask.any() and np.all(out.spectrum.values == 0)
    assert out.mask_edge() is None


def test_deconv_unknown_single_draw():
    eps = ecf([0.3], GRID)
    out = deconv_unknown(gaussian(1.0).spectrum(GRID), eps, 0, 0.1)
    assert out.keep_mask.all()  # |ECF|^2 = 1/(2 pi) > alpha everywhere


def test_deconv_unknown_consistency():
    g = make_grid(16.0, 1025)
    pair = convolve(sym_chi2(2), laplace(1.0))
    y = pair.y_spectrum(g)
    alpha = 0.01
    known = deconv_known(y, pair.eps_model.spectrum(g), 0, alpha)
    m = 1_000_000
    est = deconv_unknown(y, ecf(laplace(1.0).sample(stream(2, 2), m), g), 0, alpha)
    diff = weighted_l2_norm_sq(est.spectrum - known.spectrum)
    # moment scale of the plug-in error: ||F f_Y||^2 alpha^-2 / m
    scale = weighted_l2_norm_sq(y) / (alpha ** 2 * m)
    assert diff < 5 * scale


def test_derivative_spectrum():
    g = make_grid(40.0, 8193)
    est = regularized_target(gaussian(1.0).spectrum(g), gaussian(0.5).spectrum(g), 1, 1e-6)
    assert derivative_spectrum(est, 0) is est.spectrum
    d1 = derivative_spectrum(est, 1)
    assert d1.values[g.half] == 0
    assert abs(inverse_transform_at(d1, [0.0])[0]) < 1e-12
    # standard normal pdf derivative at x = 1 is -phi(1)
    assert abs(inverse_transform_at(d1, [1.0])[0] + math.exp(-0.5) * INV_SQRT_2PI) < 1e-8
    with pytest.raises(UnguaranteedDerivativeError):
        derivative_spectrum(est, 2)
    with pytest.raises(ValueError):
        derivative_spectrum(est, -1)


def test_risk_decomposition_known():
    # Monte Carlo risk <= pi^-1 alpha^-1 MISE_Y + 2 bias, each side estimated separately
    cfg = ExperimentConfig(x="sym_chi2:k=2", eps="laplace:b=1", kernel="sinc", kernel_order=3.5,
                           rule="ordinary-smooth", p=1.49, a=2, n_schedule=(10_000,), replicates=40,
                           seed=5, t_max=32, n_points=2049)
    cell = hs_risk(cfg, 10_000)
    my = mise_y(cfg, 10_000)
    bias = bias_bound_audit(sym_chi2(2), laplace(1.0), 0, cell.alpha, poly(0.5), cfg.grid).lhs
    rhs = my.mean / (math.pi * cell.alpha) + 2 * bias
    rhs_se = my.se / (math.pi * cell.alpha)
    assert cell.mean <= rhs + 2 * math.hypot(cell.se, rhs_se)


def test_estimator_input_validation():
    with pytest.raises(ValueError):
        kde_spectrum([1.0], KERNELS["sinc"], 0.0, GRID)
    with pytest.raises(ValueError):
        ecf([np.nan], GRID)
    with pytest.raises(ValueError):
        keep_mask(laplace(1.0).spectrum(GRID), 0, 0.0)
    with pytest.raises(ValueError):
        kde_spectrum([1.0], KERNELS["sinc"], 1.0, GRID, where=np.ones(3, bool))
    assert isinstance(ecf([1.0, 2.0], GRID), EcfEstimate)
