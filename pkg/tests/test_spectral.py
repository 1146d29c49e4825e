import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specdeconv.errors import GridMismatchError, NumericalError
from specdeconv.models import gaussian, sym_chi2
from specdeconv.spectral import (INV_SQRT_2PI, SobolevWeight, SpectralFunction, default_grid,
                                 inverse_transform_at, make_grid, sobolev_weight_eval,
                                 tail_check, weighted_l2_norm_sq)


def test_make_grid_small():
    g = make_grid(1.0, 3)
    assert list(g.nodes) == [-1.0, 0.0, 1.0]
    assert g.dt == 1.0
    assert list(make_grid(2.0, 5).nodes) == [-2.0, -1.0, 0.0, 1.0, 2.0]


def test_default_grid_spacing():
    g = default_grid()
    assert g.dt == 0.015625
    assert g.nodes[g.half] == 0.0


@pytest.mark.parametrize("t_max,n", [(0.0, 5), (-1.0, 5), (math.inf, 5), (1.0, 4), (1.0, 1), (1.0, 2.5)])
def test_make_grid_rejects(t_max, n):
    with pytest.raises(ValueError):
        make_grid(t_max, n)


@given(st.floats(0.1, 500.0), st.integers(1, 3000))
def test_grid_symmetry(t_max, half):
    g = make_grid(t_max, 2 * half + 1)
    t = g.nodes
    assert np.array_equal(t, -t[::-1])
    assert np.all(np.diff(t) > 0)
    assert t[g.half] == 0.0
    assert math.isclose(g.weights.sum(), 2 * t_max, rel_tol=1e-12)


def test_sobolev_weight_examples():
    assert sobolev_weight_eval(SobolevWeight(0), 7.3) == 1.0
    assert sobolev_weight_eval(SobolevWeight(2), 1.0) == 2.0
    assert math.isclose(sobolev_weight_eval(SobolevWeight(1), math.sqrt(3)), 2.0, rel_tol=1e-15)
    with pytest.raises(ValueError):
        SobolevWeight(-0.5)


def test_hermitian_checked():
    g = make_grid(1.0, 3)
    with pytest.raises(ValueError):
        SpectralFunction(g, [1j, 0, 1j], hermitian=True)
    with pytest.raises(ValueError):
        SpectralFunction(g, [1, 2])
    f = SpectralFunction(g, [1 - 1j, 2, 1 + 1j], hermitian=True)
    assert not f.values.flags.writeable


def test_grid_mismatch():
    a = SpectralFunction.zeros(make_grid(1.0, 3))
    b = SpectralFunction.zeros(make_grid(2.0, 3))
    with pytest.raises(GridMismatchError):
        a - b


def test_norm_zero_and_gaussian():
    g = make_grid(40.0, 8193)
    assert weighted_l2_norm_sq(SpectralFunction.zeros(g)) == 0.0
    f = gaussian(1.0).spectrum(g)
    # integral (2 pi)^-1 exp(-t^2) dt = 1 / (2 sqrt(pi))
    assert abs(weighted_l2_norm_sq(f, 0) - 1 / (2 * math.sqrt(math.pi))) < 1e-8


@given(st.floats(-10, 10), st.floats(0, 3))
@settings(max_examples=30)
def test_norm_scaling(c, s):
    g = make_grid(8.0, 257)
    f = SpectralFunction.from_callable(g, lambda t: INV_SQRT_2PI / (1 + t * t))
    base = weighted_l2_norm_sq(f, s)
    assert math.isclose(weighted_l2_norm_sq(c * f, s), c * c * base, rel_tol=1e-12, abs_tol=1e-300)


@given(st.floats(0, 3), st.floats(0, 3))
@settings(max_examples=30)
def test_norm_monotone_in_s(s1, s2):
    s1, s2 = sorted((s1, s2))
    f = sym_chi2(2).spectrum(make_grid(16.0, 1025))
    assert weighted_l2_norm_sq(f, s1) <= weighted_l2_norm_sq(f, s2)


def test_norm_grid_refinement():
    f = lambda n: weighted_l2_norm_sq(sym_chi2(2).spectrum(make_grid(32.0, n)), 1)
    coarse, fine, finer = f(1025), f(2049), f(4097)
    # Richardson-style trapezoid error estimate from the two finest grids
    assert abs(fine - finer) < 4 * max(abs(coarse - fine), 1e-16)


def test_tail_check_examples():
    g = make_grid(40.0, 8193)
    ok, frac = tail_check(gaussian(1.0).spectrum(g), 0, 1e-6)
    assert ok and frac < 1e-6
    g10 = make_grid(10.0, 2049)
    ok, frac = tail_check(SpectralFunction.from_callable(g10, lambda t: (1 + 4 * t * t) ** -0.5), 0, 1e-6)
    assert not ok and frac > 1e-6
    compact = SpectralFunction.from_callable(g10, lambda t: np.where(np.abs(t) < 5, 1.0, 0.0))
    assert tail_check(compact) == (True, 0.0)


def test_plancherel_catalog():
    g = default_grid()
    checked = 0
    for model, exact in [(gaussian(1.0), 1 / (2 * math.sqrt(math.pi))),
                         # sym_chi2(2): (2 pi)^-1 integral (1+4t^2)^-2 dt = 1/8
                         (sym_chi2(2), 1 / 8)]:
        f = model.spectrum(g)
        ok, _ = tail_check(f)
        if ok:
            assert math.isclose(weighted_l2_norm_sq(f), exact, rel_tol=1e-6)
            checked += 1
    assert checked >= 1


def test_inverse_transform():
    g = make_grid(40.0, 8193)
    v = inverse_transform_at(gaussian(1.0).spectrum(g), [0.0])
    assert abs(v[0] - INV_SQRT_2PI) < 1e-8
    assert np.all(inverse_transform_at(SpectralFunction.zeros(g), [-1.0, 0.0, 2.0]) == 0)


def test_inverse_transform_integrates_to_one():
    g = default_grid()
    x = np.linspace(-40, 40, 4001)
    f = inverse_transform_at(sym_chi2(2).spectrum(g), x)
    assert abs(np.trapezoid(f, x) - 1.0) < 1e-6


def test_inverse_transform_rejects():
    g = make_grid(4.0, 9)
    with pytest.raises(ValueError):
        inverse_transform_at(SpectralFunction(g, np.ones(9)), [0.0])


def test_inverse_transform_residue_guard(monkeypatch):
    import specdeconv.spectral as sp
    g = make_grid(4.0, 9)
    v = np.ones(9, dtype=complex)
    v[0] += 5e-13j  # hermitian within tolerance, residue of order 1e-13
    monkeypatch.setattr(sp, "IMAG_RESIDUE_TOL", 1e-15)
    with pytest.raises(NumericalError):
        inverse_transform_at(SpectralFunction(g, v, hermitian=True), [0.3])
