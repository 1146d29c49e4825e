import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specdeconv import _backend, _ecf_py

try:
    from specdeconv import _ecf_ext
except ImportError:  # pragma: no cover
    _ecf_ext = None

needs_ext = pytest.mark.skipif(_ecf_ext is None, reason="compiled extension not built")


def test_backend_selected():
    assert _backend.BACKEND in ("compiled", "python")
    if _ecf_ext is not None:
        assert _backend.BACKEND == "compiled"


@needs_ext
@given(st.integers(1, 400), st.integers(1, 300), st.floats(0.001, 0.5), st.integers(0, 2 ** 32))
@settings(max_examples=40, deadline=None)
def test_uniform_sums_agree(m, nodes, dt, seed):
    x = np.random.default_rng(seed).standard_cauchy(m)
    x = np.clip(x, -1e3, 1e3)
    a = np.asarray(_ecf_ext.ecf_sums_uniform(x, dt, nodes))
    b = np.asarray(_ecf_py.ecf_sums_uniform(x, dt, nodes))
    assert np.allclose(a, b, rtol=0, atol=1e-10 * m)


@needs_ext
def test_point_sums_agree():
    rng = np.random.default_rng(1)
    x = rng.normal(size=1000)
    t = np.linspace(-30, 30, 77)
    a = np.asarray(_ecf_ext.ecf_sums_points(x, t))
    b = np.asarray(_ecf_py.ecf_sums_points(x, t))
    assert np.allclose(a, b, rtol=0, atol=1e-11 * x.size)


def test_python_fallback_exact_small():
    x = np.array([0.0, 1.0, -2.0])
    re, im = (np.asarray(v) for v in _ecf_py.ecf_sums_points(x, np.array([0.0, 0.5])))
    assert np.allclose(re, [3.0, np.cos(0) + np.cos(0.5) + np.cos(1.0)])
    # sums of exp(-i t x)
    assert np.allclose(im, [0.0, -(np.sin(0.5) + np.sin(-1.0))])
