"""Kernel selection: compiled extension when importable, NumPy otherwise.

Set ``SPECDECONV_BACKEND=python`` to force the fallback.
"""
import os

from . import _ecf_py

if os.environ.get("SPECDECONV_BACKEND", "").lower() == "python":
    _impl = _ecf_py
    BACKEND = "python"
else:
    try:
        from . import _ecf_ext as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _ecf_py
        BACKEND = "python"

ecf_sums_uniform = _impl.ecf_sums_uniform
ecf_sums_points = _impl.ecf_sums_points
