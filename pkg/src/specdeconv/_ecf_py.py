"""Pure NumPy fallback for the ECF sum kernels.

Same contract as the compiled module: raw sums of ``exp(-i t x_k)``.
"""
import numpy as np

# bound on the (nodes x samples) phase block held in memory at once
_BLOCK = 1 << 20


def ecf_sums_points(x, t):
    x = np.ascontiguousarray(x, dtype=float)
    t = np.ascontiguousarray(t, dtype=float)
    re = np.zeros(t.size)
    im = np.zeros(t.size)
    if x.size == 0 or t.size == 0:
        return re, im
    step = max(1, _BLOCK // x.size)
    for j0 in range(0, t.size, step):
        ph = np.outer(t[j0:j0 + step], x)
        re[j0:j0 + step] = np.cos(ph).sum(axis=1)
        im[j0:j0 + step] = -np.sin(ph).sum(axis=1)
    return re, im


def ecf_sums_uniform(x, dt, n_nodes):
    t = np.arange(n_nodes) * dt
    return ecf_sums_points(x, t)
