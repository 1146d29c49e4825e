"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by a
root seed plus a tuple of nonnegative integers (cell, replicate, role, ...).
Identical keys give identical draws no matter which worker evaluates them.
"""
import numpy as np

# stream roles
ROLE_Y = 1
ROLE_EPS = 2
ROLE_PILOT = 3
ROLE_AUDIT = 4


def stream(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
