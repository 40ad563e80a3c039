"""Seeded input generation for the benchmark kernels.

All floating-point inputs are float32 drawn from a small uniform range so
accumulations stay well away from overflow.  Graph adjacency for the
aggregation benchmark picks neighbours from a window around each vertex,
which keeps gather requests within a few cache lines per warp while still
exercising data-dependent addressing.
"""

from __future__ import annotations

import numpy as np

GCN_DEGREE = 8
GCN_FEATURES = 4
GCN_WINDOW = 16
KNN_DIMS = 4


def rng_for(seed: int, name: str, point: int) -> np.random.Generator:
    # independent stream per (benchmark, point) so sweeps do not alias
    return np.random.default_rng([seed, hash(name) & 0x7FFFFFFF, point])


def floats(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, n).astype(np.float32)


def gcn_adjacency(rng: np.random.Generator, n: int) -> np.ndarray:
    """Neighbour ids, n rows of GCN_DEGREE, each within +-GCN_WINDOW mod n."""
    offs = rng.integers(-GCN_WINDOW, GCN_WINDOW + 1, size=(n, GCN_DEGREE))
    ids = (np.arange(n)[:, None] + offs) % n
    return ids.astype(np.int32)
