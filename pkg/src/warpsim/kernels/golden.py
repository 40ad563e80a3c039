"""Reference results for the benchmark kernels.

Every model mirrors the kernel's exact operand order and rounding: fused
multiply-add rounds once from a double-precision product-sum, plain add and
subtract round the double result, and accumulation loops walk in the same
order as the generated code.  Outputs must match the simulated memory bit
for bit, so no model may reassociate or vectorise across an accumulation
chain.
"""

from __future__ import annotations

import numpy as np

from .workloads import GCN_DEGREE, GCN_FEATURES, KNN_DIMS

F32 = np.float32
F64 = np.float64

KNN_ACC_INIT = np.float32(-3.0e38)


def _fma(a, b, c):
    """float32 fused multiply-add over arrays, one rounding."""
    return (np.asarray(a, F64) * np.asarray(b, F64) + np.asarray(c, F64)).astype(F32)


def _add(a, b):
    return (np.asarray(a, F64) + np.asarray(b, F64)).astype(F32)


def vecadd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _add(a, b)


def saxpy(scale: np.float32, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return _fma(scale, x, y)


def sgemv_col(a_cols: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y built by column passes: y <- fma(A[:, k], x[k], y) for k ascending.
    a_cols is (rows, ncol), stored column-major by the kernel."""
    rows, ncol = a_cols.shape
    y = np.zeros(rows, F32)
    for k in range(ncol):
        y = _fma(a_cols[:, k], x[k], y)
    return y


def sgemm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """C[r, c] accumulated over k ascending, one fma rounding per step."""
    n = a.shape[0]
    c = np.zeros((n, n), F32)
    for k in range(n):
        c = _fma(a[:, k][:, None], b[k, :][None, :], c)
    return c


def sfilter(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Circular 5-tap stencil, one pass per tap in offset order -2..2."""
    out = np.zeros(x.shape[0], F32)
    for j, off in enumerate(range(-2, 3)):
        out = _fma(w[j], np.roll(x, -off), out)
    return out


def conv2d(planes: np.ndarray, w: np.ndarray, n: int) -> np.ndarray:
    """Flat-circular 3x3 convolution over channels-first planar input.

    planes is (ci, n*n) flattened row-major, w is (9, ci) in row-major tap
    order.  The kernel runs one pass per (tap, ci) with taps outer, so the
    accumulation order here must match exactly."""
    ci_count = planes.shape[0]
    out = np.zeros(n * n, F32)
    tap = 0
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            off = dy * n + dx
            for ci in range(ci_count):
                out = _fma(w[tap, ci], np.roll(planes[ci], -off), out)
            tap += 1
    return out


def knn_negdist(ref_planes: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Negated squared distances; ref_planes is (KNN_DIMS, n) dim-major.

    The kernel folds the sign into the product, accumulating
    (ref - q) * (q - ref) per dimension, so the model does the same."""
    acc = np.zeros(ref_planes.shape[1], F32)
    for d in range(KNN_DIMS):
        diff = (ref_planes[d].astype(F64) - F64(q[d])).astype(F32)
        acc = _fma(diff, -diff, acc)
    return acc


def knn_partials(neg: np.ndarray, grid, partial_slots: int) -> np.ndarray:
    """Per-lane running max over each lane's element strip.

    Slot w*T + t covers the main-phase strip of warp w lane t; slots from
    spawn*T up cover the remainder strip of warp 0.  Every participating
    lane stores its accumulator after the loop, so a lane whose strip is
    empty stores the seed value."""
    T = grid.threads
    out = np.zeros(partial_slots, F32)
    if grid.k_main:
        for w in range(grid.spawn):
            for t in range(T):
                acc = KNN_ACC_INIT
                for k in range(grid.k_main):
                    acc = np.maximum(acc, neg[k * grid.block + w * T + t])
                out[w * T + t] = acc
    if grid.rem:
        base = grid.spawn * T if grid.k_main else 0
        for t in range(T):
            count = grid.rem_bound - (0 if t < grid.rem_tail else 1)
            acc = KNN_ACC_INIT
            for k in range(count):
                acc = np.maximum(acc, neg[grid.main + k * T + t])
            out[base + t] = acc
    return out


def gcn_aggregate(x: np.ndarray, adj: np.ndarray) -> np.ndarray:
    """Feature-major neighbour sum: out[f, v] = sum_j x[f, adj[v, j]].

    x is (GCN_FEATURES, n); accumulation walks neighbours in ascending j
    with one float32 rounding per add, matching the kernel."""
    n = adj.shape[0]
    out = np.zeros((GCN_FEATURES, n), F32)
    for f in range(GCN_FEATURES):
        acc = np.zeros(n, F32)
        for j in range(GCN_DEGREE):
            acc = _add(acc, x[f, adj[:, j]])
        out[f] = acc
    return out
