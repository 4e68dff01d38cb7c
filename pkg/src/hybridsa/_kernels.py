"""Hot numeric kernels: directed sup-min distances between sampled graphs.

Each kernel has a numba-jitted version and a pure-numpy fallback; the active
one is picked at import time via ``_backend`` (env flag HYBRIDSA_DISABLE_NUMBA
forces numpy). Graph points are rows (t, j, x_0..x_{d-1}); the point metric is
max(|dt|, |dj|, |dx|_2), so any j mismatch costs at least 1.
"""

from __future__ import annotations

import numpy as np

from ._backend import NUMBA_ENABLED, njit


@njit(cache=True)
def _graph_sup_mindist_jit(a: np.ndarray, b: np.ndarray) -> tuple[float, int]:
    na = a.shape[0]
    nb = b.shape[0]
    d = a.shape[1] - 2
    worst = -1.0
    worst_i = -1
    for i in range(na):
        best = np.inf
        for k in range(nb):
            dt = abs(a[i, 0] - b[k, 0])
            dj = abs(a[i, 1] - b[k, 1])
            m = dt if dt > dj else dj
            if m >= best:
                continue
            s = 0.0
            for c in range(d):
                diff = a[i, 2 + c] - b[k, 2 + c]
                s += diff * diff
            dx = np.sqrt(s)
            if dx > m:
                m = dx
            if m < best:
                best = m
        if best > worst:
            worst = best
            worst_i = i
    return worst, worst_i


def _graph_sup_mindist_np(a: np.ndarray, b: np.ndarray) -> tuple[float, int]:
    # Chunked broadcasting keeps the (na, nb) distance matrix bounded.
    na = a.shape[0]
    mins = np.empty(na)
    chunk = max(1, int(4e6 // max(1, b.shape[0])))
    for lo in range(0, na, chunk):
        hi = min(na, lo + chunk)
        dt = np.abs(a[lo:hi, None, 0] - b[None, :, 0])
        dj = np.abs(a[lo:hi, None, 1] - b[None, :, 1])
        dx = np.linalg.norm(a[lo:hi, None, 2:] - b[None, :, 2:], axis=2)
        dist = np.maximum(np.maximum(dt, dj), dx)
        mins[lo:hi] = dist.min(axis=1)
    i = int(np.argmax(mins))
    return float(mins[i]), i


@njit(cache=True)
def _cloud_sup_mindist_jit(a: np.ndarray, b: np.ndarray) -> float:
    na = a.shape[0]
    nb = b.shape[0]
    d = a.shape[1]
    worst = -1.0
    for i in range(na):
        best = np.inf
        for k in range(nb):
            s = 0.0
            for c in range(d):
                diff = a[i, c] - b[k, c]
                s += diff * diff
            if s < best:
                best = s
        if best > worst:
            worst = best
    return np.sqrt(worst)


def _cloud_sup_mindist_np(a: np.ndarray, b: np.ndarray) -> float:
    na = a.shape[0]
    worst = 0.0
    chunk = max(1, int(4e6 // max(1, b.shape[0])))
    for lo in range(0, na, chunk):
        hi = min(na, lo + chunk)
        dist = np.linalg.norm(a[lo:hi, None, :] - b[None, :, :], axis=2)
        worst = max(worst, float(dist.min(axis=1).max()))
    return worst


if NUMBA_ENABLED:
    _graph_sup_mindist = _graph_sup_mindist_jit
    _cloud_sup_mindist = _cloud_sup_mindist_jit
else:
    _graph_sup_mindist = _graph_sup_mindist_np
    _cloud_sup_mindist = _cloud_sup_mindist_np


def graph_sup_mindist(a: np.ndarray, b: np.ndarray) -> tuple[float, int]:
    """Directed sup over rows of ``a`` of the min distance to rows of ``b``.

    Rows are graph points (t, j, x...). Returns (sup, index of the worst
    ``a`` row). Empty ``a`` gives (0.0, -1); empty ``b`` gives (inf, 0).
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape[0] == 0:
        return 0.0, -1
    if b.shape[0] == 0:
        return np.inf, 0
    sup, i = _graph_sup_mindist(a, b)
    return float(sup), int(i)


def directed_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """sup_{x in a} min_{y in b} |x - y| for plain state clouds."""
    a = np.ascontiguousarray(np.atleast_2d(a), dtype=np.float64)
    b = np.ascontiguousarray(np.atleast_2d(b), dtype=np.float64)
    if a.shape[0] == 0:
        return 0.0
    if b.shape[0] == 0:
        return np.inf
    return float(_cloud_sup_mindist(a, b))


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two state clouds."""
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


__all__ = ["graph_sup_mindist", "directed_hausdorff", "hausdorff", "NUMBA_ENABLED"]
