"""Numba kernels. Same contracts as ``_numpy``."""

import os

import numba
import numpy as np
from numba import njit, prange

from .. import dd as _dd

# The TBB layer probes the system library and warns on old versions.
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

_two_sum = njit(cache=True)(_dd.two_sum)
_quick_two_sum = njit(cache=True)(_dd.quick_two_sum)
_split = njit(cache=True)(_dd.split)


@njit(cache=True)
def _two_prod(a, b):
    p = a * b
    ahi, alo = _split(a)
    bhi, blo = _split(b)
    err = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, err


@njit(cache=True)
def _dd_add(ahi, alo, bhi, blo):
    s1, s2 = _two_sum(ahi, bhi)
    t1, t2 = _two_sum(alo, blo)
    s2 = s2 + t1
    s1, s2 = _quick_two_sum(s1, s2)
    s2 = s2 + t2
    return _quick_two_sum(s1, s2)


@njit(cache=True)
def _dd_div_double(ahi, alo, b):
    q1 = ahi / b
    p1, p2 = _two_prod(q1, b)
    s, e = _two_sum(ahi, -p1)
    e = e - p2
    e = e + alo
    q2 = (s + e) / b
    return _quick_two_sum(q1, q2)


@njit(cache=True, parallel=True)
def _row_mean(indptr, indices, x, self_loops, out):
    n, d = x.shape
    for i in prange(n):
        start = indptr[i]
        stop = indptr[i + 1]
        deg = stop - start
        if deg == 0 and not self_loops:
            for f in range(d):
                out[i, f] = x[i, f]
            continue
        acc = np.zeros(d, dtype=x.dtype)
        for p in range(start, stop):
            j = indices[p]
            for f in range(d):
                acc[f] += x[j, f]
        if self_loops:
            for f in range(d):
                acc[f] += x[i, f]
            deg += 1
        for f in range(d):
            out[i, f] = acc[f] / deg


def row_mean(indptr, indices, x, self_loops=False):
    out = np.empty_like(x)
    _row_mean(indptr, indices, x, bool(self_loops), out)
    return out


@njit(cache=True, parallel=True)
def _dd_row_mean(indptr, indices, hi, lo, self_loops, out_hi, out_lo):
    n, d = hi.shape
    for i in prange(n):
        start = indptr[i]
        stop = indptr[i + 1]
        deg = stop - start
        if deg == 0 and not self_loops:
            for f in range(d):
                out_hi[i, f] = hi[i, f]
                out_lo[i, f] = lo[i, f]
            continue
        for f in range(d):
            ah = 0.0
            al = 0.0
            if self_loops:
                ah, al = _dd_add(ah, al, hi[i, f], lo[i, f])
            for p in range(start, stop):
                j = indices[p]
                ah, al = _dd_add(ah, al, hi[j, f], lo[j, f])
            denom = float(deg + 1) if self_loops else float(deg)
            qh, ql = _dd_div_double(ah, al, denom)
            out_hi[i, f] = qh
            out_lo[i, f] = ql


def dd_row_mean(indptr, indices, hi, lo, self_loops=False):
    out_hi = np.empty_like(hi)
    out_lo = np.empty_like(lo)
    _dd_row_mean(indptr, indices, hi, lo, bool(self_loops), out_hi, out_lo)
    return out_hi, out_lo


@njit(cache=True)
def _floyd(counts, pops, offsets, uniforms, out):
    for p in range(counts.shape[0]):
        k = counts[p]
        m = pops[p]
        off = offsets[p]
        for s in range(k):
            j = m - k + s
            r = np.int64(np.floor(uniforms[off + s] * (j + 1)))
            if r > j:
                r = j
            seen = False
            for q in range(s):
                if out[off + q] == r:
                    seen = True
                    break
            out[off + s] = j if seen else r


def floyd_positions(counts, pops, uniforms):
    counts = np.asarray(counts, dtype=np.int64)
    pops = np.asarray(pops, dtype=np.int64)
    offsets = np.concatenate((np.zeros(1, np.int64), np.cumsum(counts)))
    out = np.empty(offsets[-1], dtype=np.int64)
    _floyd(counts, pops, offsets, np.asarray(uniforms, dtype=np.float64), out)
    return out
