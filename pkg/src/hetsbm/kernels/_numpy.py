"""Pure-numpy implementations of the hot kernels.

Each function mirrors the numba kernel of the same name in ``_numba`` and
consumes the same inputs, so both backends produce identical results up to
summation order (and bit-identical results for the sampling kernel).
"""

import numpy as np

from ..dd import dd_add, dd_div_double


def row_mean(indptr, indices, x, self_loops=False):
    n = len(indptr) - 1
    deg = np.diff(indptr)
    out = x.copy()
    sums = np.zeros_like(x)
    nz = deg > 0
    if indices.size:
        starts = indptr[:-1][nz]
        sums[nz] = np.add.reduceat(x[indices], starts, axis=0)
    if self_loops:
        sums = sums + x
        denom = (deg + 1).astype(x.dtype)
        out = sums / denom[:, None]
    else:
        out[nz] = sums[nz] / deg[nz].astype(x.dtype)[:, None]
    assert out.shape[0] == n
    return out


def dd_row_mean(indptr, indices, hi, lo, self_loops=False):
    deg = np.diff(indptr)
    acc_hi = np.zeros_like(hi)
    acc_lo = np.zeros_like(lo)
    if self_loops:
        acc_hi, acc_lo = dd_add(acc_hi, acc_lo, hi, lo)
    max_deg = int(deg.max()) if deg.size else 0
    starts = indptr[:-1]
    for slot in range(max_deg):
        rows = np.nonzero(deg > slot)[0]
        j = indices[starts[rows] + slot]
        h, l = dd_add(acc_hi[rows], acc_lo[rows], hi[j], lo[j])
        acc_hi[rows] = h
        acc_lo[rows] = l
    denom = (deg + 1 if self_loops else deg).astype(np.float64)
    out_hi = hi.copy()
    out_lo = lo.copy()
    rows = denom > 0
    qh, ql = dd_div_double(acc_hi[rows], acc_lo[rows], denom[rows][:, None])
    out_hi[rows] = qh
    out_lo[rows] = ql
    return out_hi, out_lo


def floyd_positions(counts, pops, uniforms, chunk=65536):
    """Uniform ``counts[p]``-subsets of ``range(pops[p])`` for every pair ``p``.

    Floyd's algorithm, vectorised across pairs: step ``s`` of every pair is
    executed together. ``uniforms`` holds ``counts.sum()`` draws laid out pair
    after pair.
    """
    counts = np.asarray(counts, dtype=np.int64)
    pops = np.asarray(pops, dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(counts)))
    out = np.empty(offsets[-1], dtype=np.int64)
    for lo in range(0, len(counts), chunk):
        k = counts[lo:lo + chunk]
        m = pops[lo:lo + chunk]
        off = offsets[lo:lo + chunk]
        kmax = int(k.max()) if k.size else 0
        chosen = np.full((len(k), max(kmax, 1)), -1, dtype=np.int64)
        for s in range(kmax):
            act = np.nonzero(k > s)[0]
            j = m[act] - k[act] + s
            r = np.floor(uniforms[off[act] + s] * (j + 1)).astype(np.int64)
            r = np.minimum(r, j)
            seen = (chosen[act, :s] == r[:, None]).any(axis=1)
            chosen[act, s] = np.where(seen, j, r)
        for s in range(kmax):
            act = np.nonzero(k > s)[0]
            out[off[act] + s] = chosen[act, s]
    return out
