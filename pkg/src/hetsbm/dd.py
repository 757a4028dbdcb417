"""Double-double ("paired double") arithmetic.

A value is stored as an unevaluated sum ``hi + lo`` with ``|lo| <= ulp(hi)/2``,
which gives roughly 32 significant decimal digits. Every function here uses
only ``+ - * /`` so the same code runs elementwise on numpy arrays and inside
numba kernels. Correctness needs strict IEEE evaluation: no FMA contraction,
no fastmath.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def quick_two_sum(a, b):
    # requires |a| >= |b|
    s = a + b
    err = b - (s - a)
    return s, err


def split(a):
    c = _SPLITTER * a
    abig = c - a
    ahi = c - abig
    alo = a - ahi
    return ahi, alo


def two_prod(a, b):
    p = a * b
    ahi, alo = split(a)
    bhi, blo = split(b)
    err = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, err


def dd_add(ahi, alo, bhi, blo):
    """IEEE-style accurate double-double addition."""
    s1, s2 = two_sum(ahi, bhi)
    t1, t2 = two_sum(alo, blo)
    s2 = s2 + t1
    s1, s2 = quick_two_sum(s1, s2)
    s2 = s2 + t2
    return quick_two_sum(s1, s2)


def dd_sub(ahi, alo, bhi, blo):
    return dd_add(ahi, alo, -bhi, -blo)


def dd_div_double(ahi, alo, b):
    q1 = ahi / b
    p1, p2 = two_prod(q1, b)
    s, e = two_sum(ahi, -p1)
    e = e - p2
    e = e + alo
    q2 = (s + e) / b
    return quick_two_sum(q1, q2)


@dataclass(frozen=True)
class DDArray:
    """An array of double-double numbers held as two float64 arrays."""

    hi: np.ndarray
    lo: np.ndarray

    @classmethod
    def from_float64(cls, x) -> "DDArray":
        x = np.array(x, dtype=np.float64)
        return cls(x, np.zeros_like(x))

    @property
    def shape(self):
        return self.hi.shape

    def __len__(self):
        return len(self.hi)

    def __getitem__(self, idx) -> "DDArray":
        return DDArray(self.hi[idx], self.lo[idx])

    def to_float64(self) -> np.ndarray:
        return self.hi + self.lo

    def column_mean(self) -> "DDArray":
        """Mean over axis 0, accumulated in double-double."""
        acc_hi = np.zeros(self.hi.shape[1:])
        acc_lo = np.zeros(self.hi.shape[1:])
        for r in range(self.hi.shape[0]):
            acc_hi, acc_lo = dd_add(acc_hi, acc_lo, self.hi[r], self.lo[r])
        return DDArray(*dd_div_double(acc_hi, acc_lo, float(self.hi.shape[0])))

    def centered(self) -> np.ndarray:
        """``x - column_mean(x)`` evaluated in double-double, rounded to float64."""
        m = self.column_mean()
        hi, lo = dd_sub(self.hi, self.lo, m.hi, m.lo)
        return hi + lo
