"""Closed-form separability quantities.

Two Gaussian classes with means ``gamma`` apart and isotropic std ``sigma``
are separated by the Bayes boundary with per-class accuracy given by
:func:`pairwise_accuracy`. A graph convolution rescales the effective
signal-to-noise ratio of every class pair by a *separability gain* ``F_tk``;
pairs with a gain above the threshold ``varsigma`` become easier to separate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import ndtr

from .errors import AssumptionViolation, DegeneratePattern, OutOfRange

__all__ = [
    "SeparabilityInputs",
    "GainReport",
    "std_normal_cdf",
    "pairwise_accuracy",
    "pairwise_accuracy_baseline",
    "separability",
    "separability_matrix",
    "gain_baseline",
    "gain_single_gc",
    "gain_noisy_gc",
    "mhat_power",
    "mhat_power_differences",
    "gain_multi_gc_approx",
    "gain_multi_gc_dense_limit",
    "gain_multi_gc_exact",
    "q_frobenius_sq",
    "multi_gc_gain_sum_bound",
    "classify_pattern",
    "error_upper_bound",
    "DEFAULT_VARSIGMA",
    "SYNTHETIC_VARSIGMA",
    "REAL_VARSIGMA",
]

DEFAULT_VARSIGMA = 1.0
SYNTHETIC_VARSIGMA = 1.2
REAL_VARSIGMA = 0.2

# relative spread of class degrees tolerated where equal degrees are assumed
DEGREE_SPREAD_TOL = 0.10


@dataclass(frozen=True)
class SeparabilityInputs:
    gamma: float
    sigma: float
    eta: np.ndarray
    dbar: np.ndarray
    mhat: np.ndarray
    n: int
    delta: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0 or not self.sigma > 0:
            raise OutOfRange("gamma and sigma must be positive")
        mhat = np.array(self.mhat, dtype=np.float64)
        c = mhat.shape[0]
        dbar = np.asarray(self.dbar, dtype=np.float64)
        if dbar.ndim == 0:
            dbar = np.full(c, float(dbar))
        eta = np.asarray(self.eta, dtype=np.float64)
        if eta.ndim == 0:
            eta = np.full(c, float(eta))
        object.__setattr__(self, "mhat", mhat)
        object.__setattr__(self, "dbar", dbar)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def c(self) -> int:
        return self.mhat.shape[0]

    @classmethod
    def from_params(cls, params) -> "SeparabilityInputs":
        return cls(gamma=params.gamma, sigma=params.sigma, eta=params.eta,
                   dbar=params.dbar, mhat=params.mhat, n=params.n, delta=params.delta)

    def with_(self, **changes) -> "SeparabilityInputs":
        kw = dict(gamma=self.gamma, sigma=self.sigma, eta=self.eta, dbar=self.dbar,
                  mhat=self.mhat, n=self.n, delta=self.delta)
        kw.update(changes)
        return SeparabilityInputs(**kw)


@dataclass(frozen=True)
class GainReport:
    kind: str
    gains: np.ndarray
    varsigma: float
    verdict: str
    min_gain: float
    max_gain: float

    @classmethod
    def from_gains(cls, kind: str, gains, varsigma: float = DEFAULT_VARSIGMA) -> "GainReport":
        g = np.array(gains, dtype=np.float64)
        g = 0.5 * (g + g.T)
        np.fill_diagonal(g, 0.0)
        off = g[~np.eye(g.shape[0], dtype=bool)]
        lo, hi = float(off.min()), float(off.max())
        return cls(kind, g, float(varsigma), _verdict(lo, hi, varsigma), lo, hi)

    def with_varsigma(self, varsigma: float) -> "GainReport":
        return GainReport.from_gains(self.kind, self.gains, varsigma)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "gains": self.gains.tolist(),
            "varsigma": self.varsigma,
            "verdict": self.verdict,
            "min_gain": self.min_gain,
            "max_gain": self.max_gain,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "GainReport":
        return cls.from_gains(data["kind"], data["gains"], data["varsigma"])


def _verdict(lo: float, hi: float, varsigma: float) -> str:
    if lo > varsigma:
        return "good"
    if hi < varsigma:
        return "bad"
    return "mixed"


def classify_pattern(gains, varsigma: Optional[float] = None) -> str:
    """``good`` if every pair gain exceeds ``varsigma``, ``bad`` if none does."""
    if isinstance(gains, GainReport):
        if varsigma is None:
            varsigma = gains.varsigma
        return _verdict(gains.min_gain, gains.max_gain, varsigma)
    g = np.asarray(gains, dtype=np.float64)
    off = g[~np.eye(g.shape[0], dtype=bool)]
    return _verdict(float(off.min()), float(off.max()),
                    DEFAULT_VARSIGMA if varsigma is None else varsigma)


def std_normal_cdf(x):
    """Standard normal CDF, accurate in both tails."""
    out = ndtr(x)
    return float(out) if np.ndim(out) == 0 else out


def pairwise_accuracy(inp: SeparabilityInputs, t: int, k: int, gain: float = 1.0):
    """``(E_t, E_k)``: the fraction of class ``t`` (resp. ``k``) nodes on the
    correct side of the pairwise Bayes boundary after a convolution with
    separability gain ``gain``. ``gain = 1`` is the raw-feature case."""
    if t == k:
        raise OutOfRange("t and k must differ")
    if not gain > 0:
        # no separation left: the boundary is decided by the priors alone
        lr = math.log(inp.eta[t] / inp.eta[k])
        return (1.0 if lr > 0 else 0.5 if lr == 0 else 0.0,
                1.0 if lr < 0 else 0.5 if lr == 0 else 0.0)
    snr = inp.gamma / (2.0 * inp.sigma) * gain
    inv = inp.sigma / inp.gamma / gain
    lr = math.log(inp.eta[t] / inp.eta[k])
    return std_normal_cdf(snr + inv * lr), std_normal_cdf(snr - inv * lr)


def pairwise_accuracy_baseline(inp: SeparabilityInputs, t: int, k: int):
    return pairwise_accuracy(inp, t, k, 1.0)


def separability(inp: SeparabilityInputs, t: int, k: int, e_t: float, e_k: float) -> float:
    """Prior-weighted mean of the two per-class accuracies."""
    wt, wk = inp.eta[t], inp.eta[k]
    return float((wt * e_t + wk * e_k) / (wt + wk))


def separability_matrix(inp: SeparabilityInputs, gains=None) -> np.ndarray:
    """``S(t, k)`` for every pair; ``gains=None`` means raw features."""
    c = inp.c
    g = np.ones((c, c)) if gains is None else np.asarray(
        gains.gains if isinstance(gains, GainReport) else gains)
    s = np.ones((c, c))
    for t in range(c):
        for k in range(t + 1, c):
            e_t, e_k = pairwise_accuracy(inp, t, k, g[t, k])
            s[t, k] = s[k, t] = separability(inp, t, k, e_t, e_k)
    return s


def error_upper_bound(S, eta) -> float:
    """Union bound on the overall error: ``sum_{t<k} (eta_t + eta_k)(1 - S_tk)``."""
    S = np.asarray(S, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    iu = np.triu_indices(len(eta), k=1)
    return float(np.sum((eta[iu[0]] + eta[iu[1]]) * (1.0 - S[iu])))


def _pair_norms(rows) -> np.ndarray:
    diff = rows[:, None, :] - rows[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def gain_baseline(inp: SeparabilityInputs, varsigma: float = DEFAULT_VARSIGMA) -> GainReport:
    c = inp.c
    return GainReport.from_gains("baseline", np.ones((c, c)), varsigma)


def gain_single_gc(inp: SeparabilityInputs, varsigma: float = DEFAULT_VARSIGMA) -> GainReport:
    """``F_tk = ||sqrt(D_k) m_k - sqrt(D_t) m_t|| / sqrt(2)``."""
    rows = np.sqrt(inp.dbar)[:, None] * inp.mhat
    return GainReport.from_gains("single_gc", _pair_norms(rows) / math.sqrt(2.0), varsigma)


def _common_degree(dbar) -> float:
    dbar = np.asarray(dbar, dtype=np.float64)
    mean = float(dbar.mean())
    spread = float((dbar.max() - dbar.min()) / mean)
    if spread > DEGREE_SPREAD_TOL:
        raise AssumptionViolation(
            f"class degrees differ by {spread:.1%} (> {DEGREE_SPREAD_TOL:.0%}); "
            "equal degrees are required here")
    return mean


def noise_rho(inp: SeparabilityInputs) -> float:
    d = _common_degree(inp.dbar)
    return math.sqrt(inp.gamma ** 2 * inp.delta ** 2 / (2.0 * inp.sigma ** 2) + 1.0 / d)


def gain_noisy_gc(inp: SeparabilityInputs, varsigma: float = DEFAULT_VARSIGMA) -> GainReport:
    """Gain under topological noise of std ``delta``.

    Equivalent to :func:`gain_single_gc` with the degree shrunk to
    ``D / (1 + r delta^2)``, ``r = gamma^2 D / (2 sigma^2)``.
    """
    rho = noise_rho(inp)
    g = _pair_norms(inp.mhat) / (math.sqrt(2.0) * rho)
    return GainReport.from_gains("noisy_gc", g, varsigma)


def mhat_power(mhat, l: int) -> np.ndarray:
    """``mhat ** l``, renormalised to row sums of 1 if rounding drifted."""
    if l < 0:
        raise OutOfRange("l must be non-negative")
    p = np.linalg.matrix_power(np.asarray(mhat, dtype=np.float64), int(l))
    rows = p.sum(axis=1)
    if np.any(np.abs(rows - 1.0) > 1e-12):
        p = p / rows[:, None]
    return p


def mhat_power_differences(mhat, l: int):
    """Pairwise differences ``m_k^(l) - m_t^(l)`` of the rows of ``mhat ** l``.

    Returns ``(diffs, log_scale)`` with the true differences equal to
    ``diffs * exp(log_scale)``. The differences are propagated directly,
    ``v <- v @ mhat``, projected back onto the sum-zero subspace (rounding
    would otherwise leak a non-decaying stationary component) and
    renormalised every step. They keep full relative accuracy long after the
    rows of ``mhat ** l`` agree to machine precision.
    ``diffs`` has shape ``(c, c, c)``, indexed ``[k, t, :]``.
    """
    m = np.asarray(mhat, dtype=np.float64)
    c = m.shape[0]
    eye = np.eye(c)
    v = (eye[:, None, :] - eye[None, :, :]).reshape(c * c, c)
    log_scale = 0.0
    for _ in range(int(l)):
        v = v @ m
        v -= v.mean(axis=1, keepdims=True)
        s = float(np.abs(v).max())
        if s == 0.0:
            break
        v /= s
        log_scale += math.log(s)
    return v.reshape(c, c, c), log_scale


def _sq_norms(diffs) -> np.ndarray:
    return np.einsum("ktj,ktj->kt", diffs, diffs)


def gain_multi_gc_approx(inp: SeparabilityInputs, l: int,
                         varsigma: float = DEFAULT_VARSIGMA) -> GainReport:
    """Approximate ``l``-layer gain
    ``sqrt(c ||dm_kt||^2 / sum_{k1,k2} ||dm_k1k2||^2) * D / ln n``.

    Only meaningful for ``l > 1``; ``l = 1`` falls back to the single-layer gain
    with a common degree.
    """
    if l < 1:
        raise OutOfRange("l must be at least 1")
    if l == 1:
        d = _common_degree(inp.dbar)
        rep = gain_single_gc(inp.with_(dbar=np.full(inp.c, d)), varsigma)
        return GainReport.from_gains("multi_gc(1)", rep.gains, varsigma)
    diffs, _ = mhat_power_differences(inp.mhat, l)
    sq = _sq_norms(diffs)
    total = float(sq.sum())
    if total < 1e-300:
        raise DegeneratePattern(f"all rows of mhat^{l} coincide; the gain is undefined")
    d = _common_degree(inp.dbar)
    g = np.sqrt(inp.c * sq / total) * d / math.log(inp.n)
    return GainReport.from_gains(f"multi_gc({l})", g, varsigma)


def gain_multi_gc_dense_limit(inp: SeparabilityInputs, l: int,
                              varsigma: float = DEFAULT_VARSIGMA) -> GainReport:
    """Exact gain in the regime where every ``l``-step walk distribution is
    concentrated on its class profile: ``sqrt(n c ||dm_kt||^2 / sum ||dm||^2)``
    for equal classes. Valid when the walk noise is negligible, i.e. degrees
    far above ``n / D^(l-1)``."""
    diffs, _ = mhat_power_differences(inp.mhat, l)
    sq = _sq_norms(diffs)
    total = float(sq.sum())
    if total < 1e-300:
        raise DegeneratePattern(f"all rows of mhat^{l} coincide; the gain is undefined")
    g = np.sqrt(inp.n * inp.c * sq / total)
    return GainReport.from_gains(f"multi_gc({l})", g, varsigma)


def multi_gc_gain_sum_bound(c: int, dbar: float, n: int) -> float:
    """Lower bound ``sqrt(c) D / ln n`` on the sum of approximate gains."""
    return math.sqrt(c) * dbar / math.log(n)


def _row_normalised(adjacency: sp.csr_matrix) -> sp.csr_matrix:
    adj = sp.csr_matrix(adjacency, dtype=np.float64)
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv = np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0)
    walk = sp.diags(inv) @ adj
    zero = np.nonzero(deg == 0)[0]
    if zero.size:
        walk = walk + sp.csr_matrix((np.ones(zero.size), (zero, zero)), shape=adj.shape)
    return sp.csr_matrix(walk)


def q_frobenius_sq(adjacency, l: int, method: str = "centered") -> float:
    """``||Q^(l)||_F^2 = sum_{i,j} ||S_i - S_j||^2`` for ``S = (D^-1 A)^l``.

    ``centered`` uses ``2 n sum_i ||S_i - mean(S)||^2`` and propagates the
    centred matrix, so it stays accurate when all rows nearly coincide.
    ``pairwise`` evaluates the double sum directly (O(n^3) memory-light
    reference for small graphs). Zero-degree rows act as the identity.
    """
    walk = _row_normalised(adjacency)
    n = walk.shape[0]
    if method == "centered":
        cmat = np.eye(n) - 1.0 / n
        for _ in range(int(l)):
            cmat = walk @ cmat
            cmat -= cmat.mean(axis=0, keepdims=True)
        return float(2.0 * n * np.sum(cmat * cmat))
    if method == "pairwise":
        s = np.eye(n)
        for _ in range(int(l)):
            s = walk @ s
        total = 0.0
        for i in range(n):
            diff = s - s[i]
            total += float(np.sum(diff * diff))
        return total
    raise ValueError(f"unknown method {method!r}")


def gain_multi_gc_exact(graph, l: int, mhat=None, varsigma: float = DEFAULT_VARSIGMA,
                        method: str = "centered") -> GainReport:
    """Exact ``l``-layer gain ``n ||m_k^(l) - m_t^(l)|| / ||Q^(l)||_F`` on a
    sampled graph. ``mhat`` defaults to the graph's empirical matrix."""
    if l < 0:
        raise OutOfRange("l must be non-negative")
    if mhat is None:
        from .analyze import empirical_mhat
        mhat, _ = empirical_mhat(graph)
    diffs, log_scale = mhat_power_differences(mhat, l)
    q2 = q_frobenius_sq(graph.adjacency, l, method=method)
    n = graph.n
    if q2 <= 0.0:
        raise DegeneratePattern("all propagated rows coincide; the gain is undefined")
    norms = np.sqrt(_sq_norms(diffs)) * math.exp(log_scale)
    return GainReport.from_gains(f"multi_gc({l})", n * norms / math.sqrt(q2), varsigma)
