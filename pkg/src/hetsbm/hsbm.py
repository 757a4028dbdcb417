"""Heterophilous stochastic block model: parameters, pattern families, sampling.

A node of class ``k`` draws its incoming edges so that, on average, it has
``dbar[k]`` neighbours distributed over classes according to row ``k`` of the
neighbourhood-distribution matrix ``mhat``. Node features are isotropic
Gaussians around orthogonal class means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DimensionError, InfeasibleModel, OutOfRange
from .kernels import floyd_positions

__all__ = [
    "HsbmParams",
    "GraphSample",
    "derive_edge_probabilities",
    "sample_labels",
    "sample_graph",
    "sample_features",
    "sample_hsbm",
    "pattern_family_a",
    "pattern_family_homophilous",
    "pattern_family_group",
    "pattern_from_spec",
]

# Above this node count edges are drawn per (node, class) with binomial counts
# instead of one uniform per ordered pair.
DENSE_SAMPLER_MAX_N = 10_000

_ROW_TOL = 1e-12


def _frozen(a, dtype=np.float64):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HsbmParams:
    """Full generative specification of an HSBM instance.

    ``dbar`` may be given as a scalar, in which case every class shares it.
    Class means are ``mean_scale * e_k`` so ``gamma = mean_scale * sqrt(2)``.
    """

    n: int
    c: int
    d: int
    eta: np.ndarray
    mhat: np.ndarray
    dbar: np.ndarray
    sigma: float = 0.6
    mean_scale: float = 1.0
    delta: float = 0.0
    self_loops: bool = False

    def __post_init__(self):
        c = int(self.c)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "mean_scale", float(self.mean_scale))
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "self_loops", bool(self.self_loops))
        dbar = np.asarray(self.dbar, dtype=np.float64)
        if dbar.ndim == 0:
            dbar = np.full(c, float(dbar))
        object.__setattr__(self, "eta", _frozen(self.eta))
        object.__setattr__(self, "mhat", _frozen(self.mhat))
        object.__setattr__(self, "dbar", _frozen(dbar))
        self._validate()

    def _validate(self):
        if self.c < 2:
            raise ConfigError(f"need at least 2 classes, got c={self.c}")
        if self.n < self.c:
            raise ConfigError(f"n={self.n} is smaller than c={self.c}")
        if self.d < 1:
            raise ConfigError(f"feature dimension must be positive, got d={self.d}")
        if self.eta.shape != (self.c,):
            raise ConfigError(f"eta must have length {self.c}")
        if np.any(self.eta <= 0) or abs(self.eta.sum() - 1.0) > _ROW_TOL:
            raise ConfigError("eta must be strictly positive and sum to 1")
        if self.mhat.shape != (self.c, self.c):
            raise ConfigError(f"mhat must be {self.c}x{self.c}, got {self.mhat.shape}")
        if np.any(self.mhat < 0):
            raise OutOfRange("mhat has negative entries")
        rows = self.mhat.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > _ROW_TOL):
            raise ConfigError(f"mhat rows must sum to 1, got {rows}")
        if self.dbar.shape != (self.c,):
            raise ConfigError(f"dbar must have length {self.c}")
        if np.any(self.dbar <= 0) or np.any(self.dbar >= self.n):
            raise OutOfRange("every dbar_k must lie in (0, n)")
        if not self.sigma > 0:
            raise OutOfRange("sigma must be positive")
        if self.delta < 0:
            raise OutOfRange("delta must be non-negative")
        if not self.mean_scale > 0:
            raise OutOfRange("mean_scale must be positive")

    @classmethod
    def synthetic(cls, mhat, *, n=1000, d=None, sigma=0.6, dbar=25.0,
                  delta=0.0, mean_scale=1.0, self_loops=False) -> "HsbmParams":
        """Equal class priors; ``d`` defaults to ``c``."""
        mhat = np.asarray(mhat, dtype=np.float64)
        c = mhat.shape[0]
        return cls(n=n, c=c, d=c if d is None else d, eta=np.full(c, 1.0 / c),
                   mhat=mhat, dbar=dbar, sigma=sigma, mean_scale=mean_scale,
                   delta=delta, self_loops=self_loops)

    def replace(self, **changes) -> "HsbmParams":
        kw = self.to_dict()
        kw.update(changes)
        return HsbmParams(**kw)

    @property
    def gamma(self) -> float:
        return self.mean_scale * math.sqrt(2.0)

    @property
    def means(self) -> np.ndarray:
        """``c x d`` matrix of class means."""
        if self.d < self.c:
            raise DimensionError(f"orthogonal means need d >= c (d={self.d}, c={self.c})")
        mu = np.zeros((self.c, self.d))
        mu[np.arange(self.c), np.arange(self.c)] = self.mean_scale
        return mu

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "HsbmParams":
        return cls(**data)


@dataclass(frozen=True)
class GraphSample:
    """One sampled graph.

    ``adjacency[i, j]`` is true when node ``i`` has an incoming edge from ``j``.
    ``features`` and ``node_dists`` are ``None`` when unknown (for instance on a
    graph loaded from disk without a features file).
    """

    labels: np.ndarray
    adjacency: sp.csr_matrix
    features: Optional[np.ndarray] = None
    node_dists: Optional[np.ndarray] = None
    c: Optional[int] = None
    capped_count: int = 0
    degrees: np.ndarray = field(init=False)
    zero_degree_count: int = field(init=False)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        adj = sp.csr_matrix(self.adjacency, dtype=bool)
        adj.sum_duplicates()
        adj.sort_indices()
        c = int(labels.max()) + 1 if self.c is None else int(self.c)
        if self.c is None and labels.size == 0:
            c = 0
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "c", c)
        deg = np.diff(adj.indptr).astype(np.int64)
        object.__setattr__(self, "degrees", deg)
        object.__setattr__(self, "zero_degree_count", int(np.count_nonzero(deg == 0)))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.nnz)

    def csr_arrays(self):
        """``(indptr, indices)`` as int64, the layout the kernels expect."""
        return (self.adjacency.indptr.astype(np.int64, copy=False),
                self.adjacency.indices.astype(np.int64, copy=False))

    def with_features(self, features) -> "GraphSample":
        return GraphSample(self.labels, self.adjacency, features, self.node_dists,
                           self.c, self.capped_count)


def _seedseq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def derive_edge_probabilities(params: HsbmParams) -> np.ndarray:
    """Per-pair edge probabilities ``m_kt = (dbar_k / n) * mhat_kt / eta_t``."""
    mhat = np.asarray(params.mhat, dtype=np.float64)
    if np.any(mhat < 0):
        raise OutOfRange("mhat has negative entries")
    eta = np.asarray(params.eta, dtype=np.float64)
    if np.any(eta <= 0):
        raise OutOfRange("class priors must be positive")
    dbar = np.broadcast_to(np.asarray(params.dbar, dtype=np.float64), (mhat.shape[0],))
    m = (dbar[:, None] / params.n) * mhat / eta[None, :]
    if np.any(m > 1.0):
        k, t = np.unravel_index(int(np.argmax(m)), m.shape)
        raise InfeasibleModel(
            f"edge probability m[{k},{t}]={m[k, t]:.4g} exceeds 1; "
            f"dbar={dbar[k]:g} is too large for class sizes at n={params.n}")
    return m


def sample_labels(params, rng_seed) -> np.ndarray:
    """I.i.d. categorical labels drawn from ``params.eta``."""
    rng = np.random.default_rng(_seedseq(rng_seed))
    eta = np.asarray(params.eta, dtype=np.float64)
    return rng.choice(len(eta), size=int(params.n), p=eta / eta.sum()).astype(np.int64)


def _node_distributions(params: HsbmParams, labels, rng) -> np.ndarray:
    base = params.mhat[labels]
    if params.delta == 0:
        return base.copy()
    noisy = base + rng.normal(0.0, params.delta, size=base.shape)
    np.clip(noisy, 0.0, None, out=noisy)
    s = noisy.sum(axis=1, keepdims=True)
    bad = s[:, 0] <= 0
    noisy[bad] = base[bad]
    s[bad] = 1.0
    return noisy / s


def _node_probabilities(params: HsbmParams, labels, node_dists):
    # n * eta_t rather than |C_t| keeps the delta=0 case identical to m_kt
    p = (params.dbar[labels][:, None] * node_dists) / (params.n * params.eta[None, :])
    over = p > 1.0
    capped = int(np.count_nonzero(over))
    if capped:
        p = np.minimum(p, 1.0)
    return p, capped


def _sample_dense(p_node, labels, rng, chunk_cells=1 << 22):
    n = len(labels)
    rows_per = max(1, chunk_cells // n)
    indptr = [np.zeros(1, np.int64)]
    indices = []
    total = 0
    for lo in range(0, n, rows_per):
        hi = min(n, lo + rows_per)
        u = rng.random((hi - lo, n))
        hit = u < p_node[lo:hi][:, labels]
        hit[np.arange(hi - lo), np.arange(lo, hi)] = False
        r, col = np.nonzero(hit)
        counts = np.bincount(r, minlength=hi - lo)
        indptr.append(total + np.cumsum(counts))
        total += len(col)
        indices.append(col)
    indptr = np.concatenate(indptr)
    indices = np.concatenate(indices) if indices else np.zeros(0, np.int64)
    data = np.ones(len(indices), dtype=bool)
    return sp.csr_matrix((data, indices, indptr), shape=(n, n))


def _sample_sparse(p_node, labels, c, rng):
    n = len(labels)
    members = [np.nonzero(labels == t)[0] for t in range(c)]
    sizes = np.array([len(m) for m in members], dtype=np.int64)
    # rank of every node inside its own class, used to skip self-edges
    rank = np.empty(n, dtype=np.int64)
    for t in range(c):
        rank[members[t]] = np.arange(sizes[t])
    pops = sizes[None, :] - (labels[:, None] == np.arange(c)[None, :])
    counts = rng.binomial(pops, p_node).astype(np.int64)
    flat_counts = counts.ravel()
    uniforms = rng.random(int(flat_counts.sum()))
    pos = floyd_positions(flat_counts, pops.ravel(), uniforms)

    rows = np.repeat(np.arange(n, dtype=np.int64), counts.sum(axis=1))
    cls = np.repeat(np.tile(np.arange(c, dtype=np.int64), n), flat_counts)
    same = cls == labels[rows]
    pos = pos + (same & (pos >= rank[rows]))
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    pool = np.concatenate(members) if n else np.zeros(0, np.int64)
    cols = pool[offsets[cls] + pos]
    data = np.ones(len(cols), dtype=bool)
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def sample_graph(params: HsbmParams, labels, rng_seed, *, method: str = "auto") -> GraphSample:
    """Draw incoming edges for every node.

    With ``delta = 0`` each ordered pair ``(i, j)``, ``i != j``, is an edge
    independently with probability ``m[labels[i], labels[j]]``. With noise,
    each node first perturbs its neighbourhood distribution, then draws edges
    with per-pair probability ``dbar_k * m_i[t] / (n * eta_t)``, capped at 1.

    ``method`` is ``"dense"`` (one uniform per ordered pair, so runs that differ
    only in ``delta`` share their random numbers), ``"sparse"`` (binomial counts
    plus uniform subsets, linear in the edge count) or ``"auto"``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != params.n:
        raise DimensionError(f"expected {params.n} labels, got {len(labels)}")
    if labels.size and (labels.min() < 0 or labels.max() >= params.c):
        raise OutOfRange("labels must lie in [0, c)")
    derive_edge_probabilities(params)
    edge_ss, noise_ss = _seedseq(rng_seed).spawn(2)
    node_dists = _node_distributions(params, labels, np.random.default_rng(noise_ss))
    p_node, capped = _node_probabilities(params, labels, node_dists)
    rng = np.random.default_rng(edge_ss)
    if method == "auto":
        method = "dense" if params.n <= DENSE_SAMPLER_MAX_N else "sparse"
    if method == "dense":
        adj = _sample_dense(p_node, labels, rng)
    elif method == "sparse":
        adj = _sample_sparse(p_node, labels, params.c, rng)
    else:
        raise ConfigError(f"unknown sampling method {method!r}")
    return GraphSample(labels, adj, None, node_dists, params.c, capped)


def sample_features(params: HsbmParams, labels, rng_seed) -> np.ndarray:
    """``mean_scale * e_label + sigma * N(0, I_d)`` for every node."""
    if params.d < params.c:
        raise DimensionError(f"orthogonal means need d >= c (d={params.d}, c={params.c})")
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(_seedseq(rng_seed))
    x = rng.standard_normal((len(labels), params.d)) * params.sigma
    x[np.arange(len(labels)), labels] += params.mean_scale
    return x


def sample_hsbm(params: HsbmParams, seed, *, method: str = "auto") -> GraphSample:
    """Labels, edges and features from independent streams of one master seed.

    Changing ``delta`` leaves labels and features untouched, and with the
    dense sampler the edge uniforms are shared as well.
    """
    s_labels, s_edges, s_features = _seedseq(seed).spawn(3)
    labels = sample_labels(params, s_labels)
    graph = sample_graph(params, labels, s_edges, method=method)
    return graph.with_features(sample_features(params, labels, s_features))


def pattern_family_a(a: float, c: int = 5) -> np.ndarray:
    """Heterophilous family: ``a`` on the diagonal, ``2a`` on the next class
    (cyclically), the remainder spread evenly over the other ``c - 2`` classes."""
    if c < 3:
        raise ConfigError("pattern_family_a needs c >= 3")
    rest = (1.0 - 3.0 * a) / (c - 2)
    if a < 0 or rest < -1e-15:
        raise OutOfRange(f"a={a} gives negative entries for c={c}")
    rest = max(rest, 0.0)
    m = np.full((c, c), rest)
    idx = np.arange(c)
    m[idx, idx] = a
    m[idx, (idx + 1) % c] = 2.0 * a
    return m


def pattern_family_homophilous(a1: float, c: int = 5) -> np.ndarray:
    """``a1`` on the diagonal, ``(1 - a1) / (c - 1)`` elsewhere."""
    if not 0.0 <= a1 <= 1.0:
        raise OutOfRange(f"a1={a1} outside [0, 1]")
    if c < 2:
        raise ConfigError("need c >= 2")
    m = np.full((c, c), (1.0 - a1) / (c - 1))
    np.fill_diagonal(m, a1)
    return m


def pattern_family_group(a2: float) -> np.ndarray:
    """Five classes in two groups, {0, 1} and {2, 3, 4}."""
    if not 0.0 <= a2 <= 0.2 + 1e-15:
        raise OutOfRange(f"a2={a2} outside [0, 0.2]")
    a = a2
    b = a + 0.2
    cc = (0.8 - 2.0 * a) / 3.0
    d = max((0.6 - 3.0 * a) / 2.0, 0.0)
    return np.array([
        [a, b, cc, cc, cc],
        [b, a, cc, cc, cc],
        [d, d, a, b, b],
        [d, d, b, a, b],
        [d, d, b, b, a],
    ])


def pattern_from_spec(spec: str, c: int = 5) -> np.ndarray:
    """Parse ``a=<v>``, ``homophilous=<v>``, ``group=<v>`` or ``file=<path>``.

    A pattern file holds one matrix row per line, whitespace or comma separated.
    """
    if "=" not in spec:
        raise ConfigError(f"pattern must look like kind=value, got {spec!r}")
    kind, _, value = spec.partition("=")
    kind = kind.strip().lower()
    if kind == "file":
        text = Path(value).read_text()
        rows = [r.replace(",", " ").split() for r in text.splitlines() if r.strip()]
        try:
            m = np.array([[float(v) for v in r] for r in rows])
        except ValueError as exc:
            raise ConfigError(f"{value}: {exc}") from None
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError(f"{value}: pattern matrix must be square")
        return m
    try:
        v = float(value)
    except ValueError:
        raise ConfigError(f"bad pattern value {value!r}") from None
    if kind == "a":
        return pattern_family_a(v, c)
    if kind == "homophilous":
        return pattern_family_homophilous(v, c)
    if kind == "group":
        return pattern_family_group(v)
    raise ConfigError(f"unknown pattern kind {kind!r}")
