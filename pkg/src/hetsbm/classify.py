"""Bayes rules, their linear-network instances, and small trainable models.

Trainable models are plain numpy: full-batch softmax regression, optionally
with hidden layers, trained on cross-entropy computed in log space.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .aggregate import AggregationConfig, aggregate_l, standardize
from .dd import DDArray
from .errors import AssumptionViolation, ConfigError, DimensionError

__all__ = [
    "BayesModel",
    "LinearNet",
    "ConfusionMatrix",
    "TrainConfig",
    "Split",
    "TrainResult",
    "PearsonResult",
    "bayes_raw",
    "bayes_aggregated",
    "bayes_to_linear",
    "split_nodes",
    "train_mlp",
    "train_gcn",
    "confusion",
    "pearson_gain_vs_confusion",
]


# ---------------------------------------------------------------- Bayes rules

@dataclass(frozen=True)
class BayesModel:
    """Closed-form Bayes classifier for isotropic Gaussian classes.

    ``raw``:        score_k = <x, mu_k> + var_k * log_prior_k
    ``aggregated``: score_k = log_prior_k - log(std_k) - ||x - mu_k||^2 / (2 var_k)

    Ties go to the lowest class index.
    """

    means: np.ndarray
    log_prior_terms: np.ndarray
    variance_terms: np.ndarray
    kind: str

    def scores(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.kind == "raw":
            return x @ self.means.T + self.variance_terms * self.log_prior_terms
        sq = (np.sum(x * x, axis=1)[:, None] - 2.0 * x @ self.means.T
              + np.sum(self.means * self.means, axis=1)[None, :])
        return (self.log_prior_terms - 0.5 * np.log(self.variance_terms)
                - sq / (2.0 * self.variance_terms))

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.scores(x), axis=1)


def bayes_raw(params) -> BayesModel:
    c = params.c
    return BayesModel(params.means, np.log(params.eta), np.full(c, params.sigma ** 2), "raw")


def bayes_aggregated(params) -> BayesModel:
    """Bayes rule on once-aggregated features of a noise-free HSBM.

    Aggregated class ``k`` features are Gaussian around ``sum_t mhat_kt mu_t``
    with variance ``sigma^2 / dbar_k`` per coordinate.
    """
    if params.delta != 0:
        raise AssumptionViolation("the aggregated Bayes rule assumes delta = 0")
    means = params.mhat @ params.means
    var = params.sigma ** 2 / np.asarray(params.dbar, dtype=np.float64)
    return BayesModel(means, np.log(params.eta), var, "aggregated")


@dataclass(frozen=True)
class LinearNet:
    weight: np.ndarray  # d x c
    bias: np.ndarray    # c

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise DimensionError("weight must be d x c and bias length c")

    def logits(self, x) -> np.ndarray:
        return np.atleast_2d(np.asarray(x, dtype=np.float64)) @ self.weight + self.bias

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)


def bayes_to_linear(model: BayesModel) -> LinearNet:
    """Linear layer whose argmax reproduces ``model`` exactly.

    The aggregated rule is linear only when every class shares one variance,
    i.e. equal class degrees.
    """
    if model.kind == "raw":
        return LinearNet(model.means.T.copy(), model.variance_terms * model.log_prior_terms)
    var = model.variance_terms
    if np.any(var != var[0]):
        raise AssumptionViolation("aggregated Bayes rule is linear only for equal degrees")
    mu = model.means
    bias = var[0] * model.log_prior_terms - 0.5 * np.sum(mu * mu, axis=1)
    return LinearNet(mu.T.copy(), bias)


# ------------------------------------------------------------------- metrics

@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predictions."""

    counts: np.ndarray

    @classmethod
    def from_predictions(cls, labels, predictions, c: int) -> "ConfusionMatrix":
        counts = np.zeros((c, c), dtype=np.int64)
        np.add.at(counts, (np.asarray(labels), np.asarray(predictions)), 1)
        return cls(counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / max(self.total, 1))

    def pair_errors(self) -> np.ndarray:
        """``counts[t, k] + counts[k, t]``: confusions between ``t`` and ``k``."""
        return self.counts + self.counts.T


def confusion(model, features, labels, node_set=None, c: Optional[int] = None) -> ConfusionMatrix:
    labels = np.asarray(labels)
    idx = np.arange(len(labels)) if node_set is None else np.asarray(node_set)
    if idx.size == 0:
        raise ConfigError("node_set is empty")
    if c is None:
        c = int(labels.max()) + 1
    pred = model.predict(np.asarray(features)[idx])
    return ConfusionMatrix.from_predictions(labels[idx], pred, c)


@dataclass(frozen=True)
class PearsonResult:
    r: float
    degenerate: bool
    x: np.ndarray
    y: np.ndarray

    def __float__(self):
        return self.r


def pearson_gain_vs_confusion(gains, cm_gcn: ConfusionMatrix, cm_mlp: ConfusionMatrix) -> PearsonResult:
    """Correlation over class pairs between the gain ``F_tk`` and the change in
    ``t``/``k`` confusions when the graph convolution is added.

    A strongly negative value means pairs with larger gains are confused less.
    When either series is constant the correlation is undefined: ``r`` is
    ``nan`` and ``degenerate`` is set.
    """
    g = np.asarray(getattr(gains, "gains", gains), dtype=np.float64)
    iu = np.triu_indices(g.shape[0], k=1)
    x = g[iu]
    y = (cm_gcn.pair_errors() - cm_mlp.pair_errors())[iu].astype(np.float64)
    if np.ptp(x) <= 1e-12 * max(1.0, np.abs(x).max()) or np.ptp(y) == 0:
        return PearsonResult(float("nan"), True, x, y)
    r = float(np.corrcoef(x, y)[0, 1])
    return PearsonResult(max(-1.0, min(1.0, r)), False, x, y)


# ------------------------------------------------------------------ training

@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters for :func:`train_mlp` / :func:`train_gcn`.

    Each of ``hidden_grid``, ``lr_grid``, ``weight_decay_grid`` and
    ``dropout_grid`` lists the values searched; the best point on validation
    accuracy wins. ``hidden`` entries are tuples of hidden widths, ``()`` being
    a single linear layer.
    """

    hidden_grid: Sequence[tuple] = ((),)
    lr_grid: Sequence[float] = (0.01,)
    weight_decay_grid: Sequence[float] = (0.0,)
    dropout_grid: Sequence[float] = (0.0,)
    epochs: int = 500
    optimizer: str = "adam"
    activation: str = "relu"
    standardize: bool = True

    def __post_init__(self):
        for name in ("hidden_grid", "lr_grid", "weight_decay_grid", "dropout_grid"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ConfigError(f"{name} is empty")
            object.__setattr__(self, name, vals)
        object.__setattr__(self, "hidden_grid", tuple(tuple(h) for h in self.hidden_grid))
        if any(lr <= 0 for lr in self.lr_grid):
            raise ConfigError("learning rates must be positive")
        if int(self.epochs) < 1:
            raise ConfigError("epochs must be at least 1")
        if self.optimizer not in ("adam", "gd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.activation not in ("relu", "identity"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if any(not 0 <= p < 1 for p in self.dropout_grid):
            raise ConfigError("dropout must lie in [0, 1)")

    @classmethod
    def synthetic(cls, **kw) -> "TrainConfig":
        return cls(**kw)

    @classmethod
    def full_grid(cls, depth: int = 1, **kw) -> "TrainConfig":
        """The full search: widths 16..256, three learning rates, four weight
        decays, three dropout rates."""
        widths = (16, 32, 64, 128, 256)
        base = dict(
            hidden_grid=tuple((w,) * depth for w in widths),
            lr_grid=(0.001, 0.005, 0.01),
            weight_decay_grid=(0.0, 1e-5, 5e-4, 1e-4),
            dropout_grid=(0.0, 0.2, 0.5),
            epochs=500,
        )
        base.update(kw)
        return cls(**base)

    def points(self):
        for h, lr, wd, p in itertools.product(self.hidden_grid, self.lr_grid,
                                              self.weight_decay_grid, self.dropout_grid):
            yield {"hidden": list(h), "lr": lr, "weight_decay": wd, "dropout": p}


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def split_nodes(n: int, rng_seed, fractions=(0.6, 0.2, 0.2)) -> Split:
    """Random disjoint train/val/test split covering every node."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError("split fractions must be three numbers summing to 1")
    perm = np.random.default_rng(rng_seed).permutation(n)
    n_tr = int(round(fractions[0] * n))
    n_va = int(round(fractions[1] * n))
    return Split(np.sort(perm[:n_tr]), np.sort(perm[n_tr:n_tr + n_va]),
                 np.sort(perm[n_tr + n_va:]))


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=1, keepdims=True))


class _Net:
    """Feed-forward net; an optional propagation matrix is applied to the
    input of the last layer (the ``second_layer`` GCN variant)."""

    def __init__(self, sizes, activation, rng, prop=None):
        self.weights = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            lim = math.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
            self.weights.append(np.zeros(fan_out))
        self.activation = activation
        self.prop = prop

    @property
    def layers(self):
        return len(self.weights) // 2

    def forward(self, x, dropout=0.0, rng=None):
        cache = []
        h = x
        for li in range(self.layers):
            w, b = self.weights[2 * li], self.weights[2 * li + 1]
            mask = None
            if dropout > 0 and rng is not None:
                mask = (rng.random(h.shape) >= dropout) / (1.0 - dropout)
                h = h * mask
            last = li == self.layers - 1
            if last and self.prop is not None:
                h = self.prop @ h
            z = h @ w + b
            cache.append((h, mask, z))
            h = z if last or self.activation == "identity" else np.maximum(z, 0.0)
        return h, cache

    def backward(self, grad_out, cache):
        grads = [None] * len(self.weights)
        g = grad_out
        for li in reversed(range(self.layers)):
            h, mask, z = cache[li]
            last = li == self.layers - 1
            if not last and self.activation == "relu":
                g = g * (z > 0)
            grads[2 * li] = h.T @ g
            grads[2 * li + 1] = g.sum(axis=0)
            if li == 0:
                break
            g = g @ self.weights[2 * li].T
            if last and self.prop is not None:
                g = self.prop.T @ g
            if mask is not None:
                g = g * mask
        return grads

    def snapshot(self):
        return [w.copy() for w in self.weights]


@dataclass
class TrainedModel:
    """A trained network bound to the inputs it was trained on."""

    net: _Net
    inputs: np.ndarray

    def predict(self, x=None) -> np.ndarray:
        out, _ = self.net.forward(self.inputs if x is None else x)
        return np.argmax(out, axis=1)


@dataclass
class TrainResult:
    model: TrainedModel
    accuracy: float
    val_accuracy: float
    confusion: ConfusionMatrix
    selected_hyperparams: dict
    seed: object
    best_epoch: int = 0

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "val_accuracy": self.val_accuracy,
            "confusion": self.confusion.counts.tolist(),
            "selected_hyperparams": self.selected_hyperparams,
            "seed": self.seed if isinstance(self.seed, (int, type(None))) else str(self.seed),
            "best_epoch": self.best_epoch,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _fit_one(x, labels, split, c, hp, cfg, seed, prop=None):
    rng = np.random.default_rng(seed)
    sizes = [x.shape[1], *hp["hidden"], c]
    net = _Net(sizes, cfg.activation, rng, prop)
    onehot = np.zeros((len(split.train), c))
    onehot[np.arange(len(split.train)), labels[split.train]] = 1.0
    lr, wd, p = hp["lr"], hp["weight_decay"], hp["dropout"]
    m = [np.zeros_like(w) for w in net.weights]
    v = [np.zeros_like(w) for w in net.weights]
    b1, b2, eps = 0.9, 0.999, 1e-8
    best = (-1.0, 0, net.snapshot())
    y_val = labels[split.val]
    full = prop is not None
    for epoch in range(1, cfg.epochs + 1):
        inp = x if full else x[split.train]
        out, cache = net.forward(inp, p, rng)
        logp = _log_softmax(out[split.train] if full else out)
        grad = (np.exp(logp) - onehot) / len(split.train)
        if full:
            g_full = np.zeros_like(out)
            g_full[split.train] = grad
            grad = g_full
        grads = net.backward(grad, cache)
        for i, (w, g) in enumerate(zip(net.weights, grads)):
            if wd:
                g = g + wd * w
            if cfg.optimizer == "adam":
                m[i] = b1 * m[i] + (1 - b1) * g
                v[i] = b2 * v[i] + (1 - b2) * g * g
                mh = m[i] / (1 - b1 ** epoch)
                vh = v[i] / (1 - b2 ** epoch)
                w -= lr * mh / (np.sqrt(vh) + eps)
            else:
                w -= lr * g
        ev, _ = net.forward(x if full else x[split.val])
        pred = np.argmax(ev[split.val] if full else ev, axis=1)
        acc = float(np.mean(pred == y_val)) if len(y_val) else 0.0
        if acc > best[0]:
            best = (acc, epoch, net.snapshot())
    net.weights = best[2]
    return net, best[0], best[1]


def _train(x, labels, split, cfg, rng_seed, prop=None, confusion_nodes="test"):
    if confusion_nodes not in ("test", "all"):
        raise ConfigError(f"confusion_nodes must be 'test' or 'all', got {confusion_nodes!r}")
    labels = np.asarray(labels, dtype=np.int64)
    c = int(labels.max()) + 1
    best = None
    for hp in cfg.points():
        net, val, epoch = _fit_one(x, labels, split, c, hp, cfg, rng_seed, prop)
        if best is None or val > best[1]:
            best = (net, val, epoch, hp)
    net, val, epoch, hp = best
    model = TrainedModel(net, x)
    out, _ = net.forward(x)
    pred = np.argmax(out, axis=1)
    acc = float(np.mean(pred[split.test] == labels[split.test])) if len(split.test) else 0.0
    nodes = split.test if confusion_nodes == "test" else np.arange(len(labels))
    cm = ConfusionMatrix.from_predictions(labels[nodes], pred[nodes], c)
    return TrainResult(model, acc, val, cm, hp, rng_seed, epoch)


def _prepare(x, cfg):
    if cfg.standardize:
        return standardize(x)
    if isinstance(x, DDArray):
        return x.to_float64()
    return np.asarray(x, dtype=np.float64)


def train_mlp(features, labels, split: Split, cfg: TrainConfig = TrainConfig(),
              rng_seed=0, *, confusion_nodes: str = "test") -> TrainResult:
    """Train on raw features; returns test accuracy and the confusion matrix
    over the test split (``confusion_nodes="all"``: over every node)."""
    if len(features) != len(labels):
        raise DimensionError("features and labels disagree on the node count")
    return _train(_prepare(features, cfg), labels, split, cfg, rng_seed,
                  confusion_nodes=confusion_nodes)


def _walk_matrix(graph, self_loops: bool) -> sp.csr_matrix:
    adj = sp.csr_matrix(graph.adjacency, dtype=np.float64)
    if self_loops:
        adj = adj + sp.identity(graph.n, format="csr")
    deg = np.asarray(adj.sum(axis=1)).ravel()
    walk = sp.diags(np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0)) @ adj
    zero = np.nonzero(deg == 0)[0]
    if zero.size:
        walk = walk + sp.csr_matrix((np.ones(zero.size), (zero, zero)), shape=adj.shape)
    return sp.csr_matrix(walk)


def train_gcn(graph, cfg: TrainConfig = TrainConfig(),
              agg_cfg: AggregationConfig = AggregationConfig(), rng_seed=0, *,
              split: Optional[Split] = None, features=None, mode: str = "pre",
              confusion_nodes: str = "test") -> TrainResult:
    """Train with graph convolutions.

    ``mode="pre"`` applies ``agg_cfg.layers`` convolutions (in ``agg_cfg``'s
    precision) to the features and then trains like :func:`train_mlp`.
    ``mode="second_layer"`` inserts the convolutions before the last layer of
    a network with at least one hidden layer, trained end to end in float64.
    """
    x = graph.features if features is None else features
    if x is None:
        raise ConfigError("graph has no features")
    if split is None:
        split = split_nodes(graph.n, rng_seed)
    if mode == "pre":
        agg = aggregate_l(graph, x, agg_cfg)
        return _train(_prepare(agg, cfg), graph.labels, split, cfg, rng_seed,
                      confusion_nodes=confusion_nodes)
    if mode == "second_layer":
        if any(len(h) == 0 for h in cfg.hidden_grid):
            raise ConfigError("second_layer mode needs at least one hidden layer")
        walk = _walk_matrix(graph, agg_cfg.self_loops)
        prop = sp.identity(graph.n, format="csr")
        for _ in range(agg_cfg.layers):
            prop = walk @ prop
        return _train(_prepare(x, cfg), graph.labels, split, cfg, rng_seed, prop,
                      confusion_nodes)
    raise ConfigError(f"unknown mode {mode!r}")
