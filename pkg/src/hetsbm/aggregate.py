"""Row-normalised graph convolution ``X <- D^-1 A X`` in three precision tiers.

``single`` and ``double`` run in float32 / float64 with no promotion of
intermediates. ``extended`` keeps every value as a double-double pair
(about 32 significant digits).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from . import kernels
from .dd import DDArray
from .errors import ConfigError, DimensionError

__all__ = [
    "PRECISIONS",
    "AggregationConfig",
    "aggregate_once",
    "aggregate_l",
    "aggregate_series",
    "to_precision",
    "standardize",
    "feature_spread_stats",
]

PRECISIONS = ("single", "double", "extended")

Features = Union[np.ndarray, DDArray]


@dataclass(frozen=True)
class AggregationConfig:
    layers: int = 1
    self_loops: bool = False
    precision: str = "double"

    def __post_init__(self):
        if int(self.layers) < 0:
            raise ConfigError("layers must be non-negative")
        if self.precision not in PRECISIONS:
            raise ConfigError(f"precision must be one of {PRECISIONS}, got {self.precision!r}")
        object.__setattr__(self, "layers", int(self.layers))


def to_precision(x: Features, precision: str) -> Features:
    """Cast features to the storage type of a precision tier."""
    if precision == "extended":
        return x if isinstance(x, DDArray) else DDArray.from_float64(x)
    if isinstance(x, DDArray):
        x = x.to_float64()
    if precision == "single":
        return np.ascontiguousarray(x, dtype=np.float32)
    if precision == "double":
        return np.ascontiguousarray(x, dtype=np.float64)
    raise ConfigError(f"unknown precision {precision!r}")


def _step(indptr, indices, x: Features, self_loops: bool) -> Features:
    if isinstance(x, DDArray):
        return DDArray(*kernels.dd_row_mean(indptr, indices, x.hi, x.lo, self_loops))
    return kernels.row_mean(indptr, indices, x, self_loops)


def _check(graph, x):
    if x.shape[0] != graph.n:
        raise DimensionError(f"features have {x.shape[0]} rows, graph has {graph.n} nodes")


def aggregate_once(graph, features: Features, config: AggregationConfig = AggregationConfig()) -> Features:
    """Replace every row by the mean of its in-neighbours' rows.

    Nodes without neighbours keep their row (unless ``self_loops``).
    """
    x = to_precision(features, config.precision)
    _check(graph, x)
    indptr, indices = graph.csr_arrays()
    return _step(indptr, indices, x, config.self_loops)


def aggregate_series(graph, features: Features, config: AggregationConfig) -> Iterator[Features]:
    """Yield the features after 0, 1, ..., ``config.layers`` convolutions."""
    x = to_precision(features, config.precision)
    _check(graph, x)
    indptr, indices = graph.csr_arrays()
    yield x
    for _ in range(config.layers):
        x = _step(indptr, indices, x, config.self_loops)
        yield x


def aggregate_l(graph, features: Features, config: AggregationConfig = AggregationConfig()) -> Features:
    """``(D^-1 A)^l X`` in the configured precision.

    Returns a float32 or float64 array, or a :class:`DDArray` for ``extended``.
    """
    x = None
    for x in aggregate_series(graph, features, config):
        pass
    return x


def standardize(x: Features, precision: str = None) -> np.ndarray:
    """Per-dimension zero mean and unit variance, returned as float64.

    Centring happens in the storage precision of ``x`` (double-double for
    :class:`DDArray`), so whatever signal the tier kept survives and whatever
    it lost stays lost.
    """
    if precision is not None:
        x = to_precision(x, precision)
    if isinstance(x, DDArray):
        centred = x.centered()
    else:
        centred = (x - x.mean(axis=0, dtype=x.dtype)).astype(np.float64)
    std = centred.std(axis=0)
    std[std == 0] = 1.0
    return centred / std


def feature_spread_stats(features: Features, labels) -> dict:
    """``avg_std``: mean over dimensions of the across-node standard deviation.
    ``avg_mean_distance``: mean over class pairs of the class-mean distance."""
    if isinstance(features, DDArray):
        x = features.centered()
    else:
        x = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    avg_std = float(x.std(axis=0).mean()) if len(x) else 0.0
    classes = np.unique(labels)
    means = np.array([x[labels == k].mean(axis=0) for k in classes])
    if len(classes) < 2:
        return {"avg_std": avg_std, "avg_mean_distance": 0.0}
    iu = np.triu_indices(len(classes), k=1)
    diff = means[iu[0]] - means[iu[1]]
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    return {"avg_std": avg_std, "avg_mean_distance": float(dist.mean())}
