"""Parameter sweeps: sample, compute gains, train MLP and GCN, tabulate.

Every (grid point, seed) is independent and owns its random streams, so rows
are identical whichever worker computes them. Rows are sorted before output.
"""

from __future__ import annotations

import csv
import io
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .aggregate import AggregationConfig, PRECISIONS, aggregate_series, feature_spread_stats
from .analyze import empirical_mhat
from .classify import (TrainConfig, pearson_gain_vs_confusion, split_nodes, train_gcn,
                       train_mlp)
from .errors import ConfigError, InfeasibleModel
from .hsbm import (HsbmParams, derive_edge_probabilities, pattern_family_a, pattern_family_group,
                   pattern_family_homophilous, sample_hsbm)
from .theory import (SYNTHETIC_VARSIGMA, GainReport, SeparabilityInputs,
                     gain_noisy_gc, gain_single_gc, mhat_power_differences)

__all__ = [
    "SWEEP_KINDS",
    "CSV_COLUMNS",
    "DEFAULT_GRIDS",
    "SweepSpec",
    "SweepRow",
    "SweepResult",
    "run_sweep",
    "collapse_layer",
    "default_params",
]

SWEEP_KINDS = ("pattern_a", "homophilous", "group", "degree", "noise", "layers")

CSV_COLUMNS = ("sweep_kind", "param", "seed", "acc_mlp", "acc_gcn", "min_gain", "max_gain",
               "verdict", "pearson_x", "pearson_y", "avg_std", "avg_mean_distance")

DEFAULT_GRIDS = {
    "pattern_a": tuple(round(0.02 * i, 2) for i in range(17)),
    "homophilous": tuple(round(0.1 * i, 1) for i in range(11)),
    "group": tuple(round(0.02 * i, 2) for i in range(11)),
    "degree": (5, 10, 25, 50, 100, 200, 350),
    "noise": tuple(round(0.002 * i, 3) for i in range(6)),
    "layers": tuple(range(1, 81)),
}

# accuracy drop, in points below the running best, that marks a collapse
COLLAPSE_DROP = 20.0


def default_params(mhat=None, **kw) -> HsbmParams:
    """Synthetic defaults: n=1000, five classes, d=5, sigma=0.6, degree 25."""
    if mhat is None:
        mhat = pattern_family_a(0.2)
    base = dict(n=1000, d=None, sigma=0.6, dbar=25.0, delta=0.0)
    base.update(kw)
    return HsbmParams.synthetic(mhat, **base)


@dataclass(frozen=True)
class SweepSpec:
    kind: str
    grid: Sequence[float] = ()
    seeds: Sequence[int] = (0, 1, 2, 3, 4)
    base: HsbmParams = field(default_factory=default_params)
    train: TrainConfig = field(default_factory=TrainConfig)
    varsigma: float = SYNTHETIC_VARSIGMA
    precisions: Sequence[str] = ("single", "double")
    workers: int = 1
    out: Optional[str] = None

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ConfigError(f"unknown sweep kind {self.kind!r}; choose from {SWEEP_KINDS}")
        grid = tuple(self.grid) or DEFAULT_GRIDS[self.kind]
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "precisions", tuple(self.precisions))
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        for p in self.precisions:
            if p not in PRECISIONS:
                raise ConfigError(f"unknown precision {p!r}")
        if self.kind == "layers" and any(int(l) != l or l < 1 for l in grid):
            raise ConfigError("layer grid must hold positive integers")

    @classmethod
    def from_json(cls, data, **overrides) -> "SweepSpec":
        """Build from a JSON-like dict; ``base`` and ``train`` are nested dicts."""
        data = dict(data)
        data.update({k: v for k, v in overrides.items() if v is not None})
        base = data.pop("base", None)
        if isinstance(base, dict):
            base = dict(base)
            mhat = base.pop("mhat", None)
            if isinstance(mhat, str):
                from .hsbm import pattern_from_spec
                mhat = pattern_from_spec(mhat, int(base.get("c", 5)))
            base.pop("c", None)
            base.pop("eta", None)
            base = default_params(mhat, **base)
        train = data.pop("train", None)
        if isinstance(train, dict):
            train = TrainConfig(**train)
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown sweep spec fields {sorted(extra)}")
        if base is not None:
            data["base"] = base
        if train is not None:
            data["train"] = train
        return cls(**data)


@dataclass(frozen=True)
class SweepRow:
    sweep_kind: str
    param: float
    seed: int
    acc_mlp: float
    acc_gcn: float
    min_gain: float
    max_gain: float
    verdict: str
    pearson_x: tuple
    pearson_y: tuple
    avg_std: Optional[float] = None
    avg_mean_distance: Optional[float] = None

    @property
    def pearson(self):
        """Correlation of the stored pair series (``nan`` when degenerate)."""
        x, y = np.asarray(self.pearson_x), np.asarray(self.pearson_y)
        if len(x) < 2 or np.ptp(x) <= 1e-12 * max(1.0, np.abs(x).max()) or np.ptp(y) == 0:
            return float("nan")
        return float(np.corrcoef(x, y)[0, 1])

    def sort_key(self):
        return (self.sweep_kind, self.param, self.seed)

    def csv_cells(self):
        def num(v, fmt):
            return "" if v is None else format(v, fmt)
        return [
            self.sweep_kind,
            repr(float(self.param)),
            str(self.seed),
            f"{self.acc_mlp:.2f}",
            f"{self.acc_gcn:.2f}",
            num(self.min_gain, ".6g"),
            num(self.max_gain, ".6g"),
            self.verdict,
            ";".join(format(v, ".6g") for v in self.pearson_x),
            ";".join(format(v, "g") for v in self.pearson_y),
            num(self.avg_std, ".6g"),
            num(self.avg_mean_distance, ".6g"),
        ]


@dataclass
class SweepResult:
    rows: list

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.csv_cells())
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def select(self, kind=None, param=None):
        return [r for r in self.rows
                if (kind is None or r.sweep_kind == kind) and (param is None or r.param == param)]

    def params(self, kind=None):
        return sorted({r.param for r in self.select(kind)})

    def mean(self, column: str, kind=None, param=None) -> float:
        vals = [getattr(r, column) for r in self.select(kind, param)]
        return float(np.mean(vals))

    def mean_pearson(self) -> float:
        """Per seed, the correlation over all pairs of all grid points; then
        averaged over seeds."""
        per_seed = {}
        for r in self.rows:
            xs, ys = per_seed.setdefault(r.seed, ([], []))
            xs.extend(r.pearson_x)
            ys.extend(r.pearson_y)
        vals = []
        for xs, ys in per_seed.values():
            x, y = np.asarray(xs), np.asarray(ys)
            if np.ptp(x) > 0 and np.ptp(y) > 0:
                vals.append(float(np.corrcoef(x, y)[0, 1]))
        return float(np.mean(vals)) if vals else float("nan")

    def collapse_layers(self):
        """``{precision: [collapse layer per seed]}`` for a layers sweep."""
        out = {}
        for kind in sorted({r.sweep_kind for r in self.rows}):
            if not kind.startswith("layers["):
                continue
            prec = kind[len("layers["):-1]
            seeds = sorted({r.seed for r in self.select(kind)})
            out[prec] = []
            for s in seeds:
                rows = sorted((r for r in self.select(kind) if r.seed == s), key=lambda r: r.param)
                out[prec].append(collapse_layer([r.param for r in rows], [r.acc_gcn for r in rows]))
        return out


def collapse_layer(layers, accuracies, drop: float = COLLAPSE_DROP):
    """First layer whose accuracy falls more than ``drop`` points below the
    best accuracy seen at earlier or equal layers; ``None`` if it never does."""
    best = -np.inf
    for l, acc in zip(layers, accuracies):
        best = max(best, acc)
        if acc < best - drop:
            return l
    return None


def _pattern_for(kind: str, value: float, c: int):
    if kind == "pattern_a":
        return pattern_family_a(value, c)
    if kind == "homophilous":
        return pattern_family_homophilous(value, c)
    if kind == "group":
        return pattern_family_group(value)
    raise AssertionError(kind)


def _params_for(spec: SweepSpec, value) -> HsbmParams:
    base = spec.base
    try:
        if spec.kind in ("pattern_a", "homophilous", "group"):
            mhat = _pattern_for(spec.kind, value, base.c)
            return base.replace(mhat=mhat, c=mhat.shape[0], d=max(base.d, mhat.shape[0]),
                                eta=np.full(mhat.shape[0], 1.0 / mhat.shape[0]),
                                dbar=np.full(mhat.shape[0], float(np.mean(base.dbar))))
        if spec.kind == "degree":
            return base.replace(dbar=np.full(base.c, float(value)))
        if spec.kind == "noise":
            return base.replace(delta=float(value))
        return base
    except InfeasibleModel as exc:
        raise InfeasibleModel(f"grid point {spec.kind}={value}: {exc}") from None


def _pct(x: float) -> float:
    return round(100.0 * x, 2)


def _pair_series(gains: GainReport, cm_gcn, cm_mlp):
    res = pearson_gain_vs_confusion(gains, cm_gcn, cm_mlp)
    return tuple(float(v) for v in res.x), tuple(float(v) for v in res.y)


def _point(spec: SweepSpec, value, seed: int) -> SweepRow:
    params = _params_for(spec, value)
    try:
        graph = sample_hsbm(params, seed)
    except InfeasibleModel as exc:
        raise InfeasibleModel(f"grid point {spec.kind}={value}: {exc}") from None
    split = split_nodes(params.n, seed)
    mlp = train_mlp(graph.features, graph.labels, split, spec.train, seed)
    gcn = train_gcn(graph, spec.train, AggregationConfig(1, params.self_loops), seed, split=split)
    inp = SeparabilityInputs.from_params(params)
    if spec.kind == "noise":
        emp, _ = empirical_mhat(graph)
        gains = gain_noisy_gc(inp.with_(mhat=emp), spec.varsigma)
    else:
        gains = gain_single_gc(inp, spec.varsigma)
    px, py = _pair_series(gains, gcn.confusion, mlp.confusion)
    return SweepRow(spec.kind, float(value), seed, _pct(mlp.accuracy), _pct(gcn.accuracy),
                    gains.min_gain, gains.max_gain, gains.verdict, px, py)


def _q_series(graph, lmax: int):
    """``||Q^(l)||_F^2`` for l = 0..lmax, propagating the centred walk matrix."""
    from .theory import _row_normalised
    walk = _row_normalised(graph.adjacency)
    n = graph.n
    cmat = np.eye(n) - 1.0 / n
    out = [2.0 * n * float(np.sum(cmat * cmat))]
    for _ in range(lmax):
        cmat = walk @ cmat
        cmat -= cmat.mean(axis=0, keepdims=True)
        out.append(2.0 * n * float(np.sum(cmat * cmat)))
    return out


def _layers_seed(spec: SweepSpec, seed: int):
    params = spec.base
    graph = sample_hsbm(params, seed)
    split = split_nodes(params.n, seed)
    mlp = train_mlp(graph.features, graph.labels, split, spec.train, seed)
    wanted = sorted({int(l) for l in spec.grid})
    lmax = wanted[-1]
    emp, _ = empirical_mhat(graph)
    q2 = _q_series(graph, lmax)
    rows = []
    for prec in spec.precisions:
        cfg = AggregationConfig(lmax, params.self_loops, prec)
        for l, x in enumerate(aggregate_series(graph, graph.features, cfg)):
            if l not in wanted:
                continue
            agg0 = AggregationConfig(0, params.self_loops, prec)
            gcn = train_gcn(graph, spec.train, agg0, seed, split=split, features=x)
            diffs, log_scale = mhat_power_differences(emp, l)
            norms = np.sqrt(np.einsum("ktj,ktj->kt", diffs, diffs)) * np.exp(log_scale)
            gains = GainReport.from_gains(f"multi_gc({l})", graph.n * norms / np.sqrt(q2[l]),
                                          spec.varsigma)
            stats = feature_spread_stats(x, graph.labels)
            px, py = _pair_series(gains, gcn.confusion, mlp.confusion)
            rows.append(SweepRow(f"layers[{prec}]", float(l), seed, _pct(mlp.accuracy),
                                 _pct(gcn.accuracy), gains.min_gain, gains.max_gain,
                                 gains.verdict, px, py, stats["avg_std"],
                                 stats["avg_mean_distance"]))
    return rows


def _run_task(args):
    spec, value, seed = args
    if spec.kind == "layers":
        return _layers_seed(spec, seed)
    return [_point(spec, value, seed)]


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Run every (grid point, seed) and return rows in sorted order.

    Infeasible grid points abort the sweep with the offending value named.
    """
    if spec.kind == "layers":
        tasks = [(spec, None, s) for s in spec.seeds]
    else:
        for v in spec.grid:  # fail fast, before any training
            params = _params_for(spec, v)
            try:
                derive_edge_probabilities(params)
            except InfeasibleModel as exc:
                raise InfeasibleModel(f"grid point {spec.kind}={v}: {exc}") from None
        tasks = [(spec, v, s) for v in spec.grid for s in spec.seeds]
    if spec.workers > 1 and len(tasks) > 1:
        # spawn, since forking after the OpenMP threading layer started is unsafe
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=spec.workers, mp_context=ctx) as pool:
            chunks = list(pool.map(_run_task, tasks))
    else:
        chunks = [_run_task(t) for t in tasks]
    rows = sorted((r for chunk in chunks for r in chunk), key=SweepRow.sort_key)
    result = SweepResult(rows)
    if spec.out:
        result.to_csv(spec.out)
    return result
