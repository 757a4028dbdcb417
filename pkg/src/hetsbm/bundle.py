"""On-disk graph bundles.

A bundle is a directory holding

* ``header.json``: ``{"n", "c", "d", "version", "provenance"}``
* ``edges.tsv``: one directed edge ``src<TAB>dst`` per line, meaning ``dst``
  has an incoming edge from ``src``
* ``labels.txt``: one integer class per line
* ``features.csv`` (optional): ``n`` rows of ``d`` comma-separated floats

Undirected sources must list both directions.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ParseError, ShapeError
from .hsbm import GraphSample

FORMAT_VERSION = 1

HEADER = "header.json"
EDGES = "edges.tsv"
LABELS = "labels.txt"
FEATURES = "features.csv"

__all__ = ["FORMAT_VERSION", "save_bundle", "load_bundle", "read_header"]


def save_bundle(graph: GraphSample, path, provenance=None) -> Path:
    """Write ``graph`` to directory ``path``. Output is byte-deterministic."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    d = 0 if graph.features is None else int(graph.features.shape[1])
    header = {
        "n": graph.n,
        "c": int(graph.c),
        "d": d,
        "version": FORMAT_VERSION,
        "provenance": provenance or {},
    }
    (path / HEADER).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")

    indptr, indices = graph.csr_arrays()
    dst = np.repeat(np.arange(graph.n), np.diff(indptr))
    with open(path / EDGES, "w") as fh:
        if len(indices):
            np.savetxt(fh, np.column_stack((indices, dst)), fmt="%d", delimiter="\t")
    with open(path / LABELS, "w") as fh:
        if graph.n:
            np.savetxt(fh, graph.labels, fmt="%d")
    feat = path / FEATURES
    if graph.features is not None:
        with open(feat, "w") as fh:
            np.savetxt(fh, graph.features, fmt="%.17g", delimiter=",")
    elif feat.exists():
        feat.unlink()
    return path


def read_header(path) -> dict:
    fp = Path(path) / HEADER
    try:
        header = json.loads(fp.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(fp, exc.lineno, exc.colno, exc.msg) from None
    for key in ("n", "c"):
        if not isinstance(header.get(key), int) or header[key] < 0:
            raise ParseError(fp, 1, 1, f"header field {key!r} missing or not a non-negative integer")
    header.setdefault("d", 0)
    return header


def _parse_int(tok, fp, line, col):
    try:
        return int(tok)
    except ValueError:
        raise ParseError(fp, line, col, f"expected an integer, got {tok!r}") from None


def _read_edges(fp: Path, n: int):
    src, dst = [], []
    with open(fp) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                parts = line.split()
            if len(parts) != 2:
                raise ParseError(fp, lineno, 1, "expected two tab-separated node ids")
            s = _parse_int(parts[0].strip(), fp, lineno, 1)
            t = _parse_int(parts[1].strip(), fp, lineno, len(parts[0]) + 2)
            for v, col in ((s, 1), (t, len(parts[0]) + 2)):
                if not 0 <= v < n:
                    raise ShapeError(f"{fp}:{lineno}:{col}: node id {v} outside [0, {n})")
            src.append(s)
            dst.append(t)
    return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64)


def _read_labels(fp: Path, n: int, c: int):
    labels = []
    with open(fp) as fh:
        for lineno, raw in enumerate(fh, start=1):
            tok = raw.strip()
            if not tok:
                continue
            v = _parse_int(tok, fp, lineno, 1)
            if not 0 <= v < c:
                raise ShapeError(f"{fp}:{lineno}:1: label {v} outside [0, {c})")
            labels.append(v)
    if len(labels) != n:
        raise ShapeError(f"{fp}: header says n={n} but found {len(labels)} labels")
    return np.array(labels, dtype=np.int64)


def _read_features(fp: Path, n: int, d: int):
    rows = []
    with open(fp) as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            row = []
            col = 1
            for tok in raw.rstrip("\n").split(","):
                try:
                    row.append(float(tok))
                except ValueError:
                    raise ParseError(fp, lineno, col, f"expected a number, got {tok!r}") from None
                col += len(tok) + 1
            if d and len(row) != d:
                raise ShapeError(f"{fp}:{lineno}: expected {d} columns, found {len(row)}")
            rows.append(row)
    if len(rows) != n:
        raise ShapeError(f"{fp}: header says n={n} but found {len(rows)} feature rows")
    x = np.array(rows, dtype=np.float64).reshape(n, -1)
    return x


def load_bundle(path) -> GraphSample:
    """Read a bundle written by :func:`save_bundle` (or by hand).

    The result has ``node_dists=None``; ``features`` is ``None`` when the
    bundle has no features file.
    """
    path = Path(path)
    header = read_header(path)
    n, c, d = header["n"], header["c"], int(header.get("d") or 0)
    src, dst = _read_edges(path / EDGES, n)
    labels = _read_labels(path / LABELS, n, c)
    features = None
    if (path / FEATURES).exists():
        features = _read_features(path / FEATURES, n, d)
    adj = sp.csr_matrix((np.ones(len(src), dtype=bool), (dst, src)), shape=(n, n))
    return GraphSample(labels, adj, features, None, c)
