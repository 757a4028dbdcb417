"""Command-line interface: ``hetsbm {generate,gains,audit,train,sweep}``.

Exit codes: 0 success, 2 usage or configuration error, 3 infeasible model,
4 input/output error. With ``--json`` results and errors are printed as JSON
on stdout.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import HsbmError, InfeasibleModel, ParseError, ShapeError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _seeds(text: str):
    """``0,1,2`` or ``0-4``."""
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = part.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("no seeds given")
    return out


def _floats(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


MODEL_DEFAULTS = {"n": 1000, "c": 5, "d": None, "sigma": 0.6, "dbar": 25.0, "delta": 0.0,
                  "pattern": "a=0.2"}


def _add_model_flags(p, *, unset=False):
    """Model flags. With ``unset`` the defaults are left as ``None`` so a
    config file can supply them."""
    def dflt(key):
        return None if unset else MODEL_DEFAULTS[key]
    g = p.add_argument_group("model")
    g.add_argument("--n", type=int, default=dflt("n"), help="node count (default 1000)")
    g.add_argument("--c", type=int, default=dflt("c"), help="class count (default 5)")
    g.add_argument("--d", type=int, default=None, help="feature dimension (default c)")
    g.add_argument("--sigma", type=float, default=dflt("sigma"), help="feature std (default 0.6)")
    g.add_argument("--dbar", type=float, default=dflt("dbar"), help="mean degree (default 25)")
    g.add_argument("--delta", type=float, default=dflt("delta"),
                   help="topological noise std (default 0)")
    g.add_argument("--pattern", default=dflt("pattern"),
                   help="a=<v> | homophilous=<v> | group=<v> | file=<path> (default a=0.2)")


def _params(args):
    from .hsbm import HsbmParams, pattern_from_spec
    mhat = pattern_from_spec(args.pattern, args.c)
    return HsbmParams.synthetic(mhat, n=args.n, d=args.d, sigma=args.sigma,
                                dbar=args.dbar, delta=args.delta)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hetsbm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hetsbm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="sample a graph and write a bundle")
    _add_model_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="bundle directory")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("gains", help="separability gains of a pattern")
    _add_model_flags(p)
    p.add_argument("--layers", type=int, default=1, help="convolutions (default 1)")
    p.add_argument("--varsigma", type=float, default=1.0)
    p.add_argument("--out", help="also write the report as JSON here")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("audit", help="empirical statistics and verdict of a bundle")
    p.add_argument("path", help="bundle directory")
    p.add_argument("--varsigma", type=float, default=0.2)
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--pairs-csv", help="write per-pair gains here")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("train", help="train MLP and GCN on a bundle")
    p.add_argument("path", help="bundle directory (with features)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--precision", choices=("single", "double", "extended"), default="double")
    p.add_argument("--grid", choices=("synthetic", "full"), default="synthetic",
                   help="hyper-parameter search (default %(default)s)")
    p.add_argument("--mode", choices=("pre", "second_layer"), default="pre")
    p.add_argument("--confusion-nodes", choices=("test", "all"), default="test",
                   help="nodes counted in the confusion matrices (default %(default)s)")
    p.add_argument("--out", help="write the JSON metrics here")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("sweep", help="run a parameter sweep and write a CSV")
    p.add_argument("kind", choices=("pattern_a", "homophilous", "group", "degree", "noise", "layers"))
    _add_model_flags(p, unset=True)
    p.add_argument("--grid", type=_floats, default=None, help="comma-separated values")
    p.add_argument("--seeds", type=_seeds, default=None, help="e.g. 0,1,2 or 0-4")
    p.add_argument("--layers", type=int, default=None, help="deepest layer for a layers sweep")
    p.add_argument("--precision", action="append", choices=("single", "double", "extended"),
                   help="precision tier for a layers sweep; repeatable")
    p.add_argument("--varsigma", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--config", help="JSON sweep spec; flags override it")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--json", action="store_true")
    return parser


def _emit(args, payload: dict, text: str):
    if args.json:
        print(json.dumps(payload, indent=2, default=_jsonable))
    else:
        print(text)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o).__name__)


def cmd_generate(args) -> int:
    from .bundle import save_bundle
    from .hsbm import sample_hsbm
    params = _params(args)
    graph = sample_hsbm(params, args.seed)
    prov = {"params": params.to_dict(), "seed": args.seed, "pattern": args.pattern}
    save_bundle(graph, args.out, provenance=prov)
    payload = {"out": str(args.out), "n": graph.n, "edges": graph.edge_count,
               "zero_degree_count": graph.zero_degree_count, "capped_count": graph.capped_count}
    _emit(args, payload, f"wrote {graph.n} nodes, {graph.edge_count} edges to {args.out}")
    return EXIT_OK


def _gain_report(args):
    from .theory import (SeparabilityInputs, gain_multi_gc_approx, gain_noisy_gc,
                         gain_single_gc)
    from .hsbm import derive_edge_probabilities
    params = _params(args)
    derive_edge_probabilities(params)
    inp = SeparabilityInputs.from_params(params)
    if args.layers < 1:
        raise UsageError("gains: --layers must be at least 1")
    if args.layers > 1:
        return gain_multi_gc_approx(inp, args.layers, args.varsigma)
    if args.delta > 0:
        return gain_noisy_gc(inp, args.varsigma)
    return gain_single_gc(inp, args.varsigma)


def _format_gains(rep) -> str:
    lines = [f"kind: {rep.kind}"]
    for row in rep.gains:
        lines.append("  " + " ".join(f"{v:8.4f}" for v in row))
    lines.append(f"min gain {rep.min_gain:.4f}  max gain {rep.max_gain:.4f}  "
                 f"varsigma {rep.varsigma:g}  verdict {rep.verdict}")
    return "\n".join(lines)


def cmd_gains(args) -> int:
    rep = _gain_report(args)
    if args.out:
        Path(args.out).write_text(rep.to_json(indent=2) + "\n")
    _emit(args, rep.to_dict(), _format_gains(rep))
    return EXIT_OK


def cmd_audit(args) -> int:
    from .analyze import audit, load_graph
    rep = audit(load_graph(args.path), args.varsigma)
    if args.out:
        rep.write_json(args.out)
    if args.pairs_csv:
        rep.write_pair_csv(args.pairs_csv)
    s = rep.stats
    h = "n/a" if math.isnan(s.homophily_ratio) else f"{s.homophily_ratio:.4f}"
    text = "\n".join([
        f"nodes {s.n}  classes {s.c}  edges {s.edge_count}  avg degree {s.avg_degree:.2f}",
        f"homophily ratio {h}",
        "empirical neighbourhood matrix:",
        *("  " + " ".join(f"{v:6.3f}" for v in row) for row in s.empirical_mhat),
        _format_gains(rep.gains),
    ])
    _emit(args, rep.to_dict(), text)
    return EXIT_OK


def cmd_train(args) -> int:
    from .aggregate import AggregationConfig
    from .analyze import load_graph
    from .classify import TrainConfig, split_nodes, train_gcn, train_mlp
    from .errors import ConfigError
    graph = load_graph(args.path)
    if graph.features is None:
        raise ConfigError(f"{args.path}: bundle has no features file")
    depth = 1 if args.mode == "second_layer" else 0
    if args.grid == "full":
        cfg = TrainConfig.full_grid(depth=max(depth, 1))
    else:
        cfg = TrainConfig(hidden_grid=((64,),) if depth else ((),))
    split = split_nodes(graph.n, args.seed)
    mlp = train_mlp(graph.features, graph.labels, split, cfg, args.seed,
                    confusion_nodes=args.confusion_nodes)
    gcn = train_gcn(graph, cfg, AggregationConfig(args.layers, precision=args.precision),
                    args.seed, split=split, mode=args.mode,
                    confusion_nodes=args.confusion_nodes)
    payload = {"mlp": mlp.to_dict(), "gcn": gcn.to_dict()}
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    _emit(args, payload, f"MLP test accuracy {100 * mlp.accuracy:.2f}\n"
                         f"GCN test accuracy {100 * gcn.accuracy:.2f}")
    return EXIT_OK


def _sweep_spec(args):
    from .sweep import SweepSpec, default_params
    from .hsbm import pattern_from_spec
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
    data["kind"] = args.kind
    if args.grid is not None:
        data["grid"] = args.grid
    elif args.kind == "layers" and args.layers is not None:
        data["grid"] = list(range(1, args.layers + 1))
    if args.seeds is not None:
        data["seeds"] = args.seeds
    if args.precision:
        data["precisions"] = args.precision
    if args.varsigma is not None:
        data["varsigma"] = args.varsigma
    if args.workers is not None:
        data["workers"] = args.workers
    base = dict(data.get("base") or {})
    for flag in ("n", "c", "d", "sigma", "dbar", "delta"):
        if getattr(args, flag) is not None:
            base[flag] = getattr(args, flag)
        elif flag not in base:
            base[flag] = MODEL_DEFAULTS[flag]
    c = int(base.pop("c"))
    base.pop("eta", None)
    mhat = args.pattern if args.pattern is not None else base.get("mhat", MODEL_DEFAULTS["pattern"])
    base.pop("mhat", None)
    if isinstance(mhat, str):
        mhat = pattern_from_spec(mhat, c)
    data["base"] = default_params(np.asarray(mhat, dtype=float), **base)
    train = data.pop("train", None)
    return SweepSpec.from_json(data, train=train)


def cmd_sweep(args) -> int:
    from .sweep import run_sweep
    spec = _sweep_spec(args)
    result = run_sweep(spec)
    csv_text = result.to_csv(args.out)
    if args.json:
        payload = {"rows": len(result.rows), "out": args.out,
                   "mean_pearson": None if math.isnan(result.mean_pearson()) else result.mean_pearson()}
        if spec.kind == "layers":
            payload["collapse_layers"] = result.collapse_layers()
        print(json.dumps(payload, indent=2))
    elif args.out:
        print(f"wrote {len(result.rows)} rows to {args.out}")
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "gains": cmd_gains,
    "audit": cmd_audit,
    "train": cmd_train,
    "sweep": cmd_sweep,
}


def _fail(want_json: bool, code: int, exc: BaseException) -> int:
    if want_json:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}))
    else:
        print(f"error: {exc}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    want_json = "--json" in argv
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        if not want_json:
            parser.print_usage(sys.stderr)
        return _fail(want_json, EXIT_USAGE, exc)
    except InfeasibleModel as exc:
        return _fail(want_json, EXIT_INFEASIBLE, exc)
    except (ParseError, ShapeError, OSError) as exc:
        return _fail(want_json, EXIT_IO, exc)
    except HsbmError as exc:
        return _fail(want_json, EXIT_USAGE, exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
