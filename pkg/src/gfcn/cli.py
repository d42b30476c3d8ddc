"""Command-line interface.

Exit codes: 0 success, 2 unreadable or malformed input, 3 target not met,
4 model configuration error, 5 precondition violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import mnist, spread
from .decompose import STRATEGIES, DecomposeConfig, DecomposeError, bfs_peel, decompose, lattice_flows, tree_decompose
from .equiv import EquivalenceError, compile_spec, parse_polynomial, verify
from .flows import CoverError, FlowCover, flow_count_bound, load_cover, save_cover, validate_cover
from .graph import Graph, GraphError, load_graph, product, save_graph
from .model import GFCN, Activation, Conv, Dense, Fusion, ModelError, ModelSpec, Readout
from .operators import KINDS
from .optim import load_checkpoint, save_checkpoint
from .train import Dataset, TrainConfig, accuracy, format_history, predict, train

EXIT_OK, EXIT_INPUT, EXIT_TARGET, EXIT_MODEL, EXIT_PRECONDITION = 0, 2, 3, 4, 5


class CLIError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_graph(path: str) -> Graph:
    try:
        return load_graph(path)
    except OSError as e:
        raise CLIError(EXIT_INPUT, f"cannot read graph {path}: {e.strerror}") from None
    except GraphError as e:
        raise CLIError(EXIT_INPUT, f"{path}: {e}") from None


def _read_cover(path: str, g: Optional[Graph] = None) -> FlowCover:
    try:
        return load_cover(path, g)
    except OSError as e:
        raise CLIError(EXIT_INPUT, f"cannot read flows {path}: {e.strerror}") from None
    except (ValueError, KeyError, TypeError) as e:
        raise CLIError(EXIT_INPUT, f"{path}: malformed flow file ({e})") from None


def _resolved(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}


def _record(args: argparse.Namespace, path: str) -> None:
    """Write the resolved options next to an output file or into an output directory."""
    target = os.path.join(path, "config.json") if os.path.isdir(path) else path + ".config.json"
    _write_json(target, {"command": args.command, **_resolved(args)})


# -- decompose / validate / product -----------------------------------------------

def cmd_decompose(args) -> int:
    if args.strategy == "lattice":
        if not args.lattice:
            raise CLIError(EXIT_INPUT, "the lattice strategy needs --lattice H W")
        g = None
    else:
        if not args.graph:
            raise CLIError(EXIT_INPUT, "--graph is required")
        g = _read_graph(args.graph)
    try:
        cfg = DecomposeConfig(
            strategy=args.strategy,
            epsilon_target=args.epsilon,
            min_path_len=args.min_len,
            max_path_len=args.max_len,
            seed=args.seed,
            center_vertices=args.centers,
            center_radius=args.radius,
            lattice_shape=tuple(args.lattice) if args.lattice else None,
            diagonals=args.diagonals,
        )
        if g is None:
            g, _ = lattice_flows(*cfg.lattice_shape, cfg.diagonals)
        cover = decompose(g, cfg)
    except (DecomposeError, CoverError) as e:
        raise CLIError(EXIT_INPUT, str(e)) from None
    d = g.max_degree
    stats = {
        "graph": g.name,
        "strategy": args.strategy,
        "flows": cover.num_flows,
        "paths": sum(len(f) for f in cover.flows),
        "epsilon": cover.epsilon,
        "epsilon_target": args.epsilon,
        "d_max": d,
        "bound": flow_count_bound(d),
        "within_bound": cover.num_flows <= flow_count_bound(d),
    }
    if args.out:
        save_cover(cover, args.out)
        _record(args, args.out)
    print(_dump(stats))
    return EXIT_OK if cover.epsilon >= args.epsilon else EXIT_TARGET


def cmd_validate(args) -> int:
    g = _read_graph(args.graph)
    cover = _read_cover(args.flows)
    report = validate_cover(g, cover)
    print(_dump({"epsilon_measured": report.epsilon_measured, "violations": report.violations}))
    if report.violations:
        return EXIT_PRECONDITION
    return EXIT_OK if report.epsilon_measured >= args.epsilon else EXIT_TARGET


def cmd_product(args) -> int:
    g = product(_read_graph(args.g1), _read_graph(args.g2))
    if args.out:
        save_graph(g, args.out)
    print(_dump({"num_vertices": g.num_vertices, "num_edges": g.num_edges}))
    return EXIT_OK


# -- spreading -------------------------------------------------------------------

def cmd_simulate(args) -> int:
    g = _read_graph(args.graph)
    try:
        snaps = spread.make_dataset(
            g,
            args.samples,
            seed=args.seed,
            p_infect_range=tuple(args.p_infect),
            p_recover_range=tuple(args.p_recover),
            stop_fraction=args.stop_fraction,
            max_steps=args.max_steps,
        )
    except (ValueError, RuntimeError) as e:
        raise CLIError(EXIT_INPUT, str(e)) from None
    spread.save_dataset(snaps, args.out)
    _record(args, args.out)
    frac = [float(s.infected.mean()) for s in snaps]
    print(_dump({"samples": len(snaps), "mean_infected_fraction": float(np.mean(frac)) if frac else 0.0}))
    return EXIT_OK


def _read_snapshots(path: str) -> list:
    try:
        return spread.load_dataset(path)
    except OSError as e:
        raise CLIError(EXIT_INPUT, f"cannot read dataset {path}: {e.strerror}") from None
    except ValueError as e:
        raise CLIError(EXIT_INPUT, f"{path}: {e}") from None


def cmd_jordan(args) -> int:
    g = _read_graph(args.graph)
    if args.infected is not None:
        try:
            centers = spread.jordan_center(g, args.infected)
        except (ValueError, GraphError) as e:
            raise CLIError(EXIT_INPUT, str(e)) from None
        print(_dump({"centers": centers, "center": centers[0]}))
        return EXIT_OK
    if not args.data:
        raise CLIError(EXIT_INPUT, "give --infected or --data")
    snaps = _read_snapshots(args.data)
    if not snaps:
        raise CLIError(EXIT_INPUT, "the dataset is empty")
    print(_dump({f"top{x:g}%": spread.jordan_topx(g, snaps, x) for x in args.top}))
    return EXIT_OK


# -- equivalence -----------------------------------------------------------------

def cmd_equiv(args) -> int:
    g = _read_graph(args.graph)
    try:
        poly = parse_polynomial(args.poly)
    except EquivalenceError as e:
        raise CLIError(EXIT_INPUT, str(e)) from None
    if args.flows:
        cover = _read_cover(args.flows, g)
    elif g.is_tree():
        cover = tree_decompose(g)
    else:
        cover = bfs_peel(g)
    kinds = KINDS if args.op == "all" else (args.op,)
    worst = 0.0
    for kind in kinds:
        try:
            dev = verify(poly, kind, g, cover, trials=args.trials, seed=args.seed)
        except EquivalenceError as e:
            raise CLIError(EXIT_PRECONDITION, str(e)) from None
        worst = max(worst, dev)
        row = {
            "poly": str(poly),
            "op": kind,
            "max_deviation": dev,
            "layers": len(compile_spec(poly, kind).layers),
            "pass": dev < args.tol,
        }
        print(_dump(row))
    return EXIT_OK if worst < args.tol else EXIT_TARGET


# -- training ------------------------------------------------------------------------

def source_model_spec(channels: int = 32, depth: int = 3) -> ModelSpec:
    """Per-vertex scorer: conv/fusion blocks, average readout, dense head."""
    layers = []
    for _ in range(depth):
        layers += [Conv(channels, n=3), Activation("relu"), Fusion("avg")]
    layers += [Readout("avg"), Dense(channels), Activation("relu"), Dense(1)]
    return ModelSpec(layers)


def _model_spec(args) -> ModelSpec:
    if args.model == "mnist":
        return mnist.lattice_model_spec(args.channels, args.hidden)
    if args.model == "source":
        return source_model_spec(args.channels)
    try:
        with open(args.model, encoding="utf-8") as fh:
            return ModelSpec.from_dict(json.load(fh))
    except OSError as e:
        raise CLIError(EXIT_INPUT, f"cannot read model config {args.model}: {e.strerror}") from None
    except (ValueError, ModelError) as e:
        raise CLIError(EXIT_MODEL, f"{args.model}: {e}") from None


def _task_data(args, split: str):
    """(graph, cover, dataset) for the configured task and split."""
    if args.task == "mnist":
        g, cover = mnist.lattice_cover(diagonals=True)
        try:
            X, y = mnist.load_split(split, args.mnist_dir)
        except FileNotFoundError as e:
            raise CLIError(EXIT_INPUT, f"missing MNIST file {e}") from None
        except mnist.IDXError as e:
            raise CLIError(EXIT_INPUT, str(e)) from None
        size = args.train_size if split == "train" else args.test_size
        if size and size < X.shape[0]:
            X, y = mnist.subset(X, y, size, args.seed)
        return g, cover, Dataset(X, y)
    if not args.graph or not args.data:
        raise CLIError(EXIT_INPUT, f"the {args.task} task needs --graph and --data")
    g = _read_graph(args.graph)
    cover = _read_cover(args.flows, g) if args.flows else bfs_peel(g)
    if args.task == "source":
        X, y = spread.dataset_arrays(_read_snapshots(args.data))
        return g, cover, Dataset(X, y)
    try:
        with np.load(args.data) as z:
            return g, cover, Dataset(z["X"], z["y"])
    except (OSError, KeyError, ValueError) as e:
        raise CLIError(EXIT_INPUT, f"cannot read {args.data}: {e}") from None


def _make_model(args, g, cover, data) -> GFCN:
    try:
        return GFCN(_model_spec(args), cover, data.signals.shape[-1], g, seed=args.seed)
    except ModelError as e:
        raise CLIError(EXIT_MODEL, str(e)) from None


def cmd_train(args) -> int:
    g, cover, data = _task_data(args, "train")
    model = _make_model(args, g, cover, data)
    cfg = TrainConfig(
        epochs=args.epochs, lr=args.lr, batch_size=args.batch_size, optimizer=args.optimizer,
        weight_decay=args.weight_decay, lr_decay=args.lr_decay, seed=args.seed,
    )
    try:
        history = train(model, data, cfg, log=None if args.quiet else lambda r: print(_dump(r), flush=True))
    except ModelError as e:
        raise CLIError(EXIT_MODEL, str(e)) from None
    except ValueError as e:
        raise CLIError(EXIT_MODEL, f"training failed: {e}") from None
    os.makedirs(args.out, exist_ok=True)
    save_checkpoint(model.params, os.path.join(args.out, "checkpoint.json"))
    _write_json(os.path.join(args.out, "model.json"), model.spec.to_dict())
    with open(os.path.join(args.out, "history.jsonl"), "w", encoding="utf-8") as fh:
        fh.write(format_history(history))
    _record(args, args.out)
    return EXIT_OK


def _source_metrics(model: GFCN, data: Dataset, tops) -> dict:
    scores = predict(model, data.signals)
    return {f"top{x:g}%": spread.topx_rate(scores, data.labels, x) for x in tops}


def cmd_eval(args) -> int:
    g, cover, data = _task_data(args, "test")
    model = _make_model(args, g, cover, data)
    try:
        model.load_params(load_checkpoint(os.path.join(args.run, "checkpoint.json")))
    except OSError as e:
        raise CLIError(EXIT_INPUT, f"cannot read checkpoint: {e.strerror}") from None
    except ModelError as e:
        raise CLIError(EXIT_MODEL, str(e)) from None
    if len(data) == 0:
        raise CLIError(EXIT_INPUT, "the evaluation dataset is empty")
    if args.task == "source":
        metrics = _source_metrics(model, data, args.top)
    else:
        metrics = {"accuracy": accuracy(model, data)}
    metrics["samples"] = len(data)
    print(_dump(metrics))
    if args.out:
        _write_json(args.out, metrics)
    return EXIT_OK


def cmd_mnist_prepare(args) -> int:
    try:
        X, y = mnist.load_idx(args.images, args.labels)
    except OSError as e:
        raise CLIError(EXIT_INPUT, f"cannot read IDX file: {e.strerror}") from None
    except mnist.IDXError as e:
        raise CLIError(EXIT_INPUT, str(e)) from None
    if args.size and args.size < X.shape[0]:
        X, y = mnist.subset(X, y, args.size, args.seed)
    if args.out:
        np.savez_compressed(args.out, X=X, y=y)
    print(_dump({"samples": int(X.shape[0]), "features": int(X.shape[1]), "classes": sorted(set(int(v) for v in y))}))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def _training_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--task", choices=("mnist", "source", "classify"), default="source")
    p.add_argument("--model", default=None, help="'mnist', 'source' or a model JSON file")
    p.add_argument("--graph")
    p.add_argument("--flows")
    p.add_argument("--data", help="snapshot JSONL (source) or .npz with X, y (classify)")
    p.add_argument("--mnist-dir", default=None)
    p.add_argument("--train-size", type=int, default=10000)
    p.add_argument("--test-size", type=int, default=0)
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--top", type=float, nargs="+", default=[1.0, 5.0, 10.0])


def _build():
    parser = argparse.ArgumentParser(prog="gfcn", description="Graph flow convolutional networks")
    parser.add_argument("--config", help="JSON file of option defaults; explicit flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="split a graph into parallel flows")
    p.add_argument("--graph")
    p.add_argument("--strategy", choices=STRATEGIES, default="bfs-peel")
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--min-len", type=int, default=1)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--centers", type=int, nargs="+", default=None)
    p.add_argument("--radius", type=int, default=None, help="centered path length (odd)")
    p.add_argument("--lattice", type=int, nargs=2, metavar=("H", "W"))
    p.add_argument("--diagonals", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("validate", help="check a flow file against a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--flows", required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="train a model")
    _training_options(p)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lr-decay", type=float, default=1.0)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--out", required=True, help="run directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained run")
    _training_options(p)
    p.add_argument("--run", required=True, help="run directory written by train")
    p.add_argument("--out", help="metrics JSON file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("equiv-check", help="compare a compiled polynomial filter with p(S)X")
    p.add_argument("--graph", required=True)
    p.add_argument("--poly", required=True, help="coefficients low degree first, e.g. 2,0,1")
    p.add_argument("--op", choices=KINDS + ("all",), default="all")
    p.add_argument("--flows")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("simulate", help="generate SIRI snapshots")
    p.add_argument("--graph", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--p-infect", type=float, nargs=2, default=[0.1, 0.9], metavar=("LO", "HI"))
    p.add_argument("--p-recover", type=float, nargs=2, default=[0.0, 0.3], metavar=("LO", "HI"))
    p.add_argument("--stop-fraction", type=float, default=0.2)
    p.add_argument("--max-steps", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("jordan", help="Jordan center of an infected set, or top-x%% over a dataset")
    p.add_argument("--graph", required=True)
    p.add_argument("--infected", type=int, nargs="+")
    p.add_argument("--data")
    p.add_argument("--top", type=float, nargs="+", default=[1.0, 5.0, 10.0])
    p.set_defaults(func=cmd_jordan)

    p = sub.add_parser("product", help="Cartesian product of two graphs")
    p.add_argument("--g1", required=True)
    p.add_argument("--g2", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_product)

    p = sub.add_parser("mnist-prepare", help="read IDX files into an .npz dataset")
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--size", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mnist_prepare)

    for sp in sub.choices.values():
        sp.add_argument("--seed", type=int, default=0)
    return parser, sub.choices


def build_parser() -> argparse.ArgumentParser:
    return _build()[0]


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser, subparsers = _build()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    command = next((a for a in rest if a in subparsers), None)
    if known.config and command:
        try:
            with open(known.config, encoding="utf-8") as fh:
                defaults = json.load(fh)
        except (OSError, ValueError) as e:
            raise CLIError(EXIT_INPUT, f"cannot read config {known.config}: {e}") from None
        if not isinstance(defaults, dict):
            raise CLIError(EXIT_INPUT, f"config {known.config} must hold a JSON object")
        defaults.pop("command", None)
        sp = subparsers[command]
        unknown = set(defaults) - {a.dest for a in sp._actions}
        if unknown:
            raise CLIError(EXIT_INPUT, f"unknown options in config: {sorted(unknown)}")
        sp.set_defaults(**defaults)
        for a in sp._actions:
            if a.dest in defaults:
                a.required = False  # supplied by the config file
    args = parser.parse_args(argv)
    if getattr(args, "model", "unset") is None:
        args.model = "mnist" if args.task == "mnist" else "source"
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
        return args.func(args)
    except CLIError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except ModelError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MODEL
    except (EquivalenceError, CoverError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    except GraphError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
