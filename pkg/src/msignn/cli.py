"""Command line front end: ``msignn {train,search,rank,export-embeddings,convert}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .configs import CITATION, load_model_config
from .graph import DatasetError, load_graph, make_splits, save_graph
from .harness import (SearchSpace, TrainConfig, Workspace, evaluate, grid_search,
                      write_results)
from .models import Model, ModelConfig, load_checkpoint, parse_model_name
from .structure import (IgrScore, MsiConfig, SelectedStructure, build_msi_layer,
                        select_from_ranking, write_ranking_csv)
from . import autodiff as ad

EXIT_USAGE, EXIT_DATA, EXIT_TRAIN = 1, 2, 3

log = logging.getLogger("msignn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dataset_args(p, seed=True):
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--format", default="canonical", choices=["canonical", "geomgcn-text"])
    p.add_argument("--sparse-feature-dim", type=int, default=None,
                   help="geomgcn-text only: features are index lists of this width (Actor)")
    if seed:
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--splits", type=int, default=10)


def _train_args(p):
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=200)
    p.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="msignn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="evaluate one configuration over all splits")
    _dataset_args(p)
    p.add_argument("--model", required=True, help="e.g. gcn, msi-h2gcn-2, msi-gcnii")
    p.add_argument("--params-file", required=True)
    _train_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("search", help="two-stage grid search, then evaluate the winner")
    _dataset_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--search", default="published",
                   help="'published' or a TOML file overriding SearchSpace fields")
    p.add_argument("--params-file", default=None,
                   help="GCNII depth/alpha/beta (and hidden) are taken from here")
    _train_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("rank", help="dump gain-ratio column ranking as CSV")
    _dataset_args(p)
    p.add_argument("--hop", type=int, default=1)
    p.add_argument("--t", type=int, default=None, help="keep the top t (default: all)")
    p.add_argument("--n", type=int, default=0, help="occurrence threshold")
    p.add_argument("--split-index", type=int, default=0)
    p.add_argument("--out", default="-", help="CSV path or '-' for stdout")

    p = sub.add_parser("export-embeddings", help="write MSI layer and model outputs as CSV")
    _dataset_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--params-file", required=True)
    p.add_argument("--checkpoint", default=None, help="trained .npz from `train`")
    p.add_argument("--split-index", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("convert", help="geomgcn-text -> canonical")
    _dataset_args(p, seed=False)
    p.add_argument("--out", required=True)
    return parser


# --------------------------------------------------------------------------

def _load(args):
    return load_graph(args.dataset, args.format, args.sparse_feature_dim)


def _model_config(args) -> ModelConfig:
    try:
        return load_model_config(args.params_file, args.model)
    except (FileNotFoundError, KeyError, ValueError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(str(exc)) from exc


def _train_config(args) -> TrainConfig:
    try:
        return TrainConfig(epochs=args.epochs, patience=args.patience, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _provenance(args, graph, train: TrainConfig) -> dict:
    return {"dataset_path": str(args.dataset), "format": args.format,
            "num_splits": args.splits, "split_seed": args.seed,
            "train": {f.name: getattr(train, f.name) for f in fields(train)},
            "graph": {"num_nodes": graph.num_nodes, "num_edges": graph.num_edges,
                      "num_features": graph.num_features, "num_classes": graph.num_classes}}


def _write_outputs(args, graph, result, train, extra=None) -> int:
    out = Path(args.out)
    payload = {"provenance": _provenance(args, graph, train)}
    payload.update(extra or {})
    timings = {"wall_clock_seconds": result.wall_clock}
    result.wall_clock = []
    write_results(result, out, payload)
    (out / "timing.json").write_text(json.dumps(timings, indent=2) + "\n")
    print(f"{result.dataset} {result.model}: {result.mean:.2f} +- {result.std:.2f}")
    if result.failed_splits:
        print(f"failed splits: {result.failed_splits}", file=sys.stderr)
        return EXIT_TRAIN
    return 0


def cmd_train(args) -> int:
    config = _model_config(args)
    train = _train_config(args)
    graph = _load(args)
    splits = make_splits(graph, args.splits, args.seed)
    result = evaluate(graph, splits, config, train, jobs=args.jobs,
                      checkpoint_dir=Path(args.out) / "checkpoints")
    return _write_outputs(args, graph, result, train)


def _search_space(args, dataset_name: str) -> SearchSpace:
    if args.search == "published":
        return SearchSpace.published(citation=dataset_name.lower() in CITATION)
    try:
        with open(args.search, "rb") as fh:
            data = tomllib.load(fh)
        return SearchSpace(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})
    except (OSError, TypeError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"bad search space {args.search}: {exc}") from exc


def cmd_search(args) -> int:
    try:
        kind, layers, msi = parse_model_name(args.model)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.params_file:
        base = _model_config(args)
    else:
        base = ModelConfig(kind=kind, layers=layers or 2)
    train = _train_config(args)
    graph = _load(args)
    space = _search_space(args, graph.name)
    if msi and base.msi is None:
        base = replace(base, msi=MsiConfig())
    splits = make_splits(graph, args.splits, args.seed)
    found = grid_search(graph, splits, base, space, train, jobs=args.jobs)
    result = evaluate(graph, splits, found.best, train, jobs=args.jobs,
                      checkpoint_dir=Path(args.out) / "checkpoints")
    extra = {"search": {"space": {f.name: getattr(space, f.name) for f in fields(space)},
                        "scores": [{"config": c.to_dict(), "mean_val_acc": s}
                                   for c, s in found.scores]}}
    return _write_outputs(args, graph, result, train, extra)


def cmd_rank(args) -> int:
    graph = _load(args)
    if args.hop < 1:
        raise UsageError("--hop must be >= 1")
    split = make_splits(graph, args.split_index + 1, args.seed)[args.split_index]
    ws = Workspace(graph)
    ranking = ws.ranking(split, args.hop)
    hop = ws.prop.hop_adjacency(args.hop)[args.hop - 1]
    sel = select_from_ranking(hop, ranking, args.t or graph.num_nodes, args.n)
    rows = [IgrScore(int(u), float(ranking.scores[u]), int(ranking.occurrence[u]))
            for u in sel.column_nodes]
    if args.out == "-":
        count = write_ranking_csv(rows, sys.stdout)
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            count = write_ranking_csv(rows, fh)
    if count == 0:
        print("warning: every column was removed by the occurrence filter", file=sys.stderr)
    return 0


def _write_matrix_csv(path: Path, matrix: np.ndarray, labels: np.ndarray):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "label"] + [f"d{j}" for j in range(matrix.shape[1])])
        for v, (row, y) in enumerate(zip(matrix, labels)):
            w.writerow([v, int(y)] + [format(x, ".17g") for x in row])


def cmd_export(args) -> int:
    config = _model_config(args)
    if args.checkpoint is not None and not Path(args.checkpoint).is_file():
        raise DatasetError(f"checkpoint not found: {args.checkpoint}")
    graph = _load(args)
    split = make_splits(graph, args.split_index + 1, args.seed)[args.split_index]
    ws = Workspace(graph)
    state, meta = (load_checkpoint(args.checkpoint) if args.checkpoint else (None, {}))
    if config.msi is None:
        layer = np.array(graph.features)
    elif meta.get("msi_columns"):
        hops = ws.prop.hop_adjacency(config.msi.max_hop)
        sel = []
        for i in range(1, config.msi.max_hop + 1):
            cols = np.array(meta["msi_columns"].get(str(i), []), dtype=np.int64)
            sel.append(SelectedStructure(i, cols, hops[i - 1].matrix[:, cols].tocsr()))
        layer = build_msi_layer(graph.features, sel, config.msi)
    else:
        layer, _ = ws.inputs(split, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_matrix_csv(out / "msi_layer.csv", layer, graph.labels)
    written = ["msi_layer.csv"]
    if state is not None:
        model = Model(config, layer.shape[1], graph.num_classes, np.random.default_rng(0))
        model.load_state(state)
        logits = model.forward(ad.Tensor(layer), ws.prop, training=False).value
        _write_matrix_csv(out / "output.csv", logits, graph.labels)
        written.append("output.csv")
    (out / "export.json").write_text(json.dumps(
        {"config": config.to_dict(), "split_index": args.split_index, "seed": args.seed,
         "checkpoint": args.checkpoint, "shape": list(layer.shape), "files": written},
        indent=2, sort_keys=True) + "\n")
    return 0


def cmd_convert(args) -> int:
    graph = _load(args)
    save_graph(graph, args.out)
    print(f"wrote {graph.num_nodes} nodes, {graph.num_edges} edges to {args.out}")
    return 0


COMMANDS = {"train": cmd_train, "search": cmd_search, "rank": cmd_rank,
            "export-embeddings": cmd_export, "convert": cmd_convert}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"msignn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, FileNotFoundError) as exc:
        print(f"msignn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
