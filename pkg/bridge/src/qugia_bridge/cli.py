"""Batch export script.

    qugia-bridge --dataset cora --out data/ --models gat,appnp

Writes ``<dataset>.json.gz`` plus ``<dataset>_<model>.json.gz`` per
requested model and a ``<dataset>_accuracy.json`` sidecar with the clean
test accuracy of each exported model.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .datasets import BridgeError, DatasetUnavailable, DATASETS, load_dataset
from .formats import save_graph_json, save_weights_json
from .train import train_model


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qugia-bridge",
        description="export canonical graph/weight JSON files")
    parser.add_argument("--dataset", required=True, choices=DATASETS)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--models", default="",
                        help="comma-separated model kinds (gat, appnp)")
    parser.add_argument("--hidden-dim", type=int, default=16)
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    return parser


def run_export(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = load_dataset(args.dataset, seed=args.seed)
    graph_path = out / f"{args.dataset}.json.gz"
    save_graph_json(doc, graph_path)
    print(f"wrote {graph_path} ({doc['num_nodes']} nodes, "
          f"{len(doc['edges'])} edges)")

    accuracies = {}
    for kind in filter(None, (m.strip() for m in args.models.split(","))):
        (name, layers, hyper), acc = train_model(
            doc, kind, hidden_dim=args.hidden_dim, epochs=args.epochs,
            seed=args.seed)
        wpath = out / f"{args.dataset}_{name}.json.gz"
        save_weights_json(name, layers, hyper, wpath)
        accuracies[name] = acc
        print(f"wrote {wpath} (clean test accuracy {acc:.3f})")
    if accuracies:
        note = out / f"{args.dataset}_accuracy.json"
        note.write_text(json.dumps(accuracies, indent=2) + "\n")
        print(f"wrote {note}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run_export(args)
    except DatasetUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (BridgeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
