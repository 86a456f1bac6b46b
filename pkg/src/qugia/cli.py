"""Command-line entry point: train, attack, evaluate, similarity.

Flag values override config-file values, which override built-in defaults;
the effective attack configuration is echoed into every artifact that has
room for it. Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import evaluate as ev
from . import plots
from .attack import AttackConfig, AttackError, run_attack
from .baselines import run_baseline, RANDOM_EDGES_RANDOM_FEATURES, \
    QUGIA_EDGES_RANDOM_FEATURES
from .graph import (GraphError, compose, default_constraints, load_graph,
                    load_patch, save_patch, validate_constraints)
from .models import (DefenseConfig, ModelError, QueryOracle, TrainConfig,
                     load_weights, predict, save_weights, train_gcn)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


ATTACK_FLAG_DEFAULTS = {
    "budget": 0.05,
    "seed": 0,
    "attack": "qugia",
    "defense": False,
    "defense_threshold": 0.1,
    "flip_budget": None,
    "max_iters": 200,
    "decay_init": 1.0,
    "decay_base": 0.97,
    "gamma": 0.05,
    "neighbor_edges": 3,
    "true_labels": False,
    "eq13_flip": False,
}

TRAIN_FLAG_DEFAULTS = {
    "seed": 0,
    "hidden_dim": 64,
    "learning_rate": 0.2,
    "epochs": 300,
    "weight_decay": 5e-4,
}


def _merge(defaults: dict, config_path, args) -> dict:
    """defaults < config file < explicitly given flags."""
    merged = dict(defaults)
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        for key, val in file_cfg.items():
            if key in merged:
                merged[key] = val
    for key in merged:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _build_parser() -> _Parser:
    parser = _Parser(prog="qugia",
                     description="Graph injection attacks and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a GCN victim model")
    p_train.add_argument("--graph", required=True, help="graph JSON path")
    p_train.add_argument("--out", required=True, help="output weights path")
    p_train.add_argument("--config", help="JSON config file")
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--hidden-dim", type=int, dest="hidden_dim")
    p_train.add_argument("--learning-rate", type=float, dest="learning_rate")
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--weight-decay", type=float, dest="weight_decay")

    p_att = sub.add_parser("attack", help="run an injection attack")
    p_att.add_argument("--graph", required=True)
    p_att.add_argument("--weights", required=True)
    p_att.add_argument("--out", required=True, help="output patch path")
    p_att.add_argument("--config", help="JSON config file")
    p_att.add_argument("--attack", choices=["qugia", "random", "random-feat"])
    p_att.add_argument("--budget", type=float, help="injected-node fraction a")
    p_att.add_argument("--seed", type=int)
    p_att.add_argument("--defense", action="store_const", const=True,
                       default=None, help="query the edge-pruning defended model")
    p_att.add_argument("--defense-threshold", type=float, dest="defense_threshold")
    p_att.add_argument("--flip-budget", type=int, dest="flip_budget")
    p_att.add_argument("--max-iters", type=int, dest="max_iters")
    p_att.add_argument("--decay-init", type=float, dest="decay_init")
    p_att.add_argument("--decay-base", type=float, dest="decay_base")
    p_att.add_argument("--gamma", type=float)
    p_att.add_argument("--neighbor-edges", type=int, dest="neighbor_edges")
    p_att.add_argument("--true-labels", action="store_const", const=True,
                       default=None, dest="true_labels")
    p_att.add_argument("--eq13-flip", action="store_const", const=True,
                       default=None, dest="eq13_flip")

    p_eval = sub.add_parser("evaluate", help="run a manifest of experiments")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--out", required=True, help="output directory")
    p_eval.add_argument("--jobs", type=int, default=1)
    p_eval.add_argument("--no-figures", action="store_true")

    p_sim = sub.add_parser("similarity",
                           help="node-similarity shift of a patch")
    p_sim.add_argument("--graph", required=True)
    p_sim.add_argument("--patch", required=True)
    p_sim.add_argument("--out", required=True, help="output JSON path")
    p_sim.add_argument("--no-figures", action="store_true")
    return parser


def cmd_train(args) -> int:
    cfg = _merge(TRAIN_FLAG_DEFAULTS, args.config, args)
    graph = load_graph(args.graph)
    weights = train_gcn(graph, TrainConfig(
        hidden_dim=int(cfg["hidden_dim"]),
        learning_rate=float(cfg["learning_rate"]),
        epochs=int(cfg["epochs"]),
        weight_decay=float(cfg["weight_decay"]),
        seed=int(cfg["seed"])))
    save_weights(weights, args.out)
    pred = predict(weights, graph)
    train_acc = ev.accuracy(pred, graph.labels, graph.train_mask)
    test_acc = ev.accuracy(pred, graph.labels, graph.test_mask)
    print(f"train accuracy {train_acc:.4f}  test accuracy {test_acc:.4f}")
    print(f"weights written to {args.out}")
    return 0


def cmd_attack(args) -> int:
    cfg = _merge(ATTACK_FLAG_DEFAULTS, args.config, args)
    graph = load_graph(args.graph)
    weights = load_weights(args.weights)
    a = float(cfg["budget"])
    attack_cfg = AttackConfig(
        flip_budget=cfg["flip_budget"],
        max_iters=int(cfg["max_iters"]),
        decay_init=float(cfg["decay_init"]),
        decay_base=float(cfg["decay_base"]),
        gamma=float(cfg["gamma"]),
        neighbor_edges=int(cfg["neighbor_edges"]),
        rng_seed=int(cfg["seed"]),
        use_true_labels=bool(cfg["true_labels"]),
        eq13_flip=bool(cfg["eq13_flip"]))
    defense = DefenseConfig(enabled=bool(cfg["defense"]),
                            similarity_threshold=float(cfg["defense_threshold"]))
    echo = {**attack_cfg.as_dict(), "attack": cfg["attack"], "budget": a,
            "defense": defense.enabled,
            "defense_threshold": defense.similarity_threshold}

    if a == 0:
        from .graph import InjectionPatch
        patch, queries = InjectionPatch.empty(graph.feature_dim), 0
        constraints = None
    else:
        constraints = default_constraints(graph, a)
        if cfg["attack"] == "qugia":
            oracle = QueryOracle(weights, defense)
            result = run_attack(graph, oracle, attack_cfg, constraints)
            patch, queries = result.patch, result.query_count
        else:
            kind = (RANDOM_EDGES_RANDOM_FEATURES if cfg["attack"] == "random"
                    else QUGIA_EDGES_RANDOM_FEATURES)
            patch = run_baseline(graph, kind, constraints, attack_cfg.rng_seed)
            queries = 0

    save_patch(patch, args.out, graph.feature_dim, echo, queries)
    violations = (validate_constraints(graph, patch, constraints)
                  if constraints else [])
    print(f"queries: {queries}")
    print(f"injected nodes: {patch.num_injected}  edges: {patch.num_edges}")
    if violations:
        print("constraint violations: " + "; ".join(violations), file=sys.stderr)
        return 2
    print("constraints: ok")
    return 0


def cmd_evaluate(args) -> int:
    manifest = ev.Manifest.load(args.manifest)
    reports = ev.run_experiment(manifest, jobs=args.jobs)
    out_dir = Path(args.out)
    ev.write_reports(reports, out_dir)
    if not args.no_figures and reports:
        plots.render_report_figures(reports, out_dir)
    print(f"{len(reports)} cells written to {out_dir}")
    return 0


def cmd_similarity(args) -> int:
    graph = load_graph(args.graph)
    patch, _meta = load_patch(args.patch)
    attacked = compose(graph, patch)
    sim_clean = ev.node_similarity(graph)
    sim_attacked = ev.node_similarity(attacked)
    ks = ev.similarity_shift(graph, attacked)
    doc = {
        "similarity_clean": sim_clean.tolist(),
        "similarity_attacked": sim_attacked.tolist(),
        "histogram_clean": ev.similarity_histogram(sim_clean),
        "histogram_attacked": ev.similarity_histogram(sim_attacked),
        "ks_similarity": ks,
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    if not args.no_figures:
        fig_path = str(Path(args.out).with_suffix(".png"))
        plots.render_similarity_figure(sim_clean, sim_attacked, fig_path)
    print(f"ks_similarity: {ks:.6f}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "attack": cmd_attack,
    "evaluate": cmd_evaluate,
    "similarity": cmd_similarity,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return 2
    except (GraphError, ModelError, AttackError, ev.EvalError,
            json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
