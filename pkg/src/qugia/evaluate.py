"""Experiment runner: accuracy under attack, query accounting, and
node-similarity (homophily) distribution shift.

Each manifest cell is (dataset, model, defense, budget, seed). The harness
emits one CSV row per cell, a mean/std aggregate across seeds, and the raw
per-node similarity values so distribution plots can be regenerated with
any binning.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import baselines
from .attack import AttackConfig, run_attack
from .graph import Graph, compose, default_constraints, load_graph
from .models import DefenseConfig, QueryOracle, load_weights, predict

SIMILARITY_BINS = 50

REPORT_COLUMNS = ["dataset", "model", "defense", "a", "seed", "clean_acc",
                  "attacked_acc", "queries", "runtime_s", "ks_similarity"]
AGGREGATE_COLUMNS = ["dataset", "model", "defense", "a",
                     "clean_acc_mean", "clean_acc_std",
                     "attacked_acc_mean", "attacked_acc_std",
                     "ks_similarity_mean", "ks_similarity_std"]


class EvalError(RuntimeError):
    pass


def accuracy(predictions: np.ndarray, labels: np.ndarray,
             mask: np.ndarray) -> float:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EvalError("accuracy over an empty mask")
    return float(np.mean(predictions[mask] == labels[mask]))


def node_similarity(graph: Graph) -> np.ndarray:
    """Cosine similarity between each node's features and the mean of its
    neighbors' features; isolated nodes are excluded, zero norms score 0."""
    values = []
    for u in range(graph.num_nodes):
        nbrs = graph.neighbors(u)
        if len(nbrs) == 0:
            continue
        x = graph.features[u]
        agg = graph.features[nbrs].mean(axis=0)
        denom = np.linalg.norm(x) * np.linalg.norm(agg)
        values.append(float(x @ agg / denom) if denom > 0 else 0.0)
    return np.array(values)


def similarity_histogram(values: np.ndarray) -> list[int]:
    counts, _ = np.histogram(values, bins=SIMILARITY_BINS, range=(-1.0, 1.0))
    return counts.tolist()


def similarity_shift(clean: Graph, perturbed: Graph) -> float:
    """Kolmogorov-Smirnov statistic between the two similarity samples."""
    a = node_similarity(clean)
    b = node_similarity(perturbed)
    if len(a) == 0 or len(b) == 0:
        raise EvalError("no scored nodes to compare")
    if len(a) == len(b) and np.array_equal(a, b):
        return 0.0
    return float(stats.ks_2samp(a, b).statistic)


@dataclass
class AttackReport:
    dataset: str
    model: str
    defense: bool
    a: float
    seed: int
    clean_accuracy: float
    attacked_accuracy: float
    queries: int
    runtime: float
    ks_similarity: float
    similarity_clean: np.ndarray = field(repr=False, default=None)
    similarity_attacked: np.ndarray = field(repr=False, default=None)
    traces: list = field(repr=False, default_factory=list)

    @property
    def histogram_clean(self):
        return similarity_histogram(self.similarity_clean)

    @property
    def histogram_attacked(self):
        return similarity_histogram(self.similarity_attacked)

    def cell_id(self) -> str:
        dfl = "def" if self.defense else "nodef"
        return f"{self.dataset}_{self.model}_{dfl}_a{self.a}_s{self.seed}"


@dataclass
class Manifest:
    datasets: list          # [{"name", "graph"}]
    models: list            # [{"name", "weights"}]
    defenses: list          # [{"enabled", "threshold"}]
    budgets: list
    seeds: list
    attack: str = "qugia"
    attack_config: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "Manifest":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        try:
            return cls(
                datasets=doc["datasets"], models=doc["models"],
                defenses=doc.get("defenses", [{"enabled": False}]),
                budgets=doc["budgets"],
                seeds=doc.get("seeds", [0, 1, 2, 3, 4]),
                attack=doc.get("attack", "qugia"),
                attack_config=doc.get("attack_config", {}),
            )
        except KeyError as exc:
            raise EvalError(f"manifest missing key: {exc}") from exc

    def cells(self):
        for ds in self.datasets:
            for model in self.models:
                for defense in self.defenses:
                    for a in self.budgets:
                        for seed in self.seeds:
                            yield ds, model, defense, a, seed


def run_attack_by_name(name: str, graph, oracle, config, constraints):
    """Dispatch an attack name to (patch, query_count, traces)."""
    if name == "qugia":
        result = run_attack(graph, oracle, config, constraints)
        return result.patch, result.query_count, result.traces
    if name in ("random", baselines.RANDOM_EDGES_RANDOM_FEATURES):
        patch = baselines.run_baseline(
            graph, baselines.RANDOM_EDGES_RANDOM_FEATURES, constraints,
            config.rng_seed)
        return patch, 0, []
    if name in ("random-feat", baselines.QUGIA_EDGES_RANDOM_FEATURES):
        patch = baselines.run_baseline(
            graph, baselines.QUGIA_EDGES_RANDOM_FEATURES, constraints,
            config.rng_seed)
        return patch, 0, []
    raise EvalError(f"unknown attack {name!r}")


def run_cell(dataset_name: str, graph: Graph, model_name: str, weights,
             defense: DefenseConfig, a: float, seed: int,
             attack_name: str = "qugia",
             config_overrides: dict | None = None) -> AttackReport:
    config = AttackConfig(**{**(config_overrides or {}), "rng_seed": seed})
    constraints = default_constraints(graph, a) if a > 0 else None
    clean_pred = predict(weights, graph, defense)
    clean_acc = accuracy(clean_pred, graph.labels, graph.test_mask)
    sim_clean = node_similarity(graph)

    start = time.perf_counter()
    if a == 0 or constraints.max_injected_nodes == 0:
        from .graph import InjectionPatch
        patch, queries, traces = InjectionPatch.empty(graph.feature_dim), 0, []
    else:
        oracle = QueryOracle(weights, defense)
        patch, queries, traces = run_attack_by_name(
            attack_name, graph, oracle, config, constraints)
    runtime = time.perf_counter() - start

    attacked = compose(graph, patch)
    attacked_pred = predict(weights, attacked, defense)
    attacked_acc = accuracy(attacked_pred, attacked.labels, attacked.test_mask)
    sim_attacked = node_similarity(attacked)
    ks = similarity_shift(graph, attacked)

    return AttackReport(
        dataset=dataset_name, model=model_name, defense=defense.enabled,
        a=a, seed=seed, clean_accuracy=clean_acc,
        attacked_accuracy=attacked_acc, queries=queries, runtime=runtime,
        ks_similarity=ks, similarity_clean=sim_clean,
        similarity_attacked=sim_attacked, traces=traces)


def _report_row(r: AttackReport) -> list:
    return [r.dataset, r.model, int(r.defense), r.a, r.seed,
            f"{r.clean_accuracy:.6f}", f"{r.attacked_accuracy:.6f}",
            r.queries, f"{r.runtime:.3f}", f"{r.ks_similarity:.6f}"]


def write_reports(reports: list[AttackReport], out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "results.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            writer.writerow(_report_row(r))

    groups = {}
    for r in reports:
        groups.setdefault((r.dataset, r.model, r.defense, r.a), []).append(r)
    with open(out_dir / "aggregate.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_COLUMNS)
        for (ds, model, defense, a), rs in sorted(groups.items()):
            clean = np.array([r.clean_accuracy for r in rs])
            att = np.array([r.attacked_accuracy for r in rs])
            ks = np.array([r.ks_similarity for r in rs])
            writer.writerow([ds, model, int(defense), a,
                             f"{clean.mean():.6f}", f"{clean.std():.6f}",
                             f"{att.mean():.6f}", f"{att.std():.6f}",
                             f"{ks.mean():.6f}", f"{ks.std():.6f}"])

    for r in reports:
        doc = {
            "similarity_clean": r.similarity_clean.tolist(),
            "similarity_attacked": r.similarity_attacked.tolist(),
            "histogram_clean": r.histogram_clean,
            "histogram_attacked": r.histogram_attacked,
            "ks_similarity": r.ks_similarity,
        }
        with open(out_dir / f"similarity_{r.cell_id()}.json", "w",
                  encoding="utf-8") as fh:
            json.dump(doc, fh)


def run_experiment(manifest: Manifest, jobs: int = 1) -> list[AttackReport]:
    """Run every manifest cell; raises on the first missing artifact."""
    graphs = {ds["name"]: load_graph(ds["graph"]) for ds in manifest.datasets}
    weights = {m["name"]: load_weights(m["weights"]) for m in manifest.models}

    cells = list(manifest.cells())

    def _one(cell):
        ds, model, defense, a, seed = cell
        dcfg = DefenseConfig(enabled=bool(defense.get("enabled", False)),
                             similarity_threshold=float(defense.get("threshold", 0.1)))
        return run_cell(ds["name"], graphs[ds["name"]], model["name"],
                        weights[model["name"]], dcfg, a, seed,
                        manifest.attack, manifest.attack_config)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_one, cells))
    else:
        reports = [_one(c) for c in cells]
    return reports
