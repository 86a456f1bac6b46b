"""Attributed graph data model, injection composition, and budget validation.

Graphs are undirected, unweighted, and immutable after construction.
Injected nodes are always appended after the original ids, carry no label
(stored as -1) and belong to neither mask, so original-node bookkeeping
stays valid across injections.
"""

from __future__ import annotations

import gzip
import json
import math
from dataclasses import dataclass, field

import numpy as np

DISCRETE = "discrete"
CONTINUOUS = "continuous"


class GraphError(ValueError):
    """Malformed graph, patch, or constraint data."""


def _canonical_edges(edges, num_nodes: int) -> np.ndarray:
    """Sorted (u < v) deduplicated edge array of shape (m, 2)."""
    arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.min() < 0 or arr.max() >= num_nodes:
        raise GraphError("edge endpoint out of range")
    if np.any(arr[:, 0] == arr[:, 1]):
        raise GraphError("self-loops are not allowed")
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    arr = np.stack([lo, hi], axis=1)
    order = np.lexsort((arr[:, 1], arr[:, 0]))
    arr = arr[order]
    if len(arr) > 1 and np.any(np.all(arr[1:] == arr[:-1], axis=1)):
        raise GraphError("duplicate undirected edge")
    return arr


@dataclass
class Graph:
    """Immutable attributed graph with train/test masks."""

    num_nodes: int
    edges: np.ndarray          # (m, 2), u < v, lexsorted, deduplicated
    features: np.ndarray       # (num_nodes, d) float64
    labels: np.ndarray         # (num_nodes,), -1 marks unlabeled (injected) nodes
    train_mask: np.ndarray
    test_mask: np.ndarray
    feature_kind: str
    num_classes: int
    _nbrs: list | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.edges = _canonical_edges(self.edges, self.num_nodes)
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.train_mask = np.asarray(self.train_mask, dtype=bool)
        self.test_mask = np.asarray(self.test_mask, dtype=bool)
        if self.features.shape[0] != self.num_nodes:
            raise GraphError("feature row count != num_nodes")
        for name in ("labels", "train_mask", "test_mask"):
            if getattr(self, name).shape != (self.num_nodes,):
                raise GraphError(f"{name} length != num_nodes")
        if np.any(self.train_mask & self.test_mask):
            raise GraphError("train and test masks overlap")
        if self.feature_kind not in (DISCRETE, CONTINUOUS):
            raise GraphError(f"unknown feature_kind {self.feature_kind!r}")
        if self.feature_kind == DISCRETE and self.features.size:
            if not np.all((self.features == 0.0) | (self.features == 1.0)):
                raise GraphError("discrete graph has feature values outside {0, 1}")

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        if self.num_edges:
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def neighbors(self, node: int) -> np.ndarray:
        """Sorted first-order neighbor ids of ``node``."""
        if not 0 <= node < self.num_nodes:
            raise GraphError(f"node {node} out of range")
        if self._nbrs is None:
            nbrs = [[] for _ in range(self.num_nodes)]
            for u, v in self.edges:
                nbrs[u].append(v)
                nbrs[v].append(u)
            self._nbrs = [np.array(sorted(n), dtype=np.int64) for n in nbrs]
        return self._nbrs[node]


@dataclass
class InjectionPatch:
    """Injected features plus the cross/inter edge lists of an injection."""

    num_injected: int
    injected_features: np.ndarray            # (num_injected, d)
    cross_edges: list                        # [(injected_index, original_node_id)]
    inter_edges: list                        # [(injected_index, injected_index)]

    def __post_init__(self):
        self.injected_features = np.asarray(self.injected_features, dtype=np.float64)
        if self.injected_features.shape[0] != self.num_injected:
            raise GraphError("injected feature row count != num_injected")
        self.cross_edges = [(int(a), int(b)) for a, b in self.cross_edges]
        self.inter_edges = [(int(a), int(b)) for a, b in self.inter_edges]
        seen = set()
        for i, _ in self.cross_edges:
            if not 0 <= i < self.num_injected:
                raise GraphError("cross edge injected index out of range")
        for i, j in self.inter_edges:
            if i == j:
                raise GraphError("inter edge self-loop")
            if not (0 <= i < self.num_injected and 0 <= j < self.num_injected):
                raise GraphError("inter edge index out of range")
        for key in ([("c",) + e for e in self.cross_edges]
                    + [("i", min(a, b), max(a, b)) for a, b in self.inter_edges]):
            if key in seen:
                raise GraphError(f"duplicate patch edge {key[1:]}")
            seen.add(key)

    @classmethod
    def empty(cls, feature_dim: int) -> "InjectionPatch":
        return cls(0, np.zeros((0, feature_dim)), [], [])

    @property
    def num_edges(self) -> int:
        return len(self.cross_edges) + len(self.inter_edges)

    def injected_degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_injected, dtype=np.int64)
        for i, _ in self.cross_edges:
            deg[i] += 1
        for i, j in self.inter_edges:
            deg[i] += 1
            deg[j] += 1
        return deg


@dataclass
class ConstraintSpec:
    """Injection budgets and feature bounds."""

    max_injected_nodes: int
    max_injected_edges: int
    degree_cap: int
    feature_min: float
    feature_max: float

    def __post_init__(self):
        if self.max_injected_nodes < 0 or self.max_injected_edges < 0:
            raise GraphError("budgets must be non-negative")
        if self.degree_cap < 1:
            raise GraphError("degree cap must be >= 1")
        if self.feature_min > self.feature_max:
            raise GraphError("feature_min > feature_max")


def compose(graph: Graph, patch: InjectionPatch) -> Graph:
    """Block-compose ``patch`` onto ``graph``; original nodes/edges unchanged."""
    if patch.injected_features.shape[1] != graph.feature_dim and patch.num_injected:
        raise GraphError("patch feature dim != graph feature dim")
    n = graph.num_nodes
    for _, dst in patch.cross_edges:
        if not 0 <= dst < n:
            raise GraphError(f"cross edge target {dst} out of range")
    new_edges = [(n + i, dst) for i, dst in patch.cross_edges]
    new_edges += [(n + i, n + j) for i, j in patch.inter_edges]
    edges = np.concatenate([graph.edges.reshape(-1, 2),
                            np.asarray(new_edges, dtype=np.int64).reshape(-1, 2)])
    total = n + patch.num_injected
    if patch.num_injected:
        features = np.vstack([graph.features, patch.injected_features])
    else:
        features = graph.features
    pad = np.zeros(patch.num_injected, dtype=bool)
    return Graph(
        num_nodes=total,
        edges=edges,
        features=features,
        labels=np.concatenate([graph.labels,
                               np.full(patch.num_injected, -1, dtype=np.int64)]),
        train_mask=np.concatenate([graph.train_mask, pad]),
        test_mask=np.concatenate([graph.test_mask, pad]),
        feature_kind=graph.feature_kind,
        num_classes=graph.num_classes,
    )


def validate_constraints(graph: Graph, patch: InjectionPatch,
                         spec: ConstraintSpec) -> list[str]:
    """All violated budget clauses; an empty list means the patch is admissible."""
    violations = []
    if patch.num_injected > spec.max_injected_nodes:
        violations.append(
            f"injected nodes {patch.num_injected} > budget {spec.max_injected_nodes}")
    if patch.num_edges > spec.max_injected_edges:
        violations.append(
            f"injected edges {patch.num_edges} > budget {spec.max_injected_edges}")
    for i, deg in enumerate(patch.injected_degrees()):
        if deg < 1:
            violations.append(f"injected node {i} degree 0 < 1")
        elif deg > spec.degree_cap:
            violations.append(
                f"injected node {i} degree {deg} > cap {spec.degree_cap}")
    if patch.num_injected:
        feats = patch.injected_features
        if feats.min() < spec.feature_min or feats.max() > spec.feature_max:
            violations.append("feature out of bounds "
                              f"[{spec.feature_min}, {spec.feature_max}]")
    return violations


def neighbor_set(graph: Graph, node: int) -> set[int]:
    return set(int(v) for v in graph.neighbors(node))


def test_neighbor_score(graph: Graph, node: int) -> int:
    """Number of first-order neighbors of a test node that are themselves test nodes."""
    if not graph.test_mask[node]:
        raise GraphError(f"node {node} is not a test node")
    nbrs = graph.neighbors(node)
    return int(graph.test_mask[nbrs].sum()) if len(nbrs) else 0


test_neighbor_score.__test__ = False  # keep pytest from collecting it


def default_constraints(graph: Graph, a: float) -> ConstraintSpec:
    """Budgets from an injection fraction: node budget a*n, degree cap = avg degree."""
    if not 0 < a <= 1:
        raise GraphError(f"budget fraction {a} outside (0, 1]")
    delta_n = math.ceil(a * graph.num_nodes)
    avg_deg = 2 * graph.num_edges / graph.num_nodes if graph.num_nodes else 0.0
    cap = max(1, round(avg_deg))
    return ConstraintSpec(
        max_injected_nodes=delta_n,
        max_injected_edges=delta_n * cap,
        degree_cap=cap,
        feature_min=float(graph.features.min()) if graph.features.size else 0.0,
        feature_max=float(graph.features.max()) if graph.features.size else 0.0,
    )


# ---------------------------------------------------------------------------
# Canonical JSON file format (gzip when the path ends in .gz)
# ---------------------------------------------------------------------------

def _open(path, mode):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def save_graph(graph: Graph, path) -> None:
    doc = {
        "num_nodes": graph.num_nodes,
        "feature_dim": graph.feature_dim,
        "feature_kind": graph.feature_kind,
        "num_classes": graph.num_classes,
        "edges": graph.edges.tolist(),
        "features": graph.features.reshape(-1).tolist(),
        "labels": graph.labels.tolist(),
        "train_mask": graph.train_mask.astype(int).tolist(),
        "test_mask": graph.test_mask.astype(int).tolist(),
    }
    with _open(path, "w") as fh:
        json.dump(doc, fh)


def load_graph(path) -> Graph:
    with _open(path, "r") as fh:
        doc = json.load(fh)
    try:
        n = int(doc["num_nodes"])
        d = int(doc["feature_dim"])
        features = np.asarray(doc["features"], dtype=np.float64).reshape(n, d)
        return Graph(
            num_nodes=n,
            edges=np.asarray(doc["edges"], dtype=np.int64).reshape(-1, 2),
            features=features,
            labels=np.asarray(doc["labels"], dtype=np.int64),
            train_mask=np.asarray(doc["train_mask"], dtype=bool),
            test_mask=np.asarray(doc["test_mask"], dtype=bool),
            feature_kind=doc["feature_kind"],
            num_classes=int(doc["num_classes"]),
        )
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed graph file {path}: {exc}") from exc


def save_patch(patch: InjectionPatch, path, feature_dim: int,
               config_echo: dict | None = None, query_count: int = 0) -> None:
    doc = {
        "num_injected": patch.num_injected,
        "feature_dim": feature_dim,
        "injected_features": patch.injected_features.reshape(-1).tolist(),
        "cross_edges": [list(e) for e in patch.cross_edges],
        "inter_edges": [list(e) for e in patch.inter_edges],
        "config_echo": config_echo or {},
        "query_count": query_count,
    }
    with _open(path, "w") as fh:
        json.dump(doc, fh)


def load_patch(path) -> tuple[InjectionPatch, dict]:
    """Patch plus its metadata (config_echo, query_count)."""
    with _open(path, "r") as fh:
        doc = json.load(fh)
    try:
        ni = int(doc["num_injected"])
        d = int(doc["feature_dim"])
        patch = InjectionPatch(
            num_injected=ni,
            injected_features=np.asarray(
                doc["injected_features"], dtype=np.float64).reshape(ni, d),
            cross_edges=[tuple(e) for e in doc["cross_edges"]],
            inter_edges=[tuple(e) for e in doc["inter_edges"]],
        )
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed patch file {path}: {exc}") from exc
    meta = {"config_echo": doc.get("config_echo", {}),
            "query_count": int(doc.get("query_count", 0))}
    return patch, meta
