"""Victim model oracles: GCN, APPNP, and single-head GAT forward passes,
a from-scratch GCN trainer, and a cosine-similarity edge-pruning defense.

All math runs in float64 so forward passes agree with a dense reference
to 1e-6. The attack only ever needs forward queries, so GAT/APPNP weights
are loaded from files rather than trained here.
"""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import Graph, GraphError

GCN = "gcn"
APPNP = "appnp"
GAT = "gat"

DEFAULT_HYPER = {
    APPNP: {"alpha": 0.1, "steps": 10.0},
    GAT: {"leaky_slope": 0.2},
    GCN: {},
}


class ModelError(ValueError):
    """Weight/shape inconsistency or malformed weight file."""


@dataclass
class ModelWeights:
    kind: str
    layers: list          # ordered [(name, ndarray)]
    hyper: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (GCN, APPNP, GAT):
            raise ModelError(f"unknown model kind {self.kind!r}")
        self.layers = [(name, np.asarray(arr, dtype=np.float64))
                       for name, arr in self.layers]
        self._by_name = dict(self.layers)
        _check_chain(self)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._by_name[name]

    @property
    def input_dim(self) -> int:
        return self["w1"].shape[0]

    @property
    def output_dim(self) -> int:
        return self["w2"].shape[1]


def _check_chain(weights: ModelWeights) -> None:
    by = weights._by_name
    for name in ("w1", "b1", "w2", "b2"):
        if name not in by:
            raise ModelError(f"missing layer {name}")
    d, h = by["w1"].shape
    h2, c = by["w2"].shape
    if h != h2 or by["b1"].shape != (h,) or by["b2"].shape != (c,):
        raise ModelError("layer shapes do not chain")
    if weights.kind == GAT:
        for name, dim in (("a1_src", h), ("a1_dst", h), ("a2_src", c), ("a2_dst", c)):
            if name not in by or by[name].shape != (dim,):
                raise ModelError(f"attention vector {name} missing or misshaped")


@dataclass
class DefenseConfig:
    enabled: bool = False
    similarity_threshold: float = 0.1

    def __post_init__(self):
        if not np.isfinite(self.similarity_threshold):
            raise ModelError("defense threshold must be finite")


def guard_prune(graph: Graph, threshold: float) -> np.ndarray:
    """Edges whose endpoint feature cosine similarity is >= threshold.

    Zero-norm feature vectors count as similarity 0; self-loops are never
    stored in the edge list, so they are never pruned.
    """
    if graph.num_edges == 0:
        return graph.edges
    x = graph.features
    norms = np.linalg.norm(x, axis=1)
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    denom = norms[u] * norms[v]
    dots = np.einsum("ij,ij->i", x[u], x[v])
    sims = np.where(denom > 0, dots / np.where(denom > 0, denom, 1.0), 0.0)
    return graph.edges[sims >= threshold]


def _normalized_adjacency(num_nodes: int, edges: np.ndarray) -> sp.csr_matrix:
    """Symmetric inverse-sqrt-degree normalization with self-loops."""
    if num_nodes == 0:
        return sp.csr_matrix((0, 0))
    rows = np.concatenate([edges[:, 0], edges[:, 1], np.arange(num_nodes)])
    cols = np.concatenate([edges[:, 1], edges[:, 0], np.arange(num_nodes)])
    data = np.ones(len(rows), dtype=np.float64)
    adj = sp.csr_matrix((data, (rows, cols)), shape=(num_nodes, num_nodes))
    deg = np.asarray(adj.sum(axis=1)).reshape(-1)
    dinv = 1.0 / np.sqrt(deg)
    return sp.csr_matrix(adj.multiply(dinv[:, None]).multiply(dinv[None, :]))


def normalize_adjacency(graph: Graph) -> sp.csr_matrix:
    return _normalized_adjacency(graph.num_nodes, graph.edges)


def _relu(x):
    return np.maximum(x, 0.0)


def _gat_layer(x, edges, w, b, a_src, a_dst, slope):
    """Single-head attention aggregation over N(i) plus the self-loop."""
    n = x.shape[0]
    h = x @ w
    recv = np.concatenate([edges[:, 0], edges[:, 1], np.arange(n)])
    send = np.concatenate([edges[:, 1], edges[:, 0], np.arange(n)])
    scores = h @ a_src
    scores = scores[recv] + (h @ a_dst)[send]
    scores = np.where(scores > 0, scores, slope * scores)
    # segment softmax per receiving node
    mx = np.full(n, -np.inf)
    np.maximum.at(mx, recv, scores)
    ex = np.exp(scores - mx[recv])
    denom = np.zeros(n)
    np.add.at(denom, recv, ex)
    att = ex / denom[recv]
    out = np.zeros_like(h)
    np.add.at(out, recv, att[:, None] * h[send])
    return out + b


def forward(weights: ModelWeights, graph: Graph,
            defense: DefenseConfig | None = None) -> np.ndarray:
    """Deterministic logits of shape (num_nodes, num_classes)."""
    if weights.input_dim != graph.feature_dim:
        raise ModelError(
            f"weights expect feature dim {weights.input_dim}, graph has {graph.feature_dim}")
    if weights.output_dim != graph.num_classes:
        raise ModelError("weight output dim != num_classes")
    edges = graph.edges
    if defense is not None and defense.enabled:
        edges = guard_prune(graph, defense.similarity_threshold)
    x = graph.features
    if weights.kind == GCN:
        a_hat = _normalized_adjacency(graph.num_nodes, edges)
        h = _relu(a_hat @ (x @ weights["w1"]) + weights["b1"])
        return a_hat @ (h @ weights["w2"]) + weights["b2"]
    if weights.kind == APPNP:
        a_hat = _normalized_adjacency(graph.num_nodes, edges)
        alpha = float(weights.hyper.get("alpha", 0.1))
        steps = int(weights.hyper.get("steps", 10))
        h = _relu(x @ weights["w1"] + weights["b1"]) @ weights["w2"] + weights["b2"]
        z = h
        for _ in range(steps):
            z = (1.0 - alpha) * (a_hat @ z) + alpha * h
        return z
    # GAT
    slope = float(weights.hyper.get("leaky_slope", 0.2))
    h = _gat_layer(x, edges, weights["w1"], weights["b1"],
                   weights["a1_src"], weights["a1_dst"], slope)
    h = _relu(h)
    return _gat_layer(h, edges, weights["w2"], weights["b2"],
                      weights["a2_src"], weights["a2_dst"], slope)


def predict(weights: ModelWeights, graph: Graph,
            defense: DefenseConfig | None = None) -> np.ndarray:
    """Per-node class ids; argmax breaks ties toward the lowest class id."""
    return np.argmax(forward(weights, graph, defense), axis=1)


class QueryOracle:
    """Black-box logit oracle wrapping one victim model; counts queries."""

    def __init__(self, weights: ModelWeights, defense: DefenseConfig | None = None):
        self.weights = weights
        self.defense = defense
        self.queries = 0

    def __call__(self, graph: Graph) -> np.ndarray:
        self.queries += 1
        return forward(self.weights, graph, self.defense)


# ---------------------------------------------------------------------------
# GCN trainer (manual backprop, full-batch gradient descent)
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    hidden_dim: int = 64
    learning_rate: float = 0.2
    epochs: int = 300
    weight_decay: float = 5e-4
    seed: int = 0


def _glorot(rng, shape):
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


def train_gcn(graph: Graph, config: TrainConfig | None = None) -> ModelWeights:
    """Fit a 2-layer GCN by full-batch gradient descent on train-node
    cross-entropy. Deterministic for a fixed seed."""
    config = config or TrainConfig()
    train_idx = np.where(graph.train_mask)[0]
    if len(train_idx) == 0:
        raise ModelError("cannot train on an empty train set")
    rng = np.random.default_rng(config.seed)
    d, h, c = graph.feature_dim, config.hidden_dim, graph.num_classes
    w1, b1 = _glorot(rng, (d, h)), np.zeros(h)
    w2, b2 = _glorot(rng, (h, c)), np.zeros(c)

    a_hat = normalize_adjacency(graph)
    px = a_hat @ graph.features            # propagated inputs, fixed all epochs
    y = graph.labels[train_idx]
    onehot = np.zeros((len(train_idx), c))
    onehot[np.arange(len(train_idx)), y] = 1.0
    wd, lr = config.weight_decay, config.learning_rate

    for _ in range(config.epochs):
        h_pre = px @ w1 + b1
        hid = _relu(h_pre)
        q = a_hat @ hid
        z = q @ w2 + b2
        probs = _softmax(z[train_idx])
        loss = -np.mean(np.log(probs[np.arange(len(train_idx)), y] + 1e-12))
        if not np.isfinite(loss):
            raise ModelError("training diverged: non-finite loss")
        dz = np.zeros_like(z)
        dz[train_idx] = (probs - onehot) / len(train_idx)
        dw2 = q.T @ dz + wd * w2
        db2 = dz.sum(axis=0)
        dq = dz @ w2.T
        dhid = a_hat @ dq                  # A_hat is symmetric
        dh_pre = dhid * (h_pre > 0)
        dw1 = px.T @ dh_pre + wd * w1
        db1 = dh_pre.sum(axis=0)
        w1 -= lr * dw1
        b1 -= lr * db1
        w2 -= lr * dw2
        b2 -= lr * db2

    return ModelWeights(GCN, [("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)])


# ---------------------------------------------------------------------------
# Weight file I/O (JSON, gzip by extension)
# ---------------------------------------------------------------------------

def _open(path, mode):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def save_weights(weights: ModelWeights, path) -> None:
    doc = {
        "kind": weights.kind,
        "hyper": {k: float(v) for k, v in weights.hyper.items()},
        "layers": [
            {"name": name, "shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
            for name, arr in weights.layers
        ],
    }
    with _open(path, "w") as fh:
        json.dump(doc, fh)


def load_weights(path) -> ModelWeights:
    try:
        with _open(path, "r") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, EOFError, OSError) as exc:
        raise ModelError(f"malformed weight file {path}: {exc}") from exc
    try:
        layers = []
        for layer in doc["layers"]:
            shape = tuple(int(s) for s in layer["shape"])
            data = np.asarray(layer["data"], dtype=np.float64)
            if data.size != int(np.prod(shape)):
                raise ModelError(
                    f"layer {layer['name']}: declared shape {shape} != data length {data.size}")
            layers.append((layer["name"], data.reshape(shape)))
        return ModelWeights(doc["kind"], layers, dict(doc.get("hyper", {})))
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed weight file {path}: {exc}") from exc
