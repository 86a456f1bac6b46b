"""Dataset loaders: Planetoid citation graphs (downloaded) and an offline
synthetic SBM so the full pipeline runs with zero external fetches.

Each loader returns a plain dict in the canonical graph layout:
num_nodes, feature_dim, feature_kind, num_classes, edges (u < v, sorted,
deduplicated), features (row-major list), labels, train_mask, test_mask.
"""

from __future__ import annotations

import pickle
import sys
from io import BytesIO

import numpy as np

PLANETOID_URL = "https://github.com/kimiyoung/planetoid/raw/master/data"
PLANETOID_PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph", "test.index")
DATASETS = ("cora", "citeseer", "synthetic-sbm")


class BridgeError(RuntimeError):
    """Export failed (bad arguments, training divergence, ...)."""


class DatasetUnavailable(BridgeError):
    """Dataset could not be downloaded or found locally."""


def _canonical_edges(pairs) -> list:
    seen = set()
    for u, v in pairs:
        u, v = int(u), int(v)
        if u == v:
            continue
        seen.add((min(u, v), max(u, v)))
    return [list(e) for e in sorted(seen)]


def _graph_doc(edges, features, labels, train_mask, test_mask, kind,
               num_classes) -> dict:
    features = np.asarray(features, dtype=np.float64)
    return {
        "num_nodes": int(features.shape[0]),
        "feature_dim": int(features.shape[1]),
        "feature_kind": kind,
        "num_classes": int(num_classes),
        "edges": _canonical_edges(edges),
        "features": features.reshape(-1).tolist(),
        "labels": [int(c) for c in labels],
        "train_mask": [int(b) for b in train_mask],
        "test_mask": [int(b) for b in test_mask],
    }


def make_synthetic_sbm(num_nodes=100, num_blocks=2, feature_dim=20,
                       p_in=0.15, p_out=0.02, noise=0.15, train_frac=0.5,
                       seed=0) -> dict:
    """Planted-partition graph with class-prototype features in [0, 1]."""
    rng = np.random.default_rng(seed)
    block = num_nodes // num_blocks
    labels = np.repeat(np.arange(num_blocks), block)
    labels = np.concatenate([labels, rng.integers(0, num_blocks,
                                                  num_nodes - len(labels))])
    edges = []
    for u in range(num_nodes):
        for v in range(u + 1, num_nodes):
            p = p_in if labels[u] == labels[v] else p_out
            if rng.random() < p:
                edges.append((u, v))
    means = rng.random((num_blocks, feature_dim))
    features = np.clip(means[labels] +
                       rng.normal(0, noise, (num_nodes, feature_dim)), 0, 1)
    perm = rng.permutation(num_nodes)
    train = np.zeros(num_nodes, dtype=bool)
    train[perm[: int(train_frac * num_nodes)]] = True
    return _graph_doc(edges, features, labels, train, ~train,
                      "continuous", num_blocks)


def _fetch(url: str) -> bytes:
    import requests

    resp = requests.get(url, timeout=30)
    resp.raise_for_status()
    return resp.content


def _load_planetoid(name: str) -> dict:
    """Standard public Planetoid split: allx+tx feature stack, graph dict
    adjacency, fixed test index file."""
    try:
        raw = {part: _fetch(f"{PLANETOID_URL}/ind.{name}.{part}")
               for part in PLANETOID_PARTS}
    except Exception as exc:
        raise DatasetUnavailable(f"cannot download {name}: {exc}") from exc

    def unpickle(blob):
        return pickle.Unpickler(BytesIO(blob), encoding="latin1").load()

    allx = unpickle(raw["allx"]).toarray()
    tx = unpickle(raw["tx"]).toarray()
    ally = np.asarray(unpickle(raw["ally"]))
    ty = np.asarray(unpickle(raw["ty"]))
    graph = unpickle(raw["graph"])
    test_idx = np.array([int(line) for line
                         in raw["test.index"].decode().split()])

    num_nodes = max(allx.shape[0] + tx.shape[0], test_idx.max() + 1)
    d = allx.shape[1]
    features = np.zeros((num_nodes, d))
    onehot = np.zeros((num_nodes, ally.shape[1]))
    features[: allx.shape[0]] = allx
    onehot[: ally.shape[0]] = ally
    # test rows arrive shuffled; place them at their true indices (citeseer
    # has isolated test ids with no row at all, left as zeros)
    order = np.sort(test_idx)
    features[order] = tx[np.argsort(test_idx)]
    onehot[order] = ty[np.argsort(test_idx)]
    labels = onehot.argmax(axis=1)

    train = np.zeros(num_nodes, dtype=bool)
    train[: ally.shape[1] * 20] = True          # standard 20 per class
    test = np.zeros(num_nodes, dtype=bool)
    test[test_idx] = True
    edges = [(u, v) for u, nbrs in graph.items() for v in nbrs]
    return _graph_doc(edges, (features > 0).astype(float), labels, train,
                      test, "discrete", onehot.shape[1])


def load_dataset(name: str, seed: int = 0) -> dict:
    if name == "synthetic-sbm":
        return make_synthetic_sbm(seed=seed)
    if name in ("cora", "citeseer"):
        return _load_planetoid(name)
    raise BridgeError(f"unknown dataset {name!r}; expected one of {DATASETS}")
