"""Writers for the two canonical JSON formats (gzip when the path ends in
.gz). These mirror the consumer's schemas exactly; keeping them local is
what lets the exporter run without the attack toolkit installed.
"""

from __future__ import annotations

import gzip
import json


def _open(path, mode):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def save_graph_json(doc: dict, path) -> None:
    """``doc`` must already be in the canonical graph layout."""
    required = ("num_nodes", "feature_dim", "feature_kind", "num_classes",
                "edges", "features", "labels", "train_mask", "test_mask")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ValueError(f"graph doc missing keys: {missing}")
    with _open(path, "w") as fh:
        json.dump({k: doc[k] for k in required}, fh)


def save_weights_json(kind: str, layers: list, hyper: dict, path) -> None:
    """``layers`` is an ordered [(name, 2-D/1-D array-like)] list."""
    doc = {
        "kind": kind,
        "hyper": {k: float(v) for k, v in hyper.items()},
        "layers": [{"name": name,
                    "shape": list(getattr(arr, "shape", ())),
                    "data": arr.reshape(-1).tolist()}
                   for name, arr in layers],
    }
    with _open(path, "w") as fh:
        json.dump(doc, fh)
