"""Torch reference trainers whose forward semantics match the consumer's
oracles exactly: single-head GAT (leaky slope 0.2, softmax over N(i) and
the self-loop, ReLU between layers) and APPNP (MLP then alpha=0.1 power
iteration, 10 steps). No dropout anywhere, so exported weights reproduce
the training-time forward deterministically.
"""

from __future__ import annotations

import math

import numpy as np
import torch

from .datasets import BridgeError

GAT_SLOPE = 0.2
APPNP_ALPHA = 0.1
APPNP_STEPS = 10


def _directed_with_self_loops(num_nodes: int, edges) -> tuple:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    loops = np.arange(num_nodes)
    recv = np.concatenate([edges[:, 0], edges[:, 1], loops])
    send = np.concatenate([edges[:, 1], edges[:, 0], loops])
    return torch.from_numpy(recv), torch.from_numpy(send)


def _normalized_adjacency(num_nodes: int, edges) -> torch.Tensor:
    recv, send = _directed_with_self_loops(num_nodes, edges)
    adj = torch.zeros((num_nodes, num_nodes), dtype=torch.float64)
    adj[recv, send] = 1.0
    dinv = adj.sum(dim=1).rsqrt()
    return adj * dinv[:, None] * dinv[None, :]


def _glorot(rng: torch.Generator, *shape) -> torch.nn.Parameter:
    fan = shape[0] + shape[-1] if len(shape) > 1 else 1 + shape[0]
    limit = math.sqrt(6.0 / fan)
    init = (torch.rand(shape, generator=rng, dtype=torch.float64) * 2 - 1) * limit
    return torch.nn.Parameter(init)


def _gat_layer(h, recv, send, w, b, a_src, a_dst):
    h = h @ w
    scores = torch.nn.functional.leaky_relu(
        (h @ a_src)[recv] + (h @ a_dst)[send], GAT_SLOPE)
    with torch.no_grad():   # max-shift is softmax-invariant; detach is exact
        mx = torch.full((h.shape[0],), -torch.inf, dtype=h.dtype)
        mx.index_reduce_(0, recv, scores, "amax")
    ex = torch.exp(scores - mx[recv])
    denom = torch.zeros(h.shape[0], dtype=h.dtype).index_add_(0, recv, ex)
    att = ex / denom[recv]
    out = torch.zeros_like(h).index_add_(0, recv, att[:, None] * h[send])
    return out + b


class GatModel(torch.nn.Module):
    def __init__(self, d, hidden, c, rng):
        super().__init__()
        self.w1, self.w2 = _glorot(rng, d, hidden), _glorot(rng, hidden, c)
        self.b1 = torch.nn.Parameter(torch.zeros(hidden, dtype=torch.float64))
        self.b2 = torch.nn.Parameter(torch.zeros(c, dtype=torch.float64))
        self.a1_src, self.a1_dst = _glorot(rng, hidden), _glorot(rng, hidden)
        self.a2_src, self.a2_dst = _glorot(rng, c), _glorot(rng, c)

    def forward(self, x, recv, send):
        h = _gat_layer(x, recv, send, self.w1, self.b1, self.a1_src, self.a1_dst)
        return _gat_layer(torch.relu(h), recv, send,
                          self.w2, self.b2, self.a2_src, self.a2_dst)

    def export(self):
        layers = [(name, getattr(self, name).detach().numpy())
                  for name in ("w1", "b1", "w2", "b2",
                               "a1_src", "a1_dst", "a2_src", "a2_dst")]
        return "gat", layers, {"leaky_slope": GAT_SLOPE}


class AppnpModel(torch.nn.Module):
    def __init__(self, d, hidden, c, rng):
        super().__init__()
        self.w1, self.w2 = _glorot(rng, d, hidden), _glorot(rng, hidden, c)
        self.b1 = torch.nn.Parameter(torch.zeros(hidden, dtype=torch.float64))
        self.b2 = torch.nn.Parameter(torch.zeros(c, dtype=torch.float64))

    def forward(self, x, a_hat):
        h = torch.relu(x @ self.w1 + self.b1) @ self.w2 + self.b2
        z = h
        for _ in range(APPNP_STEPS):
            z = (1.0 - APPNP_ALPHA) * (a_hat @ z) + APPNP_ALPHA * h
        return z

    def export(self):
        layers = [(name, getattr(self, name).detach().numpy())
                  for name in ("w1", "b1", "w2", "b2")]
        return "appnp", layers, {"alpha": APPNP_ALPHA, "steps": float(APPNP_STEPS)}


def train_model(doc: dict, kind: str, hidden_dim: int = 16, epochs: int = 200,
                learning_rate: float = 0.01, weight_decay: float = 5e-4,
                seed: int = 0):
    """Fit one reference model on a canonical graph doc.

    Returns ((kind, layers, hyper), clean test accuracy).
    """
    if kind not in ("gat", "appnp"):
        raise BridgeError(f"unknown model kind {kind!r}")
    n, d, c = doc["num_nodes"], doc["feature_dim"], doc["num_classes"]
    x = torch.from_numpy(
        np.asarray(doc["features"], dtype=np.float64).reshape(n, d))
    labels = torch.tensor(doc["labels"], dtype=torch.long)
    train = torch.tensor(doc["train_mask"], dtype=torch.bool)
    test = torch.tensor(doc["test_mask"], dtype=torch.bool)
    if not bool(train.any()):
        raise BridgeError("empty train split")

    rng = torch.Generator().manual_seed(seed)
    if kind == "gat":
        model = GatModel(d, hidden_dim, c, rng)
        recv, send = _directed_with_self_loops(n, doc["edges"])
        run = lambda: model(x, recv, send)
    else:
        model = AppnpModel(d, hidden_dim, c, rng)
        a_hat = _normalized_adjacency(n, doc["edges"])
        run = lambda: model(x, a_hat)

    optim = torch.optim.Adam(model.parameters(), lr=learning_rate,
                             weight_decay=weight_decay)
    for _ in range(epochs):
        optim.zero_grad()
        loss = torch.nn.functional.cross_entropy(run()[train], labels[train])
        if not torch.isfinite(loss):
            raise BridgeError(f"{kind} training diverged: non-finite loss")
        loss.backward()
        optim.step()

    with torch.no_grad():
        pred = run().argmax(dim=1)
        acc = float((pred[test] == labels[test]).double().mean())
    return model.export(), acc
