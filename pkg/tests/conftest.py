import numpy as np
import pytest

from qugia.graph import Graph
from qugia.models import TrainConfig, train_gcn


def make_sbm(num_nodes=100, num_blocks=2, feature_dim=20, p_in=0.15,
             p_out=0.02, noise=0.15, train_frac=0.5, seed=0,
             feature_kind="continuous"):
    """Two-community stochastic block model with class-dependent features.

    Features are class-mean prototypes plus noise, clipped into [0, 1]
    (or thresholded to {0, 1} for discrete graphs).
    """
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(num_blocks), num_nodes // num_blocks)
    labels = np.concatenate([labels,
                             rng.integers(0, num_blocks,
                                          num_nodes - len(labels))])
    edges = []
    for u in range(num_nodes):
        for v in range(u + 1, num_nodes):
            p = p_in if labels[u] == labels[v] else p_out
            if rng.random() < p:
                edges.append((u, v))

    means = rng.random((num_blocks, feature_dim))
    features = means[labels] + rng.normal(0, noise, (num_nodes, feature_dim))
    features = np.clip(features, 0.0, 1.0)
    if feature_kind == "discrete":
        features = (features > 0.5).astype(float)

    perm = rng.permutation(num_nodes)
    train_mask = np.zeros(num_nodes, dtype=bool)
    train_mask[perm[: int(train_frac * num_nodes)]] = True
    test_mask = ~train_mask
    return Graph(num_nodes=num_nodes, edges=np.array(edges, dtype=np.int64),
                 features=features, labels=labels, train_mask=train_mask,
                 test_mask=test_mask, feature_kind=feature_kind,
                 num_classes=num_blocks)


def make_sparse_sbm(num_nodes=200, num_blocks=4, feature_dim=50,
                    prototype_dims=8, p_keep=0.85, p_noise=0.02,
                    p_in=0.04, p_out=0.008, train_frac=0.5, seed=0):
    """Four-community SBM with sparse binary features.

    Each class owns a small set of prototype dimensions; a node keeps each
    prototype bit with probability ``p_keep`` and picks up off-prototype
    noise bits with probability ``p_noise``. The resulting tight neighbor
    similarity distribution makes dense random feature rows stand out,
    which is what the directional attack experiments need.
    """
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(num_blocks), num_nodes // num_blocks)
    labels = np.concatenate([labels,
                             rng.integers(0, num_blocks,
                                          num_nodes - len(labels))])
    edges = []
    for u in range(num_nodes):
        for v in range(u + 1, num_nodes):
            p = p_in if labels[u] == labels[v] else p_out
            if rng.random() < p:
                edges.append((u, v))

    proto = np.zeros((num_blocks, feature_dim))
    for c in range(num_blocks):
        proto[c, rng.choice(feature_dim, prototype_dims, replace=False)] = 1
    features = np.zeros((num_nodes, feature_dim))
    for i in range(num_nodes):
        keep = rng.random(feature_dim) < p_keep
        noise = rng.random(feature_dim) < p_noise
        features[i] = np.where(proto[labels[i]] == 1, keep, noise)

    perm = rng.permutation(num_nodes)
    train_mask = np.zeros(num_nodes, dtype=bool)
    train_mask[perm[: int(train_frac * num_nodes)]] = True
    return Graph(num_nodes=num_nodes, edges=np.array(edges, dtype=np.int64),
                 features=features.astype(float), labels=labels,
                 train_mask=train_mask, test_mask=~train_mask,
                 feature_kind="discrete", num_classes=num_blocks)


def make_path_graph(num_nodes=3, feature_dim=2, num_classes=2):
    """0-1-2-... path, alternating labels, all nodes in the test set except 0."""
    edges = [(i, i + 1) for i in range(num_nodes - 1)]
    labels = np.arange(num_nodes) % num_classes
    train_mask = np.zeros(num_nodes, dtype=bool)
    train_mask[0] = True
    test_mask = ~train_mask
    rng = np.random.default_rng(7)
    return Graph(num_nodes=num_nodes, edges=np.array(edges, dtype=np.int64),
                 features=rng.random((num_nodes, feature_dim)),
                 labels=labels, train_mask=train_mask, test_mask=test_mask,
                 feature_kind="continuous", num_classes=num_classes)


@pytest.fixture(scope="session")
def sbm_graph():
    return make_sbm(seed=0)


@pytest.fixture(scope="session")
def sbm_gcn(sbm_graph):
    return train_gcn(sbm_graph, TrainConfig(hidden_dim=16, epochs=300, seed=0))


@pytest.fixture(scope="session")
def attack_sbm_graph():
    """200-node sparse-feature SBM used by the directional attack checks."""
    return make_sparse_sbm(seed=0)


@pytest.fixture(scope="session")
def attack_sbm_gcn(attack_sbm_graph):
    """Lightly trained GCN: small test margins keep the fixture attackable."""
    return train_gcn(attack_sbm_graph,
                     TrainConfig(hidden_dim=16, epochs=30, weight_decay=5e-3,
                                 learning_rate=0.1, seed=0))


@pytest.fixture(scope="session")
def small_graph():
    """30-node, 4-feature SBM used by the exhaustive-search checks."""
    return make_sbm(num_nodes=30, feature_dim=4, p_in=0.25, p_out=0.05,
                    noise=0.2, seed=3)


@pytest.fixture(scope="session")
def small_gcn(small_graph):
    return train_gcn(small_graph, TrainConfig(hidden_dim=8, epochs=200, seed=0))
