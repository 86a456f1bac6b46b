"""Reference injection attacks for directional comparison.

Neither baseline queries the victim model: the first wires and fills
everything at random, the second reuses the victim-neighborhood wiring
but fills features at random, isolating the feature search's contribution.
"""

from __future__ import annotations

import numpy as np

from .graph import ConstraintSpec, Graph, InjectionPatch, DISCRETE
from .attack import AttackError, generate_edges, rank_victims

RANDOM_EDGES_RANDOM_FEATURES = "random_edges_random_features"
QUGIA_EDGES_RANDOM_FEATURES = "qugia_edges_random_features"
BASELINE_KINDS = (RANDOM_EDGES_RANDOM_FEATURES, QUGIA_EDGES_RANDOM_FEATURES)


def _random_features(rng, d, spec: ConstraintSpec, discrete: bool) -> np.ndarray:
    feats = rng.uniform(spec.feature_min, spec.feature_max, size=d)
    if discrete:
        feats = np.round(feats)
    return feats


def run_baseline(graph: Graph, kind: str, constraints: ConstraintSpec,
                 rng: np.random.Generator | int) -> InjectionPatch:
    if kind not in BASELINE_KINDS:
        raise AttackError(f"unknown baseline kind {kind!r}")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    discrete = graph.feature_kind == DISCRETE
    d = graph.feature_dim
    spec = constraints
    test_nodes = np.where(graph.test_mask)[0]

    features = []
    cross = []
    edges_left = spec.max_injected_edges
    if kind == RANDOM_EDGES_RANDOM_FEATURES:
        for i in range(spec.max_injected_nodes):
            n_edges = min(spec.degree_cap, edges_left, len(test_nodes))
            if n_edges < 1:
                break
            picks = rng.choice(len(test_nodes), size=n_edges, replace=False)
            cross += [(i, int(test_nodes[p])) for p in sorted(picks)]
            features.append(_random_features(rng, d, spec, discrete))
            edges_left -= n_edges
    else:
        victims = rank_victims(graph).ordered()
        for i in range(min(spec.max_injected_nodes, len(victims))):
            if edges_left < 1:
                break
            wired = generate_edges(graph, victims[i], k=3,
                                   b=spec.degree_cap, rng=rng,
                                   max_edges=edges_left)
            cross += [(i, dst) for dst in wired]
            features.append(_random_features(rng, d, spec, discrete))
            edges_left -= len(wired)

    if not features:
        return InjectionPatch.empty(d)
    return InjectionPatch(len(features), np.vstack(features), cross, [])
