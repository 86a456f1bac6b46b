import numpy as np
import pytest

from qugia.attack import AttackError
from qugia.baselines import (
    BASELINE_KINDS,
    QUGIA_EDGES_RANDOM_FEATURES,
    RANDOM_EDGES_RANDOM_FEATURES,
    run_baseline,
)
from qugia.graph import ConstraintSpec, default_constraints, validate_constraints
from conftest import make_sbm


@pytest.mark.parametrize("kind", BASELINE_KINDS)
class TestBaselines:
    def test_zero_budget_empty(self, sbm_graph, kind):
        spec = ConstraintSpec(0, 0, 1, 0.0, 1.0)
        patch = run_baseline(sbm_graph, kind, spec, 0)
        assert patch.num_injected == 0

    def test_constraints_always_satisfied(self, sbm_graph, kind):
        for seed in range(5):
            spec = default_constraints(sbm_graph, 0.05)
            patch = run_baseline(sbm_graph, kind, spec, seed)
            assert validate_constraints(sbm_graph, patch, spec) == []
            assert patch.num_injected == spec.max_injected_nodes

    def test_discrete_features_binary(self, kind):
        g = make_sbm(num_nodes=40, feature_kind="discrete", seed=1)
        spec = default_constraints(g, 0.1)
        patch = run_baseline(g, kind, spec, 3)
        assert np.all(np.isin(patch.injected_features, (0.0, 1.0)))

    def test_seed_determinism(self, sbm_graph, kind):
        spec = default_constraints(sbm_graph, 0.05)
        p1 = run_baseline(sbm_graph, kind, spec, 7)
        p2 = run_baseline(sbm_graph, kind, spec, 7)
        assert np.array_equal(p1.injected_features, p2.injected_features)
        assert p1.cross_edges == p2.cross_edges


def test_unknown_kind_errors(sbm_graph):
    spec = default_constraints(sbm_graph, 0.05)
    with pytest.raises(AttackError):
        run_baseline(sbm_graph, "tdgia", spec, 0)


def test_random_baseline_wires_test_nodes_only(sbm_graph):
    spec = default_constraints(sbm_graph, 0.05)
    patch = run_baseline(sbm_graph, RANDOM_EDGES_RANDOM_FEATURES, spec, 0)
    for _, dst in patch.cross_edges:
        assert sbm_graph.test_mask[dst]


def test_qugia_edges_baseline_targets_ranked_victims(sbm_graph):
    from qugia.attack import rank_victims
    spec = default_constraints(sbm_graph, 0.03)
    patch = run_baseline(sbm_graph, QUGIA_EDGES_RANDOM_FEATURES, spec, 0)
    victims = rank_victims(sbm_graph).ordered()[: patch.num_injected]
    wired_first = [dst for i, dst in patch.cross_edges
                   if dst in victims]
    assert set(victims) <= {dst for _, dst in patch.cross_edges}
