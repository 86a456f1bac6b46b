import numpy as np
import pytest

from qugia.graph import (
    ConstraintSpec,
    Graph,
    GraphError,
    InjectionPatch,
    compose,
    default_constraints,
    load_graph,
    neighbor_set,
    save_graph,
    test_neighbor_score,
    validate_constraints,
)
from conftest import make_path_graph, make_sbm


def simple_graph(num_nodes=3, edges=((0, 1), (1, 2)), feature_dim=2):
    rng = np.random.default_rng(0)
    train = np.zeros(num_nodes, dtype=bool)
    train[0] = True
    return Graph(num_nodes=num_nodes, edges=np.array(edges).reshape(-1, 2),
                 features=rng.random((num_nodes, feature_dim)),
                 labels=np.zeros(num_nodes, dtype=np.int64),
                 train_mask=train, test_mask=~train,
                 feature_kind="continuous", num_classes=2)


class TestGraphInvariants:
    def test_rejects_out_of_range_edge(self):
        with pytest.raises(GraphError):
            simple_graph(edges=((0, 5),))

    def test_rejects_self_loop(self):
        with pytest.raises(GraphError):
            simple_graph(edges=((1, 1),))

    def test_rejects_duplicate_edge(self):
        with pytest.raises(GraphError):
            simple_graph(edges=((0, 1), (1, 0)))

    def test_rejects_overlapping_masks(self):
        g = simple_graph()
        with pytest.raises(GraphError):
            Graph(g.num_nodes, g.edges, g.features, g.labels,
                  g.train_mask, g.train_mask, g.feature_kind, g.num_classes)

    def test_discrete_features_must_be_binary(self):
        g = simple_graph()
        with pytest.raises(GraphError):
            Graph(g.num_nodes, g.edges, g.features, g.labels,
                  g.train_mask, g.test_mask, "discrete", g.num_classes)


class TestCompose:
    def test_empty_patch_is_identity(self):
        g = simple_graph()
        g2 = compose(g, InjectionPatch.empty(g.feature_dim))
        assert g2.num_nodes == g.num_nodes
        assert np.array_equal(g2.edges, g.edges)
        assert np.array_equal(g2.features, g.features)

    def test_single_injection_block_structure(self):
        g = simple_graph()
        patch = InjectionPatch(1, np.array([[0.5, 0.5]]), [(0, 0)], [])
        g2 = compose(g, patch)
        assert g2.num_nodes == 4
        assert (0, 3) in {tuple(e) for e in g2.edges}
        assert g2.labels[3] == -1
        assert not g2.train_mask[3] and not g2.test_mask[3]
        # original block untouched
        assert np.array_equal(g2.features[:3], g.features)

    def test_out_of_range_cross_edge_errors(self):
        g = simple_graph()
        patch = InjectionPatch(1, np.array([[0.5, 0.5]]), [(0, 99)], [])
        with pytest.raises(GraphError):
            compose(g, patch)

    def test_compose_is_pure(self):
        g = make_sbm(num_nodes=20, seed=1)
        rng = np.random.default_rng(5)
        patch = InjectionPatch(2, rng.random((2, g.feature_dim)),
                               [(0, 1), (1, 2)], [(0, 1)])
        a, b = compose(g, patch), compose(g, patch)
        assert np.array_equal(a.edges, b.edges)
        assert np.array_equal(a.features, b.features)

    def test_injected_degree_matches_incidence(self):
        rng = np.random.default_rng(11)
        for trial in range(10):
            g = make_sbm(num_nodes=15, seed=trial)
            ni = int(rng.integers(1, 4))
            cross = set()
            while len(cross) < 2 * ni:
                cross.add((int(rng.integers(0, ni)), int(rng.integers(0, 15))))
            patch = InjectionPatch(ni, rng.random((ni, g.feature_dim)),
                                   sorted(cross), [])
            g2 = compose(g, patch)
            for i in range(ni):
                assert len(g2.neighbors(15 + i)) == patch.injected_degrees()[i]


class TestValidateConstraints:
    def spec(self, **kw):
        base = dict(max_injected_nodes=2, max_injected_edges=4,
                    degree_cap=2, feature_min=0.0, feature_max=1.0)
        base.update(kw)
        return ConstraintSpec(**base)

    def test_empty_patch_ok(self):
        g = simple_graph()
        assert validate_constraints(g, InjectionPatch.empty(2), self.spec()) == []

    def test_zero_degree_violates(self):
        g = simple_graph()
        patch = InjectionPatch(1, np.array([[0.5, 0.5]]), [], [])
        violations = validate_constraints(g, patch, self.spec())
        assert any("degree 0" in v for v in violations)

    def test_feature_out_of_bounds(self):
        g = simple_graph()
        patch = InjectionPatch(1, np.array([[1.1, 0.5]]), [(0, 0)], [])
        violations = validate_constraints(g, patch, self.spec())
        assert any("feature out of bounds" in v for v in violations)

    def test_budget_overflows(self):
        g = simple_graph()
        patch = InjectionPatch(3, np.full((3, 2), 0.5),
                               [(0, 0), (1, 1), (2, 2)], [])
        violations = validate_constraints(g, patch, self.spec(max_injected_nodes=2,
                                                              max_injected_edges=2))
        assert any("nodes 3" in v for v in violations)
        assert any("edges 3" in v for v in violations)

    def test_matches_brute_force_checker(self):
        # independent recheck on the composed graph
        rng = np.random.default_rng(3)
        for trial in range(20):
            g = make_sbm(num_nodes=12, seed=trial)
            ni = int(rng.integers(0, 3))
            cross = sorted({(int(rng.integers(0, max(ni, 1))), int(rng.integers(0, 12)))
                            for _ in range(rng.integers(0, 4))}) if ni else []
            patch = InjectionPatch(ni, rng.uniform(-0.2, 1.2, (ni, g.feature_dim)),
                                   cross, [])
            spec = self.spec(max_injected_nodes=2, max_injected_edges=2,
                             degree_cap=1)
            ok = validate_constraints(g, patch, spec) == []
            composed = compose(g, patch)
            brute = (
                ni <= spec.max_injected_nodes
                and patch.num_edges <= spec.max_injected_edges
                and all(1 <= len(composed.neighbors(12 + i)) <= spec.degree_cap
                        for i in range(ni))
                and (ni == 0 or (patch.injected_features.min() >= spec.feature_min
                                 and patch.injected_features.max() <= spec.feature_max))
            )
            assert ok == brute


class TestNeighborOps:
    def test_isolated_node(self):
        g = simple_graph(num_nodes=4, edges=((0, 1),))
        assert neighbor_set(g, 3) == set()

    def test_path_middle(self):
        g = make_path_graph(3)
        assert neighbor_set(g, 1) == {0, 2}

    def test_star_center(self):
        edges = [(0, i) for i in range(1, 5)]
        g = simple_graph(num_nodes=5, edges=edges)
        assert neighbor_set(g, 0) == {1, 2, 3, 4}

    def test_out_of_range(self):
        with pytest.raises(GraphError):
            neighbor_set(simple_graph(), 10)

    def test_score_counts_test_neighbors(self):
        g = make_path_graph(4)  # node 0 train, 1..3 test
        assert test_neighbor_score(g, 1) == 1   # nbrs 0 (train), 2 (test)
        assert test_neighbor_score(g, 2) == 2

    def test_score_requires_test_node(self):
        g = make_path_graph(3)
        with pytest.raises(GraphError):
            test_neighbor_score(g, 0)

    def test_score_isolated_test_node(self):
        g = simple_graph(num_nodes=4, edges=((0, 1),))
        assert test_neighbor_score(g, 3) == 0


class TestDefaultConstraints:
    def test_node_budget_fraction(self):
        g = make_sbm(num_nodes=100, seed=0)
        assert default_constraints(g, 0.05).max_injected_nodes == 5

    def test_feature_bounds(self):
        g = simple_graph()
        spec = default_constraints(g, 0.5)
        assert spec.feature_min == g.features.min()
        assert spec.feature_max == g.features.max()

    def test_four_cycle_hand_computation(self):
        g = simple_graph(num_nodes=4, edges=((0, 1), (1, 2), (2, 3), (0, 3)))
        spec = default_constraints(g, 0.25)
        assert spec.max_injected_nodes == 1
        assert spec.degree_cap == 2
        assert spec.max_injected_edges == 2

    def test_rejects_bad_fraction(self):
        g = simple_graph()
        for a in (0.0, -0.1, 1.5):
            with pytest.raises(GraphError):
                default_constraints(g, a)


class TestGraphIO:
    def test_round_trip(self, tmp_path):
        g = make_sbm(num_nodes=25, seed=2)
        path = tmp_path / "g.json"
        save_graph(g, path)
        g2 = load_graph(path)
        assert g2.num_nodes == g.num_nodes
        assert np.array_equal(g2.edges, g.edges)
        assert np.allclose(g2.features, g.features)
        assert np.array_equal(g2.labels, g.labels)

    def test_gzip_round_trip(self, tmp_path):
        g = make_sbm(num_nodes=10, seed=4)
        path = tmp_path / "g.json.gz"
        save_graph(g, path)
        g2 = load_graph(path)
        assert np.allclose(g2.features, g.features)

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"num_nodes": 3}')
        with pytest.raises(GraphError):
            load_graph(path)
