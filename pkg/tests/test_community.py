import itertools

import numpy as np
import pytest

from herln.community import (CommunityAssignment, LayeredGraph, build_layered_graph, community_indicator,
                             delta_modularity, detect_communities, modularity, read_partition, write_partition)
from herln.graph import TemporalGraph

from helpers import dense_modularity, exhaustive_max_modularity, set_partitions


def layered(n, edges):
    lg = LayeredGraph(n)
    for r, u, v, *w in edges:
        lg.add_edge(r, u, v, w[0] if w else 1.0)
    return lg


def two_triangles():
    tri = [(0, 0, 1), (0, 1, 2), (0, 0, 2), (0, 3, 4), (0, 4, 5), (0, 3, 5)]
    return layered(6, tri + [(0, 2, 3)])


def random_layered(rng, n, layers=2, p=0.45):
    lg = LayeredGraph(n)
    for r in range(layers):
        for u, v in itertools.combinations(range(n), 2):
            if rng.random() < p:
                lg.add_edge(r, u, v, float(rng.integers(1, 3)))
    return lg


class TestBuild:
    def test_parallel_facts_accumulate(self):
        g = TemporalGraph(np.array([[0, 0, 1, 0], [0, 0, 1, 5]]), 2, 1, 6)
        assert build_layered_graph(g).edges == {0: {(0, 1): 2.0}}

    def test_single_fact(self):
        lg = build_layered_graph(TemporalGraph(np.array([[3, 1, 0, 0]]), 4, 2, 1))
        assert lg.layers == [1] and lg.layer_weight(1) == 1.0

    def test_direction_discarded(self):
        g = TemporalGraph(np.array([[0, 0, 1, 0], [1, 0, 0, 1]]), 2, 1, 2)
        assert build_layered_graph(g).edges[0] == {(0, 1): 2.0}

    def test_layer_weights_equal_fact_counts(self):
        rng = np.random.default_rng(0)
        s = rng.integers(0, 10, 200)
        o = (s + rng.integers(1, 10, 200)) % 10  # no self-loops
        r = rng.integers(0, 4, 200)
        g = TemporalGraph(np.column_stack([s, r, o, rng.integers(0, 5, 200)]), 10, 4, 5)
        lg = build_layered_graph(g)
        for rel in range(4):
            assert lg.layer_weight(rel) == np.sum(r == rel)
            assert lg.degrees(rel).sum() == 2 * lg.layer_weight(rel)


class TestModularity:
    def test_single_community_single_layer_is_zero(self):
        lg = two_triangles()
        assert modularity(lg, CommunityAssignment(np.zeros(6))) == pytest.approx(0.0, abs=1e-15)

    def test_singletons(self):
        lg = two_triangles()
        k = lg.degrees(0)
        m = lg.total_weight()
        q = modularity(lg, CommunityAssignment(np.arange(6)))
        assert q == pytest.approx(-np.sum((k / (2 * m)) ** 2), abs=1e-15)
        assert q <= 0

    def test_matches_dense_matrix_form(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            lg = random_layered(rng, 6)
            lg.add_edge(0, 2, 2, 1.0)  # self-loop
            labels = rng.integers(0, 3, 6)
            assert modularity(lg, labels) == pytest.approx(dense_modularity(lg, labels), abs=1e-12)

    def test_two_triangle_partition_is_exhaustive_maximum(self):
        lg = two_triangles()
        best, arg = exhaustive_max_modularity(lg)
        assert sum(1 for _ in set_partitions(6)) == 203
        assert arg == [0, 0, 0, 1, 1, 1]
        assert modularity(lg, np.array(arg)) == pytest.approx(best, abs=1e-12)
        # m = 7: two communities with internal weight 3 and degree total 7 each
        assert best == pytest.approx(2 * 6 / 14 - 2 * (7 / 14) ** 2, abs=1e-12)

    def test_empty_graph(self):
        assert modularity(LayeredGraph(3), np.zeros(3, dtype=int)) == 0.0


class TestDelta:
    def test_isolated_node(self):
        lg = layered(3, [(0, 0, 1)])
        assert delta_modularity(lg, CommunityAssignment([0, 1, 2]), 2, 0) == 0.0

    def test_unknown_target(self):
        lg = two_triangles()
        with pytest.raises(KeyError):
            delta_modularity(lg, CommunityAssignment(np.arange(6)), 0, 17)

    def test_move_into_neighbour_community(self):
        lg = two_triangles()
        asg = CommunityAssignment([0, 0, 1, 1, 1, 1])
        before = modularity(lg, asg)
        after = modularity(lg, np.array([0, 0, 0, 1, 1, 1]))
        assert delta_modularity(lg, asg, 2, 0) == pytest.approx(after - before, abs=1e-9)

    def test_random_moves_match_recompute_and_reverse(self):
        rng = np.random.default_rng(2)
        for _ in range(60):
            n = int(rng.integers(2, 8))
            lg = random_layered(rng, n, layers=int(rng.integers(1, 3)))
            if rng.random() < 0.3:
                lg.add_edge(0, 0, 0, 1.0)
            labels = rng.integers(0, 3, n)
            node = int(rng.integers(n))
            target = int(rng.choice(np.unique(labels)))
            moved = labels.copy()
            moved[node] = target
            dq = delta_modularity(lg, labels, node, target)
            assert dq == pytest.approx(modularity(lg, moved) - modularity(lg, labels), abs=1e-9)
            back = delta_modularity(lg, moved, node, int(labels[node]))
            assert back == pytest.approx(-dq, abs=1e-9)


class TestDetect:
    def test_edgeless(self):
        asg = detect_communities(LayeredGraph(5), seed=0)
        assert asg.num_communities == 5

    def test_two_disjoint_cliques(self):
        edges = [(0, u, v) for u, v in itertools.combinations(range(4), 2)]
        edges += [(1, u, v) for u, v in itertools.combinations(range(4, 8), 2)]
        asg = detect_communities(layered(8, edges), seed=3)
        assert asg.num_communities == 2
        assert len(set(asg.community_of[:4])) == 1 and len(set(asg.community_of[4:])) == 1

    def test_two_triangles(self):
        for seed in range(5):
            asg = detect_communities(two_triangles(), seed=seed)
            assert asg.community_of.tolist() in ([0, 0, 0, 1, 1, 1], [1, 1, 1, 0, 0, 0])

    def test_isolated_nodes_stay_singletons(self):
        lg = layered(6, [(0, 0, 1), (0, 1, 2), (0, 0, 2)])
        asg = detect_communities(lg, seed=0)
        assert len({asg.community_of[i] for i in (3, 4, 5)}) == 3
        assert asg.community_of[3] not in asg.community_of[:3]

    def test_near_exhaustive_optimum_on_random_suite(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            lg = random_layered(rng, int(rng.integers(3, 8)), layers=int(rng.integers(1, 3)))
            best, _ = exhaustive_max_modularity(lg)
            q = modularity(lg, detect_communities(lg, seed=int(rng.integers(1000))))
            assert q >= 0.95 * best - 1e-12

    def test_levels_never_decrease_q(self):
        rng = np.random.default_rng(5)
        lg = random_layered(rng, 40, layers=3, p=0.1)
        hist = []
        detect_communities(lg, seed=1, history=hist)
        q0 = modularity(lg, np.arange(40))
        assert all(b >= a - 1e-12 for a, b in zip([q0] + hist, hist))

    def test_deterministic(self):
        lg = random_layered(np.random.default_rng(6), 30, p=0.15)
        a = detect_communities(lg, seed=9).community_of
        b = detect_communities(lg, seed=9).community_of
        assert np.array_equal(a, b)

    def test_contiguous_ids(self):
        asg = detect_communities(random_layered(np.random.default_rng(7), 20, p=0.2), seed=0)
        assert sorted(set(asg.community_of.tolist())) == list(range(asg.num_communities))


class TestIndicator:
    def test_reflexive_and_disjoint(self):
        asg = CommunityAssignment([0, 0, 1])
        assert community_indicator(asg, 2, 2) == 1
        assert community_indicator(asg, 0, 2) == 0

    def test_symmetric(self):
        asg = CommunityAssignment(np.random.default_rng(8).integers(0, 4, 15))
        for i, j in itertools.product(range(15), repeat=2):
            assert community_indicator(asg, i, j) == community_indicator(asg, j, i)

    def test_unknown(self):
        with pytest.raises(KeyError):
            community_indicator(CommunityAssignment([0]), 0, 3)


def test_partition_file_round_trip(tmp_path):
    asg = CommunityAssignment([2, 2, 0, 1])
    write_partition(asg, tmp_path / "p.tsv", seed=7)
    text = (tmp_path / "p.tsv").read_text()
    assert text.splitlines()[0] == "#K=3 seed=7"
    again, meta = read_partition(tmp_path / "p.tsv")
    assert np.array_equal(again.community_of, asg.community_of)
    assert meta == {"K": 3, "seed": 7}
