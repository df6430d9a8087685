import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from herln.graph import (DatasetError, TemporalGraph, add_inverse_quadruples, dataset_stats, history_graph,
                         load_dataset, save_dataset, slice_timestamps, snapshot)

from helpers import make_bundle


def write_dataset(root, train, valid, test, entities=None, relations=None, stat=None):
    root.mkdir(parents=True, exist_ok=True)
    for name, rows in (("train", train), ("valid", valid), ("test", test)):
        (root / f"{name}.txt").write_text("".join("\t".join(map(str, r)) + "\n" for r in rows))
    if entities is not None:
        (root / "entity2id.txt").write_text("".join(f"{n}\t{i}\n" for i, n in enumerate(entities)))
    if relations is not None:
        (root / "relation2id.txt").write_text("".join(f"{n}\t{i}\n" for i, n in enumerate(relations)))
    if stat is not None:
        (root / "stat.txt").write_text(stat)
    return root


@pytest.fixture
def tiny(tmp_path):
    return write_dataset(
        tmp_path / "TINY",
        train=[(0, 0, 1, 0), (1, 1, 2, 24), (2, 0, 0, 24, 99)],
        valid=[(0, 1, 2, 48)],
        test=[(1, 0, 0, 72)],
        entities=["Alice Smith", "Bob", "Carol"],
        relations=["meet", "praise"],
    )


class TestLoad:
    def test_counts_and_normalised_time(self, tiny):
        b = load_dataset(tiny.parent, "TINY")
        stats = dataset_stats(b)
        assert stats == dict(entities=3, relations=2, facts=5, timestamps=4, time_interval=24,
                             train=3, valid=1, test=1)
        assert b.train.facts[:, 3].tolist() == [0, 1, 1]
        assert b.test.facts[:, 3].tolist() == [3]
        assert b.train.entity_names[0] == "Alice Smith"

    def test_empty_train(self, tmp_path):
        root = write_dataset(tmp_path / "E", [], [(0, 0, 1, 0)], [])
        with pytest.raises(DatasetError, match="malformed dataset: no facts"):
            load_dataset(root)

    def test_missing_file(self, tiny):
        (tiny / "valid.txt").unlink()
        with pytest.raises(DatasetError, match="missing file"):
            load_dataset(tiny)

    def test_wrong_column_count(self, tmp_path):
        root = write_dataset(tmp_path / "C", [(0, 0, 1)], [], [])
        with pytest.raises(DatasetError, match=r"train.txt:1: expected 4 columns"):
            load_dataset(root)

    def test_non_integer(self, tmp_path):
        root = write_dataset(tmp_path / "N", [(0, 0, "x", 0)], [], [])
        with pytest.raises(DatasetError, match="non-integer"):
            load_dataset(root)

    def test_id_out_of_range(self, tmp_path):
        root = write_dataset(tmp_path / "R", [(0, 0, 5, 0)], [], [], entities=["a", "b"], relations=["r"])
        with pytest.raises(DatasetError, match="out of declared range"):
            load_dataset(root)

    def test_stat_override(self, tmp_path):
        root = write_dataset(tmp_path / "S", [(0, 0, 1, 0)], [], [], stat="10\t4\t0\n")
        b = load_dataset(root)
        assert (b.num_entities, b.num_relations_raw) == (10, 4)

    def test_overlapping_splits_rejected(self, tmp_path):
        root = write_dataset(tmp_path / "O", [(0, 0, 1, 5)], [(0, 0, 1, 5)], [])
        with pytest.raises(DatasetError, match="overlap"):
            load_dataset(root)

    def test_round_trip(self, tiny, tmp_path):
        b = load_dataset(tiny)
        save_dataset(b, tmp_path / "copy")
        again = load_dataset(tmp_path / "copy")
        for split in ("train", "valid", "test"):
            assert again.split(split).quadruples() == b.split(split).quadruples()
        assert again.train.entity_names == b.train.entity_names

    def test_chronological_split(self, tiny):
        b = load_dataset(tiny)
        assert b.train.facts[:, 3].max() < b.valid.facts[:, 3].min() <= b.valid.facts[:, 3].max() < b.test.facts[:, 3].min()


class TestInverse:
    def test_single_fact(self):
        g = TemporalGraph(np.array([[2, 5, 7, 3]]), 8, 10, 4)
        inv = add_inverse_quadruples(g)
        assert inv.quadruples() == [(2, 5, 7, 3), (7, 15, 2, 3)]
        assert inv.num_relations == 20

    def test_empty(self):
        g = TemporalGraph(np.zeros((0, 4)), 3, 4, 2)
        inv = add_inverse_quadruples(g)
        assert len(inv) == 0 and inv.num_relations == 8

    def test_twice_rejected(self):
        g = add_inverse_quadruples(TemporalGraph(np.array([[0, 0, 1, 0]]), 2, 1, 1))
        with pytest.raises(ValueError):
            add_inverse_quadruples(g)

    def test_doubles_fact_count(self):
        rng = np.random.default_rng(0)
        f = np.column_stack([rng.integers(0, 9, 50), rng.integers(0, 4, 50), rng.integers(0, 9, 50), rng.integers(0, 6, 50)])
        g = TemporalGraph(f, 9, 4, 6)
        assert len(add_inverse_quadruples(g)) == 100


class TestSnapshot:
    def test_picks_time(self):
        g = TemporalGraph(np.array([[0, 0, 1, 0], [1, 0, 2, 1]]), 3, 1, 3)
        assert snapshot(g, 1) == [(1, 0, 2, 1)]
        assert snapshot(g, 2) == []

    def test_out_of_range(self):
        g = TemporalGraph(np.array([[0, 0, 1, 0]]), 2, 1, 1)
        with pytest.raises(IndexError):
            snapshot(g, 1)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 2), st.integers(0, 5), st.integers(0, 7)), max_size=40))
    def test_partition_identity(self, rows):
        g = TemporalGraph(np.array(rows, dtype=np.int64).reshape(-1, 4), 6, 3, 8)
        assert sum(len(snapshot(g, t)) for t in range(8)) == len(rows)
        for t in range(8):
            assert [q for q in g.quadruples() if q.time == t] == snapshot(g, t)


class TestHistory:
    def test_window(self):
        g = TemporalGraph(np.array([[0, 0, 1, t] for t in range(4)]), 2, 1, 4)
        h = history_graph(g, 3, 2)
        assert sorted(h.edges[:, 3].tolist()) == [1, 2]
        assert h.time_gaps.tolist() == [2, 1]

    def test_t_zero_empty(self):
        g = TemporalGraph(np.array([[0, 0, 1, 0]]), 2, 1, 2)
        assert len(history_graph(g, 0, 3)) == 0

    def test_bad_window(self):
        g = TemporalGraph(np.array([[0, 0, 1, 0]]), 2, 1, 2)
        with pytest.raises(ValueError):
            history_graph(g, 1, 0)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 1), st.integers(0, 4), st.integers(0, 9)), max_size=50),
           st.integers(0, 10), st.integers(1, 12))
    def test_matches_filter_oracle(self, rows, t, m):
        g = TemporalGraph(np.array(rows, dtype=np.int64).reshape(-1, 4), 5, 2, 10)
        h = history_graph(g, t, m)
        expected = sorted(q for q in g.quadruples() if max(0, t - m) <= q.time < t)
        assert sorted(map(tuple, h.edges.tolist())) == expected
        assert np.all(h.edges[:, 3] < t)


def test_slice_keeps_chronology():
    facts = [(i % 4, 0, (i + 1) % 4, i) for i in range(40)]
    b = make_bundle(facts[:32], facts[32:36], facts[36:], num_entities=4, num_relations=1, num_timestamps=40)
    s = slice_timestamps(b, 0.25)
    assert s.num_timestamps == 10
    assert s.train.facts[:, 3].max() < s.valid.facts[:, 3].min()
    assert s.valid.facts[:, 3].max() < s.test.facts[:, 3].min()
    assert len(s.train) + len(s.valid) + len(s.test) == 10
