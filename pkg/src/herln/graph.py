"""Temporal knowledge graph storage: loading, splits, snapshots, history windows."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import reduce
from pathlib import Path
from typing import NamedTuple

import numpy as np

SPLITS = ("train", "valid", "test")

# Counts reported for the four public benchmarks (entities, relations, facts,
# timestamps, split sizes, raw time interval).
BENCHMARK_STATS = {
    "ICEWS18": dict(entities=23033, relations=256, facts=468558, timestamps=304,
                    train=373019, valid=45996, test=49546, interval="24 hours"),
    "ICEWS14": dict(entities=7128, relations=230, facts=90730, timestamps=365,
                    train=74846, valid=8515, test=7372, interval="24 hours"),
    "WIKI": dict(entities=12554, relations=24, facts=669934, timestamps=231,
                 train=539287, valid=67539, test=63111, interval="1 year"),
    "YAGO": dict(entities=10623, relations=10, facts=201089, timestamps=187,
                 train=161541, valid=19524, test=20027, interval="1 year"),
}


class DatasetError(ValueError):
    pass


class Quadruple(NamedTuple):
    subject: int
    relation: int
    object: int
    time: int


@dataclass(frozen=True)
class TemporalGraph:
    """Immutable, time-sorted quadruple store.

    ``facts`` is an ``(n, 4)`` int64 array of (subject, relation, object, time)
    rows; ``num_relations`` counts relation ids currently in use (doubles after
    :func:`add_inverse_quadruples`).
    """

    facts: np.ndarray
    num_entities: int
    num_relations_raw: int
    num_timestamps: int
    entity_names: tuple = ()
    relation_names: tuple = ()
    time_origin: int = 0
    time_interval: int = 1
    inverse_added: bool = False
    _by_time: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        facts = np.asarray(self.facts, dtype=np.int64).reshape(-1, 4)
        if len(facts) and np.any(np.diff(facts[:, 3]) < 0):
            order = np.argsort(facts[:, 3], kind="stable")
            facts = facts[order]
        facts.setflags(write=False)
        object.__setattr__(self, "facts", facts)
        starts = {}
        if len(facts):
            times, first = np.unique(facts[:, 3], return_index=True)
            bounds = list(first) + [len(facts)]
            starts = {int(t): (int(bounds[i]), int(bounds[i + 1])) for i, t in enumerate(times)}
        object.__setattr__(self, "_by_time", starts)

    @property
    def num_relations(self):
        return self.num_relations_raw * (2 if self.inverse_added else 1)

    def __len__(self):
        return len(self.facts)

    def quadruples(self):
        return [Quadruple(*map(int, row)) for row in self.facts]

    def timestamps(self):
        return sorted(self._by_time)

    def with_facts(self, facts):
        return replace(self, facts=facts, _by_time=None)


class HistoryGraph(NamedTuple):
    """Edges before ``reference_time``; ``edges`` rows are (s, r, o, t')."""

    edges: np.ndarray
    reference_time: int

    @property
    def src(self):
        return self.edges[:, 0]

    @property
    def rel(self):
        return self.edges[:, 1]

    @property
    def dst(self):
        return self.edges[:, 2]

    @property
    def time_gaps(self):
        return self.reference_time - self.edges[:, 3]

    def __len__(self):
        return len(self.edges)


@dataclass(frozen=True)
class DatasetBundle:
    train: TemporalGraph
    valid: TemporalGraph
    test: TemporalGraph
    name: str = ""

    def split(self, name):
        return getattr(self, name)

    def combined(self):
        """All splits in one graph (chronological, same id space)."""
        facts = np.concatenate([self.train.facts, self.valid.facts, self.test.facts])
        return self.train.with_facts(facts)

    @property
    def num_entities(self):
        return self.train.num_entities

    @property
    def num_relations_raw(self):
        return self.train.num_relations_raw

    @property
    def num_timestamps(self):
        return self.train.num_timestamps


# ------------------------------------------------------------------ operations

def add_inverse_quadruples(g: TemporalGraph) -> TemporalGraph:
    """Append (o, r + R, s, t) for every (s, r, o, t)."""
    if g.inverse_added or (len(g.facts) and g.facts[:, 1].max() >= g.num_relations_raw):
        raise ValueError("graph already contains inverse relations")
    inv = g.facts[:, [2, 1, 0, 3]].copy()
    inv[:, 1] += g.num_relations_raw
    both = np.empty((2 * len(g.facts), 4), dtype=np.int64)
    both[0::2] = g.facts
    both[1::2] = inv
    return replace(g, facts=both, inverse_added=True, _by_time=None)


def snapshot(g: TemporalGraph, t: int) -> list[Quadruple]:
    return [Quadruple(*map(int, row)) for row in snapshot_array(g, t)]


def snapshot_array(g: TemporalGraph, t: int) -> np.ndarray:
    if not 0 <= t < g.num_timestamps:
        raise IndexError(f"timestamp {t} outside [0, {g.num_timestamps})")
    lo, hi = g._by_time.get(int(t), (0, 0))
    return g.facts[lo:hi]


def history_graph(g: TemporalGraph, t: int, window: int) -> HistoryGraph:
    """Facts with time in ``[max(0, t - window), t - 1]``; never anything at or after ``t``."""
    if window < 1:
        raise ValueError("history window must be >= 1")
    times = g.facts[:, 3]
    lo = np.searchsorted(times, max(0, t - window), side="left")
    hi = np.searchsorted(times, t, side="left")
    return HistoryGraph(g.facts[lo:hi], int(t))


def slice_timestamps(bundle: DatasetBundle, fraction: float, split=(0.8, 0.1, 0.1)) -> DatasetBundle:
    """Keep the first ``fraction`` of timestamps and re-split them chronologically."""
    allg = bundle.combined()
    keep = max(3, math.ceil(fraction * bundle.num_timestamps))
    ts = [t for t in allg.timestamps() if t < keep]
    n_train = max(1, round(split[0] * len(ts)))
    n_valid = max(1, round(split[1] * len(ts)))
    cut_train, cut_valid = ts[n_train - 1], ts[min(n_train + n_valid, len(ts)) - 1]
    f = allg.facts
    parts = [
        f[f[:, 3] <= cut_train],
        f[(f[:, 3] > cut_train) & (f[:, 3] <= cut_valid)],
        f[(f[:, 3] > cut_valid) & (f[:, 3] < keep)],
    ]
    views = [replace(bundle.train, facts=p, num_timestamps=keep, _by_time=None) for p in parts]
    return DatasetBundle(*views, name=f"{bundle.name}[:{keep}]")


# ----------------------------------------------------------------------- I/O

def _read_id_map(path: Path):
    names = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n\r")
            if not line.strip():
                continue
            parts = line.rsplit("\t", 1)
            if len(parts) != 2:
                parts = line.rsplit(None, 1)
            try:
                name, idx = parts[0], int(parts[1])
            except (ValueError, IndexError):
                raise DatasetError(f"{path}:{lineno}: malformed id-map line {line!r}") from None
            names[idx] = name
    if names and sorted(names) != list(range(len(names))):
        raise DatasetError(f"{path}: ids are not contiguous 0..{len(names) - 1}")
    return tuple(names[i] for i in range(len(names)))


def _read_quadruples(path: Path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            cols = line.split()
            if len(cols) < 4:
                raise DatasetError(f"{path}:{lineno}: expected 4 columns, got {len(cols)}")
            try:
                rows.append((int(cols[0]), int(cols[1]), int(cols[2]), int(cols[3])))
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-integer field in {line.strip()!r}") from None
    return np.array(rows, dtype=np.int64).reshape(-1, 4)


def load_dataset(root, name: str = "") -> DatasetBundle:
    """Load ``<root>/<name>/{train,valid,test}.txt`` plus id maps into one id space."""
    base = Path(root) / name if name else Path(root)
    for fname in ("train.txt", "valid.txt", "test.txt"):
        if not (base / fname).is_file():
            raise DatasetError(f"missing file: {base / fname}")
    raw = {s: _read_quadruples(base / f"{s}.txt") for s in SPLITS}
    if len(raw["train"]) == 0:
        raise DatasetError("malformed dataset: no facts")

    entity_names = _read_id_map(base / "entity2id.txt") if (base / "entity2id.txt").is_file() else ()
    relation_names = _read_id_map(base / "relation2id.txt") if (base / "relation2id.txt").is_file() else ()
    allf = np.concatenate(list(raw.values()))
    n_ent = len(entity_names) or int(max(allf[:, 0].max(), allf[:, 2].max())) + 1
    n_rel = len(relation_names) or int(allf[:, 1].max()) + 1
    stat = base / "stat.txt"
    if stat.is_file():
        vals = stat.read_text().split()
        try:
            n_ent, n_rel = int(vals[0]), int(vals[1])
        except (IndexError, ValueError):
            raise DatasetError(f"{stat}: expected 'numEntities<TAB>numRelations'") from None

    for split, f in raw.items():
        if len(f) == 0:
            continue
        bad = (f[:, [0, 2]] >= n_ent).any(axis=1) | (f[:, [0, 2]] < 0).any(axis=1)
        bad |= (f[:, 1] >= n_rel) | (f[:, 1] < 0) | (f[:, 3] < 0)
        if bad.any():
            i = int(np.argmax(bad))
            raise DatasetError(f"{base / (split + '.txt')}: id out of declared range in fact {tuple(f[i])}")

    origin = int(allf[:, 3].min())
    offsets = np.unique(allf[:, 3] - origin)
    interval = int(reduce(math.gcd, offsets.tolist(), 0)) or 1
    n_times = int((allf[:, 3].max() - origin) // interval) + 1

    views = []
    for split in SPLITS:
        f = raw[split].copy()
        f[:, 3] = (f[:, 3] - origin) // interval
        views.append(TemporalGraph(f, n_ent, n_rel, n_times, entity_names, relation_names, origin, interval))
    bundle = DatasetBundle(*views, name=name or base.name)
    check_chronological(bundle)
    return bundle


def check_chronological(bundle: DatasetBundle):
    spans = [(s, bundle.split(s).facts[:, 3]) for s in SPLITS if len(bundle.split(s))]
    for (a, ta), (b, tb) in zip(spans, spans[1:]):
        if ta.max() >= tb.min():
            raise DatasetError(f"splits overlap in time: max({a})={ta.max()} >= min({b})={tb.min()}")


def save_dataset(bundle: DatasetBundle, root):
    """Write a bundle in the on-disk layout understood by :func:`load_dataset`."""
    base = Path(root)
    base.mkdir(parents=True, exist_ok=True)
    g = bundle.train
    for split in SPLITS:
        f = bundle.split(split).facts
        with open(base / f"{split}.txt", "w") as fh:
            for s, r, o, t in f:
                fh.write(f"{s}\t{r}\t{o}\t{g.time_origin + t * g.time_interval}\n")
    ents = g.entity_names or tuple(f"e{i}" for i in range(g.num_entities))
    rels = g.relation_names or tuple(f"r{i}" for i in range(g.num_relations_raw))
    (base / "entity2id.txt").write_text("".join(f"{n}\t{i}\n" for i, n in enumerate(ents)))
    (base / "relation2id.txt").write_text("".join(f"{n}\t{i}\n" for i, n in enumerate(rels)))
    (base / "stat.txt").write_text(f"{g.num_entities}\t{g.num_relations_raw}\n")


def dataset_stats(bundle: DatasetBundle) -> dict:
    g = bundle.train
    n = {s: len(bundle.split(s)) for s in SPLITS}
    return dict(entities=g.num_entities, relations=g.num_relations_raw, facts=sum(n.values()),
                timestamps=g.num_timestamps, time_interval=g.time_interval, **n)
