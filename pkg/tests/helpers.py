"""Independent oracles and toy data shared by the test modules."""
import numpy as np

from herln.graph import DatasetBundle, TemporalGraph


def set_partitions(n):
    """All set partitions of range(n) as label lists (restricted growth strings)."""
    labels = [0] * n

    def rec(i, k):
        if i == n:
            yield list(labels)
            return
        for c in range(k + 1):
            labels[i] = c
            yield from rec(i + 1, max(k, c + 1))

    if n == 0:
        yield []
        return
    yield from rec(1, 1)


def dense_modularity(lg, labels):
    """Matrix-form modularity with the global normaliser: sum_r sum_ij [A_ij - k_i k_j / 2m] d(c_i, c_j) / 2m."""
    n = lg.num_nodes
    m = sum(sum(layer.values()) for layer in lg.edges.values())
    if m == 0:
        return 0.0
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    q = 0.0
    for layer in lg.edges.values():
        a = np.zeros((n, n))
        for (u, v), w in layer.items():
            a[u, v] += w
            a[v, u] += w  # self-loops land twice on the diagonal
        k = a.sum(axis=1)
        q += ((a - np.outer(k, k) / (2 * m)) * same).sum() / (2 * m)
    return q


def exhaustive_max_modularity(lg):
    best, arg = -np.inf, None
    for labels in set_partitions(lg.num_nodes):
        q = dense_modularity(lg, labels)
        if q > best + 1e-12:
            best, arg = q, labels
    return best, arg


def central_difference(fn, tensor, coords, step=1e-3):
    """d fn / d tensor[coord] by central differences, for each flat coordinate."""
    flat = tensor.data.reshape(-1)
    out = []
    for c in coords:
        orig = flat[c]
        flat[c] = orig + step
        up = fn()
        flat[c] = orig - step
        down = fn()
        flat[c] = orig
        out.append((up - down) / (2 * step))
    return np.array(out)


def relative_error(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if denom < 1e-12 else float(np.linalg.norm(a - b) / denom)


def make_bundle(train, valid=(), test=(), num_entities=None, num_relations=None, num_timestamps=None):
    allf = np.array(list(train) + list(valid) + list(test), dtype=np.int64).reshape(-1, 4)
    n_ent = num_entities or int(max(allf[:, 0].max(), allf[:, 2].max())) + 1
    n_rel = num_relations or int(allf[:, 1].max()) + 1
    n_t = num_timestamps or int(allf[:, 3].max()) + 1
    views = [TemporalGraph(np.array(list(x), dtype=np.int64).reshape(-1, 4), n_ent, n_rel, n_t) for x in (train, valid, test)]
    return DatasetBundle(*views, name="toy")


# Six entities A..F, three relations, three timestamps; the query-time
# history mirrors the small illustrative TKG of the method overview.
SIX_NODE_FACTS = [
    (0, 0, 1, 0), (1, 1, 2, 0), (3, 2, 4, 0),
    (0, 1, 3, 1), (2, 0, 0, 1), (4, 2, 5, 1), (5, 0, 3, 1),
    (0, 2, 1, 2), (1, 0, 5, 2), (3, 1, 0, 2), (4, 0, 2, 2),
]


def six_node_bundle():
    train = [f for f in SIX_NODE_FACTS if f[3] < 2]
    test = [f for f in SIX_NODE_FACTS if f[3] == 2]
    return make_bundle(train, (), test, num_entities=6, num_relations=3, num_timestamps=3)


def memorization_facts():
    """20 facts over 5 entities, 3 relations, 4 timestamps.

    Each relation is a permutation of the entities, so every (s, r, t) and
    every inverse (o, r', t) query has exactly one answer.
    """
    facts = []
    for t in range(4):
        for k in range(5):
            s = k
            r = (k + t) % 3
            o = (s + r + 1) % 5
            facts.append((s, r, o, t))
    return facts


def memorization_bundle():
    return make_bundle(memorization_facts(), num_entities=5, num_relations=3, num_timestamps=4)


class ReluPattern:
    """Records the on/off pattern of every ReLU evaluated inside the block.

    A central difference is only a valid oracle when the pattern is the same
    at ``x + h`` and ``x - h``; otherwise the probe straddles a kink.
    """

    def __init__(self, nx):
        self.nx = nx
        self.masks = []

    def __enter__(self):
        nx, plain = self.nx, self.nx.relu
        self._saved = plain

        def recording(x):
            self.masks.append(x.data > 0)
            return plain(x)

        nx.relu = recording
        nx.ACTIVATIONS["relu"] = recording
        return self

    def __exit__(self, *exc):
        self.nx.relu = self._saved
        self.nx.ACTIVATIONS["relu"] = self._saved

    def signature(self):
        return np.concatenate([m.reshape(-1) for m in self.masks]) if self.masks else np.zeros(0, dtype=bool)


def kink_free(fn, nx, tensor, coord, step):
    """True when no ReLU changes state between ``x - step`` and ``x + step`` along ``coord``."""
    flat = tensor.data.reshape(-1)
    orig = flat[coord]
    sigs = []
    for x in (orig + step, orig - step):
        flat[coord] = x
        with ReluPattern(nx) as rec:
            fn()
        sigs.append(rec.signature())
    flat[coord] = orig
    return np.array_equal(*sigs)
