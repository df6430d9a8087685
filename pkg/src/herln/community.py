"""Multi-relational Louvain community detection.

Each raw relation is one undirected weighted layer.  Modularity sums a
per-layer term over communities, with the null-model normaliser ``m`` taken
as the total edge weight of the whole graph (all layers together):

    Q = sum_r sum_c [ in_{r,c} / 2m - (tot_{r,c} / 2m)^2 ]

``in_{r,c}`` counts every internal edge from both endpoints (a self-loop of
weight w contributes 2w), so ``sum_c in = 2 m_r`` when everything sits in one
community.  :func:`normaliser` is the single place that fixes ``m``.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MIN_GAIN = 1e-12


@dataclass
class LayeredGraph:
    """Per-layer undirected edge weights over ``num_nodes`` nodes.

    ``edges[r]`` maps ``(u, v)`` with ``u <= v`` to an accumulated weight.
    """

    num_nodes: int
    edges: dict = field(default_factory=dict)

    def layer_weight(self, r):
        return float(sum(self.edges.get(r, {}).values()))

    @property
    def layers(self):
        return sorted(self.edges)

    def total_weight(self):
        return float(sum(self.layer_weight(r) for r in self.edges))

    def degrees(self, r):
        k = np.zeros(self.num_nodes)
        for (u, v), w in self.edges.get(r, {}).items():
            k[u] += w
            k[v] += w
        return k

    def add_edge(self, r, u, v, w=1.0):
        key = (u, v) if u <= v else (v, u)
        layer = self.edges.setdefault(r, {})
        layer[key] = layer.get(key, 0.0) + w

    def adjacency(self):
        """node -> list of (layer, neighbour, weight); self-loops appear once with neighbour == node."""
        adj = defaultdict(list)
        for r, layer in self.edges.items():
            for (u, v), w in layer.items():
                adj[u].append((r, v, w))
                if u != v:
                    adj[v].append((r, u, w))
        return adj


@dataclass
class CommunityAssignment:
    community_of: np.ndarray

    def __post_init__(self):
        self.community_of = relabel(np.asarray(self.community_of, dtype=np.int64))

    @property
    def num_communities(self):
        return int(self.community_of.max()) + 1 if len(self.community_of) else 0

    def __len__(self):
        return len(self.community_of)

    def sizes(self):
        return np.bincount(self.community_of, minlength=self.num_communities)


def relabel(labels):
    """Map labels to contiguous ids in order of first appearance."""
    out = np.empty_like(labels)
    seen = {}
    for i, c in enumerate(labels.tolist()):
        out[i] = seen.setdefault(c, len(seen))
    return out


def build_layered_graph(g, num_relations_raw=None) -> LayeredGraph:
    """Collapse time and direction; unit weight per fact, parallel facts accumulate."""
    facts = g.facts
    n_raw = num_relations_raw if num_relations_raw is not None else g.num_relations_raw
    lg = LayeredGraph(g.num_entities)
    raw = facts[facts[:, 1] < n_raw]
    for s, r, o, _ in raw.tolist():
        lg.add_edge(r, s, o, 1.0)
    return lg


def normaliser(lg: LayeredGraph) -> float:
    """The ``m`` of the modularity formula: total weight over every layer."""
    return lg.total_weight()


def modularity(lg: LayeredGraph, asg) -> float:
    comm = asg.community_of if isinstance(asg, CommunityAssignment) else np.asarray(asg)
    m = normaliser(lg)
    if m == 0:
        return 0.0
    q = 0.0
    for r, layer in lg.edges.items():
        if not layer:
            continue
        internal = defaultdict(float)
        tot = defaultdict(float)
        for (u, v), w in layer.items():
            tot[comm[u]] += w
            tot[comm[v]] += w
            if comm[u] == comm[v]:
                internal[comm[u]] += 2 * w
        q += sum(internal.values()) / (2 * m) - sum(t * t for t in tot.values()) / (2 * m) ** 2
    return q


def _node_layer_stats(lg, adj, comm, node):
    """Per layer: node degree, self-loop weight, and link weight to each other community."""
    k = defaultdict(float)
    self_w = defaultdict(float)
    links = defaultdict(lambda: defaultdict(float))
    for r, j, w in adj.get(node, ()):
        if j == node:
            k[r] += 2 * w
            self_w[r] += w
        else:
            k[r] += w
            links[comm[j]][r] += w
    return k, self_w, links


def delta_modularity(lg: LayeredGraph, asg, node: int, target: int) -> float:
    """Exact change in :func:`modularity` when ``node`` moves into community ``target``."""
    comm = np.array(asg.community_of if isinstance(asg, CommunityAssignment) else asg)
    # an absent id in range is an empty community
    if not 0 <= target <= max(len(comm) - 1, int(comm.max()) + 1):
        raise KeyError(f"unknown community {target}")
    source = comm[node]
    if target == source:
        return 0.0
    m = normaliser(lg)
    if m == 0:
        return 0.0
    adj = lg.adjacency()
    k, self_w, links = _node_layer_stats(lg, adj, comm, node)
    tot = defaultdict(float)
    members_src = comm == source
    members_tgt = comm == target
    for r in k:
        deg = lg.degrees(r)
        tot[(r, "src")] = float(deg[members_src].sum()) - k[r]
        tot[(r, "tgt")] = float(deg[members_tgt].sum())
    dq = 0.0
    for r, ki in k.items():
        aii = 2 * self_w[r]
        remove = (2 * links[source][r] + aii) / (2 * m) - (2 * tot[(r, "src")] * ki + ki * ki) / (4 * m * m)
        insert = (2 * links[target][r] + aii) / (2 * m) - (2 * tot[(r, "tgt")] * ki + ki * ki) / (4 * m * m)
        dq += insert - remove
    return dq


def _one_level(lg, adj, comm, rng, m):
    """Local moving phase; returns True if any node changed community."""
    n = lg.num_nodes
    node_k = [defaultdict(float) for _ in range(n)]
    for u, nbrs in adj.items():
        for r, j, w in nbrs:
            node_k[u][r] += 2 * w if j == u else w
    tot = defaultdict(float)  # (layer, community) -> summed degree
    for u in range(n):
        for r, kr in node_k[u].items():
            tot[(r, comm[u])] += kr

    improved = False
    while True:
        moves = 0
        for u in rng.permutation(n).tolist():
            ku = node_k[u]
            if not ku:
                continue
            links = defaultdict(lambda: defaultdict(float))
            for r, j, w in adj[u]:
                if j != u:
                    links[comm[j]][r] += w
            own = comm[u]
            for r, kr in ku.items():
                tot[(r, own)] -= kr

            def gain(c):
                lc = links.get(c, {})
                return sum(lc.get(r, 0.0) / m - tot[(r, c)] * kr / (2 * m * m) for r, kr in ku.items())

            best, best_gain = own, gain(own)
            for c in sorted(links):
                g = gain(c)
                if g > best_gain + MIN_GAIN:
                    best, best_gain = c, g
            comm[u] = best
            for r, kr in ku.items():
                tot[(r, best)] += kr
            if best != own:
                moves += 1
        if moves == 0:
            break
        improved = True
    return improved


def _aggregate(lg, comm):
    labels = relabel(np.asarray(comm))
    out = LayeredGraph(int(labels.max()) + 1 if len(labels) else 0)
    for r, layer in lg.edges.items():
        for (u, v), w in layer.items():
            out.add_edge(r, int(labels[u]), int(labels[v]), w)
    return out, labels


def detect_communities(lg: LayeredGraph, seed: int = 0, history=None) -> CommunityAssignment:
    """Two-phase Louvain on the layered graph.

    Once aggregation stops paying off, the flattened partition is handed back
    to the original nodes for another round of local moves; a node glued into
    the wrong super-node early can still leave.  The cycle repeats until the
    node level itself is stable.  ``history``, when a list, receives the
    modularity after every level.
    """
    rng = np.random.default_rng(seed)
    n = lg.num_nodes
    mapping = np.arange(n)
    m = normaliser(lg)
    if m == 0:
        return CommunityAssignment(mapping)
    base_adj = lg.adjacency()
    while True:
        comm = mapping.tolist()
        if not _one_level(lg, base_adj, comm, rng, m):
            break
        current, mapping = _aggregate(lg, comm)
        if history is not None:
            history.append(modularity(lg, mapping))
        while True:
            comm = list(range(current.num_nodes))
            if not _one_level(current, current.adjacency(), comm, rng, m):
                break
            current, labels = _aggregate(current, comm)
            mapping = labels[mapping]
            if history is not None:
                history.append(modularity(lg, mapping))
            if current.num_nodes == len(labels):
                break
    return CommunityAssignment(mapping)


def community_indicator(asg: CommunityAssignment, i: int, j: int) -> int:
    n = len(asg.community_of)
    if not (0 <= i < n and 0 <= j < n):
        raise KeyError(f"unassigned node id in ({i}, {j})")
    return int(asg.community_of[i] == asg.community_of[j])


# ------------------------------------------------------------------ partition cache

def write_partition(asg: CommunityAssignment, path, seed: int):
    lines = [f"#K={asg.num_communities} seed={seed}"]
    lines += [f"{i}\t{c}" for i, c in enumerate(asg.community_of.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_partition(path) -> tuple[CommunityAssignment, dict]:
    meta, pairs = {}, []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if line.startswith("#"):
            for tok in line[1:].split():
                key, _, val = tok.partition("=")
                meta[key] = int(val)
            continue
        if not line.strip():
            continue
        try:
            i, c = map(int, line.split("\t"))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed partition line {line!r}") from None
        pairs.append((i, c))
    labels = np.empty(len(pairs), dtype=np.int64)
    for i, c in pairs:
        labels[i] = c
    asg = CommunityAssignment(labels)
    if "K" in meta and meta["K"] != asg.num_communities:
        raise ValueError(f"{path}: header K={meta['K']} but file holds {asg.num_communities} communities")
    return asg, meta
