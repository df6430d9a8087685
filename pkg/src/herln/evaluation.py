"""Rank-based link-prediction metrics (MRR, Hits@k) for entity and relation queries."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass

import numpy as np

from . import numerics as nx
from .graph import add_inverse_quadruples, history_graph, snapshot_array

HITS = (1, 3, 10)


@dataclass
class MetricsReport:
    mrr: float
    hits1: float
    hits3: float
    hits10: float
    count: int

    def as_dict(self):
        return asdict(self)


def rank_query(scores, truth, filter_set=()):
    """1-based rank of ``truth``; filtered candidates are ignored and ties share the mean position."""
    scores = np.asarray(scores, dtype=np.float64)
    if truth in set(int(i) for i in filter_set):
        raise ValueError("ground truth is masked by the filter set")
    keep = np.ones(len(scores), dtype=bool)
    keep[list(filter_set)] = False
    keep[truth] = False
    others = scores[keep]
    target = scores[truth]
    greater = np.count_nonzero(others > target)
    ties = np.count_nonzero(others == target)
    return 1.0 + greater + ties / 2.0


def batch_ranks(scores, truth, mask=None):
    """Vectorised :func:`rank_query`; ``mask[i, j]`` excludes candidate ``j`` for query ``i``."""
    scores = np.asarray(scores, dtype=np.float64)
    rows = np.arange(len(truth))
    target = scores[rows, truth][:, None]
    keep = np.ones_like(scores, dtype=bool) if mask is None else ~mask
    keep[rows, truth] = False
    greater = np.count_nonzero((scores > target) & keep, axis=1)
    ties = np.count_nonzero((scores == target) & keep, axis=1)
    return 1.0 + greater + ties / 2.0


def metrics_from_ranks(ranks) -> MetricsReport:
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        return MetricsReport(0.0, 0.0, 0.0, 0.0, 0)
    hits = [float(np.mean(ranks <= k)) for k in HITS]
    return MetricsReport(float(np.mean(1.0 / ranks)), *hits, int(ranks.size))


def evaluate(model, bundle, split="test", window=None, modes=("raw", "filtered"), batch_size=1024):
    """Entity and relation metrics on one split.

    History at query time ``t`` is every ground-truth fact (any split) in the
    window before ``t``.  Time-filtered entity ranking masks the other true
    objects of the same ``(s, r, t)``.  Returns ``{(task, mode): MetricsReport}``.
    """
    window = window or model.cfg.window
    full = add_inverse_quadruples(bundle.combined())
    target = add_inverse_quadruples(bundle.split(split))
    ranks = defaultdict(list)
    with nx.no_grad():
        for t in target.timestamps():
            hist = history_graph(full, t, window)
            if len(hist) == 0:
                continue
            queries = snapshot_array(target, t)
            truth_at_t = defaultdict(set)
            for s, r, o, _ in snapshot_array(full, t).tolist():
                truth_at_t[(s, r)].add(o)
            h = model.embeddings(hist, training=False)
            for lo in range(0, len(queries), batch_size):
                q = queries[lo:lo + batch_size]
                s, r, o = q[:, 0], q[:, 1], q[:, 2]
                ent = model.entity_scores(h, s, r).data
                if "raw" in modes:
                    ranks[("entity", "raw")].extend(batch_ranks(ent, o))
                if "filtered" in modes:
                    mask = np.zeros(ent.shape, dtype=bool)
                    for i, (si, ri) in enumerate(zip(s.tolist(), r.tolist())):
                        mask[i, list(truth_at_t[(si, ri)])] = True
                    ranks[("entity", "filtered")].extend(batch_ranks(ent, o, mask))
                if model.cfg.relation_weight > 0:
                    rel = model.relation_scores(h, s, o).data
                    rel_ranks = batch_ranks(rel, r)
                    for mode in modes:
                        ranks[("relation", mode)].extend(rel_ranks)
    return {key: metrics_from_ranks(v) for key, v in sorted(ranks.items())}


def format_report(results, split, variant="full"):
    """Machine-readable ``key=value`` lines followed by a human table."""
    lines = []
    for (task, mode), m in sorted(results.items()):
        lines.append(f"split={split} variant={variant} task={task} mode={mode} mrr={m.mrr:.6f} "
                     f"hits1={m.hits1:.6f} hits3={m.hits3:.6f} hits10={m.hits10:.6f} count={m.count}")
    lines.append("")
    lines.append(f"{'task':<10}{'mode':<10}{'MRR':>8}{'H@1':>8}{'H@3':>8}{'H@10':>8}{'n':>8}")
    for (task, mode), m in sorted(results.items()):
        lines.append(f"{task:<10}{mode:<10}{100 * m.mrr:8.2f}{100 * m.hits1:8.2f}"
                     f"{100 * m.hits3:8.2f}{100 * m.hits10:8.2f}{m.count:8d}")
    return "\n".join(lines)


def average_reports(reports):
    """Mean of several ``{(task, mode): MetricsReport}`` dicts (e.g. across seeds)."""
    keys = set.intersection(*(set(r) for r in reports))
    out = {}
    for key in keys:
        ms = [r[key] for r in reports]
        out[key] = MetricsReport(*(float(np.mean([getattr(m, f) for m in ms])) for f in ("mrr", "hits1", "hits3", "hits10")),
                                 int(sum(m.count for m in ms)))
    return out
