"""Hawkes-decayed relational graph convolution and the gated merge."""
from __future__ import annotations

import numpy as np

from . import numerics as nx


def decay_weights(gaps, delta):
    """Normalised exponential decay ``exp(-delta*gap) / sum exp(-delta*gap)`` for one node's in-edges."""
    gaps = np.asarray(gaps, dtype=np.float64)
    if gaps.size == 0:
        raise ValueError("no in-edges: skip aggregation for this node")
    if np.any(gaps < 0):
        raise ValueError("time gaps must be non-negative")
    k = np.exp(-delta * (gaps - gaps.min()))
    return k / k.sum()


def edge_decay_weights(gaps, dst, num_nodes, delta):
    """Per-edge normalised decay, grouped by destination node; differentiable in ``delta``.

    Gaps are shifted by each destination's smallest gap before exponentiating;
    the shift cancels in the normalisation and keeps ``exp`` away from underflow.
    """
    gaps = np.asarray(gaps, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.int64)
    gmin = np.full(num_nodes, np.inf)
    np.minimum.at(gmin, dst, gaps)
    shifted = nx.Tensor((gaps - gmin[dst]).astype(delta.dtype))
    kappa = nx.exp(nx.mul(nx.reshape(delta, (1,)), shifted) * -1.0)
    denom = nx.scatter_rows(kappa, dst, num_nodes)
    return nx.div(kappa, nx.gather_rows(denom, dst))


def uniform_edge_weights(dst, num_nodes, dtype=np.float64):
    """Decay-free weights ``1/|F_o|`` (plain RGCN)."""
    dst = np.asarray(dst, dtype=np.int64)
    counts = np.bincount(dst, minlength=num_nodes).astype(dtype)
    return nx.Tensor(1.0 / counts[dst], dtype=dtype)


def relation_transform(x, rel, basis, coef):
    """Apply ``W_r = sum_b coef[r, b] * V_b`` to each edge row of ``x``.

    ``basis`` is ``(d_in, B * d_out)`` (the B matrices side by side) and
    ``coef`` is ``(num_relations, B)``.
    """
    nb = coef.shape[1]
    d_out = basis.shape[1] // nb
    y = nx.reshape(nx.matmul(x, basis), (x.shape[0], nb, d_out))
    c = nx.reshape(nx.gather_rows(coef, rel), (x.shape[0], nb, 1))
    return nx.sum(y * c, axis=1)


def hrgcn_layer(hist, h, rel_emb, layer_params, edge_weights=None, delta=None, literal_norm=True, act="relu"):
    """One Hawkes RGCN layer.

    h_o' = act( h_o W_1 + sum_{(s,r,t') in F_o} (1/|F_o|) W_r (h_s + h_r) kappa~(t - t') )

    ``edge_weights`` overrides the decay (e.g. uniform weights for the plain
    RGCN); otherwise they are computed from ``delta``.  ``literal_norm=False``
    drops the extra ``1/|F_o|`` factor.
    """
    w_self, basis, coef = layer_params
    n = h.shape[0]
    out = nx.matmul(h, w_self)
    if len(hist):
        src, rel, dst = hist.src, hist.rel, hist.dst
        if rel.max() >= coef.shape[0]:
            raise KeyError(f"relation id {int(rel.max())} has no transform")
        if edge_weights is None:
            edge_weights = edge_decay_weights(hist.time_gaps, dst, n, delta)
        if literal_norm:
            counts = np.bincount(dst, minlength=n).astype(h.dtype)
            edge_weights = edge_weights * nx.Tensor(1.0 / counts[dst], dtype=h.dtype)
        x = nx.gather_rows(h, src) + nx.gather_rows(rel_emb, rel)
        msg = relation_transform(x, rel, basis, coef)
        msg = msg * nx.reshape(edge_weights, (len(hist), 1))
        out = out + nx.scatter_rows(msg, dst, n)
    return nx.activation(out, act)


def encode(hist, h_c, rel_emb, layers, delta=None, decay=True, dropout=0.0, training=False, rng=None,
           literal_norm=True):
    """Stack of :func:`hrgcn_layer` calls with dropout between layers."""
    h = h_c
    uniform = None
    if not decay and len(hist):
        uniform = uniform_edge_weights(hist.dst, h_c.shape[0], h_c.dtype)
    for i, lp in enumerate(layers):
        if i > 0:
            h = nx.dropout(h, dropout, training, rng)
        h = hrgcn_layer(hist, h, rel_emb, lp, edge_weights=uniform, delta=delta, literal_norm=literal_norm)
    return h


def gated_merge(h_t, h_c, w_graph, b_graph, w_gate, b_gate, per_entity=False, force_gate=None):
    """Convex blend ``gamma * H_T + (1 - gamma) * H_C`` with a learned gate.

    The graph summary is the entity-mean of ``H_T``; ``per_entity`` gates each
    row from its own encoded embedding instead.  ``force_gate`` pins gamma.
    """
    if h_t.shape != h_c.shape:
        raise ValueError(f"shape mismatch {h_t.shape} vs {h_c.shape}")
    if force_gate is not None:
        gamma = nx.Tensor(np.full((1, 1), force_gate, dtype=h_t.dtype))
    elif per_entity:
        h_g = nx.sigmoid(nx.matmul(h_t, w_graph) + b_graph)
        gamma = nx.sigmoid(nx.matmul(h_g, w_gate) + b_gate)
    else:
        pooled = nx.mean(h_t, axis=0, keepdims=True)
        h_g = nx.sigmoid(nx.matmul(pooled, w_graph) + b_graph)
        gamma = nx.sigmoid(nx.matmul(h_g, w_gate) + b_gate)
    return gamma * h_t + (1.0 - gamma) * h_c, gamma
