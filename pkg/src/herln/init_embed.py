"""Community-aware initial entity embeddings (one masked GCN layer)."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import numerics as nx


def neighbour_sets(g):
    """Distinct undirected neighbours of every node over all training time."""
    f = g.facts
    raw = f[f[:, 1] < g.num_relations_raw] if g.inverse_added else f
    s, o = raw[:, 0], raw[:, 2]
    keep = s != o
    rows = np.concatenate([s[keep], o[keep]])
    cols = np.concatenate([o[keep], s[keep]])
    adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(g.num_entities,) * 2).tocsr()
    adj.data[:] = 1.0  # collapse duplicate pairs
    return adj


def community_message_matrix(g, asg, normalise_by="all"):
    """Sparse matrix ``A`` with ``A[i, j] = delta(c_i, c_j) / |N_i|`` for neighbours ``j`` of ``i``.

    ``normalise_by="all"`` divides by every neighbour of ``i``;
    ``"community"`` divides by same-community neighbours only.
    """
    adj = neighbour_sets(g).tocoo()
    comm = np.asarray(asg.community_of)
    deg = np.asarray(neighbour_sets(g).sum(axis=1)).ravel()
    same = comm[adj.row] == comm[adj.col]
    rows, cols = adj.row[same], adj.col[same]
    if normalise_by == "all":
        denom = deg[rows]
    elif normalise_by == "community":
        denom = np.bincount(rows, minlength=g.num_entities)[rows]
    else:
        raise ValueError(f"unknown normalisation {normalise_by!r}")
    vals = 1.0 / denom
    return sp.csr_matrix((vals, (rows, cols)), shape=(g.num_entities,) * 2)


def init_embeddings(h_init, message_matrix, w_msg, w_self, act="relu"):
    """h_i = act( sum_j A_ij W h_j + W_0 h_i ) with row-vector convention (h @ W)."""
    if h_init.shape[1] != w_msg.shape[0] or h_init.shape[1] != w_self.shape[0]:
        raise ValueError(f"embedding width {h_init.shape[1]} does not match weights {w_msg.shape}, {w_self.shape}")
    messages = nx.spmm(message_matrix, nx.matmul(h_init, w_msg))
    return nx.activation(messages + nx.matmul(h_init, w_self), act)
