"""The full model: parameter layout and the per-timestamp forward pass."""
from __future__ import annotations

import numpy as np

from . import numerics as nx
from .config import TrainConfig
from .decoder import DecoderParams, FilmParams, adjust_params, film_factors, identity_params, mlp_score, score_entities, score_relations
from .encoder import encode, gated_merge, hrgcn_layer
from .init_embed import init_embeddings
from .params import ParameterStore


class HERLN:
    """Community init -> Hawkes RGCN -> gate -> FiLM-conditioned ConvTransE.

    ``num_relations`` counts relation ids after inverse augmentation.
    ``message_matrix`` is the community-masked neighbour matrix from
    :func:`herln.init_embed.community_message_matrix`; it is ignored under
    the ``noCommunity`` ablation.
    """

    def __init__(self, num_entities, num_relations, cfg: TrainConfig, message_matrix=None, store=None):
        self.cfg = cfg
        self.num_entities = num_entities
        self.num_relations = num_relations
        self.message_matrix = message_matrix
        self.use_community = not cfg.has("noCommunity")
        self.use_decay = not cfg.has("noHRGCN")
        self.use_conv = not cfg.has("noConvTransE")
        self.use_film = self.use_conv and not cfg.has("noFiLM")
        if self.use_community and message_matrix is None:
            raise ValueError("community initialisation needs a message matrix (or the noCommunity ablation)")
        self.store = store if store is not None else ParameterStore(np.dtype(cfg.dtype), seed=cfg.seed)
        if not len(self.store):
            self._register()
        if not cfg.learn_delta:
            self._fixed_delta = nx.Tensor(np.array([cfg.delta_init], dtype=self.store.dtype))

    # ------------------------------------------------------------ parameters

    def _register(self):
        s, d, c = self.store, self.cfg.dim, self.cfg.kernels
        s.xavier("ent_init", (self.num_entities, d))
        s.xavier("rel_emb", (self.num_relations, d))
        if self.use_community:
            s.xavier("init.W", (d, d))
            s.xavier("init.W0", (d, d))
        if self.cfg.learn_delta and self.use_decay:
            s.add("enc.delta_raw", [np.log(np.expm1(self.cfg.delta_init))])
        for layer in range(self.cfg.layers):
            s.xavier(f"enc.{layer}.W1", (d, d))
            s.xavier(f"enc.{layer}.basis", (d, self.cfg.bases * d), fan_in=d, fan_out=d)
            s.xavier(f"enc.{layer}.coef", (self.num_relations, self.cfg.bases))
        s.xavier("gate.W_graph", (d, d))
        s.zeros("gate.b_graph", (d,))
        s.xavier("gate.W_gate", (d, 1))
        s.zeros("gate.b_gate", (1,))
        for task in ("ent", "rel"):
            if self.use_conv:
                s.xavier(f"{task}.kernels", (c, 2, 3), fan_in=6, fan_out=c)
                s.zeros(f"{task}.kernel_bias", (c,))
                s.xavier(f"{task}.proj", (c * d, d))
                s.zeros(f"{task}.proj_bias", (d,))
            else:
                s.xavier(f"{task}.mlp.W", (2 * d, d))
                s.zeros(f"{task}.mlp.b", (d,))
            if self.use_film:
                width = c * 6 + c
                # zero hyper-network starts as identity modulation
                s.zeros(f"{task}.film.W_alpha", (2 * d, width))
                s.zeros(f"{task}.film.b_alpha", (width,))
                s.zeros(f"{task}.film.W_beta", (2 * d, width))
                s.zeros(f"{task}.film.b_beta", (width,))

    def decoder_params(self, task):
        s = self.store
        return DecoderParams(s[f"{task}.kernels"], s[f"{task}.kernel_bias"], s[f"{task}.proj"], s[f"{task}.proj_bias"])

    def film_params(self, task):
        s = self.store
        return FilmParams(s[f"{task}.film.W_alpha"], s[f"{task}.film.b_alpha"],
                          s[f"{task}.film.W_beta"], s[f"{task}.film.b_beta"])

    def encoder_layers(self):
        s = self.store
        return [(s[f"enc.{i}.W1"], s[f"enc.{i}.basis"], s[f"enc.{i}.coef"]) for i in range(self.cfg.layers)]

    def delta(self):
        if not self.cfg.learn_delta:
            return self._fixed_delta
        return nx.softplus(self.store["enc.delta_raw"])

    # ---------------------------------------------------------------- forward

    def initial_embeddings(self):
        h = self.store["ent_init"]
        if not self.use_community:
            return h
        return init_embeddings(h, self.message_matrix, self.store["init.W"], self.store["init.W0"])

    def embeddings(self, hist, training=False, rng=None, force_gate=None, edge_weights=None):
        """Gated entity matrix ``H^t`` for the history graph ``hist``."""
        s = self.store
        h_c = self.initial_embeddings()
        if edge_weights is not None:
            h_t = h_c
            for i, lp in enumerate(self.encoder_layers()):
                if i > 0:
                    h_t = nx.dropout(h_t, self.cfg.dropout, training, rng)
                h_t = hrgcn_layer(hist, h_t, s["rel_emb"], lp, edge_weights=edge_weights,
                                  literal_norm=self.cfg.literal_norm)
        else:
            h_t = encode(hist, h_c, s["rel_emb"], self.encoder_layers(),
                         delta=self.delta() if self.use_decay else None, decay=self.use_decay,
                         dropout=self.cfg.dropout, training=training, rng=rng, literal_norm=self.cfg.literal_norm)
        h, _ = gated_merge(h_t, h_c, s["gate.W_graph"], s["gate.b_graph"], s["gate.W_gate"], s["gate.b_gate"],
                           per_entity=self.cfg.gate == "entity", force_gate=force_gate)
        return h

    def modulated(self, task, first, second):
        theta = self.decoder_params(task)
        if not self.use_film:
            return identity_params(theta)
        alpha, beta = film_factors(first, second, self.film_params(task))
        return adjust_params(theta, alpha, beta)

    def entity_scores(self, h, subj, rel, training=False, rng=None):
        s = self.store
        h_s = nx.gather_rows(h, subj)
        h_r = nx.gather_rows(s["rel_emb"], rel)
        kw = dict(dropout=self.cfg.dropout, training=training, rng=rng)
        if not self.use_conv:
            return mlp_score(h_s, h_r, h, s["ent.mlp.W"], s["ent.mlp.b"], **kw)
        return score_entities(h_s, h_r, h, self.modulated("ent", h_s, h_r), **kw)

    def relation_scores(self, h, subj, obj, training=False, rng=None):
        s = self.store
        h_s = nx.gather_rows(h, subj)
        h_o = nx.gather_rows(h, obj)
        kw = dict(dropout=self.cfg.dropout, training=training, rng=rng)
        if not self.use_conv:
            return mlp_score(h_s, h_o, s["rel_emb"], s["rel.mlp.W"], s["rel.mlp.b"], **kw)
        return score_relations(h_s, h_o, s["rel_emb"], self.modulated("rel", h_s, h_o), **kw)

    def loss(self, hist, queries, training=True, rng=None):
        """Summed cross-entropy ``L_e + w_r * L_r`` over the query quadruples; returns (total, L_e, L_r)."""
        h = self.embeddings(hist, training=training, rng=rng)
        s, r, o = queries[:, 0], queries[:, 1], queries[:, 2]
        le = nx.softmax_cross_entropy(self.entity_scores(h, s, r, training, rng), o)
        total = le
        lr = None
        if self.cfg.relation_weight > 0:
            lr = nx.softmax_cross_entropy(self.relation_scores(h, s, o, training, rng), r)
            total = le + lr * self.cfg.relation_weight
        return total, le, lr
