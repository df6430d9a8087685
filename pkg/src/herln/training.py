"""Chronological training loop with early stopping on validation MRR."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import numerics as nx
from .community import build_layered_graph, detect_communities
from .config import ABLATIONS, TrainConfig
from .evaluation import evaluate
from .graph import add_inverse_quadruples, history_graph, snapshot_array
from .init_embed import community_message_matrix
from .model import HERLN
from .params import adam_step, save_checkpoint

log = logging.getLogger(__name__)


class TrainingAborted(RuntimeError):
    pass


@dataclass
class TrainResult:
    model: HERLN
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    best_valid_mrr: float = float("nan")
    communities: object = None


def entity_loss(model, hist, queries, training=False, rng=None, reduction="sum"):
    """Cross-entropy of the true object over all candidate entities."""
    h = model.embeddings(hist, training=training, rng=rng)
    logits = model.entity_scores(h, queries[:, 0], queries[:, 1], training, rng)
    return nx.softmax_cross_entropy(logits, queries[:, 2], reduction=reduction)


def relation_loss(model, hist, queries, training=False, rng=None, reduction="sum"):
    """Cross-entropy of the true relation over all candidate relations."""
    h = model.embeddings(hist, training=training, rng=rng)
    logits = model.relation_scores(h, queries[:, 0], queries[:, 2], training, rng)
    return nx.softmax_cross_entropy(logits, queries[:, 1], reduction=reduction)


def communities_for(bundle, cfg: TrainConfig):
    g = bundle.train if cfg.community_split == "train" else bundle.combined()
    return detect_communities(build_layered_graph(g), seed=cfg.seed)


def build_model(bundle, cfg: TrainConfig, asg=None, store=None):
    if cfg.has("noCommunity"):
        return HERLN(bundle.num_entities, 2 * bundle.num_relations_raw, cfg, None, store=store), None
    asg = asg if asg is not None else communities_for(bundle, cfg)
    mm = community_message_matrix(bundle.train, asg, cfg.community_norm)
    return HERLN(bundle.num_entities, 2 * bundle.num_relations_raw, cfg, mm, store=store), asg


def train(bundle, cfg: TrainConfig, asg=None, out_dir=None, log_file=None, eval_mode="filtered",
          valid_split="valid", model=None) -> TrainResult:
    """Train over training timestamps in time order; keep the parameters with best validation MRR.

    Timestamps whose history window is empty are skipped.  Without validation
    facts the final parameters are kept.  When ``out_dir`` is given the best
    checkpoint is written to ``out_dir/model.ckpt``.  Passing ``model``
    continues training from its current parameters.
    """
    if model is None:
        model, asg = build_model(bundle, cfg, asg)
    result = TrainResult(model, communities=asg)
    train_aug = add_inverse_quadruples(bundle.train)
    rng = np.random.default_rng(cfg.seed)
    has_valid = len(bundle.split(valid_split)) > 0
    best_arrays, best_mrr, stale = None, -np.inf, 0
    logf = open(log_file, "a") if log_file else None
    try:
        for epoch in range(1, cfg.epochs + 1):
            start = time.perf_counter()
            ent_sum, rel_sum, n_queries = 0.0, 0.0, 0
            for t in train_aug.timestamps():
                hist = history_graph(train_aug, t, cfg.window)
                if len(hist) == 0:
                    continue
                queries = snapshot_array(train_aug, t)
                try:
                    total, le, lr = model.loss(hist, queries, training=True, rng=rng)
                    nx.backward(total)
                except nx.NonFiniteError as exc:
                    raise TrainingAborted(f"epoch {epoch}, timestamp {t}: {exc}") from exc
                adam_step(model.store, lr=cfg.lr)
                ent_sum += float(le.data)
                rel_sum += float(lr.data) if lr is not None else 0.0
                n_queries += len(queries)
            row = dict(epoch=epoch, loss=ent_sum / max(n_queries, 1), rel_loss=rel_sum / max(n_queries, 1),
                       seconds=time.perf_counter() - start)
            if has_valid:
                res = evaluate(model, bundle, valid_split, modes=(eval_mode,))
                row["valid_mrr"] = res[("entity", eval_mode)].mrr
                if row["valid_mrr"] > best_mrr:
                    best_mrr, stale = row["valid_mrr"], 0
                    best_arrays = model.store.state_arrays()
                    result.best_epoch = epoch
                    if out_dir is not None:
                        save_checkpoint(model.store, Path(out_dir) / "model.ckpt")
                else:
                    stale += 1
            result.epochs.append(row)
            line = " ".join(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items())
            log.info(line)
            if logf:
                logf.write(line + "\n")
                logf.flush()
            if has_valid and stale >= cfg.patience:
                break
    finally:
        if logf:
            logf.close()
    if best_arrays is not None:
        model.store.load_arrays(best_arrays)
        result.best_valid_mrr = best_mrr
    elif out_dir is not None:
        save_checkpoint(model.store, Path(out_dir) / "model.ckpt")
    return result


def compare_variants(bundle, cfg: TrainConfig, variants=("",) + ABLATIONS, seeds=(0, 1, 2), split="valid",
                     mode="filtered"):
    """Validation entity MRR for each ablation variant and seed, all under the same config.

    Returns ``{variant: [mrr per seed]}`` with ``"full"`` naming the unablated model.
    """
    out = {}
    for variant in variants:
        scores = []
        for seed in seeds:
            run_cfg = replace(cfg, ablation=variant, seed=seed)
            result = train(bundle, run_cfg, eval_mode=mode)
            scores.append(evaluate(result.model, bundle, split, modes=(mode,))[("entity", mode)].mrr)
        out[variant or "full"] = scores
    return out


def trend_holds(scores, min_wins=2):
    """True when the full model beats every ablation in at least ``min_wins`` seeds."""
    full = np.asarray(scores["full"])
    return all(int(np.sum(full > np.asarray(v))) >= min_wins for k, v in scores.items() if k != "full")
