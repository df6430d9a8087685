"""Query-conditioned ConvTransE decoding.

A FiLM hyper-network maps each query's ``(h_s || h_r)`` to a scale ``alpha``
and shift ``beta`` over the convolution kernels and kernel biases; the
modulated parameters ``(alpha + 1) * theta + beta`` then run the usual
ConvTransE pipeline (stack, convolve, flatten, project, dot with candidates).
"""
from __future__ import annotations

from dataclasses import dataclass

from . import numerics as nx


@dataclass
class DecoderParams:
    kernels: nx.Tensor  # (C, 2, 3)
    kernel_bias: nx.Tensor  # (C,)
    proj: nx.Tensor  # (C * d, d)
    proj_bias: nx.Tensor  # (d,)

    @property
    def num_kernels(self):
        return self.kernels.shape[0]

    @property
    def film_width(self):
        return self.kernels.data.size + self.kernel_bias.data.size


@dataclass
class FilmParams:
    w_alpha: nx.Tensor  # (2d, film_width)
    b_alpha: nx.Tensor
    w_beta: nx.Tensor
    b_beta: nx.Tensor


@dataclass
class ModulatedParams:
    """Per-query kernels ``(B, C, 2, 3)`` and biases ``(B, C)``, plus the shared projection."""

    kernels: nx.Tensor
    kernel_bias: nx.Tensor
    proj: nx.Tensor
    proj_bias: nx.Tensor


def film_factors(h_s, h_r, film: FilmParams):
    """alpha, beta = tanh((h_s || h_r) W + b); one row per query."""
    x = nx.concat([h_s, h_r], axis=-1)
    if x.shape[-1] != film.w_alpha.shape[0]:
        raise ValueError(f"query width {x.shape[-1]} does not match hyper-network input {film.w_alpha.shape[0]}")
    alpha = nx.tanh(nx.matmul(x, film.w_alpha) + film.b_alpha)
    beta = nx.tanh(nx.matmul(x, film.w_beta) + film.b_beta)
    return alpha, beta


def adjust_params(theta: DecoderParams, alpha, beta) -> ModulatedParams:
    """theta_q = (alpha + 1) * theta + beta on the kernel slice; projection passes through."""
    flat = nx.concat([nx.reshape(theta.kernels, (1, -1)), nx.reshape(theta.kernel_bias, (1, -1))], axis=-1)
    mod = (alpha + 1.0) * flat + beta
    b = mod.shape[0]
    nk = theta.kernels.data.size
    c = theta.num_kernels
    kernels = nx.reshape(_cols(mod, 0, nk), (b,) + theta.kernels.shape)
    bias = nx.reshape(_cols(mod, nk, nk + c), (b, c))
    return ModulatedParams(kernels, bias, theta.proj, theta.proj_bias)


def identity_params(theta: DecoderParams) -> ModulatedParams:
    return ModulatedParams(theta.kernels, theta.kernel_bias, theta.proj, theta.proj_bias)


def _cols(x, lo, hi):
    t = nx.transpose(x)
    return nx.transpose(nx.gather_rows(t, slice(lo, hi)))


def convtranse_features(first, second, params: ModulatedParams, dropout=0.0, training=False, rng=None):
    """Stack two ``(B, d)`` rows, convolve, flatten, project to ``d``; returns ``(B, d)``."""
    b, d = first.shape
    stacked = nx.reshape(nx.concat([first, second], axis=-1), (b, 2, d))
    stacked = nx.dropout(stacked, dropout, training, rng)
    feat = nx.conv1d_transE(stacked, params.kernels, params.kernel_bias)
    feat = nx.relu(feat)
    feat = nx.dropout(feat, dropout, training, rng)
    hidden = nx.matmul(nx.reshape(feat, (b, -1)), params.proj) + params.proj_bias
    hidden = nx.relu(hidden)
    return nx.dropout(hidden, dropout, training, rng)


def score_entities(h_s, h_r, entity_matrix, params: ModulatedParams, **kw):
    """Conditional intensities of every candidate object, ``(B, num_entities)``."""
    hidden = convtranse_features(h_s, h_r, params, **kw)
    return nx.matmul(hidden, nx.transpose(entity_matrix))


def score_relations(h_s, h_o, relation_matrix, params: ModulatedParams, **kw):
    """Intensities of every candidate relation for ``(s, ?, o)``, ``(B, num_relations)``."""
    hidden = convtranse_features(h_s, h_o, params, **kw)
    return nx.matmul(hidden, nx.transpose(relation_matrix))


def baseline_score(h_s, h_r, entity_matrix, theta: DecoderParams, **kw):
    """Un-modulated ConvTransE with the same kernels for every query."""
    return score_entities(h_s, h_r, entity_matrix, identity_params(theta), **kw)


def mlp_score(h_s, h_r, candidates, w, b, dropout=0.0, training=False, rng=None):
    """Single fully connected layer over ``(h_s || h_r)`` dotted with candidates."""
    x = nx.dropout(nx.concat([h_s, h_r], axis=-1), dropout, training, rng)
    hidden = nx.relu(nx.matmul(x, w) + b)
    hidden = nx.dropout(hidden, dropout, training, rng)
    return nx.matmul(hidden, nx.transpose(candidates))

