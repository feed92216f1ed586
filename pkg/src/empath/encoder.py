"""Toy transformer encoder: token+position embeddings, post-LN blocks.

Stands in for the pretrained sentence encoders at desk scale. Multi-head
self-attention with key padding masks, GELU feed-forward, residuals, and
layer norm after each sublayer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

NEG_INF = -1e9


@dataclass(frozen=True)
class EncoderConfig:
    num_layers: int = 2
    num_heads: int = 2
    model_dim: int = 64
    ff_dim: int = 128
    max_len: int = 64
    vocab_size: int = 0
    dropout_prob: float = 0.1

    def __post_init__(self):
        if self.model_dim % self.num_heads != 0:
            raise ValueError("model_dim must be divisible by num_heads")
        if min(self.num_layers, self.num_heads, self.model_dim, self.ff_dim, self.max_len) <= 0:
            raise ValueError("all encoder dimensions must be positive")
        if not (0.0 <= self.dropout_prob < 1.0):
            raise ValueError("dropout_prob must be in [0, 1)")


@dataclass
class EncoderOutput:
    hidden: Tensor  # (n, d)
    attention_mask: np.ndarray  # 1 on real positions


def truncated_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Normal(0, std) resampled until within 2 std."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out


def init_params(config: EncoderConfig, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    d, ff = config.model_dim, config.ff_dim

    def w(shape):
        return Tensor(truncated_normal(rng, shape), requires_grad=True)

    def zeros(shape):
        return Tensor(np.zeros(shape), requires_grad=True)

    def ones(shape):
        return Tensor(np.ones(shape), requires_grad=True)

    params = {
        "tok_emb": w((config.vocab_size, d)),
        "pos_emb": w((config.max_len, d)),
    }
    for i in range(config.num_layers):
        p = f"layer{i}."
        params[p + "attn.wq"] = w((d, d))
        params[p + "attn.bq"] = zeros(d)
        params[p + "attn.wk"] = w((d, d))
        params[p + "attn.bk"] = zeros(d)
        params[p + "attn.wv"] = w((d, d))
        params[p + "attn.bv"] = zeros(d)
        params[p + "attn.wo"] = w((d, d))
        params[p + "attn.bo"] = zeros(d)
        params[p + "ln1.g"] = ones(d)
        params[p + "ln1.b"] = zeros(d)
        params[p + "ff.w1"] = w((d, ff))
        params[p + "ff.b1"] = zeros(ff)
        params[p + "ff.w2"] = w((ff, d))
        params[p + "ff.b2"] = zeros(d)
        params[p + "ln2.g"] = ones(d)
        params[p + "ln2.b"] = zeros(d)
    return params


def self_attention(x: Tensor, mask: np.ndarray, params: dict, prefix: str, num_heads: int) -> Tensor:
    n, d = x.shape
    dh = d // num_heads
    q = x @ params[prefix + "wq"] + params[prefix + "bq"]
    k = x @ params[prefix + "wk"] + params[prefix + "bk"]
    v = x @ params[prefix + "wv"] + params[prefix + "bv"]
    key_bias = np.where(mask[:n] > 0, 0.0, NEG_INF)[None, :]  # (1, n)
    heads = []
    for h in range(num_heads):
        qh = q.narrow(h * dh, dh)
        kh = k.narrow(h * dh, dh)
        vh = v.narrow(h * dh, dh)
        scores = (qh @ kh.T) / math.sqrt(dh) + key_bias
        weights = ad.softmax(scores, axis=-1)
        heads.append(weights @ vh)
    out = ad.concat(heads, axis=-1)
    return out @ params[prefix + "wo"] + params[prefix + "bo"]


def encode(
    ids,
    attention_mask,
    config: EncoderConfig,
    params: dict,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> EncoderOutput:
    """Forward pass. `mode` is "train" (dropout active, rng required) or "eval"."""
    ids = np.asarray(ids, dtype=np.intp)
    mask = np.asarray(attention_mask)
    if len(ids) > config.max_len:
        raise ValueError(f"sequence of length {len(ids)} exceeds max_len {config.max_len}")
    train = mode == "train"
    if train and config.dropout_prob > 0 and rng is None:
        raise ValueError("train mode with dropout requires an rng")

    def drop(t):
        if train and config.dropout_prob > 0:
            return ad.dropout(t, config.dropout_prob, rng)
        return t

    x = ad.embedding(params["tok_emb"], ids) + params["pos_emb"].narrow(0, len(ids), axis=0)
    x = drop(x)
    for i in range(config.num_layers):
        p = f"layer{i}."
        attn = self_attention(x, mask, params, p + "attn.", config.num_heads)
        x = ad.layer_norm(x + drop(attn), params[p + "ln1.g"], params[p + "ln1.b"])
        ff = ad.gelu(x @ params[p + "ff.w1"] + params[p + "ff.b1"]) @ params[p + "ff.w2"] + params[p + "ff.b2"]
        x = ad.layer_norm(x + drop(ff), params[p + "ln2.g"], params[p + "ln2.b"])
    return EncoderOutput(hidden=x, attention_mask=mask)
