"""Bi-encoder with cross-attention fusion, level head, and rationale head.

One model per communication mechanism; the three models share nothing.
Fusion is single-head scaled dot-product attention with the raw encodings
as query/key/value (no learned projections), followed by a residual sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoder import NEG_INF, EncoderConfig, encode, init_params, truncated_normal
from .text import MECHANISMS, TokenizedPair, mask_to_spans


@dataclass
class FusionOutput:
    attended: Tensor  # (n, d) seeker-context summary per response token
    hidden: Tensor  # (n, d) residual sum: response encoding + attended
    weights: np.ndarray  # (n, m) attention weights, for inspection


@dataclass(frozen=True)
class Prediction:
    mechanism: str
    level: int
    level_probs: np.ndarray  # (3,)
    rationale_mask: np.ndarray  # over real response tokens
    rationale_spans: list  # char intervals into response text
    token_offsets: list


@dataclass
class BiEncoderModel:
    mechanism: str
    config: EncoderConfig
    s_params: dict
    r_params: dict
    head_params: dict  # "id.w", "id.b", "rat.w", "rat.b"
    use_attention: bool = True
    use_seeker: bool = True

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")

    def parameters(self) -> dict:
        out = {}
        if self.use_seeker:
            out.update({"s." + k: v for k, v in self.s_params.items()})
        out.update({"r." + k: v for k, v in self.r_params.items()})
        out.update({"head." + k: v for k, v in self.head_params.items()})
        return out

    def zero_grad(self):
        for p in self.parameters().values():
            p.zero_grad()

    @property
    def id_head_in_dim(self) -> int:
        d = self.config.model_dim
        return 2 * d if (self.use_seeker and not self.use_attention) else d


def init_model(
    mechanism: str,
    config: EncoderConfig,
    seed: int = 12,
    use_attention: bool = True,
    use_seeker: bool = True,
) -> BiEncoderModel:
    rng = np.random.default_rng(seed)
    s_params = init_params(config, seed=int(rng.integers(2**31)))
    r_params = init_params(config, seed=int(rng.integers(2**31)))
    d = config.model_dim
    id_in = 2 * d if (use_seeker and not use_attention) else d
    head_params = {
        "id.w": Tensor(truncated_normal(rng, (id_in, 3)), requires_grad=True),
        "id.b": Tensor(np.zeros(3), requires_grad=True),
        "rat.w": Tensor(truncated_normal(rng, (d, 2)), requires_grad=True),
        "rat.b": Tensor(np.zeros(2), requires_grad=True),
    }
    return BiEncoderModel(
        mechanism=mechanism,
        config=config,
        s_params=s_params,
        r_params=r_params,
        head_params=head_params,
        use_attention=use_attention,
        use_seeker=use_seeker,
    )


def fuse(e_response: Tensor, e_seeker: Tensor, seeker_mask) -> FusionOutput:
    """a = softmax(eR . eS^T / sqrt(d)) . eS over unmasked seeker positions; h = eR + a."""
    if e_response.shape[-1] != e_seeker.shape[-1]:
        raise ValueError(
            f"hidden dims differ: {e_response.shape[-1]} vs {e_seeker.shape[-1]}"
        )
    d = e_response.shape[-1]
    m = e_seeker.shape[0]
    mask = np.asarray(seeker_mask)[:m]
    key_bias = np.where(mask > 0, 0.0, NEG_INF)[None, :]
    scores = (e_response @ e_seeker.T) / math.sqrt(d) + key_bias
    weights = ad.softmax(scores, axis=-1)
    attended = weights @ e_seeker
    hidden = e_response + attended
    return FusionOutput(attended=attended, hidden=hidden, weights=weights.data.copy())


def _argmax_lowest(values: np.ndarray) -> int:
    """argmax breaking ties toward the lowest index."""
    return int(np.argmax(values))


def identify(cls_hidden: Tensor, head_params: dict):
    """(logits, probs, predicted level) from the fused [CLS] representation."""
    logits = cls_hidden @ head_params["id.w"] + head_params["id.b"]
    probs = ad.softmax(logits, axis=-1)
    return logits, probs.data.copy(), _argmax_lowest(logits.data)


def extract_rationale(token_hidden: Tensor, head_params: dict, token_offsets: list):
    """Per-token 2-class logits over real response tokens; runs map to char spans.

    `token_hidden` must already exclude [CLS]/[SEP]/[PAD] positions.
    """
    logits = token_hidden @ head_params["rat.w"] + head_params["rat.b"]
    mask = (logits.data[:, 1] > logits.data[:, 0]).astype(np.int64)  # tie -> 0
    spans = mask_to_spans(mask, token_offsets)
    return logits, mask, spans


@dataclass
class ForwardOutput:
    level_logits: Tensor
    level_probs: np.ndarray
    level: int
    rationale_logits: Tensor  # (n_real, 2)
    rationale_mask: np.ndarray
    rationale_spans: list
    fusion: FusionOutput | None


def forward(
    pair: TokenizedPair,
    model: BiEncoderModel,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> ForwardOutput:
    cfg = model.config
    e_r = encode(pair.response_ids, pair.response_mask, cfg, model.r_params, mode, rng).hidden
    fusion = None
    if model.use_seeker:
        e_s = encode(pair.seeker_ids, pair.seeker_mask, cfg, model.s_params, mode, rng).hidden
        if model.use_attention:
            fusion = fuse(e_r, e_s, pair.seeker_mask)
            h = fusion.hidden
            cls_repr = h.row(0)
        else:
            # Table-4 "-attention" variant: concatenated [CLS] encodings feed
            # the level head; the rationale head reads raw response encodings.
            h = e_r
            cls_repr = ad.concat([e_s.row(0), e_r.row(0)], axis=-1)
    else:
        h = e_r
        cls_repr = h.row(0)

    level_logits, level_probs, level = identify(cls_repr, model.head_params)
    # Real tokens sit at positions 1..n (after [CLS]).
    token_hidden = h.narrow(1, pair.n_response_tokens, axis=0)
    rat_logits, rat_mask, spans = extract_rationale(
        token_hidden, model.head_params, pair.response_offsets
    )
    return ForwardOutput(
        level_logits=level_logits,
        level_probs=level_probs,
        level=level,
        rationale_logits=rat_logits,
        rationale_mask=rat_mask,
        rationale_spans=spans,
        fusion=fusion,
    )


def predict(pair: TokenizedPair, model: BiEncoderModel) -> Prediction:
    with ad.no_grad():
        out = forward(pair, model, mode="eval")
    return Prediction(
        mechanism=model.mechanism,
        level=out.level,
        level_probs=out.level_probs,
        rationale_mask=out.rationale_mask,
        rationale_spans=out.rationale_spans,
        token_offsets=list(pair.response_offsets),
    )


def loss(
    out: ForwardOutput,
    gold_level: int,
    gold_mask: np.ndarray,
    lambda_ei: float = 1.0,
    lambda_re: float = 0.5,
) -> Tensor:
    """lambda_EI * CE(level) + lambda_RE * mean per-token CE(rationale)."""
    total = lambda_ei * ad.cross_entropy(
        out.level_logits.reshape(1, 3), np.array([gold_level])
    )
    if lambda_re > 0 and out.rationale_logits.shape[0] > 0:
        gold = np.asarray(gold_mask[: out.rationale_logits.shape[0]], dtype=np.intp)
        total = total + lambda_re * ad.cross_entropy(out.rationale_logits, gold)
    return total
