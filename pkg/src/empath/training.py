"""Training: Adam, supervised multi-task fine-tuning, MLM pretraining,
and finite-difference gradient verification.

Batches accumulate per-example gradients (one tape per pair); the optimizer
steps on the mean. Everything is driven by one seeded generator so repeated
runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoder import encode
from .metrics import macro_f1
from .model import BiEncoderModel, forward, loss, predict
from .text import Vocabulary, encode_pair


@dataclass
class MlmConfig:
    epochs: int = 3
    batch_size: int = 8
    mask_prob: float = 0.15


@dataclass
class TrainConfig:
    # Paper-scale defaults are lr=2e-5 / 4 epochs; toy-scale from-scratch
    # models need a larger rate.
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 4
    lambda_ei: float = 1.0
    lambda_re: float = 0.5
    seed: int = 12
    max_len: int = 64
    mlm: MlmConfig = field(default_factory=MlmConfig)

    def __post_init__(self):
        if self.lambda_ei < 0 or self.lambda_re < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("epochs and batch_size must be positive")


# Appendix-B style search grid for the rationale loss weight; results use 0.5.
LAMBDA_RE_GRID = (0.1, 0.2, 0.5, 1.0)


class Adam:
    def __init__(self, params: dict, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self):
        self.t += 1
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            mhat = self.m[k] / (1 - self.b1**self.t)
            vhat = self.v[k] / (1 - self.b2**self.t)
            p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()


def _mean_grads(params: dict, count: int):
    for p in params.values():
        if p.grad is not None:
            p.grad /= count


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    dev_macro_f1: float | None


def train(train_pairs, dev_pairs, model: BiEncoderModel, config: TrainConfig, vocab: Vocabulary):
    """Fine-tune in place; returns (model-with-best-dev-params, history)."""
    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    opt = Adam(params, lr=config.learning_rate)
    encoded = [encode_pair(p, vocab, config.max_len) for p in train_pairs]
    gold_levels = [p.levels[model.mechanism] for p in train_pairs]
    history: list[EpochStats] = []
    best_f1 = -1.0
    best_params = None

    for epoch in range(config.epochs):
        order = rng.permutation(len(encoded))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            opt.zero_grad()
            batch_loss = 0.0
            for i in batch:
                out = forward(encoded[i], model, mode="train", rng=rng)
                l = loss(
                    out,
                    gold_levels[i],
                    encoded[i].rationale_mask[model.mechanism],
                    config.lambda_ei,
                    config.lambda_re,
                )
                l.backward()
                batch_loss += l.item()
            _mean_grads(params, len(batch))
            opt.step()
            epoch_loss += batch_loss / len(batch)
            n_batches += 1

        dev_f1 = None
        if dev_pairs:
            dev_f1 = _dev_macro_f1(model, dev_pairs, vocab, config.max_len)
            if dev_f1 > best_f1:
                best_f1 = dev_f1
                best_params = {k: p.data.copy() for k, p in params.items()}
        history.append(
            EpochStats(epoch=epoch, train_loss=epoch_loss / max(n_batches, 1), dev_macro_f1=dev_f1)
        )

    if best_params is not None:
        for k, p in params.items():
            p.data = best_params[k]
    return model, history


def _dev_macro_f1(model, pairs, vocab, max_len) -> float:
    preds, golds = [], []
    for pair in pairs:
        enc = encode_pair(pair, vocab, max_len)
        preds.append(predict(enc, model).level)
        golds.append(pair.levels[model.mechanism])
    return macro_f1(preds, golds)


# -- masked language model pretraining --------------------------------------


@dataclass
class MlmResult:
    loss_curve: list
    head_w: Tensor  # vocabulary-prediction head, kept for inspection
    head_b: Tensor


def pretrain_mlm(
    texts, enc_config, enc_params, vocab: Vocabulary, mlm: MlmConfig, seed: int = 12
) -> MlmResult:
    """Domain-adaptive MLM over one encoder's parameters, in place.

    Of each batch's selected positions: 80% -> [MASK], 10% -> random token,
    10% left unchanged; loss is cross-entropy at selected positions only.
    """
    texts = list(texts)
    if not texts:
        raise ValueError("MLM pretraining needs a nonempty corpus")
    if not (0.0 < mlm.mask_prob < 1.0):
        raise ValueError("mask_prob outside (0, 1): nothing to predict")
    rng = np.random.default_rng(seed)
    head_rng = np.random.default_rng(seed + 1)
    d, v = enc_config.model_dim, enc_config.vocab_size
    head_w = Tensor(head_rng.normal(0.0, 0.02, size=(d, v)), requires_grad=True)
    head_b = Tensor(np.zeros(v), requires_grad=True)
    params = dict(enc_params)
    params["mlm.w"] = head_w
    params["mlm.b"] = head_b
    opt = Adam(params, lr=1e-3)

    from .text import tokenize

    sequences = []
    for text in texts:
        toks = tokenize(text)[: enc_config.max_len - 2]
        ids = [vocab.cls_id] + [vocab.id(t.text) for t in toks] + [vocab.sep_id]
        sequences.append(np.array(ids, dtype=np.intp))

    special = vocab.special_ids()
    curve = []
    for _ in range(mlm.epochs):
        order = rng.permutation(len(sequences))
        epoch_loss, n_terms = 0.0, 0
        for start in range(0, len(order), mlm.batch_size):
            batch = order[start : start + mlm.batch_size]
            opt.zero_grad()
            used = 0
            for i in batch:
                ids = sequences[i]
                candidates = np.array([j for j, t in enumerate(ids) if t not in special])
                if candidates.size == 0:
                    continue
                selected = candidates[rng.random(candidates.size) < mlm.mask_prob]
                if selected.size == 0:
                    continue
                corrupted = ids.copy()
                for j in selected:
                    r = rng.random()
                    if r < 0.8:
                        corrupted[j] = vocab.mask_id
                    elif r < 0.9:
                        corrupted[j] = int(rng.integers(len(vocab)))
                mask = np.ones(len(ids))
                hidden = encode(corrupted, mask, enc_config, params, mode="eval").hidden
                logits = hidden.take_rows(selected) @ head_w + head_b
                l = ad.cross_entropy(logits, ids[selected])
                l.backward()
                epoch_loss += l.item()
                n_terms += 1
                used += 1
            if used:
                _mean_grads(params, used)
                opt.step()
        curve.append(epoch_loss / max(n_terms, 1))
    return MlmResult(loss_curve=curve, head_w=head_w, head_b=head_b)


def mlm_predict(ids, positions, enc_config, enc_params, result: MlmResult):
    """Predicted token ids at `positions` of a (possibly masked) sequence."""
    ids = np.asarray(ids, dtype=np.intp)
    with ad.no_grad():
        hidden = encode(ids, np.ones(len(ids)), enc_config, enc_params, mode="eval").hidden
        logits = hidden.take_rows(np.asarray(positions, dtype=np.intp)) @ result.head_w + result.head_b
    return np.argmax(logits.data, axis=-1)


# -- gradient checking ------------------------------------------------------


@dataclass
class GradCheckReport:
    ok: bool
    max_rel_err: float
    per_tensor: dict  # name -> max rel err
    failures: list  # (name, coord, analytic, numeric, rel_err)


def finite_difference_check(
    loss_fn,
    params: dict,
    analytic: dict,
    eps: float = 1e-4,
    tol: float = 1e-3,
    max_coords: int = 200,
    seed: int = 0,
) -> GradCheckReport:
    """Compare supplied analytic grads against central differences of loss_fn."""
    rng = np.random.default_rng(seed)
    per_tensor = {}
    failures = []
    max_err = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        n = flat.size
        coords = np.arange(n) if n <= max_coords else rng.choice(n, size=max_coords, replace=False)
        g_flat = analytic[name].reshape(-1)
        worst = 0.0
        for c in coords:
            orig = flat[c]
            flat[c] = orig + eps
            up = loss_fn()
            flat[c] = orig - eps
            down = loss_fn()
            flat[c] = orig
            numeric = (up - down) / (2 * eps)
            rel = abs(g_flat[c] - numeric) / max(1.0, abs(numeric))
            if rel > worst:
                worst = rel
            if rel > tol:
                failures.append((name, int(c), float(g_flat[c]), float(numeric), float(rel)))
        per_tensor[name] = worst
        max_err = max(max_err, worst)
    return GradCheckReport(
        ok=not failures, max_rel_err=max_err, per_tensor=per_tensor, failures=failures
    )


def gradient_check(
    model: BiEncoderModel,
    pair,
    gold_level: int,
    gold_mask,
    lambda_ei: float = 1.0,
    lambda_re: float = 0.5,
    eps: float = 1e-4,
    tol: float = 1e-3,
    max_coords: int = 200,
    seed: int = 0,
) -> GradCheckReport:
    """Finite-difference check of the full model loss on one encoded pair."""
    params = model.parameters()

    def loss_value() -> float:
        with ad.no_grad():
            out = forward(pair, model, mode="eval")
            return loss(out, gold_level, gold_mask, lambda_ei, lambda_re).item()

    model.zero_grad()
    out = forward(pair, model, mode="eval")
    loss(out, gold_level, gold_mask, lambda_ei, lambda_re).backward()
    analytic = {
        k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for k, p in params.items()
    }
    return finite_difference_check(
        loss_value, params, analytic, eps=eps, tol=tol, max_coords=max_coords, seed=seed
    )
