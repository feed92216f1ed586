"""Scikit-learn style facade over the three mechanism models.

fit() takes annotated pairs, builds the vocabulary, and trains one model per
mechanism; predict() returns an (n, 3) array of levels for (seeker,
response) text pairs. get_params/set_params come from BaseEstimator so the
classifier composes with pipelines and grid search.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .encoder import EncoderConfig
from .model import init_model, predict
from .text import MECHANISMS, AnnotatedPair, Vocabulary, encode_pair
from .training import MlmConfig, TrainConfig, pretrain_mlm, train


class EmpathyClassifier(BaseEstimator):
    def __init__(
        self,
        num_layers=2,
        num_heads=2,
        model_dim=64,
        ff_dim=128,
        max_len=64,
        dropout_prob=0.0,
        learning_rate=1e-3,
        batch_size=8,
        epochs=4,
        lambda_ei=1.0,
        lambda_re=0.5,
        seed=12,
        use_attention=True,
        use_seeker=True,
        pretrain=False,
        mlm_epochs=3,
        mlm_batch_size=8,
        mlm_mask_prob=0.15,
    ):
        self.num_layers = num_layers
        self.num_heads = num_heads
        self.model_dim = model_dim
        self.ff_dim = ff_dim
        self.max_len = max_len
        self.dropout_prob = dropout_prob
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.lambda_ei = lambda_ei
        self.lambda_re = lambda_re
        self.seed = seed
        self.use_attention = use_attention
        self.use_seeker = use_seeker
        self.pretrain = pretrain
        self.mlm_epochs = mlm_epochs
        self.mlm_batch_size = mlm_batch_size
        self.mlm_mask_prob = mlm_mask_prob

    def _validate_pairs(self, X):
        for i, p in enumerate(X):
            if not isinstance(p, AnnotatedPair):
                raise TypeError(f"X[{i}] is not an AnnotatedPair")
        if not X:
            raise ValueError("cannot fit on an empty corpus")

    def fit(self, X, y=None, dev=None):
        """X: list of AnnotatedPair (labels live on the pairs; y is ignored)."""
        X = list(X)
        self._validate_pairs(X)
        self.vocab_ = Vocabulary.build(
            [p.seeker_text for p in X] + [p.response_text for p in X]
        )
        config = EncoderConfig(
            num_layers=self.num_layers,
            num_heads=self.num_heads,
            model_dim=self.model_dim,
            ff_dim=self.ff_dim,
            max_len=self.max_len,
            vocab_size=len(self.vocab_),
            dropout_prob=self.dropout_prob,
        )
        tcfg = TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            lambda_ei=self.lambda_ei,
            lambda_re=self.lambda_re,
            seed=self.seed,
            max_len=self.max_len,
            mlm=MlmConfig(
                epochs=self.mlm_epochs,
                batch_size=self.mlm_batch_size,
                mask_prob=self.mlm_mask_prob,
            ),
        )
        self.models_ = {}
        self.history_ = {}
        for offset, mech in enumerate(MECHANISMS):
            model = init_model(
                mech,
                config,
                seed=self.seed + offset,
                use_attention=self.use_attention,
                use_seeker=self.use_seeker,
            )
            if self.pretrain:
                if self.use_seeker:
                    pretrain_mlm(
                        [p.seeker_text for p in X], config, model.s_params,
                        self.vocab_, tcfg.mlm, seed=self.seed,
                    )
                pretrain_mlm(
                    [p.response_text for p in X], config, model.r_params,
                    self.vocab_, tcfg.mlm, seed=self.seed,
                )
            model, history = train(X, dev or [], model, tcfg, self.vocab_)
            self.models_[mech] = model
            self.history_[mech] = history
        return self

    def _check_fitted(self):
        if not hasattr(self, "models_"):
            raise NotFittedError("call fit() before predicting")

    def _encode(self, seeker, response):
        pair = AnnotatedPair(
            seeker_text=seeker, response_text=response, levels={m: 0 for m in MECHANISMS}
        )
        return encode_pair(pair, self.vocab_, self.max_len)

    def predict(self, X) -> np.ndarray:
        """X: list of (seeker_text, response_text). Returns (n, 3) levels."""
        self._check_fitted()
        out = np.zeros((len(X), len(MECHANISMS)), dtype=np.int64)
        for i, (seeker, response) in enumerate(X):
            enc = self._encode(seeker, response)
            for j, mech in enumerate(MECHANISMS):
                out[i, j] = predict(enc, self.models_[mech]).level
        return out

    def predict_proba(self, X) -> np.ndarray:
        """(n, 3 mechanisms, 3 levels) class probabilities."""
        self._check_fitted()
        out = np.zeros((len(X), len(MECHANISMS), 3))
        for i, (seeker, response) in enumerate(X):
            enc = self._encode(seeker, response)
            for j, mech in enumerate(MECHANISMS):
                out[i, j] = predict(enc, self.models_[mech]).level_probs
        return out

    def predict_full(self, X) -> list:
        """Full Prediction objects, {mechanism: Prediction} per input pair."""
        self._check_fitted()
        results = []
        for seeker, response in X:
            enc = self._encode(seeker, response)
            results.append({mech: predict(enc, self.models_[mech]) for mech in MECHANISMS})
        return results
