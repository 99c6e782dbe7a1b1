"""Scikit-learn style front door for the whole pipeline.

CryptogramSolver.fit() trains a decipherment model on plaintext strings
(self-supervised: ciphers are generated on the fly), predict() decodes
ciphertext strings, and score() returns 1 minus the mean symbol error rate.
All the heavy lifting lives in the training and model modules; this class
just adapts them to the estimator contract.
"""

from __future__ import annotations

import tempfile
from typing import Optional

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .ciphers import DEFAULT_ALPHABET, rng_for, sample_cipher, substitute, symbol_error_rate
from .corpus import TextRecord, clean_line, make_batch
from .model.backbone import ModelConfig
from .training import TrainConfig, Trainer


class CryptogramSolver(BaseEstimator):
    """Learn to invert random substitution ciphers from raw plaintext.

    Parameters mirror TrainConfig; `model_size` picks a preset from the
    scaling ladder or accepts a ModelConfig. After fit(), `model_` holds the
    trained torch module and `train_dir_` the run directory with metrics and
    checkpoints.
    """

    def __init__(self, model_size="0.5M", head: str = "standard",
                 steps: int = 1000, batch_size: int = 96, lr: float = 1e-4,
                 weight_decay: float = 0.1, seed: int = 0,
                 cipher_pool_size: Optional[int] = None,
                 precision: str = "fp32", out_dir: Optional[str] = None):
        self.model_size = model_size
        self.head = head
        self.steps = steps
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.seed = seed
        self.cipher_pool_size = cipher_pool_size
        self.precision = precision
        self.out_dir = out_dir

    # -- estimator plumbing -------------------------------------------------

    def _model_config(self) -> ModelConfig:
        if isinstance(self.model_size, ModelConfig):
            return self.model_size
        return ModelConfig.preset(str(self.model_size))

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError(
                "This CryptogramSolver instance is not fitted yet. "
                "Call 'fit' before using this method.")

    @staticmethod
    def _as_records(X) -> list:
        if isinstance(X, str):
            raise ValueError("X must be an iterable of strings, not one string")
        records = []
        for i, text in enumerate(X):
            cleaned = clean_line(str(text))
            if cleaned is None:
                raise ValueError(
                    f"sample {i} is empty or contains unsupported characters")
            records.append(TextRecord.make(cleaned))
        if not records:
            raise ValueError("X is empty")
        return records

    # -- the estimator API ----------------------------------------------------

    def fit(self, X, y=None):
        """Train on plaintext strings; y is ignored (self-supervised)."""
        records = self._as_records(X)
        cfg = TrainConfig(model=self._model_config(), steps=self.steps,
                          batch_size=self.batch_size, lr=self.lr,
                          weight_decay=self.weight_decay, seed=self.seed,
                          cipher_pool_size=self.cipher_pool_size,
                          head=self.head, precision=self.precision)
        out_dir = self.out_dir or tempfile.mkdtemp(prefix="cryptogram_fit_")
        trainer = Trainer(cfg, records, val_records=None, out_dir=out_dir)
        trainer.train()
        self.model_ = trainer.model
        self.model_.eval()
        self.config_ = cfg
        self.train_dir_ = out_dir
        self.n_records_ = len(records)
        return self

    def predict(self, X) -> list:
        """Decode ciphertext strings to plaintext guesses."""
        self._check_fitted()
        if isinstance(X, str):
            raise ValueError("X must be an iterable of strings, not one string")
        texts = [str(t).upper() for t in X]
        if not texts:
            return []
        alpha = DEFAULT_ALPHABET
        out = []
        B = max(1, self.batch_size)
        ctx = self.model_.cfg.context_len
        for lo in range(0, len(texts), B):
            chunk = texts[lo:lo + B]
            lengths = [len(t) for t in chunk]
            if min(lengths) == 0:
                raise ValueError("cannot decode an empty string")
            if max(lengths) > ctx:
                raise ValueError(f"input longer than model context {ctx}")
            width = max(lengths)
            tokens = np.full((len(chunk), width), alpha.pad_id, dtype=np.int64)
            for i, t in enumerate(chunk):
                tokens[i, :len(t)] = alpha.encode(t)
            tok = torch.from_numpy(tokens)
            pad = tok == alpha.pad_id
            decoded = self.model_.decode(tok, pad)
            for i, n in enumerate(lengths):
                out.append(alpha.decode(decoded[i, :n].numpy()))
        return out

    def score(self, X, y=None) -> float:
        """Mean per-sequence accuracy, 1 - SER.

        With y=None, X holds plaintexts: each is encrypted under a fresh
        seeded cipher and the decode is scored against the original. With y
        given, X holds ciphertexts and y the reference plaintexts.
        """
        self._check_fitted()
        if y is None:
            records = self._as_records(X)
            rng = rng_for(self.seed, "score")
            truths = [r.text for r in records]
            cipher_texts = []
            for r in records:
                ids = DEFAULT_ALPHABET.encode(r.text)
                f = sample_cipher(rng)
                cipher_texts.append(DEFAULT_ALPHABET.decode(substitute(ids, f)))
        else:
            cipher_texts = [str(t).upper() for t in X]
            truths = [str(t).upper() for t in y]
            if len(cipher_texts) != len(truths):
                raise ValueError("X and y lengths differ")
        preds = self.predict(cipher_texts)
        sers = [symbol_error_rate(p, t) for p, t in zip(preds, truths)]
        return 1.0 - float(np.mean(sers))

    @classmethod
    def from_checkpoint(cls, path) -> "CryptogramSolver":
        """Wrap an already-trained checkpoint as a fitted estimator."""
        from .checkpoint import load_model
        model, meta = load_model(path)
        est = cls(model_size=model.cfg.size_tag or model.cfg,
                  head=meta.get("head", "standard"))
        est.model_ = model
        est.config_ = None
        est.train_dir_ = None
        est.n_records_ = 0
        return est
