"""Cryptogram decipherment with a permutation-aware transformer encoder.

Generate substitution ciphers, train encoder-only models to invert them in
a single forward pass, decode with either an unconstrained linear head or a
bijectivity-enforcing assignment head, and analyze what the layers learned.
"""

from .ciphers import (
    CharSequence,
    CipherMapping,
    Alphabet,
    DEFAULT_ALPHABET,
    decrypt,
    encrypt,
    rng_for,
    sample_cipher,
    symbol_error_rate,
)
from .corpus import Batch, TextRecord, build_segments, clean_corpus, make_batch, split_records
from .model import ModelConfig, PRESETS, build_model
from .training import TrainConfig, Trainer, bootstrap_ser, train
from .estimator import CryptogramSolver

__version__ = "0.1.0"

__all__ = [
    "Alphabet", "Batch", "CharSequence", "CipherMapping", "CryptogramSolver",
    "DEFAULT_ALPHABET", "ModelConfig", "PRESETS", "TextRecord", "TrainConfig",
    "Trainer", "bootstrap_ser", "build_model", "build_segments", "clean_corpus",
    "decrypt", "encrypt", "make_batch", "rng_for", "sample_cipher",
    "split_records", "symbol_error_rate", "train",
]
