"""Corpus cleaning, segment construction, splitting, and encrypted batches.

Two ingestion paths feed the trainer. The quote path cleans short
independent lines and keeps those between 15 and 300 characters. The
segment path concatenates whitespace-delimited words from running text
into records of at least ``target_len`` characters, never splitting a
word. Both emit TextRecord rows whose text uses only alphabet characters.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .ciphers import (
    DEFAULT_ALPHABET,
    Alphabet,
    CipherMapping,
    sample_cipher,
    substitute,
)

MIN_QUOTE_LEN = 15
MAX_QUOTE_LEN = 300
SEGMENT_TARGET_LEN = 256
MAX_SEGMENTS_PER_LANGUAGE = 25_000
TRAIN_FRACTION = 0.975

# sentence punctuation that attracts spacing repairs; quotes/apostrophe/hyphen
# are left alone because they are legitimately flush against letters
_SPACED_PUNCT = ".,!?;:"

LENGTH_BIN_EDGES = (32, 64, 128, 256)
LENGTH_BIN_LABELS = ("<32", "32-64", "64-128", "128-256", ">256")


@dataclass(frozen=True)
class TextRecord:
    text: str
    length: int
    language: Optional[str] = None
    split: str = "train"

    @classmethod
    def make(cls, text: str, language: Optional[str] = None,
             split: str = "train") -> "TextRecord":
        return cls(text=text, length=len(text), language=language, split=split)


@dataclass
class Batch:
    """One training batch: per-row fresh ciphers, pad-suffixed to max length.

    tokens holds ciphertext ids, targets the matching plaintext ids;
    pad_mask is True at padded positions in both.
    """

    tokens: np.ndarray      # [B, T] int64
    targets: np.ndarray     # [B, T] int64
    pad_mask: np.ndarray    # [B, T] bool, True at pad
    ciphers: list
    lengths: np.ndarray     # [B] int64

    def __len__(self) -> int:
        return int(self.tokens.shape[0])


def tokenize(text: str, alphabet: Alphabet = DEFAULT_ALPHABET) -> np.ndarray:
    return alphabet.encode(text)


def detokenize(ids, alphabet: Alphabet = DEFAULT_ALPHABET) -> str:
    return alphabet.decode(ids)


def strip_accents(text: str) -> str:
    """Replace accented characters by their unaccented counterparts."""
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(c for c in decomposed if not unicodedata.combining(c))


def normalize_spacing(text: str) -> str:
    """Collapse whitespace and repair spacing around sentence punctuation.

    No space before ".,!?;:", exactly one after unless the next character
    is another punctuation mark or the sequence ends.
    """
    words = text.split()
    joined = " ".join(words)
    out = []
    n = len(joined)
    for i, ch in enumerate(joined):
        if ch == " " and i + 1 < n and joined[i + 1] in _SPACED_PUNCT:
            continue
        out.append(ch)
        if ch in _SPACED_PUNCT and i + 1 < n:
            nxt = joined[i + 1]
            if nxt != " " and nxt not in _SPACED_PUNCT and nxt not in "'\"":
                out.append(" ")
    return "".join(out).strip()


def clean_line(line: str, alphabet: Alphabet = DEFAULT_ALPHABET) -> Optional[str]:
    """Uppercase and normalize one line; None if any character is out of vocabulary."""
    text = normalize_spacing(line.upper())
    if not text:
        return None
    valid = set(alphabet.valid_chars())
    if any(c not in valid for c in text):
        return None
    return text


def clean_corpus(raw_lines: Iterable[str],
                 min_len: int = MIN_QUOTE_LEN,
                 max_len: int = MAX_QUOTE_LEN,
                 language: Optional[str] = None,
                 alphabet: Alphabet = DEFAULT_ALPHABET,
                 report: Optional[dict] = None) -> list:
    """Clean independent lines into TextRecords, dropping misfits.

    Records with out-of-vocabulary characters (accents included) are dropped
    rather than repaired; the length filter runs after spacing normalization.
    Pass ``report`` (a dict) to collect counts and drop reasons.
    """
    records = []
    drops = {"empty": 0, "out_of_vocabulary": 0, "too_short": 0, "too_long": 0}
    n_in = 0
    for line in raw_lines:
        n_in += 1
        if not line.strip():
            drops["empty"] += 1
            continue
        text = clean_line(line, alphabet)
        if text is None:
            drops["out_of_vocabulary"] += 1
            continue
        if len(text) < min_len:
            drops["too_short"] += 1
            continue
        if len(text) > max_len:
            drops["too_long"] += 1
            continue
        records.append(TextRecord.make(text, language=language))
    if report is not None:
        report["input_lines"] = n_in
        report["kept"] = len(records)
        report["dropped"] = drops
        report["length_histogram"] = length_histogram(r.length for r in records)
    if not records:
        raise ValueError("corpus is empty after cleaning")
    return records


def build_segments(rows, target_len: int = SEGMENT_TARGET_LEN,
                   max_per_language: int = MAX_SEGMENTS_PER_LANGUAGE,
                   alphabet: Alphabet = DEFAULT_ALPHABET) -> list:
    """Accumulate words into fixed-scale segments of length >= target_len.

    Words are whitespace-delimited; accents are replaced before accumulation
    and words still out of vocabulary afterwards are skipped. A word is never
    split: the buffer flushes once the joined length reaches the target. The
    trailing under-length buffer is discarded. At most ``max_per_language``
    segments are kept per language tag.
    """
    valid = set(alphabet.valid_chars())
    buffers: dict = {}
    counts: dict = {}
    segments = []
    for row in rows:
        if isinstance(row, TextRecord):
            text, lang = row.text, row.language
        else:
            text, lang = str(row), None
        if counts.get(lang, 0) >= max_per_language:
            continue
        text = normalize_spacing(strip_accents(text).upper())
        buf = buffers.setdefault(lang, [])
        size = sum(len(w) for w in buf) + max(len(buf) - 1, 0)
        for word in text.split():
            if any(c not in valid for c in word):
                continue
            buf.append(word)
            size += len(word) + (1 if size else 0)
            if size >= target_len:
                segments.append(TextRecord.make(" ".join(buf), language=lang))
                counts[lang] = counts.get(lang, 0) + 1
                buf.clear()
                size = 0
                if counts[lang] >= max_per_language:
                    break
    return segments


def split_records(records: Sequence[TextRecord], train_frac: float = TRAIN_FRACTION,
                  seed: int = 0) -> tuple:
    """Deterministic disjoint train/test split; together they cover the input."""
    if not records:
        raise ValueError("cannot split an empty record list")
    n = len(records)
    order = np.random.default_rng(np.random.SeedSequence([seed, n])).permutation(n)
    n_train = int(round(train_frac * n))
    train_idx = set(order[:n_train].tolist())
    train = [replace(records[i], split="train") for i in sorted(train_idx)]
    test = [replace(records[i], split="test") for i in range(n) if i not in train_idx]
    return train, test


def make_batch(records: Sequence[TextRecord], cipher_seed_stream,
               batch_size: int = 96, max_len: Optional[int] = None,
               alphabet: Alphabet = DEFAULT_ALPHABET) -> Batch:
    """Encrypt up to ``batch_size`` records on the fly, one fresh cipher per row.

    ``cipher_seed_stream`` is a numpy Generator (ciphers drawn sequentially)
    or an iterable of per-row seeds/Generators. Rows are pad-suffixed to the
    longest record in the batch.
    """
    rows = list(records[:batch_size])
    if not rows:
        raise ValueError("empty batch")
    lengths = np.array([r.length for r in rows], dtype=np.int64)
    if max_len is not None and lengths.max() > max_len:
        raise ValueError(
            f"record of length {int(lengths.max())} exceeds model context {max_len}")

    if isinstance(cipher_seed_stream, np.random.Generator):
        ciphers = [sample_cipher(cipher_seed_stream) for _ in rows]
    else:
        stream = iter(cipher_seed_stream)
        ciphers = []
        for _ in rows:
            s = next(stream)
            ciphers.append(s if isinstance(s, CipherMapping) else sample_cipher(s))

    width = int(lengths.max())
    pad = alphabet.pad_id
    tokens = np.full((len(rows), width), pad, dtype=np.int64)
    targets = np.full((len(rows), width), pad, dtype=np.int64)
    for i, (rec, f) in enumerate(zip(rows, ciphers)):
        ids = tokenize(rec.text, alphabet)
        tokens[i, :ids.size] = substitute(ids, f, alphabet)
        targets[i, :ids.size] = ids
    pad_mask = tokens == pad
    return Batch(tokens=tokens, targets=targets, pad_mask=pad_mask,
                 ciphers=ciphers, lengths=lengths)


def length_histogram(lengths: Iterable[int]) -> dict:
    """Count sequence lengths into the standard evaluation bins."""
    counts = dict.fromkeys(LENGTH_BIN_LABELS, 0)
    for n in lengths:
        counts[length_bin(int(n))] += 1
    return counts


def length_bin(n: int) -> str:
    """Bin label for a sequence length; bins are half-open [lo, hi)."""
    for edge, label in zip(LENGTH_BIN_EDGES, LENGTH_BIN_LABELS):
        if n < edge:
            return label
    return LENGTH_BIN_LABELS[-1]


def load_lines(path: str) -> list:
    """Read raw records from a .txt (line per record) or .jsonl file.

    JSONL rows look like {"text": ..., "lang": ...}; lang is optional.
    Returns (text, lang) tuples for jsonl and plain strings for txt.
    """
    if str(path).endswith(".jsonl"):
        rows = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                rows.append((obj["text"], obj.get("lang")))
        return rows
    with open(path, encoding="utf-8") as fh:
        return [ln.rstrip("\n") for ln in fh]


def ingest(path: str, mode: str = "quotes", target_len: int = SEGMENT_TARGET_LEN,
           min_len: int = MIN_QUOTE_LEN, max_len: int = MAX_QUOTE_LEN) -> tuple:
    """Load and clean a corpus file; returns (records, report).

    mode "quotes" cleans line-per-record corpora with the 15-300 length
    filter; mode "segments" builds >=target_len segments from running text.
    """
    raw = load_lines(path)
    report: dict = {"path": str(path), "mode": mode}
    if mode == "quotes":
        lines = [r[0] if isinstance(r, tuple) else r for r in raw]
        records = clean_corpus(lines, min_len=min_len, max_len=max_len,
                               report=report)
    elif mode == "segments":
        rows = [TextRecord(text=t, length=len(t), language=lang)
                for (t, lang) in ((r if isinstance(r, tuple) else (r, None))
                                  for r in raw)]
        records = build_segments(rows, target_len=target_len)
        report["input_lines"] = len(raw)
        report["kept"] = len(records)
        report["dropped"] = {}
        report["length_histogram"] = length_histogram(r.length for r in records)
        if not records:
            raise ValueError("corpus is empty after segment construction")
    else:
        raise ValueError(f"unknown ingest mode {mode!r}")
    return records, report
