"""Evaluation and interpretability tooling.

Everything a trained checkpoint gets subjected to: length-binned SER
reports, early-exit decoding per layer, activation probes, n-gram cosine
similarity, row-normalized attention export, key recovery from the
bijective head, a per-letter error profile against empirical English
letter frequencies, a frequency-rank decryption baseline, and a
throughput benchmark.
"""

from __future__ import annotations

import csv
import importlib.resources
import json
import math
import platform
import time
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch

from .ciphers import (
    DEFAULT_ALPHABET,
    LETTERS,
    N_LETTERS,
    CipherMapping,
    rng_for,
    sample_cipher,
    substitute,
    symbol_error_rate,
)
from .corpus import LENGTH_BIN_LABELS, TextRecord, length_bin, tokenize
from .model.heads import BijectiveHead, hard_assignment
from .training import bootstrap_ser

AGG_LOW = "<128"       # lengths below 128
AGG_HIGH = ">=128"     # lengths 128 and up (half-open bins, same boundary)


# ---------------------------------------------------------------------------
# decoding helpers

def pack_strings(texts: Sequence[str], alphabet=DEFAULT_ALPHABET):
    """Encode strings into a pad-suffixed token matrix plus pad mask."""
    lengths = [len(t) for t in texts]
    if not texts or min(lengths) == 0:
        raise ValueError("cannot pack empty input")
    width = max(lengths)
    tokens = np.full((len(texts), width), alphabet.pad_id, dtype=np.int64)
    for i, t in enumerate(texts):
        tokens[i, :len(t)] = alphabet.encode(t)
    tok = torch.from_numpy(tokens)
    return tok, tok == alphabet.pad_id, lengths


@torch.no_grad()
def decode_strings(model, texts: Sequence[str], batch_size: int = 96,
                   layer: Optional[int] = None) -> list:
    """Decode ciphertext strings; optionally early-exit at a given layer."""
    model.eval()
    out = []
    for lo in range(0, len(texts), batch_size):
        chunk = texts[lo:lo + batch_size]
        tok, pad, lengths = pack_strings(chunk)
        if layer is None:
            ids = model.decode(tok, pad)
        else:
            ids = model.decode_at_layer(tok, pad, layer)
        out.extend(DEFAULT_ALPHABET.decode(ids[i, :n].numpy())
                   for i, n in enumerate(lengths))
    return out


def encrypt_records(records: Sequence[TextRecord], cipher_seed: int):
    """Fresh cipher per record; returns (ciphertexts, plaintexts, ciphers)."""
    rng = rng_for(cipher_seed, "eval-cipher")
    ciphers = [sample_cipher(rng) for _ in records]
    plain = [r.text for r in records]
    cipher_texts = [
        DEFAULT_ALPHABET.decode(substitute(tokenize(t), f))
        for t, f in zip(plain, ciphers)
    ]
    return cipher_texts, plain, ciphers


# ---------------------------------------------------------------------------
# evaluation report

@dataclass
class EvalReport:
    """Length-binned SER summary over one evaluation pass.

    rows: one dict per sequence (length, bin, ser, n_errors). bins: per-bin
    median SER with the 16th-84th percentile band. aggregates: mean SER with
    Bayesian-bootstrap std for the short (<128) and long (>=128) halves.
    error_histograms: per bin, a mapping n_errors -> sequence count.
    """

    rows: list
    bins: dict
    aggregates: dict
    error_histograms: dict
    n_sequences: int = 0

    def to_json(self) -> str:
        return json.dumps({
            "n_sequences": self.n_sequences,
            "bins": self.bins,
            "aggregates": self.aggregates,
            "error_histograms": {k: dict(sorted(v.items()))
                                 for k, v in self.error_histograms.items()},
        }, indent=1)

    def write_rows_csv(self, path) -> None:
        """Tidy long-format per-sequence table for external plotting."""
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["length", "bin", "ser", "n_errors"])
            w.writeheader()
            w.writerows(self.rows)


def score_pairs(decoded: Sequence[str], truth: Sequence[str]) -> list:
    """Per-sequence rows of length, bin label, SER, and absolute error count."""
    rows = []
    for d, t in zip(decoded, truth):
        ser = symbol_error_rate(d, t)
        rows.append({"length": len(t), "bin": length_bin(len(t)),
                     "ser": ser, "n_errors": int(round(ser * len(t)))})
    return rows


def build_report(rows: list, bootstrap_seed: int = 0) -> EvalReport:
    bins = {}
    error_histograms = {}
    for label in LENGTH_BIN_LABELS:
        sers = np.array([r["ser"] for r in rows if r["bin"] == label])
        error_histograms[label] = dict(
            Counter(r["n_errors"] for r in rows if r["bin"] == label))
        if sers.size:
            bins[label] = {
                "count": int(sers.size),
                "median_ser": float(np.median(sers)),
                "p16": float(np.percentile(sers, 16)),
                "p84": float(np.percentile(sers, 84)),
            }
        else:
            bins[label] = {"count": 0, "median_ser": None, "p16": None, "p84": None}
    aggregates = {}
    for label, keep in ((AGG_LOW, lambda r: r["length"] < 128),
                        (AGG_HIGH, lambda r: r["length"] >= 128)):
        sers = [r["ser"] for r in rows if keep(r)]
        if sers:
            mean, std = bootstrap_ser(sers, rng=rng_for(bootstrap_seed, "boot", label))
            aggregates[label] = {"count": len(sers), "mean_ser": mean,
                                 "bootstrap_std": std}
        else:
            aggregates[label] = {"count": 0, "mean_ser": None, "bootstrap_std": None}
    return EvalReport(rows=rows, bins=bins, aggregates=aggregates,
                      error_histograms=error_histograms, n_sequences=len(rows))


def evaluate(model, test_records: Sequence[TextRecord], cipher_seed: int = 0,
             batch_size: int = 96) -> EvalReport:
    """Encrypt each record under a fresh cipher, decode, and bin the SERs."""
    cipher_texts, plain, _ = encrypt_records(test_records, cipher_seed)
    decoded = decode_strings(model, cipher_texts, batch_size=batch_size)
    return build_report(score_pairs(decoded, plain), bootstrap_seed=cipher_seed)


# ---------------------------------------------------------------------------
# early exit

def early_exit(model, ciphertext: str, layer: int) -> str:
    """Decode one ciphertext from the activations after ``layer`` blocks.

    The model's own closing pipeline (final norm, pooling, head) is applied,
    so layer = n_layers reproduces the standard output exactly.
    """
    return decode_strings(model, [ciphertext], layer=layer)[0]


def layer_decodings(model, ciphertext: str) -> list:
    """Per-layer decodings with change flags against the previous layer.

    Returns rows {layer, text, changed} where changed marks positions that
    differ from the preceding layer's decoding (empty for layer 0).
    """
    n_layers = model.cfg.n_layers
    rows = []
    previous = None
    for layer in range(n_layers + 1):
        text = early_exit(model, ciphertext, layer)
        changed = ("" if previous is None else
                   "".join("^" if a != b else " " for a, b in zip(text, previous)))
        rows.append({"layer": layer, "text": text, "changed": changed})
        previous = text
    return rows


def early_exit_report(model, test_records: Sequence[TextRecord],
                      cipher_seed: int = 0, batch_size: int = 96) -> list:
    """Mean SER per exit layer over the whole test set."""
    cipher_texts, plain, _ = encrypt_records(test_records, cipher_seed)
    out = []
    for layer in range(model.cfg.n_layers + 1):
        decoded = decode_strings(model, cipher_texts, batch_size=batch_size,
                                 layer=layer)
        sers = [symbol_error_rate(d, t) for d, t in zip(decoded, plain)]
        out.append({"layer": layer, "mean_ser": float(np.mean(sers))})
    return out


# ---------------------------------------------------------------------------
# probes

@dataclass(frozen=True)
class ProbeSpec:
    """Auxiliary classifier over raw per-position activations of one layer.

    Probes read hidden states before the final RMSNorm and without pooling.
    Defaults follow the harness recipe: 5K steps, batch 96, lr 1e-3, AdamW.
    """

    kind: str = "linear"            # linear | mlp
    layer_index: int = 0
    hidden_dim: Optional[int] = None  # mlp only; defaults to d_model
    steps: int = 5000
    batch_size: int = 96
    lr: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("linear", "mlp"):
            raise ValueError(f"unknown probe kind {self.kind!r}")


def make_probe(spec: ProbeSpec, d_model: int, vocab_size: int) -> torch.nn.Module:
    if spec.kind == "linear":
        return torch.nn.Linear(d_model, vocab_size)
    hidden = spec.hidden_dim or d_model
    return torch.nn.Sequential(
        torch.nn.Linear(d_model, hidden),
        torch.nn.ReLU(),
        torch.nn.Linear(hidden, vocab_size),
    )


def _probe_batch(model, records, spec: ProbeSpec, seed: int, step: int):
    """Fresh encrypted batch plus frozen activations at the probed layer."""
    from .corpus import make_batch

    rng = rng_for(seed, "probe-data", spec.layer_index, step)
    idx = rng.integers(0, len(records), size=spec.batch_size)
    recs = [records[int(i)] for i in idx]
    batch = make_batch(recs, rng_for(seed, "probe-cipher", spec.layer_index, step),
                       batch_size=spec.batch_size,
                       max_len=model.cfg.context_len)
    tokens = torch.from_numpy(batch.tokens)
    pad = torch.from_numpy(batch.pad_mask)
    with torch.no_grad():
        hs = model.encoder(tokens, pad)
    acts = hs.layers[spec.layer_index]
    return acts, torch.from_numpy(batch.targets), pad


def train_probe(model, spec: ProbeSpec, records: Sequence[TextRecord],
                seed: int = 0, log_every: int = 0) -> torch.nn.Module:
    """Fit a probe on a frozen checkpoint; returns the trained probe."""
    if not 0 <= spec.layer_index <= model.cfg.n_layers:
        raise ValueError(f"layer {spec.layer_index} outside model depth")
    probe = make_probe(spec, model.cfg.d_model, model.cfg.vocab_size)
    opt = torch.optim.AdamW(probe.parameters(), lr=spec.lr, weight_decay=0.0)
    model.eval()
    for step in range(1, spec.steps + 1):
        acts, targets, pad = _probe_batch(model, records, spec, seed, step)
        logits = probe(acts)
        keep = ~pad.reshape(-1)
        ce = torch.nn.functional.cross_entropy(
            logits.reshape(-1, logits.size(-1))[keep], targets.reshape(-1)[keep])
        opt.zero_grad(set_to_none=True)
        ce.backward()
        opt.step()
        if log_every and step % log_every == 0:
            print(f"probe layer {spec.layer_index} step {step} ce {ce:.4f}",
                  flush=True)
    return probe


@torch.no_grad()
def probe_decode(model, probe, layer: int, texts: Sequence[str],
                 batch_size: int = 96) -> list:
    """Position-wise argmax decodings from a probe (no pooling)."""
    model.eval()
    out = []
    for lo in range(0, len(texts), batch_size):
        chunk = texts[lo:lo + batch_size]
        tok, pad, lengths = pack_strings(chunk)
        hs = model.encoder(tok, pad)
        pred = probe(hs.layers[layer]).argmax(dim=-1)
        out.extend(DEFAULT_ALPHABET.decode(pred[i, :n].numpy())
                   for i, n in enumerate(lengths))
    return out


# ---------------------------------------------------------------------------
# n-gram similarity

def ngram_counts(text: str, n: int) -> Counter:
    return Counter(text[i:i + n] for i in range(len(text) - n + 1))


def ngram_cosine(text_a: str, text_b: str, n: int) -> float:
    """Cosine similarity between the two texts' n-gram count vectors.

    Spaces and punctuation count as ordinary characters. Texts shorter than
    n have an empty count vector: the similarity is 0 with a warning.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(text_a) < n or len(text_b) < n:
        warnings.warn(f"text shorter than n={n}; similarity defined as 0")
        return 0.0
    ca = ngram_counts(text_a, n)
    cb = ngram_counts(text_b, n)
    dot = sum(c * cb[g] for g, c in ca.items())
    na = math.sqrt(sum(c * c for c in ca.values()))
    nb = math.sqrt(sum(c * c for c in cb.values()))
    return dot / (na * nb)


def corpus_ngram_cosine(texts_a: Sequence[str], texts_b: Sequence[str],
                        n: int) -> float:
    """Cosine over count vectors summed per record (no cross-record n-grams)."""
    ca: Counter = Counter()
    cb: Counter = Counter()
    for t in texts_a:
        ca.update(ngram_counts(t, n))
    for t in texts_b:
        cb.update(ngram_counts(t, n))
    if not ca or not cb:
        warnings.warn(f"all texts shorter than n={n}; similarity defined as 0")
        return 0.0
    dot = sum(c * cb[g] for g, c in ca.items())
    na = math.sqrt(sum(c * c for c in ca.values()))
    nb = math.sqrt(sum(c * c for c in cb.values()))
    return dot / (na * nb)


def probe_similarity_matrix(model, probes: dict, test_records,
                            cipher_seed: int = 0, n_range=range(1, 9),
                            batch_size: int = 96) -> dict:
    """N-gram similarity of per-layer probe decodings against the plaintext.

    probes maps layer index -> trained probe. Returns {"layers", "n_values",
    "similarity" [L x N], "deltas" [L-1 x N]} (first differences between
    consecutive probed layers, the per-layer n-gram focus).
    """
    cipher_texts, plain, _ = encrypt_records(test_records, cipher_seed)
    layers = sorted(probes)
    n_values = list(n_range)
    sim = np.zeros((len(layers), len(n_values)))
    for i, layer in enumerate(layers):
        decoded = probe_decode(model, probes[layer], layer, cipher_texts,
                               batch_size=batch_size)
        for j, n in enumerate(n_values):
            sim[i, j] = corpus_ngram_cosine(decoded, plain, n)
    return {"layers": layers, "n_values": n_values, "similarity": sim,
            "deltas": np.diff(sim, axis=0)}


def write_similarity_csv(result: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layer"] + [f"n{n}" for n in result["n_values"]])
        for layer, row in zip(result["layers"], result["similarity"]):
            w.writerow([layer] + [f"{v:.6f}" for v in row])


# ---------------------------------------------------------------------------
# letter-frequency tooling

def load_letter_frequencies(path=None) -> np.ndarray:
    """Empirical English letter frequencies, index 0 = A, normalized to sum 1."""
    if path is None:
        ref = importlib.resources.files("cryptogram.data").joinpath(
            "english_letter_frequencies.csv")
        text = ref.read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    freq = np.zeros(N_LETTERS)
    for row in csv.DictReader(ln for ln in text.splitlines()
                              if ln and not ln.startswith("#")):
        freq[LETTERS.index(row["letter"].upper())] = float(row["frequency_percent"])
    if freq.sum() <= 0:
        raise ValueError("frequency table is empty")
    return freq / freq.sum()


def per_letter_ser(decoded: Sequence[str], truth: Sequence[str]) -> tuple:
    """(ser[26], counts[26]): per plaintext letter, error rate and support."""
    errors = np.zeros(N_LETTERS)
    counts = np.zeros(N_LETTERS)
    for d, t in zip(decoded, truth):
        for cd, ct in zip(d, t):
            i = LETTERS.find(ct)
            if i >= 0:
                counts[i] += 1
                errors[i] += cd != ct
    ser = np.divide(errors, counts, out=np.zeros(N_LETTERS),
                    where=counts > 0)
    return ser, counts


def letter_error_profile(decoded: Sequence[str], truth: Sequence[str],
                         freq: Optional[np.ndarray] = None) -> dict:
    """Per-letter error relative to the expectation from letter frequency.

    weighted = ser * freq, normalized to sum 1, minus freq. Uniform per-letter
    SER gives an identically zero profile. A perfect decode makes the
    normalization degenerate; zeros are returned with degenerate=True.
    """
    if freq is None:
        freq = load_letter_frequencies()
    ser, counts = per_letter_ser(decoded, truth)
    weighted = ser * freq
    total = weighted.sum()
    if total == 0:
        return {"profile": np.zeros(N_LETTERS), "ser": ser, "counts": counts,
                "freq": freq, "degenerate": True}
    return {"profile": weighted / total - freq, "ser": ser, "counts": counts,
            "freq": freq, "degenerate": False}


def letter_error_profile_for_model(model, test_records, cipher_seed: int = 0,
                                   freq: Optional[np.ndarray] = None,
                                   batch_size: int = 96) -> dict:
    cipher_texts, plain, _ = encrypt_records(test_records, cipher_seed)
    decoded = decode_strings(model, cipher_texts, batch_size=batch_size)
    return letter_error_profile(decoded, plain, freq)


def write_profile_csv(result: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["letter", "frequency", "ser", "count", "relative_error"])
        for i, ch in enumerate(LETTERS):
            w.writerow([ch, f"{result['freq'][i]:.6f}", f"{result['ser'][i]:.6f}",
                        int(result["counts"][i]), f"{result['profile'][i]:.6f}"])


def frequency_rank_baseline(ciphertext: str,
                            freq: Optional[np.ndarray] = None) -> str:
    """Classical baseline: match ciphertext letter ranks to English ranks.

    Ciphertext letters are ranked by observed count (ties alphabetical) and
    mapped to alphabet letters ranked by empirical frequency. Letters absent
    from the ciphertext fill the remaining ranks alphabetically; passthrough
    symbols are copied.
    """
    if freq is None:
        freq = load_letter_frequencies()
    counts = np.zeros(N_LETTERS)
    for ch in ciphertext:
        i = LETTERS.find(ch)
        if i >= 0:
            counts[i] += 1
    # argsort on (-count, letter index): stable alphabetical tie-break
    cipher_rank = np.lexsort((np.arange(N_LETTERS), -counts))
    english_rank = np.lexsort((np.arange(N_LETTERS), -freq))
    mapping = np.empty(N_LETTERS, dtype=np.int64)
    mapping[cipher_rank] = english_rank
    table = {LETTERS[i]: LETTERS[mapping[i]] for i in range(N_LETTERS)}
    return "".join(table.get(ch, ch) for ch in ciphertext)


# ---------------------------------------------------------------------------
# attention export

@torch.no_grad()
def export_attention(model, ciphertext: str) -> np.ndarray:
    """Row-normalized self-attention maps, one per (layer, head).

    Returns [n_layers, n_heads, T, T]; each row sums to 1 (softmax rows).
    """
    model.eval()
    tok, pad, _ = pack_strings([ciphertext])
    hs = model.encoder(tok, pad, capture_attention=True)
    maps = torch.stack([w[0] for w in hs.attentions])   # [L, H, T, T]
    return maps.float().numpy()


def write_attention(maps: np.ndarray, path_prefix: str,
                    as_csv: bool = False) -> list:
    """Dump maps as one portable .npy (and optional per-map CSVs)."""
    paths = []
    npy_path = f"{path_prefix}.npy"
    np.save(npy_path, maps, allow_pickle=False)
    paths.append(npy_path)
    if as_csv:
        L, H = maps.shape[:2]
        for layer in range(L):
            for head in range(H):
                p = f"{path_prefix}_l{layer}_h{head}.csv"
                np.savetxt(p, maps[layer, head], delimiter=",", fmt="%.6e")
                paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# key recovery

@torch.no_grad()
def recover_key(model, ciphertext: str) -> dict:
    """Extract the decryption mapping the bijective head inferred.

    Returns {"key": CipherMapping (ciphertext letter -> plaintext letter),
    "scores": raw 26x26 score matrix, "unconstrained": letters absent from
    the ciphertext (their key entries are arbitrary up to bijectivity),
    "decoded": the model's decoded text}. Standard-head models are rejected.
    """
    if not isinstance(model.head, BijectiveHead):
        raise ValueError("key recovery requires a bijective-head checkpoint")
    model.eval()
    tok, pad, lengths = pack_strings([ciphertext])
    hs = model.encoder(tok, pad)
    X = model.head.score_matrix(hs.final, tok, pad)[0]
    perm = hard_assignment(X).argmax(axis=1)
    key = CipherMapping(perm.astype(np.int64))
    decoded, _ = model.head.decode(hs.final, tok, pad, return_permutations=True)
    present = {ch for ch in ciphertext if ch in LETTERS}
    return {
        "key": key,
        "scores": X.float().numpy(),
        "unconstrained": sorted(set(LETTERS) - present),
        "decoded": DEFAULT_ALPHABET.decode(decoded[0, :lengths[0]].numpy()),
    }


def write_key_matrix(scores: np.ndarray, path) -> None:
    """Labeled 26x26 score matrix (rows cipher, columns plain) for heatmaps."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cipher\\plain"] + list(LETTERS))
        for i, ch in enumerate(LETTERS):
            w.writerow([ch] + [f"{v:.6f}" for v in scores[i]])


# ---------------------------------------------------------------------------
# throughput

def hardware_string() -> str:
    name = platform.processor() or platform.machine()
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.lower().startswith("model name"):
                    name = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return f"{name} | {torch.get_num_threads()} torch threads | cpu"


@torch.no_grad()
def throughput_bench(model, n_sequences: int = 1000, length: int = 300,
                     repeats: int = 50, seed: int = 0,
                     batch_size: Optional[int] = None) -> dict:
    """Wall-clock decode throughput on synthetic ciphertexts.

    Default is single-stream (one sequence per forward pass); pass
    batch_size to measure the batched mode instead. The same sequence set
    is decoded on every repeat; letters/sec = n_sequences * length / mean
    seconds per repeat.
    """
    rng = rng_for(seed, "bench")
    # synthetic ciphertext with text-like symbol mix; content is irrelevant
    # to timing, only shapes matter
    letters = rng.integers(0, N_LETTERS, size=(n_sequences, length))
    spaces = rng.random((n_sequences, length)) < 0.18
    tokens = np.where(spaces, DEFAULT_ALPHABET.encode(" ")[0], letters)
    texts = [DEFAULT_ALPHABET.decode(row) for row in tokens]

    model.eval()
    chunk = 1 if batch_size is None else batch_size
    decode_strings(model, texts[:chunk], batch_size=chunk)  # warm-up
    seconds = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        decode_strings(model, texts, batch_size=chunk)
        seconds.append(time.perf_counter() - t0)
    seconds = np.array(seconds)
    total_letters = n_sequences * length
    lps = total_letters / seconds
    return {
        "letters_per_sec_mean": float(lps.mean()),
        "letters_per_sec_std": float(lps.std()),
        "seconds_mean": float(seconds.mean()),
        "seconds_std": float(seconds.std()),
        "relative_std": float(lps.std() / lps.mean()),
        "n_sequences": n_sequences,
        "length": length,
        "repeats": repeats,
        "mode": "single-stream" if batch_size is None else f"batched({batch_size})",
        "hardware": hardware_string(),
    }
