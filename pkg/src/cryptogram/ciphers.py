"""Alphabet, substitution ciphers, and the symbol error rate metric.

The alphabet is the 26 uppercase letters plus a fixed set of passthrough
symbols (space and punctuation) that are never encrypted, plus one padding
symbol used only for batching. A cipher is a permutation of the 26 letters;
spaces and punctuation always map to themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
PASSTHROUGH = " .,'\"!?;:-"
PAD_CHAR = "#"

N_LETTERS = 26

PLAINTEXT = "plaintext"
CIPHERTEXT = "ciphertext"
PREDICTION = "prediction"


def rng_for(seed: int, *path) -> np.random.Generator:
    """Derive an independent, reproducible RNG from a base seed and a path.

    Streams are keyed by ``(seed, *path)`` through numpy's SeedSequence, so
    the same key always yields the same stream on any machine. Path entries
    may be ints or short strings (strings are hashed to ints).
    """
    entropy = [int(seed) & 0xFFFFFFFF]
    for part in path:
        if isinstance(part, str):
            h = 2166136261
            for ch in part.encode():
                h = ((h ^ ch) * 16777619) & 0xFFFFFFFF
            entropy.append(h)
        else:
            entropy.append(int(part) & 0xFFFFFFFFFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(entropy))


class Alphabet:
    """Symbol table mapping characters to dense integer ids.

    Ids are assigned in a fixed order: letters A-Z get 0..25, passthrough
    symbols follow, and the padding symbol takes the last id. The default
    instance is shared; construct your own only to change the passthrough set.
    """

    def __init__(self, letters: str = LETTERS, passthrough: str = PASSTHROUGH,
                 pad: str = PAD_CHAR):
        if len(set(letters)) != N_LETTERS:
            raise ValueError("alphabet requires exactly 26 distinct letters")
        if set(letters) & set(passthrough):
            raise ValueError("passthrough symbols must be disjoint from letters")
        if pad in letters or pad in passthrough:
            raise ValueError("pad symbol must not collide with the alphabet")
        self.letters = letters
        self.passthrough = passthrough
        self.pad = pad
        self._chars = letters + passthrough + pad
        self._ids = {c: i for i, c in enumerate(self._chars)}

    @property
    def size(self) -> int:
        return len(self._chars)

    @property
    def pad_id(self) -> int:
        return len(self._chars) - 1

    def __contains__(self, char: str) -> bool:
        return char in self._ids

    def is_letter_id(self, i: int) -> bool:
        return 0 <= i < N_LETTERS

    def encode(self, text: str) -> np.ndarray:
        """Map a string to an int64 id array. Raises on unknown characters."""
        try:
            return np.fromiter((self._ids[c] for c in text), dtype=np.int64,
                               count=len(text))
        except KeyError as e:
            raise ValueError(f"character {e.args[0]!r} is not in the alphabet") from None

    def decode(self, ids) -> str:
        return "".join(self._chars[int(i)] for i in ids)

    def valid_chars(self) -> str:
        """All non-pad characters, letters first."""
        return self.letters + self.passthrough


DEFAULT_ALPHABET = Alphabet()


@dataclass(frozen=True)
class CipherMapping:
    """A bijection over the 26 letters; ``perm[i]`` is the image of letter i."""

    perm: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(N_LETTERS)):
            raise ValueError("cipher mapping must be a permutation of 0..25")
        perm.setflags(write=False)
        object.__setattr__(self, "perm", perm)

    @classmethod
    def identity(cls) -> "CipherMapping":
        return cls(np.arange(N_LETTERS))

    @classmethod
    def from_string(cls, key: str) -> "CipherMapping":
        """Parse a 26-character key giving the images of A..Z in order."""
        if len(key) != N_LETTERS:
            raise ValueError("cipher key must be exactly 26 characters")
        return cls(DEFAULT_ALPHABET.encode(key.upper()))

    def to_string(self) -> str:
        return DEFAULT_ALPHABET.decode(self.perm)

    def invert(self) -> "CipherMapping":
        inv = np.empty(N_LETTERS, dtype=np.int64)
        inv[self.perm] = np.arange(N_LETTERS)
        return CipherMapping(inv)

    def __eq__(self, other) -> bool:
        return isinstance(other, CipherMapping) and bool(
            np.array_equal(self.perm, other.perm))

    def __hash__(self) -> int:
        return hash(self.perm.tobytes())


@dataclass(frozen=True)
class CharSequence:
    """A sequence of symbol ids with a role tag (plaintext/ciphertext/prediction)."""

    symbols: np.ndarray
    role: str = PLAINTEXT
    alphabet: Alphabet = field(default=DEFAULT_ALPHABET, repr=False)

    def __post_init__(self):
        symbols = np.asarray(self.symbols, dtype=np.int64)
        if symbols.size and (symbols.min() < 0 or symbols.max() >= self.alphabet.size):
            raise ValueError("symbol id outside the alphabet")
        symbols.setflags(write=False)
        object.__setattr__(self, "symbols", symbols)

    @classmethod
    def from_text(cls, text: str, role: str = PLAINTEXT,
                  alphabet: Alphabet = DEFAULT_ALPHABET) -> "CharSequence":
        return cls(alphabet.encode(text), role, alphabet)

    def to_text(self) -> str:
        return self.alphabet.decode(self.symbols)

    def __len__(self) -> int:
        return int(self.symbols.size)


def sample_cipher(seed) -> CipherMapping:
    """Draw a cipher uniformly from all 26! permutations.

    Seeded Fisher-Yates over PCG64: the same seed yields the same cipher on
    every platform. ``seed`` may be an int or a numpy Generator (the identity
    permutation is a legal, if astronomically unlikely, draw).
    """
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed)
    perm = np.arange(N_LETTERS)
    for i in range(N_LETTERS - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return CipherMapping(perm)


def substitute(ids: np.ndarray, mapping: CipherMapping,
               alphabet: Alphabet = DEFAULT_ALPHABET) -> np.ndarray:
    """Map letter ids through ``mapping.perm``; other ids pass through unchanged.

    Rejects pad ids: padding is a batching artifact, not text.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= alphabet.size):
        raise ValueError("symbol id outside the alphabet")
    if np.any(ids == alphabet.pad_id):
        raise ValueError("cannot substitute a sequence containing padding")
    out = ids.copy()
    letters = ids < N_LETTERS
    out[letters] = mapping.perm[ids[letters]]
    return out


def encrypt(x: CharSequence, f: CipherMapping) -> CharSequence:
    """Encrypt plaintext: ciphertext[i] = f(x[i]) for letters, identity otherwise."""
    if x.role != PLAINTEXT:
        raise ValueError(f"encrypt expects plaintext input, got role {x.role!r}")
    return CharSequence(substitute(x.symbols, f, x.alphabet), CIPHERTEXT, x.alphabet)


def decrypt(c: CharSequence, f: CipherMapping) -> CharSequence:
    """Decrypt ciphertext produced by ``f`` by applying its inverse."""
    if c.role != CIPHERTEXT:
        raise ValueError(f"decrypt expects ciphertext input, got role {c.role!r}")
    return CharSequence(substitute(c.symbols, f.invert(), c.alphabet), PLAINTEXT,
                        c.alphabet)


def symbol_error_rate(pred, truth) -> float:
    """Fraction of positions where the two sequences disagree.

    Letters, spaces, and punctuation all count. Accepts strings, CharSequence,
    or id arrays; the inputs must have equal length (strip padding first).
    """
    a = _as_comparable(pred)
    b = _as_comparable(truth)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("cannot score empty sequences")
    return float(np.mean(a != b))


def _as_comparable(seq) -> np.ndarray:
    if isinstance(seq, CharSequence):
        return seq.symbols
    if isinstance(seq, str):
        return np.frombuffer(seq.encode("utf-32-le"), dtype=np.uint32)
    return np.asarray(seq)
