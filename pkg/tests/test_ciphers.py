"""Substitution ciphers, the alphabet, and symbol error rate."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from cryptogram.ciphers import (
    CIPHERTEXT,
    PLAINTEXT,
    DEFAULT_ALPHABET,
    LETTERS,
    N_LETTERS,
    PASSTHROUGH,
    CharSequence,
    CipherMapping,
    decrypt,
    encrypt,
    rng_for,
    sample_cipher,
    substitute,
    symbol_error_rate,
)

VALID_TEXT = st.text(alphabet=LETTERS + PASSTHROUGH, min_size=1, max_size=80)


# ---------------------------------------------------------------------------
# alphabet

def test_alphabet_layout():
    assert DEFAULT_ALPHABET.size == 37
    assert DEFAULT_ALPHABET.encode("A")[0] == 0
    assert DEFAULT_ALPHABET.encode("Z")[0] == 25
    assert DEFAULT_ALPHABET.encode(" ")[0] == 26
    assert DEFAULT_ALPHABET.pad_id == 36
    assert DEFAULT_ALPHABET.decode([36]) == "#"


def test_alphabet_rejects_out_of_vocab():
    for bad in ("a", "3", "é", "\n"):
        with pytest.raises(ValueError):
            DEFAULT_ALPHABET.encode(bad)


@given(VALID_TEXT)
def test_alphabet_round_trip(text):
    assert DEFAULT_ALPHABET.decode(DEFAULT_ALPHABET.encode(text)) == text


# ---------------------------------------------------------------------------
# cipher mappings

def test_identity_mapping_fixes_text():
    x = CharSequence.from_text("HELLO, WORLD!")
    assert encrypt(x, CipherMapping.identity()).to_text() == "HELLO, WORLD!"


def test_key_string_round_trip():
    key = "QWERTYUIOPASDFGHJKLZXCVBNM"
    assert CipherMapping.from_string(key).to_string() == key


def test_mapping_rejects_non_permutation():
    with pytest.raises(ValueError):
        CipherMapping(np.zeros(26, dtype=np.int64))
    with pytest.raises(ValueError):
        CipherMapping.from_string("A" * 26)
    with pytest.raises(ValueError):
        CipherMapping.from_string("ABC")


def test_invert_composes_to_identity():
    f = sample_cipher(7)
    assert CipherMapping(f.perm[f.invert().perm]) == CipherMapping.identity()
    assert f.invert().invert() == f


def test_mapping_hash_matches_equality():
    a, b = sample_cipher(3), sample_cipher(3)
    assert a == b and hash(a) == hash(b)
    assert a != sample_cipher(4)


# ---------------------------------------------------------------------------
# sampling

def test_sample_cipher_deterministic_per_seed():
    assert sample_cipher(0) == sample_cipher(0)
    seen = {sample_cipher(s) for s in range(64)}
    assert len(seen) == 64


def test_sample_cipher_accepts_generator():
    g = rng_for(5, "draws")
    a, b = sample_cipher(g), sample_cipher(g)
    assert a != b  # consumes the stream


def test_sample_cipher_uniform_position_marginals():
    # under a uniform distribution over permutations each image of 'A' is
    # equally likely; chi-square on 26 bins over many draws
    counts = np.zeros(N_LETTERS)
    n = 5200
    for s in range(n):
        counts[sample_cipher(s).perm[0]] += 1
    assert stats.chisquare(counts).pvalue > 1e-4


def test_sample_cipher_rarely_fixes_letters():
    # expected number of fixed points of a random permutation is 1
    fixed = np.mean([np.sum(sample_cipher(s).perm == np.arange(26))
                     for s in range(400)])
    assert 0.6 < fixed < 1.4


# ---------------------------------------------------------------------------
# substitution

def test_substitute_moves_letters_only():
    f = CipherMapping(np.roll(np.arange(26), -1))  # A->B, ..., Z->A
    out = substitute(DEFAULT_ALPHABET.encode("AB Z!"), f)
    assert DEFAULT_ALPHABET.decode(out) == "BC A!"


def test_substitute_rejects_padding():
    with pytest.raises(ValueError):
        substitute(np.array([0, 36]), CipherMapping.identity())


def test_encrypt_requires_plaintext_role():
    c = CharSequence.from_text("ABC", role=CIPHERTEXT)
    with pytest.raises(ValueError):
        encrypt(c, CipherMapping.identity())
    with pytest.raises(ValueError):
        decrypt(CharSequence.from_text("ABC"), CipherMapping.identity())


@settings(max_examples=60)
@given(VALID_TEXT, st.integers(0, 2**32 - 1))
def test_decrypt_inverts_encrypt(text, seed):
    f = sample_cipher(seed)
    x = CharSequence.from_text(text)
    c = encrypt(x, f)
    assert c.role == CIPHERTEXT
    assert decrypt(c, f).to_text() == text


@settings(max_examples=60)
@given(VALID_TEXT, st.integers(0, 2**32 - 1))
def test_encrypt_preserves_non_letters(text, seed):
    c = encrypt(CharSequence.from_text(text), sample_cipher(seed)).to_text()
    for got, want in zip(c, text):
        if want in PASSTHROUGH:
            assert got == want
        else:
            assert got in LETTERS


def test_worked_example_round_trip():
    # a known plaintext/ciphertext pair under a fully specified key
    key = "DBTKFICERGAHQJNMOLVSPZYUWX"
    plain = ("IN LIFE, WE MAKE THE BEST DECISIONS WE CAN WITH THE "
             "INFORMATION WE HAVE ON HAND.")
    cipher = ("RJ HRIF, YF QDAF SEF BFVS KFTRVRNJV YF TDJ YRSE SEF "
              "RJINLQDSRNJ YF EDZF NJ EDJK.")
    f = CipherMapping.from_string(key)
    assert encrypt(CharSequence.from_text(plain), f).to_text() == cipher
    assert decrypt(CharSequence.from_text(cipher, role=CIPHERTEXT),
                   f).to_text() == plain


# ---------------------------------------------------------------------------
# symbol error rate

def test_ser_counts_all_symbol_classes():
    assert symbol_error_rate("ABCD", "ABCD") == 0.0
    assert symbol_error_rate("ABCD", "EFGH") == 1.0
    assert symbol_error_rate("AB C", "AB D") == pytest.approx(0.25)
    # spaces and punctuation are scored, not skipped
    assert symbol_error_rate("A B", "A.B") == pytest.approx(1 / 3)
    assert symbol_error_rate("A!", "A?") == pytest.approx(0.5)


def test_ser_input_kinds_agree():
    a, b = "HELLO WORLD.", "JELLO WORLD!"
    want = symbol_error_rate(a, b)
    assert symbol_error_rate(CharSequence.from_text(a),
                             CharSequence.from_text(b)) == want
    assert symbol_error_rate(DEFAULT_ALPHABET.encode(a),
                             DEFAULT_ALPHABET.encode(b)) == want


def test_ser_rejects_bad_shapes():
    with pytest.raises(ValueError):
        symbol_error_rate("AB", "ABC")
    with pytest.raises(ValueError):
        symbol_error_rate("", "")


@given(VALID_TEXT)
def test_ser_identity_is_zero(text):
    assert symbol_error_rate(text, text) == 0.0


@settings(max_examples=40)
@given(VALID_TEXT, st.integers(0, 2**32 - 1))
def test_ser_symmetric(text, seed):
    other = encrypt(CharSequence.from_text(text), sample_cipher(seed)).to_text()
    assert symbol_error_rate(text, other) == symbol_error_rate(other, text)


# ---------------------------------------------------------------------------
# seeded stream derivation

def test_rng_for_is_deterministic_and_keyed():
    assert (rng_for(0, "x", 1).integers(1 << 30)
            == rng_for(0, "x", 1).integers(1 << 30))
    draws = {rng_for(0, tag, step).integers(1 << 30)
             for tag in ("a", "b") for step in (0, 1)}
    assert len(draws) == 4
    assert (rng_for(0, "a", "b").integers(1 << 30)
            != rng_for(0, "b", "a").integers(1 << 30))
