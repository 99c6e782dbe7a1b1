"""Corpus cleaning, segmentation, splits, and batch construction."""

import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cryptogram.ciphers import LETTERS, PASSTHROUGH, rng_for, sample_cipher
from cryptogram.corpus import (
    LENGTH_BIN_LABELS,
    MAX_QUOTE_LEN,
    MIN_QUOTE_LEN,
    TextRecord,
    build_segments,
    clean_corpus,
    clean_line,
    detokenize,
    ingest,
    length_bin,
    length_histogram,
    load_lines,
    make_batch,
    normalize_spacing,
    split_records,
    strip_accents,
    tokenize,
)


def test_tokenize_round_trip():
    text = "HELLO, WORLD! IT'S ME."
    assert detokenize(tokenize(text)) == text


def test_strip_accents():
    assert strip_accents("CAFÉ ÜBER NIÑO À LA FAÇON") == "CAFE UBER NINO A LA FACON"
    assert strip_accents("PLAIN") == "PLAIN"


def test_normalize_spacing_collapses_whitespace():
    assert normalize_spacing("A   B\t C\nD") == "A B C D"
    assert normalize_spacing("  PADDED  ") == "PADDED"


def test_normalize_spacing_punctuation_rules():
    assert normalize_spacing("HELLO , WORLD") == "HELLO, WORLD"
    assert normalize_spacing("HELLO,WORLD") == "HELLO, WORLD"
    assert normalize_spacing("WAIT !? REALLY") == "WAIT!? REALLY"
    assert normalize_spacing("THE END.") == "THE END."
    assert normalize_spacing("A: B; C") == "A: B; C"
    # no space is forced between punctuation and a closing quote
    assert normalize_spacing('SAY "HI." NOW') == 'SAY "HI." NOW'


@given(st.text(alphabet=LETTERS + PASSTHROUGH, max_size=60))
def test_normalize_spacing_idempotent(text):
    once = normalize_spacing(text)
    assert normalize_spacing(once) == once


def test_clean_line():
    assert clean_line("hello ,world") == "HELLO, WORLD"
    assert clean_line("DIGITS 123") is None
    assert clean_line("CRÈME") is None  # accents are not repaired here
    assert clean_line("   ") is None


def test_clean_corpus_report_and_filters():
    lines = ["ok but far too short", "x" * 301, "", "good line number 99",
             "THIS LINE IS LONG ENOUGH TO KEEP, HONEST."]
    report = {}
    records = clean_corpus(lines, report=report)
    assert [r.text for r in records] == ["OK BUT FAR TOO SHORT",
                                         "THIS LINE IS LONG ENOUGH TO KEEP, HONEST."]
    assert report["input_lines"] == 5
    assert report["kept"] == 2
    assert report["dropped"] == {"empty": 1, "out_of_vocabulary": 1,
                                 "too_short": 0, "too_long": 1}


def test_clean_corpus_raises_when_nothing_survives():
    with pytest.raises(ValueError):
        clean_corpus(["123", ""])


def test_build_segments_properties():
    words = ["WORD" + c for c in LETTERS]  # 5-char words
    text = " ".join(words * 10)
    segments = build_segments([text], target_len=40)
    assert segments, "expected at least one segment"
    for seg in segments:
        assert seg.length >= 40
        # a word is never split across segments
        for w in seg.text.split():
            assert w in words
    # trailing under-length buffer is discarded, so total coverage is partial
    total = sum(s.length for s in segments)
    assert total <= len(text)


def test_build_segments_strips_accents_and_skips_oov():
    segs = build_segments([TextRecord.make("CAFÉ NOIR ET 123 CHAUD " * 8,
                                           language="fr")], target_len=30)
    assert segs
    assert segs[0].language == "fr"
    assert "CAFE" in segs[0].text
    assert "123" not in segs[0].text


def test_build_segments_per_language_cap():
    text = " ".join(["WORD"] * 500)
    segs = build_segments([text], target_len=20, max_per_language=3)
    assert len(segs) == 3


def test_split_records_partition(fixture_records):
    train, test = split_records(fixture_records, seed=0)
    assert len(train) + len(test) == len(fixture_records)
    assert {r.text for r in train}.isdisjoint({r.text for r in test})
    assert all(r.split == "train" for r in train)
    assert all(r.split == "test" for r in test)
    # deterministic
    train2, test2 = split_records(fixture_records, seed=0)
    assert [r.text for r in test2] == [r.text for r in test]
    assert [r.text for r in split_records(fixture_records, seed=1)[1]] \
        != [r.text for r in test]


def test_split_records_fraction():
    records = [TextRecord.make(f"RECORD NUMBER {'X' * i}") for i in range(200)]
    train, test = split_records(records, train_frac=0.9, seed=3)
    assert len(train) == 180 and len(test) == 20


def test_make_batch_layout():
    records = [TextRecord.make("SHORT ONE."), TextRecord.make("A MUCH LONGER RECORD!")]
    batch = make_batch(records, rng_for(0, "batch"))
    width = max(r.length for r in records)
    assert batch.tokens.shape == batch.targets.shape == (2, width)
    assert len(batch) == 2
    assert batch.lengths.tolist() == [10, 21]
    # pad is a suffix: mask True exactly beyond each row's true length
    for i, rec in enumerate(records):
        assert not batch.pad_mask[i, :rec.length].any()
        assert batch.pad_mask[i, rec.length:].all()
        assert detokenize(batch.targets[i, :rec.length]) == rec.text


def test_make_batch_encrypts_per_row():
    records = [TextRecord.make("THE SAME TEXT EACH ROW.")] * 4
    batch = make_batch(records, rng_for(9, "batch"))
    assert len({c.to_string() for c in batch.ciphers}) > 1
    for i, f in enumerate(batch.ciphers):
        n = records[i].length
        want = tokenize(records[i].text)
        got = batch.tokens[i, :n]
        # ciphertext ids decrypt back to the plaintext targets
        letters = want < 26
        assert np.array_equal(got[letters], f.perm[want[letters]])
        assert np.array_equal(got[~letters], want[~letters])


def test_make_batch_accepts_seed_iterable():
    records = [TextRecord.make("SOME TEXT HERE."), TextRecord.make("MORE TEXT.")]
    a = make_batch(records, [5, 6])
    b = make_batch(records, [sample_cipher(5), sample_cipher(6)])
    assert np.array_equal(a.tokens, b.tokens)


def test_make_batch_rejects_overlong_and_empty():
    with pytest.raises(ValueError):
        make_batch([TextRecord.make("X" * 40)], rng_for(0), max_len=30)
    with pytest.raises(ValueError):
        make_batch([], rng_for(0))


def test_length_bins_half_open():
    assert length_bin(31) == "<32"
    assert length_bin(32) == "32-64"
    assert length_bin(63) == "32-64"
    assert length_bin(64) == "64-128"
    assert length_bin(127) == "64-128"
    assert length_bin(128) == "128-256"
    assert length_bin(255) == "128-256"
    assert length_bin(256) == ">256"
    hist = length_histogram([10, 40, 300])
    assert hist == {"<32": 1, "32-64": 1, "64-128": 0, "128-256": 0, ">256": 1}
    assert list(hist) == list(LENGTH_BIN_LABELS)


def test_load_lines_jsonl(tmp_path):
    path = tmp_path / "rows.jsonl"
    path.write_text(json.dumps({"text": "HELLO", "lang": "en"}) + "\n"
                    + json.dumps({"text": "WORLD"}) + "\n")
    assert load_lines(str(path)) == [("HELLO", "en"), ("WORLD", None)]


def test_ingest_quotes_mode(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_text("a first example line, long enough.\nbad 123\n")
    records, report = ingest(str(path), mode="quotes")
    assert len(records) == 1
    assert records[0].text == "A FIRST EXAMPLE LINE, LONG ENOUGH."
    assert report["dropped"]["out_of_vocabulary"] == 1


def test_ingest_segments_mode(tmp_path):
    path = tmp_path / "running.jsonl"
    row = {"text": "cette phrase est en français et assez longue pour durer " * 6,
           "lang": "fr"}
    path.write_text(json.dumps(row) + "\n")
    records, report = ingest(str(path), mode="segments", target_len=64)
    assert records and all(r.length >= 64 for r in records)
    assert all(r.language == "fr" for r in records)
    assert report["mode"] == "segments"


def test_ingest_rejects_unknown_mode(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_text("whatever line this is, it is long enough.\n")
    with pytest.raises(ValueError):
        ingest(str(path), mode="chapters")


def test_fixture_corpus_is_clean(fixture_records):
    assert len(fixture_records) >= 1000
    for r in fixture_records:
        assert MIN_QUOTE_LEN <= r.length <= MAX_QUOTE_LEN
        tokenize(r.text)  # raises if out of vocabulary
