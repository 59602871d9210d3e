import numpy as np
import pytest

from wlac.candidates import build_trie, candidates
from wlac.corpus import SPECIAL_TOKENS, Vocabulary


def _vocab(words):
    return Vocabulary([*SPECIAL_TOKENS, *words])


def test_single_word_path():
    vocab = _vocab(["a"])
    trie = build_trie(vocab)
    assert candidates(trie, "a") == [vocab.id_of("a")]
    assert candidates(trie, "") == [vocab.id_of("a")]


def test_empty_content_vocab():
    trie = build_trie(_vocab([]))
    assert len(trie) == 0
    assert candidates(trie, "") == []


def test_enumeration_is_sorted_vocab():
    words = ["dog", "dish", "disease", "apple"]
    vocab = _vocab(words)
    trie = build_trie(vocab)
    assert [vocab.word_of(i) for i in candidates(trie, "")] == sorted(words)


def test_prefix_filter():
    vocab = _vocab(["disease", "dish", "dog"])
    trie = build_trie(vocab)
    assert [vocab.word_of(i) for i in candidates(trie, "di")] == ["disease", "dish"]
    assert candidates(trie, "zz") == []


def test_word_that_is_prefix_of_another():
    vocab = _vocab(["do", "dog", "dot"])
    trie = build_trie(vocab)
    assert [vocab.word_of(i) for i in candidates(trie, "do")] == ["do", "dog", "dot"]


def test_case_and_accent_sensitive():
    vocab = _vocab(["Dog", "dog", "dóg"])
    trie = build_trie(vocab)
    assert [vocab.word_of(i) for i in candidates(trie, "d")] == sorted(["dog", "dóg"])
    assert [vocab.word_of(i) for i in candidates(trie, "D")] == ["Dog"]


def test_brute_force_oracle_1000_cases():
    # Independent oracle: linear scan for the prefix over the word list.
    rng = np.random.default_rng(7)
    alphabet = "abcdefg"
    for _ in range(1000):
        n_words = int(rng.integers(1, 30))
        words = sorted(
            {
                "".join(rng.choice(list(alphabet), size=rng.integers(1, 7)))
                for _ in range(n_words)
            }
        )
        vocab = _vocab(list(words))
        trie = build_trie(vocab)
        typed = "".join(rng.choice(list(alphabet), size=rng.integers(0, 4)))
        expected = [vocab.id_of(w) for w in sorted(words) if w.startswith(typed)]
        assert candidates(trie, typed) == expected


def test_monotonicity_under_extension():
    rng = np.random.default_rng(11)
    words = ["".join(rng.choice(list("abc"), size=rng.integers(1, 6))) for _ in range(40)]
    vocab = _vocab(sorted(set(words)))
    trie = build_trie(vocab)
    for prefix in ["", "a", "ab", "b", "c", "cc"]:
        base = set(candidates(trie, prefix))
        for ch in "abc":
            assert set(candidates(trie, prefix + ch)) <= base


def test_completeness_unique_ids(small_vocabs):
    _, tgt = small_vocabs
    trie = build_trie(tgt)
    ids = candidates(trie, "")
    assert len(ids) == len(set(ids)) == len(tgt.content_ids())
    assert sorted(ids) == sorted(tgt.content_ids())
