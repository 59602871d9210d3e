import json

import numpy as np
import pytest

from wlac.corpus import (
    CORE_CONTEXT_TYPES,
    ContextType,
    CorpusFormatError,
    SentencePair,
    Vocabulary,
    WlacInstance,
    build_vocabulary,
    load_parallel_corpus,
    read_dataset,
    simulate_dataset,
    simulate_instance,
    word_frequency_profile,
    write_dataset,
)

UNIFORM_MIX = {t: 0.25 for t in CORE_CONTEXT_TYPES}


def _pairs(*targets):
    return [SentencePair(("x",), tuple(t.split())) for t in targets]


class TestLoadParallelCorpus:
    def test_file_order_and_count(self, tmp_path):
        path = tmp_path / "corpus.tsv"
        path.write_text("a b\tc d\ne f\tg h\n", encoding="utf-8")
        loaded = load_parallel_corpus(path)
        assert [p.source for p in loaded.pairs] == [("a", "b"), ("e", "f")]
        assert loaded.skipped_empty == 0

    def test_empty_side_skipped_and_counted(self, tmp_path):
        path = tmp_path / "corpus.tsv"
        path.write_text("a\tb\nc d\t\n", encoding="utf-8")
        loaded = load_parallel_corpus(path)
        assert len(loaded.pairs) == 1
        assert loaded.skipped_empty == 1

    def test_limit_zero(self, tmp_path):
        path = tmp_path / "corpus.tsv"
        path.write_text("a\tb\n", encoding="utf-8")
        assert load_parallel_corpus(path, limit=0).pairs == []

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_parallel_corpus(tmp_path / "nope.tsv")

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "corpus.tsv"
        path.write_text("a\tb\nno tab here\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError, match="line 2"):
            load_parallel_corpus(path)


class TestBuildVocabulary:
    def test_frequency_order(self):
        vocab = build_vocabulary(_pairs("a a b"), "target", max_size=7, min_freq=1)
        assert vocab.content_words() == ["a", "b"]

    def test_min_freq_cutoff(self):
        vocab = build_vocabulary(_pairs("a a b"), "target", max_size=7, min_freq=2)
        assert vocab.content_words() == ["a"]

    def test_lexicographic_tie_break(self):
        vocab = build_vocabulary(_pairs("a b a b"), "target", max_size=7)
        assert vocab.content_words() == ["a", "b"]

    def test_max_size_truncates(self):
        vocab = build_vocabulary(_pairs("a a a b b c"), "target", max_size=6)
        assert vocab.content_words() == ["a"]

    def test_round_trip(self, small_vocabs):
        _, tgt = small_vocabs
        for word in tgt.words:
            assert tgt.word_of(tgt.id_of(word)) == word


def _find_occurrence(inst: WlacInstance, target: tuple[str, ...]) -> bool:
    """Some gold occurrence must sit strictly between the two context slices."""
    n = len(target)

    def slice_positions(sub, lo, hi):
        if not sub:
            return [None]
        out = []
        for start in range(lo, hi - len(sub) + 1):
            if tuple(target[start : start + len(sub)]) == tuple(sub):
                out.append(start)
        return out

    for pos in range(n):
        if target[pos] != inst.gold:
            continue
        lefts = slice_positions(inst.left_ctx, 0, pos)
        rights = slice_positions(inst.right_ctx, pos + 1, n)
        if not lefts or not rights:
            continue
        if inst.ctype.left_adjacent and inst.left_ctx:
            lefts = [s for s in lefts if s is not None and s + len(inst.left_ctx) == pos]
        if inst.ctype.right_adjacent and inst.right_ctx:
            rights = [s for s in rights if s == pos + 1]
        if lefts and rights:
            return True
    return False


class TestSimulateInstance:
    def test_zero_context_has_no_context(self, small_pairs, small_vocabs):
        _, tgt = small_vocabs
        rng = np.random.default_rng(0)
        inst = simulate_instance(small_pairs[0], ContextType.ZERO_CONTEXT, rng, tgt)
        assert inst.left_ctx == () and inst.right_ctx == ()

    def test_determinism(self, small_pairs, small_vocabs):
        _, tgt = small_vocabs
        a = simulate_instance(small_pairs[3], ContextType.BI_CONTEXT, np.random.default_rng(9), tgt)
        b = simulate_instance(small_pairs[3], ContextType.BI_CONTEXT, np.random.default_rng(9), tgt)
        assert a == b

    def test_skip_when_no_eligible_gold(self):
        pair = SentencePair(("x",), ("!", "?"))
        inst = simulate_instance(pair, ContextType.ZERO_CONTEXT, np.random.default_rng(0), None)
        assert inst is None

    @pytest.mark.parametrize("ctype", list(ContextType))
    def test_invariants_hold_over_many_samples(self, small_pairs, small_vocabs, ctype):
        _, tgt = small_vocabs
        checked = 0
        for i, pair in enumerate(small_pairs * 6):
            rng = np.random.default_rng(1000 + i)
            inst = simulate_instance(pair, ctype, rng, tgt)
            if inst is None:
                continue
            checked += 1
            assert inst.gold.startswith(inst.typed)
            assert 1 <= len(inst.typed) < len(inst.gold)
            assert bool(inst.left_ctx) == ctype.needs_left
            assert bool(inst.right_ctx) == ctype.needs_right
            assert _find_occurrence(inst, pair.target)
        assert checked > 1500


class TestSimulateDataset:
    def test_degenerate_mix(self, small_pairs, small_vocabs):
        _, tgt = small_vocabs
        ds = simulate_dataset(small_pairs[:100], {ContextType.BI_CONTEXT: 1.0}, seed=1, vocab=tgt)
        assert len(ds) == 100
        assert all(i.ctype is ContextType.BI_CONTEXT for i in ds)

    def test_exact_division(self, lang, small_vocabs):
        from wlac.synthetic import generate_pairs

        _, tgt = small_vocabs
        pairs = generate_pairs(lang, 400, seed=77)
        ds = simulate_dataset(pairs, UNIFORM_MIX, seed=2, vocab=tgt)
        counts = {t: sum(1 for i in ds if i.ctype is t) for t in CORE_CONTEXT_TYPES}
        assert all(abs(c - 100) <= 1 for c in counts.values())
        assert len(ds) == 400

    def test_deterministic_shuffle(self, small_pairs, small_vocabs):
        _, tgt = small_vocabs
        a = simulate_dataset(small_pairs, UNIFORM_MIX, seed=5, vocab=tgt)
        b = simulate_dataset(small_pairs, UNIFORM_MIX, seed=5, vocab=tgt)
        assert a == b

    def test_empty_corpus(self):
        assert simulate_dataset([], UNIFORM_MIX, seed=1) == []

    def test_mean_typed_length_calibration(self, lang, small_vocabs):
        # Desk-scale stand-in for the reported ~2-character average of human
        # typed prefixes; a band, not an exact value.
        from wlac.synthetic import generate_pairs

        _, tgt = small_vocabs
        pairs = generate_pairs(lang, 2500, seed=123)
        ds = simulate_dataset(pairs, UNIFORM_MIX, seed=3, vocab=tgt)
        assert len(ds) > 2000
        mean = sum(len(i.typed) for i in ds) / len(ds)
        assert 1.6 <= mean <= 2.4


class TestDatasetRoundTrip:
    def test_jsonl_round_trip(self, small_dataset, tmp_path):
        path = tmp_path / "ds.jsonl"
        write_dataset(small_dataset[:50], path)
        again = read_dataset(path)
        assert again == list(small_dataset[:50])
        first = json.loads(path.read_text().splitlines()[0])
        assert set(first) == {"source", "left_ctx", "right_ctx", "typed", "gold", "ctype"}


class TestFrequencyProfile:
    def _corpus_with_spread(self):
        words = [f"w{i:02d}" for i in range(50)]
        targets = []
        for rank, w in enumerate(words):
            targets.extend([w] * (50 - rank))
        return words, [SentencePair(("x",), tuple(targets))]

    def test_all_gold_from_top_interval(self):
        words, pairs = self._corpus_with_spread()
        vocab = build_vocabulary(pairs, "target", max_size=100)
        ds = [
            WlacInstance(("x",), (), (), w[:1], w, ContextType.ZERO_CONTEXT)
            for w in words[:5]
        ]
        profile = word_frequency_profile(vocab, pairs, ds)
        assert profile.proportions[0] == 1.0
        assert sum(profile.proportions) == pytest.approx(1.0, abs=1e-9)

    def test_uniform_gold_draws_near_uniform(self):
        # Oracle: equal-population intervals make uniform draws land ~1/10
        # in each; Monte Carlo over 10k draws.
        words, pairs = self._corpus_with_spread()
        vocab = build_vocabulary(pairs, "target", max_size=100)
        rng = np.random.default_rng(42)
        draws = rng.integers(0, len(words), size=10_000)
        ds = [
            WlacInstance(("x",), (), (), words[d][:1], words[d], ContextType.ZERO_CONTEXT)
            for d in draws
        ]
        profile = word_frequency_profile(vocab, pairs, ds)
        assert profile.n_intervals == 10
        for p in profile.proportions:
            assert abs(p - 0.1) <= 0.03

    def test_few_words_flagged(self):
        pairs = _pairs("aa bb aa cc")
        vocab = build_vocabulary(pairs, "target", max_size=100)
        ds = [WlacInstance(("x",), (), (), "a", "aa", ContextType.ZERO_CONTEXT)]
        profile = word_frequency_profile(vocab, pairs, ds)
        assert profile.truncated
        assert profile.n_intervals == 3


class TestVocabularyBasics:
    def test_specials_distinct_and_first(self, small_vocabs):
        src, _ = small_vocabs
        assert list(src.words[:5]) == ["[PAD]", "[UNK]", "[MASK]", "[BOS]", "[EOS]"]
        assert len(src.special_ids) == 5

    def test_unknown_maps_to_unk(self, small_vocabs):
        src, _ = small_vocabs
        assert src.id_of("definitely-not-a-word") == src.unk_id
