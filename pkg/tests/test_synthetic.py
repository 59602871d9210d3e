import json

import numpy as np

from wlac.corpus import load_parallel_corpus
from wlac.synthetic import (
    AMBIGUOUS_SYMBOLS,
    PLAIN_SYMBOLS,
    SyntheticLanguage,
    alignment_for_instance,
    build_language,
    generate_corpus_files,
    generate_pairs,
)


def test_language_shape(lang):
    assert len(lang.plain_symbols) == PLAIN_SYMBOLS
    assert len(lang.ambiguous_symbols) == AMBIGUOUS_SYMBOLS
    words = lang.target_words()
    assert len(words) == PLAIN_SYMBOLS + 2 * AMBIGUOUS_SYMBOLS
    assert len(set(words)) == len(words)


def test_cognates_share_exactly_two_chars(lang):
    for first, second in lang.ambiguous_map.values():
        assert first[:2] == second[:2]
        assert first[2] != second[2]


def test_pair_prefix_reserved_to_pair(lang):
    words = lang.target_words()
    for first, second in lang.ambiguous_map.values():
        prefix = first[:2]
        owners = [w for w in words if w.startswith(prefix)]
        assert sorted(owners) == sorted([first, second])


def test_translation_rule_deterministic(lang):
    source = (lang.plain_symbols[0], lang.ambiguous_symbols[0], lang.plain_symbols[3])
    assert lang.translate(source) == lang.translate(source)
    bit = lang.selector_bit[source[0]]
    assert lang.translate(source)[1] == lang.ambiguous_map[source[1]][bit]


def test_leading_ambiguous_symbol_defaults_to_first_sense(lang):
    source = (lang.ambiguous_symbols[2], lang.plain_symbols[1])
    assert lang.translate(source)[0] == lang.ambiguous_map[lang.ambiguous_symbols[2]][0]


def test_build_language_is_reproducible():
    assert build_language().to_json() == build_language().to_json()


def test_generated_sentences_have_distinct_first_letters(lang):
    for pair in generate_pairs(lang, 300, seed=5):
        assert 5 <= len(pair.source) <= 12
        firsts = [w[0] for w in pair.target]
        assert len(set(firsts)) == len(firsts)
        assert len(set(pair.source)) == len(pair.source)


def test_alignment_points_at_producing_symbol(lang):
    pairs = generate_pairs(lang, 50, seed=9)
    for pair in pairs:
        for pos, word in enumerate(pair.target):
            positions = alignment_for_instance(lang, pair.source, word)
            assert positions == [pos]


def test_corpus_files_round_trip(tmp_path):
    paths = generate_corpus_files(tmp_path, train_pairs=20, heldout_pairs=5, seed=3)
    train = load_parallel_corpus(paths["train"])
    assert len(train.pairs) == 20 and train.skipped_empty == 0
    lang = SyntheticLanguage.from_json(
        json.loads(paths["language"].read_text(encoding="utf-8"))
    )
    for pair in train.pairs:
        assert lang.translate(pair.source) == pair.target
