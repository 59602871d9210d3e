"""Deterministic token-mapping language used by the acceptance suite.

Eighty plain source symbols each translate to a unique target word.  Twenty
further "ambiguous" symbols each translate to one of two cognate words that
share exactly a two-character prefix; which cognate is correct depends only on
the source symbol immediately to the left (its selector bit).  Translations
are therefore computable by rule, and the symbol-to-word mapping doubles as
gold word alignment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import SentencePair

PLAIN_SYMBOLS = 80
AMBIGUOUS_SYMBOLS = 20

_CONSONANTS = "bcdfghjklmnpqrstvwz"
_VOWELS = "aeiou"


def _syllables() -> list[str]:
    return [c + v for c in _CONSONANTS for v in _VOWELS]


@dataclass(frozen=True)
class SyntheticLanguage:
    symbols: tuple[str, ...]                      # plain symbols then ambiguous ones
    plain_map: dict[str, str]                     # symbol -> word
    ambiguous_map: dict[str, tuple[str, str]]     # symbol -> (word for bit 0, word for bit 1)
    selector_bit: dict[str, int]                  # symbol -> bit read by a right neighbor

    @property
    def plain_symbols(self) -> tuple[str, ...]:
        return self.symbols[:PLAIN_SYMBOLS]

    @property
    def ambiguous_symbols(self) -> tuple[str, ...]:
        return self.symbols[PLAIN_SYMBOLS:]

    def target_words(self) -> list[str]:
        words = [self.plain_map[s] for s in self.plain_symbols]
        for s in self.ambiguous_symbols:
            words.extend(self.ambiguous_map[s])
        return words

    def ambiguous_words(self) -> set[str]:
        out: set[str] = set()
        for pair in self.ambiguous_map.values():
            out.update(pair)
        return out

    def symbol_of_word(self, word: str) -> str | None:
        if not hasattr(self, "_inverse"):
            inverse = {w: s for s, w in self.plain_map.items()}
            for s, (u, v) in self.ambiguous_map.items():
                inverse[u] = s
                inverse[v] = s
            object.__setattr__(self, "_inverse", inverse)
        return self._inverse.get(word)  # type: ignore[attr-defined]

    def translate(self, source: tuple[str, ...]) -> tuple[str, ...]:
        out = []
        for pos, symbol in enumerate(source):
            if symbol in self.plain_map:
                out.append(self.plain_map[symbol])
            elif symbol in self.ambiguous_map:
                bit = self.selector_bit[source[pos - 1]] if pos > 0 else 0
                out.append(self.ambiguous_map[symbol][bit])
            else:
                raise KeyError(f"unknown symbol {symbol!r}")
        return tuple(out)

    def first_letter_class(self, symbol: str) -> str:
        """Initial letter of the symbol's translation(s); cognates share it."""
        if symbol in self.plain_map:
            return self.plain_map[symbol][0]
        return self.ambiguous_map[symbol][0][0]

    def to_json(self) -> dict:
        return {
            "symbols": list(self.symbols),
            "plain_map": self.plain_map,
            "ambiguous_map": {s: list(p) for s, p in self.ambiguous_map.items()},
            "selector_bit": self.selector_bit,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SyntheticLanguage":
        return cls(
            symbols=tuple(obj["symbols"]),
            plain_map=dict(obj["plain_map"]),
            ambiguous_map={s: (p[0], p[1]) for s, p in obj["ambiguous_map"].items()},
            selector_bit={s: int(b) for s, b in obj["selector_bit"].items()},
        )


def build_language(seed: int = 2024) -> SyntheticLanguage:
    """Construct the fixed language; the same seed always yields the same maps."""
    rng = np.random.default_rng(seed)
    syllables = _syllables()
    rng.shuffle(syllables)

    # Reserve one syllable per ambiguous pair as its exclusive 2-char prefix,
    # so two typed characters always narrow an ambiguous word to its pair.
    pair_prefixes = syllables[:AMBIGUOUS_SYMBOLS]
    plain_starts = syllables[AMBIGUOUS_SYMBOLS:]

    # Words start with a full syllable, so the first two characters are the
    # start syllable itself and the two start pools never collide.
    used: set[str] = set()

    def fresh_word(start: str) -> str:
        while True:
            n = int(rng.integers(1, 3))
            tail = "".join(syllables[int(rng.integers(len(syllables)))] for _ in range(n))
            word = start + tail
            if word not in used:
                used.add(word)
                return word

    plain_words = []
    for i in range(PLAIN_SYMBOLS):
        plain_words.append(fresh_word(plain_starts[i % len(plain_starts)]))

    ambiguous_pairs = []
    for prefix in pair_prefixes:
        # Cognates share exactly the prefix: they diverge right after it.
        first = fresh_word(prefix)
        second = fresh_word(prefix)
        while second[2] == first[2]:
            used.discard(second)
            second = fresh_word(prefix)
        ambiguous_pairs.append((first, second))

    symbols = tuple(
        [f"s{i:02d}" for i in range(PLAIN_SYMBOLS)]
        + [f"a{i:02d}" for i in range(AMBIGUOUS_SYMBOLS)]
    )
    plain_map = {symbols[i]: plain_words[i] for i in range(PLAIN_SYMBOLS)}
    ambiguous_map = {
        symbols[PLAIN_SYMBOLS + i]: ambiguous_pairs[i] for i in range(AMBIGUOUS_SYMBOLS)
    }
    selector_bit = {s: i % 2 for i, s in enumerate(symbols)}
    return SyntheticLanguage(
        symbols=symbols,
        plain_map=plain_map,
        ambiguous_map=ambiguous_map,
        selector_bit=selector_bit,
    )


def generate_pairs(
    lang: SyntheticLanguage,
    count: int,
    seed: int,
    min_len: int = 5,
    max_len: int = 12,
) -> list[SentencePair]:
    """Sample sentences and translate them by rule.

    Symbols within one sentence are distinct and their translations start
    with pairwise-distinct letters, so a typed character plus the source
    sentence pins the intended word down to at most one cognate pair.
    """
    rng = np.random.default_rng(seed)
    classes: dict[str, list[str]] = {}
    for symbol in lang.symbols:
        classes.setdefault(lang.first_letter_class(symbol), []).append(symbol)
    class_keys = sorted(classes)
    if max_len > len(class_keys):
        raise ValueError("sentence length exceeds the number of first-letter classes")
    pairs = []
    for _ in range(count):
        length = int(rng.integers(min_len, max_len + 1))
        picked_classes = rng.choice(len(class_keys), size=length, replace=False)
        source = tuple(
            classes[class_keys[int(c)]][int(rng.integers(len(classes[class_keys[int(c)]])))]
            for c in picked_classes
        )
        pairs.append(SentencePair(source=source, target=lang.translate(source)))
    return pairs


def write_pairs(pairs: list[SentencePair], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(" ".join(pair.source) + "\t" + " ".join(pair.target) + "\n")


def alignment_for_instance(lang: SyntheticLanguage, source: tuple[str, ...], gold: str) -> list[int]:
    """Source positions of the symbol that produces the gold word."""
    symbol = lang.symbol_of_word(gold)
    if symbol is None:
        return []
    return [i for i, s in enumerate(source) if s == symbol]


def generate_corpus_files(
    out_dir: str | Path,
    train_pairs: int = 5000,
    heldout_pairs: int = 500,
    seed: int = 11,
) -> dict[str, Path]:
    """Write train/heldout corpora plus the language mapping to a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lang = build_language()
    train = generate_pairs(lang, train_pairs, seed)
    heldout = generate_pairs(lang, heldout_pairs, seed + 1)
    paths = {
        "train": out / "train.tsv",
        "heldout": out / "heldout.tsv",
        "language": out / "language.json",
    }
    write_pairs(train, paths["train"])
    write_pairs(heldout, paths["heldout"])
    paths["language"].write_text(json.dumps(lang.to_json(), indent=2), encoding="utf-8")
    return paths
