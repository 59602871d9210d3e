"""Parallel-corpus ingestion, vocabularies, and simulation of autocompletion instances.

A task instance is built from one side of a sentence pair: a gold target word,
the characters a translator has typed so far, and committed context words on
either side of the gold position.  Context spans are contiguous but, except in
the prefix-decoding and post-editing settings, not necessarily adjacent to the
gold word.
"""

from __future__ import annotations

import hashlib
import json
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD, UNK, MASK, BOS, EOS = "[PAD]", "[UNK]", "[MASK]", "[BOS]", "[EOS]"
SPECIAL_TOKENS = (PAD, UNK, MASK, BOS, EOS)


class CorpusFormatError(ValueError):
    """A corpus line violates the ``source<TAB>target`` format."""


@dataclass(frozen=True)
class SentencePair:
    source: tuple[str, ...]
    target: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.source or not self.target:
            raise ValueError("both sides of a sentence pair must be non-empty")
        for tok in (*self.source, *self.target):
            if not tok or any(ch.isspace() for ch in tok):
                raise ValueError(f"token contains whitespace or is empty: {tok!r}")


@dataclass
class CorpusLoadResult:
    pairs: list[SentencePair]
    skipped_empty: int


def load_parallel_corpus(path: str | Path, limit: int | None = None) -> CorpusLoadResult:
    """Read a UTF-8 ``source<TAB>target`` file into sentence pairs.

    Lines whose source or target side tokenizes to nothing are skipped and
    counted; blank lines count as skips too.  A non-blank line without a TAB
    is a format error.
    """
    path = Path(path)
    pairs: list[SentencePair] = []
    skipped = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if limit is not None and len(pairs) >= limit:
                break
            if not line.strip():
                skipped += 1
                continue
            if "\t" not in line:
                raise CorpusFormatError(f"line {lineno}: expected 'source<TAB>target'")
            parts = line.split("\t")
            if len(parts) != 2:
                raise CorpusFormatError(f"line {lineno}: expected exactly one TAB")
            src, tgt = parts[0].split(), parts[1].split()
            if not src or not tgt:
                skipped += 1
                continue
            pairs.append(SentencePair(tuple(src), tuple(tgt)))
    if limit is not None:
        pairs = pairs[:limit]
    return CorpusLoadResult(pairs=pairs, skipped_empty=skipped)


class Vocabulary:
    """Bijective word<->id mapping with reserved special tokens at ids 0..4."""

    def __init__(self, words: Sequence[str]):
        if tuple(words[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError("vocabulary must start with the special tokens")
        if len(set(words)) != len(words):
            raise ValueError("vocabulary entries must be unique")
        self._words: list[str] = list(words)
        self._ids: dict[str, int] = {w: i for i, w in enumerate(self._words)}

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: str) -> bool:
        return word in self._ids

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    @property
    def mask_id(self) -> int:
        return 2

    @property
    def special_ids(self) -> frozenset[int]:
        return frozenset(range(len(SPECIAL_TOKENS)))

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(self._words)

    def id_of(self, word: str) -> int:
        return self._ids.get(word, self.unk_id)

    def word_of(self, idx: int) -> str:
        return self._words[idx]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.id_of(t) for t in tokens]

    def content_words(self) -> list[str]:
        return self._words[len(SPECIAL_TOKENS):]

    def content_ids(self) -> list[int]:
        return list(range(len(SPECIAL_TOKENS), len(self._words)))

    def hash(self) -> str:
        digest = hashlib.sha256("\n".join(self._words).encode("utf-8"))
        return digest.hexdigest()

    def to_json(self) -> list[str]:
        return list(self._words)

    @classmethod
    def from_json(cls, words: Sequence[str]) -> "Vocabulary":
        return cls(words)


def build_vocabulary(
    pairs: Sequence[SentencePair],
    side: str,
    max_size: int = 50_000,
    min_freq: int = 1,
) -> Vocabulary:
    """Frequency-ordered vocabulary for one corpus side, specials first.

    Ties in frequency break lexicographically.  ``max_size`` bounds the total
    size including specials; words below ``min_freq`` are dropped.
    """
    if side not in ("source", "target"):
        raise ValueError(f"side must be 'source' or 'target', got {side!r}")
    if max_size < len(SPECIAL_TOKENS) + 1:
        raise ValueError("max_size leaves no room for content words")
    counts: Counter[str] = Counter()
    for pair in pairs:
        counts.update(pair.source if side == "source" else pair.target)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    words = list(SPECIAL_TOKENS)
    for word, freq in ranked:
        if len(words) >= max_size or freq < min_freq:
            break
        words.append(word)
    return Vocabulary(words)


class ContextType(Enum):
    ZERO_CONTEXT = "zero_context"
    PREFIX = "prefix"
    SUFFIX = "suffix"
    BI_CONTEXT = "bi_context"
    PREFIX_DECODING = "prefix_decoding"
    POST_EDITING = "post_editing"

    @property
    def needs_left(self) -> bool:
        return self in (
            ContextType.PREFIX,
            ContextType.BI_CONTEXT,
            ContextType.PREFIX_DECODING,
            ContextType.POST_EDITING,
        )

    @property
    def needs_right(self) -> bool:
        return self in (ContextType.SUFFIX, ContextType.BI_CONTEXT, ContextType.POST_EDITING)

    @property
    def left_adjacent(self) -> bool:
        return self in (ContextType.PREFIX_DECODING, ContextType.POST_EDITING)

    @property
    def right_adjacent(self) -> bool:
        return self is ContextType.POST_EDITING


# The four general context types that enter overall accuracy.
CORE_CONTEXT_TYPES = (
    ContextType.ZERO_CONTEXT,
    ContextType.PREFIX,
    ContextType.SUFFIX,
    ContextType.BI_CONTEXT,
)


@dataclass(frozen=True)
class WlacInstance:
    source: tuple[str, ...]
    left_ctx: tuple[str, ...]
    right_ctx: tuple[str, ...]
    typed: str
    gold: str
    ctype: ContextType

    def __post_init__(self) -> None:
        if not (1 <= len(self.typed) < len(self.gold)):
            raise ValueError("typed must be a non-empty proper prefix of gold")
        if not self.gold.startswith(self.typed):
            raise ValueError("gold must start with the typed characters")
        if self.ctype.needs_left != bool(self.left_ctx):
            raise ValueError(f"{self.ctype.value} left-context emptiness rule violated")
        if self.ctype.needs_right != bool(self.right_ctx):
            raise ValueError(f"{self.ctype.value} right-context emptiness rule violated")

    def to_json(self) -> dict:
        return {
            "source": list(self.source),
            "left_ctx": list(self.left_ctx),
            "right_ctx": list(self.right_ctx),
            "typed": self.typed,
            "gold": self.gold,
            "ctype": self.ctype.value,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "WlacInstance":
        return cls(
            source=tuple(obj["source"]),
            left_ctx=tuple(obj["left_ctx"]),
            right_ctx=tuple(obj["right_ctx"]),
            typed=obj["typed"],
            gold=obj["gold"],
            ctype=ContextType(obj["ctype"]),
        )


def write_dataset(instances: Iterable[WlacInstance], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_json(), ensure_ascii=False) + "\n")


def read_dataset(path: str | Path) -> list[WlacInstance]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(WlacInstance.from_json(json.loads(line)))
    return out


def _is_punctuation_only(word: str) -> bool:
    return all(unicodedata.category(ch).startswith("P") for ch in word)


def eligible_gold(word: str, vocab: Vocabulary | None) -> bool:
    """Gold words must be typeable (>= 2 chars), contentful, and in-vocabulary."""
    if len(word) < 2 or _is_punctuation_only(word):
        return False
    if vocab is not None and (word not in vocab or vocab.id_of(word) in vocab.special_ids):
        return False
    return True


def _position_fits(pos: int, length: int, ctype: ContextType) -> bool:
    if ctype.needs_left and pos < 1:
        return False
    if ctype.needs_right and pos > length - 2:
        return False
    return True


def _sample_typed_length(gold: str, rng: np.random.Generator) -> int:
    # Geometric(0.5) truncated to [1, len-1]; the min() keeps the draw cheap
    # and lands the corpus-wide mean near two characters.
    return int(min(rng.geometric(0.5), len(gold) - 1))


def _sample_span(lo: int, hi: int, rng: np.random.Generator) -> tuple[int, int]:
    """Contiguous span [start, start+length) within [lo, hi), length >= 1."""
    width = hi - lo
    length = int(rng.integers(1, width + 1))
    start = int(rng.integers(lo, hi - length + 1))
    return start, start + length


def simulate_instance(
    pair: SentencePair,
    ctype: ContextType,
    rng: np.random.Generator,
    vocab: Vocabulary | None = None,
) -> WlacInstance | None:
    """Sample one autocompletion instance from a sentence pair.

    Returns None when the target sentence has no gold word eligible for the
    requested context type.  Deterministic given the generator state.
    """
    target = pair.target
    length = len(target)
    eligible_words = sorted(
        {w for i, w in enumerate(target) if eligible_gold(w, vocab) and _position_fits(i, length, ctype)}
    )
    if not eligible_words:
        return None
    gold = eligible_words[int(rng.integers(len(eligible_words)))]
    positions = [
        i for i, w in enumerate(target) if w == gold and _position_fits(i, length, ctype)
    ]
    pos = positions[int(rng.integers(len(positions)))]

    typed_len = _sample_typed_length(gold, rng)
    typed = gold[:typed_len]

    left: tuple[str, ...] = ()
    right: tuple[str, ...] = ()
    if ctype.needs_left:
        if ctype.left_adjacent:
            start = int(rng.integers(0, pos))
            left = target[start:pos]
        else:
            s, e = _sample_span(0, pos, rng)
            left = target[s:e]
    if ctype.needs_right:
        if ctype.right_adjacent:
            end = int(rng.integers(pos + 2, length + 1))
            right = target[pos + 1 : end]
        else:
            s, e = _sample_span(pos + 1, length, rng)
            right = target[s:e]
    return WlacInstance(
        source=pair.source,
        left_ctx=left,
        right_ctx=right,
        typed=typed,
        gold=gold,
        ctype=ctype,
    )


def _pair_rng(seed: int, pair_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0, pair_index)))


def _quotas(mix: dict[ContextType, float], total: int) -> dict[ContextType, int]:
    """Largest-remainder apportionment of `total` instances over the mix."""
    if abs(sum(mix.values()) - 1.0) > 1e-9:
        raise ValueError("mix fractions must sum to 1")
    shares = {t: f * total for t, f in mix.items()}
    counts = {t: int(np.floor(s)) for t, s in shares.items()}
    remainder = total - sum(counts.values())
    order = sorted(mix, key=lambda t: (-(shares[t] - counts[t]), t.value))
    for t in order[:remainder]:
        counts[t] += 1
    return counts


def simulate_dataset(
    pairs: Sequence[SentencePair],
    mix: dict[ContextType, float],
    seed: int,
    vocab: Vocabulary | None = None,
) -> list[WlacInstance]:
    """Simulate one instance per pair, apportioning context types by `mix`.

    Each pair derives its own generator from (seed, pair index), so the result
    is reproducible and independent of iteration order.  Pairs that cannot
    host their assigned type fall back to the remaining types before being
    dropped.
    """
    if not pairs:
        return []
    quotas = _quotas(mix, len(pairs))
    order_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1, 0)))
    pair_order = order_rng.permutation(len(pairs))

    remaining = dict(quotas)
    instances: list[WlacInstance] = []
    for pair_index in pair_order:
        rng = _pair_rng(seed, int(pair_index))
        by_need = sorted(remaining, key=lambda t: (-remaining[t], t.value))
        for ctype in by_need:
            if remaining[ctype] <= 0:
                continue
            inst = simulate_instance(pairs[int(pair_index)], ctype, rng, vocab)
            if inst is not None:
                instances.append(inst)
                remaining[ctype] -= 1
                break
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(2, 0)))
    shuffle_rng.shuffle(instances)  # type: ignore[arg-type]
    return instances


@dataclass
class FrequencyProfile:
    interval_of: dict[str, int]
    proportions: list[float]
    n_intervals: int
    truncated: bool = False

    def __post_init__(self) -> None:
        total = sum(self.proportions)
        if self.proportions and abs(total - 1.0) > 1e-9:
            raise ValueError(f"proportions must sum to 1, got {total}")


def word_frequency_profile(
    vocab: Vocabulary,
    pairs: Sequence[SentencePair],
    dataset: Sequence[WlacInstance],
    n_intervals: int = 10,
) -> FrequencyProfile:
    """Split vocabulary words into equal-population frequency intervals and
    measure how the dataset's gold words distribute over them.

    Interval 1 holds the most frequent words.  With fewer distinct words than
    intervals the profile shrinks and is flagged as truncated.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    counts: Counter[str] = Counter()
    for pair in pairs:
        counts.update(pair.target)
    words = sorted(vocab.content_words(), key=lambda w: (-counts[w], w))
    truncated = len(words) < n_intervals
    k = min(n_intervals, len(words))
    interval_of: dict[str, int] = {}
    base, extra = divmod(len(words), k)
    cursor = 0
    for interval in range(1, k + 1):
        size = base + (1 if interval <= extra else 0)
        for w in words[cursor : cursor + size]:
            interval_of[w] = interval
        cursor += size

    tallies = [0] * k
    hits = 0
    for inst in dataset:
        interval = interval_of.get(inst.gold)
        if interval is not None:
            tallies[interval - 1] += 1
            hits += 1
    if hits == 0:
        raise ValueError("no dataset gold word is in the vocabulary")
    proportions = [t / hits for t in tallies]
    return FrequencyProfile(
        interval_of=interval_of,
        proportions=proportions,
        n_intervals=k,
        truncated=truncated,
    )
