"""Character trie realizing prefix-constrained candidate lookup.

Matching is exact on characters (case- and accent-sensitive) and enumeration
is lexicographic, so downstream top-K restriction is deterministic.  The trie
is immutable after build and safe for concurrent readers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import Vocabulary


@dataclass
class _Node:
    children: dict[str, "_Node"] = field(default_factory=dict)
    word_id: int | None = None


class CandidateTrie:
    """Maps every non-special vocabulary word to a unique character path."""

    def __init__(self) -> None:
        self.root = _Node()
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def _insert(self, word: str, word_id: int) -> None:
        node = self.root
        for ch in word:
            node = node.children.setdefault(ch, _Node())
        if node.word_id is not None:
            raise ValueError(f"duplicate word in trie: {word!r}")
        node.word_id = word_id
        self._size += 1

    def _walk(self, prefix: str) -> _Node | None:
        node = self.root
        for ch in prefix:
            node = node.children.get(ch)
            if node is None:
                return None
        return node

    @staticmethod
    def _enumerate(node: _Node, out: list[int]) -> None:
        if node.word_id is not None:
            out.append(node.word_id)
        for ch in sorted(node.children):
            CandidateTrie._enumerate(node.children[ch], out)


def build_trie(vocab: Vocabulary) -> CandidateTrie:
    """Index every non-special vocabulary word exactly once."""
    trie = CandidateTrie()
    for word_id in vocab.content_ids():
        trie._insert(vocab.word_of(word_id), word_id)
    return trie


def candidates(trie: CandidateTrie, typed: str) -> list[int]:
    """All word ids with `typed` as a prefix, in lexicographic word order.

    An empty prefix enumerates the whole vocabulary; an unmatched prefix
    yields an empty list.
    """
    node = trie._walk(typed)
    if node is None:
        return []
    out: list[int] = []
    CandidateTrie._enumerate(node, out)
    return out
