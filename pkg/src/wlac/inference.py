"""Prefix-constrained suggestion: baseline top-K retrieval plus energy reranking.

Inference is two-step: restrict the vocabulary to the words matching the typed
characters, take the K most probable under the word predictor, then let the
energy model pick the winner.  Without an energy model the baseline ordering
is final.  Ties break by baseline rank, then lexicographically, so results
are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch

from .candidates import CandidateTrie, build_trie, candidates
from .corpus import Vocabulary, WlacInstance
from .model import (
    AttentionTrace,
    BaselineWpm,
    EnergyModel,
    TargetInput,
    encode_source,
    encode_target,
    energy_scores,
)

DEFAULT_K = 8


class NoCandidateError(ValueError):
    """No vocabulary word starts with the typed characters."""


class VocabularyMismatchError(ValueError):
    """Paired models disagree on vocabulary sizes or hashes."""


@dataclass(frozen=True)
class SuggestionRequest:
    source: tuple[str, ...]
    left_ctx: tuple[str, ...] = ()
    right_ctx: tuple[str, ...] = ()
    typed: str = ""
    k: int = DEFAULT_K
    diagnostic: bool = False

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("candidate budget k must be >= 1")
        if not self.source:
            raise ValueError("source sentence must be non-empty")
        if not self.typed and not self.diagnostic:
            raise ValueError("typed may be empty only in diagnostic mode")

    @classmethod
    def from_instance(cls, inst: WlacInstance, k: int = DEFAULT_K) -> "SuggestionRequest":
        return cls(
            source=inst.source,
            left_ctx=inst.left_ctx,
            right_ctx=inst.right_ctx,
            typed=inst.typed,
            k=k,
        )


@dataclass(frozen=True)
class CandidateScore:
    word: str
    baseline_prob: float
    baseline_rank: int
    energy: float | None
    final_rank: int

    def to_json(self) -> dict:
        return {
            "word": self.word,
            "baseline_prob": self.baseline_prob,
            "baseline_rank": self.baseline_rank,
            "energy": self.energy,
            "final_rank": self.final_rank,
        }


@dataclass
class SuggestionResult:
    chosen: str
    candidates: list[CandidateScore]
    trace: np.ndarray | None = None

    def to_json(self) -> dict:
        return {
            "chosen": self.chosen,
            "candidates": [c.to_json() for c in sorted(self.candidates, key=lambda c: c.final_rank)],
            "trace": None if self.trace is None else [float(x) for x in self.trace],
        }


class SuggestPipeline:
    """Stateless suggestion engine over immutable models; safe for concurrent reads."""

    def __init__(
        self,
        baseline: BaselineWpm,
        src_vocab: Vocabulary,
        tgt_vocab: Vocabulary,
        trie: CandidateTrie | None = None,
        energy: EnergyModel | None = None,
    ):
        if baseline.config.tgt_vocab_size != len(tgt_vocab):
            raise VocabularyMismatchError("baseline head size does not match target vocabulary")
        if baseline.config.src_vocab_size != len(src_vocab):
            raise VocabularyMismatchError("baseline embeddings do not match source vocabulary")
        if energy is not None and (
            energy.config.src_vocab_size != baseline.config.src_vocab_size
            or energy.config.tgt_vocab_size != baseline.config.tgt_vocab_size
        ):
            raise VocabularyMismatchError("energy model vocabulary differs from baseline")
        self.baseline = baseline.eval()
        self.energy = energy.eval() if energy is not None else None
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.trie = trie or build_trie(tgt_vocab)

    # -- internals ---------------------------------------------------------

    def _encode_request(self, request: SuggestionRequest) -> tuple[list[int], list[int], list[int]]:
        limit = self.baseline.config.max_len
        src = self.src_vocab.encode(request.source)[:limit]
        left = self.tgt_vocab.encode(request.left_ctx)
        right = self.tgt_vocab.encode(request.right_ctx)
        if len(left) + len(right) + 1 > limit:
            keep = limit - 1
            left_keep = min(len(left), keep // 2)
            right = right[: keep - left_keep]
            left = left[-left_keep:] if left_keep else []
        return src, left, right

    def mask_distribution(self, request: SuggestionRequest) -> tuple[np.ndarray, AttentionTrace]:
        """Full-vocabulary probe distribution plus the [MASK] attention trace."""
        src, left, right = self._encode_request(request)
        with torch.no_grad():
            src_states = encode_source(self.baseline, src)
            tgt = TargetInput.build(left, self.tgt_vocab.mask_id, right)
            states, trace = encode_target(self.baseline, tgt, src_states)
            logits = self.baseline.out(states[tgt.probe_position])
            probs = torch.softmax(logits, dim=-1).numpy()
        return probs, trace

    def _ranked_candidates(self, request: SuggestionRequest) -> list[tuple[int, float]]:
        cand_ids = candidates(self.trie, request.typed)
        if not cand_ids:
            raise NoCandidateError(f"no candidate starts with {request.typed!r}")
        probs, _ = self.mask_distribution(request)
        ranked = sorted(
            cand_ids, key=lambda i: (-float(probs[i]), self.tgt_vocab.word_of(i))
        )
        return [(i, float(probs[i])) for i in ranked[: request.k]]

    def _energy_trace(self, request: SuggestionRequest, word_id: int) -> np.ndarray:
        assert self.energy is not None
        src, left, right = self._encode_request(request)
        with torch.no_grad():
            src_states = encode_source(self.energy, src)
            tgt = TargetInput.build(left, word_id, right)
            _, trace = encode_target(self.energy, tgt, src_states)
        return trace.probe_row

    # -- public operations ---------------------------------------------------

    def top_k(self, request: SuggestionRequest) -> list[tuple[str, float]]:
        """The top-K prefix-matching words under the baseline, best first."""
        return [
            (self.tgt_vocab.word_of(i), p) for i, p in self._ranked_candidates(request)
        ]

    def suggest(self, request: SuggestionRequest, with_trace: bool = False) -> SuggestionResult:
        ranked = self._ranked_candidates(request)
        src, left, right = self._encode_request(request)
        if self.energy is None:
            records = [
                CandidateScore(
                    word=self.tgt_vocab.word_of(wid),
                    baseline_prob=prob,
                    baseline_rank=rank,
                    energy=None,
                    final_rank=rank,
                )
                for rank, (wid, prob) in enumerate(ranked, start=1)
            ]
            trace = None
            if with_trace:
                _, mask_trace = self.mask_distribution(request)
                trace = mask_trace.probe_row
            return SuggestionResult(chosen=records[0].word, candidates=records, trace=trace)

        ids = [wid for wid, _ in ranked]
        with torch.no_grad():
            scores = energy_scores(self.energy, ids, src, left, right)
        order = sorted(
            range(len(ids)), key=lambda j: (-float(scores[j]), j)
        )  # j is baseline rank - 1: equal energies fall back to baseline order
        final_rank_of = {j: pos + 1 for pos, j in enumerate(order)}
        records = [
            CandidateScore(
                word=self.tgt_vocab.word_of(wid),
                baseline_prob=prob,
                baseline_rank=j + 1,
                energy=float(scores[j]),
                final_rank=final_rank_of[j],
            )
            for j, (wid, prob) in enumerate(ranked)
        ]
        chosen_id = ids[order[0]]
        trace = self._energy_trace(request, chosen_id) if with_trace else None
        return SuggestionResult(
            chosen=self.tgt_vocab.word_of(chosen_id), candidates=records, trace=trace
        )

    def top1(
        self,
        source: Sequence[str],
        left_ctx: Sequence[str],
        right_ctx: Sequence[str],
        typed: str,
    ) -> str | None:
        """Keystroke-loop adapter: best suggestion or None when nothing matches."""
        try:
            request = SuggestionRequest(
                source=tuple(source),
                left_ctx=tuple(left_ctx),
                right_ctx=tuple(right_ctx),
                typed=typed,
            )
            return self.suggest(request).chosen
        except NoCandidateError:
            return None


def baseline_predict(pipeline: SuggestPipeline, request: SuggestionRequest) -> str:
    """The prefix-matching word maximizing the baseline probability."""
    exhaustive = SuggestionRequest(
        source=request.source,
        left_ctx=request.left_ctx,
        right_ctx=request.right_ctx,
        typed=request.typed,
        k=len(pipeline.tgt_vocab),
        diagnostic=request.diagnostic,
    )
    return pipeline.top_k(exhaustive)[0][0]


def top_k_candidates(pipeline: SuggestPipeline, request: SuggestionRequest) -> list[str]:
    return [w for w, _ in pipeline.top_k(request)]


def rerank(
    pipeline: SuggestPipeline, request: SuggestionRequest, omega: Sequence[str]
) -> SuggestionResult:
    """Energy-score the given candidate pool and pick the argmax.

    `omega` is expected in baseline order (best first); ties in energy break
    toward the better baseline rank.
    """
    if not omega:
        raise NoCandidateError("rerank pool must be non-empty")
    if pipeline.energy is None:
        raise ValueError("rerank requires an energy model")
    probs, _ = pipeline.mask_distribution(request)
    src, left, right = pipeline._encode_request(request)
    ids = [pipeline.tgt_vocab.id_of(w) for w in omega]
    with torch.no_grad():
        scores = energy_scores(pipeline.energy, ids, src, left, right)
    order = sorted(range(len(ids)), key=lambda j: (-float(scores[j]), j))
    final_rank_of = {j: pos + 1 for pos, j in enumerate(order)}
    records = [
        CandidateScore(
            word=omega[j],
            baseline_prob=float(probs[ids[j]]),
            baseline_rank=j + 1,
            energy=float(scores[j]),
            final_rank=final_rank_of[j],
        )
        for j in range(len(ids))
    ]
    return SuggestionResult(chosen=omega[order[0]], candidates=records)


def suggest(pipeline: SuggestPipeline, request: SuggestionRequest) -> SuggestionResult:
    return pipeline.suggest(request)
