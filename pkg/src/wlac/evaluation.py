"""Measurement protocols: accuracy by context type, recall curves, alignment
recall from attention traces, keystroke simulation, and latency reporting."""

from __future__ import annotations

import json
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from .corpus import CORE_CONTEXT_TYPES, ContextType, Vocabulary, WlacInstance
from .inference import (
    DEFAULT_K,
    NoCandidateError,
    SuggestionRequest,
    SuggestPipeline,
)
from .model import TargetInput, encode_source, encode_target


@dataclass
class AccuracyReport:
    per_type: dict[str, float]  # percents
    overall: float

    def to_json(self) -> dict:
        return {"per_type": self.per_type, "overall": self.overall}


def accuracy(
    pipeline: SuggestPipeline, dataset: Sequence[WlacInstance], k: int = DEFAULT_K
) -> AccuracyReport:
    """Percent of instances whose suggestion equals the gold word.

    Overall is the unweighted mean over the four general context types that
    appear in the dataset; the adjacency-constrained settings are reported per
    type only.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    correct: Counter[str] = Counter()
    total: Counter[str] = Counter()
    for inst in dataset:
        total[inst.ctype.value] += 1
        try:
            result = pipeline.suggest(SuggestionRequest.from_instance(inst, k=k))
        except NoCandidateError:
            continue
        if result.chosen == inst.gold:
            correct[inst.ctype.value] += 1
    per_type = {
        name: 100.0 * correct[name] / total[name] for name in sorted(total)
    }
    core = [per_type[t.value] for t in CORE_CONTEXT_TYPES if t.value in per_type]
    overall = sum(core) / len(core) if core else 0.0
    return AccuracyReport(per_type=per_type, overall=overall)


def recall_at_k(
    pipeline: SuggestPipeline, dataset: Sequence[WlacInstance], k_values: Sequence[int]
) -> dict[int, float]:
    """Fraction of instances whose gold word appears in the baseline top-K pool."""
    if not dataset:
        raise ValueError("dataset must be non-empty")
    ks = sorted(set(k_values))
    hits = {k: 0 for k in ks}
    for inst in dataset:
        request = SuggestionRequest.from_instance(inst, k=max(ks))
        try:
            pool = [w for w, _ in pipeline.top_k(request)]
        except NoCandidateError:
            continue
        rank = pool.index(inst.gold) + 1 if inst.gold in pool else None
        for k in ks:
            if rank is not None and rank <= k:
                hits[k] += 1
    return {k: hits[k] / len(dataset) for k in ks}


@dataclass
class AlignmentRecall:
    curve: dict[int, float]
    evaluated: int
    skipped_missing: int

    def to_json(self) -> dict:
        return {
            "curve": {str(k): v for k, v in self.curve.items()},
            "evaluated": self.evaluated,
            "skipped_missing": self.skipped_missing,
        }


def _gold_probe_row(
    pipeline: SuggestPipeline, inst: WlacInstance, probe: str
) -> np.ndarray:
    """Aggregate cross-attention row over source positions for one instance.

    `probe` selects the model: the baseline attends from [MASK]; the energy
    model attends from the gold word itself.
    """
    src, left, right = pipeline._encode_request(
        SuggestionRequest.from_instance(inst)
    )
    if probe == "energy":
        model = pipeline.energy
        probe_id = pipeline.tgt_vocab.id_of(inst.gold)
    else:
        model = pipeline.baseline
        probe_id = pipeline.tgt_vocab.mask_id
    with torch.no_grad():
        states = encode_source(model, src)
        _, trace = encode_target(model, TargetInput.build(left, probe_id, right), states)
    return trace.probe_row


def alignment_recall_at_n(
    pipeline: SuggestPipeline,
    dataset: Sequence[WlacInstance],
    annotations: dict[int, Sequence[int]],
    n_values: Sequence[int],
    probe: str = "auto",
    tie_samples: int = 16,
    seed: int = 0,
) -> AlignmentRecall:
    """Recall of annotated source positions within the top-n attention weights.

    Equal weights are ordered by a seeded random tie-break; each sample ranks
    once and contributes hits for every n, so the curve is monotone.  Instances
    without an annotation are skipped and counted.
    """
    if probe == "auto":
        probe = "energy" if pipeline.energy is not None else "baseline"
    if probe == "energy" and pipeline.energy is None:
        raise ValueError("no energy model loaded")
    ns = sorted(set(n_values))
    rng = np.random.default_rng(seed)
    hits = {n: 0 for n in ns}
    evaluated = 0
    skipped = 0
    for index, inst in enumerate(dataset):
        positions = annotations.get(index)
        if not positions:
            skipped += 1
            continue
        row = _gold_probe_row(pipeline, inst, probe)
        annotated = {p for p in positions if 0 <= p < len(row)}
        if not annotated:
            skipped += 1
            continue
        evaluated += 1
        for _ in range(tie_samples):
            jitter = rng.permutation(len(row))
            ranking = sorted(range(len(row)), key=lambda i: (-row[i], jitter[i]))
            best = min(ranking.index(p) for p in annotated) + 1
            for n in ns:
                if best <= n:
                    hits[n] += 1
    if evaluated == 0:
        raise ValueError("no annotated instances to evaluate")
    return AlignmentRecall(
        curve={n: hits[n] / (evaluated * tie_samples) for n in ns},
        evaluated=evaluated,
        skipped_missing=skipped,
    )


def read_alignment_sidecar(path: str | Path) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out[int(obj["index"])] = [int(p) for p in obj["positions"]]
    return out


def write_alignment_sidecar(annotations: dict[int, Sequence[int]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for index in sorted(annotations):
            fh.write(
                json.dumps({"index": index, "positions": list(annotations[index])}) + "\n"
            )


# ---------------------------------------------------------------------------
# Keystroke simulation
# ---------------------------------------------------------------------------

Topper = Callable[[Sequence[str], Sequence[str], Sequence[str], str], str | None]


@dataclass
class KeystrokeReport:
    total: int
    average: float
    histogram: dict[int, float]
    per_episode: list[int] = field(repr=False, default_factory=list)

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "average": self.average,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


def episode_keystrokes(top1: Topper | str | None, episode: WlacInstance) -> int:
    """Keystrokes to produce one gold word under the reveal-and-accept protocol.

    Characters are revealed left to right; after each keystroke the engine's
    top suggestion is checked, and a match costs one extra acceptance key.
    Never matching (or having no engine) costs the full word length.
    """
    gold = episode.gold
    if top1 is None or top1 == "none":
        return len(gold)
    if top1 == "oracle":
        return 2
    for prefix_len in range(1, len(gold)):
        suggestion = top1(episode.source, episode.left_ctx, episode.right_ctx, gold[:prefix_len])
        if suggestion == gold:
            return prefix_len + 1
    return len(gold)


def keystroke_simulation(
    top1: Topper | str | None, episodes: Sequence[WlacInstance]
) -> KeystrokeReport:
    if not episodes:
        raise ValueError("episodes must be non-empty")
    counts = [episode_keystrokes(top1, ep) for ep in episodes]
    histogram_counts = Counter(counts)
    histogram = {k: v / len(counts) for k, v in histogram_counts.items()}
    return KeystrokeReport(
        total=sum(counts),
        average=sum(counts) / len(counts),
        histogram=histogram,
        per_episode=counts,
    )


# ---------------------------------------------------------------------------
# Latency
# ---------------------------------------------------------------------------


@dataclass
class LatencyReport:
    mean_ms: float
    std_ms: float
    baseline_mean_ms: float
    rerank_mean_ms: float
    overhead_ratio: float
    samples: int

    def to_json(self) -> dict:
        return {
            "mean_ms": self.mean_ms,
            "std_ms": self.std_ms,
            "baseline_mean_ms": self.baseline_mean_ms,
            "rerank_mean_ms": self.rerank_mean_ms,
            "overhead_ratio": self.overhead_ratio,
            "samples": self.samples,
        }


def latency_report(
    pipeline: SuggestPipeline,
    dataset: Sequence[WlacInstance],
    min_samples: int = 200,
    warmup: int = 10,
    k: int = DEFAULT_K,
) -> LatencyReport:
    """Wall-clock per-sample latency at batch size 1, split into the baseline
    retrieval forward and the energy rerank forward."""
    if not dataset:
        raise ValueError("dataset must be non-empty")
    episodes = [dataset[i % len(dataset)] for i in range(max(min_samples, len(dataset)))]
    for inst in dataset[: min(warmup, len(dataset))]:
        try:
            pipeline.suggest(SuggestionRequest.from_instance(inst, k=k))
        except NoCandidateError:
            pass
    base_times: list[float] = []
    rerank_times: list[float] = []
    from .model import energy_scores

    for inst in episodes:
        request = SuggestionRequest.from_instance(inst, k=k)
        try:
            start = time.perf_counter()
            ranked = pipeline._ranked_candidates(request)
            mid = time.perf_counter()
            end = mid
            if pipeline.energy is not None:
                src, left, right = pipeline._encode_request(request)
                with torch.no_grad():
                    energy_scores(pipeline.energy, [w for w, _ in ranked], src, left, right)
                end = time.perf_counter()
        except NoCandidateError:
            continue
        base_times.append((mid - start) * 1e3)
        rerank_times.append((end - mid) * 1e3)
    totals = np.array(base_times) + np.array(rerank_times)
    base_mean = float(np.mean(base_times))
    rerank_mean = float(np.mean(rerank_times))
    return LatencyReport(
        mean_ms=float(np.mean(totals)),
        std_ms=float(np.std(totals)),
        baseline_mean_ms=base_mean,
        rerank_mean_ms=rerank_mean,
        overhead_ratio=float(np.mean(totals) / base_mean) if base_mean > 0 else 1.0,
        samples=len(totals),
    )


@dataclass
class EvalReport:
    accuracy: AccuracyReport
    recall_curve: dict[int, float] | None = None
    alignment: AlignmentRecall | None = None
    keystrokes: KeystrokeReport | None = None
    latency: LatencyReport | None = None

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy.to_json(),
            "recall_at_k": None
            if self.recall_curve is None
            else {str(k): v for k, v in sorted(self.recall_curve.items())},
            "alignment_recall": None if self.alignment is None else self.alignment.to_json(),
            "keystrokes": None if self.keystrokes is None else self.keystrokes.to_json(),
            "latency": None if self.latency is None else self.latency.to_json(),
        }
