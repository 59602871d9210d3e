"""Training loops: masked bilingual pretraining, the baseline word predictor,
and the energy reranker with pluggable negative sampling.

All loops are single-threaded, deterministic for a fixed seed, and emit a
JSON-lines metrics log ``{step, loss, lr, val_accuracy_by_type}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .corpus import MASK, SentencePair, Vocabulary, WlacInstance
from .candidates import CandidateTrie, build_trie
from .model import BaselineWpm, EnergyModel, ModelConfig, TargetInput


class TrainingDiverged(RuntimeError):
    """Raised when the loss becomes non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    warmup_steps: int = 200
    batch_tokens: int = 2048
    max_steps: int = 5000
    seed: int = 1
    eval_interval: int = 500
    adam_beta1: float = 0.9
    adam_beta2: float = 0.98
    adam_eps: float = 1e-9

    def __post_init__(self) -> None:
        positive = (
            self.learning_rate,
            self.warmup_steps,
            self.batch_tokens,
            self.eval_interval,
            self.adam_beta1,
            self.adam_beta2,
            self.adam_eps,
        )
        if any(v <= 0 for v in positive) or self.max_steps < 0:
            raise ValueError("train-config values must be positive (max_steps >= 0)")

    def to_json(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "warmup_steps": self.warmup_steps,
            "batch_tokens": self.batch_tokens,
            "max_steps": self.max_steps,
            "seed": self.seed,
            "eval_interval": self.eval_interval,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_eps": self.adam_eps,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        return cls(**obj)


# ---------------------------------------------------------------------------
# Negative sampling strategies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniformRandom:
    k: int = 8

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class BaselineRandom:
    k: int = 8

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class BaselineTopP:
    p: float = 0.9
    cap: int = 64  # bounds the candidate set; the mass threshold alone may not

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")
        if self.cap < 1:
            raise ValueError("cap must be >= 1")


@dataclass(frozen=True)
class BaselineTopK:
    k: int = 8

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


NegativeSamplingStrategy = UniformRandom | BaselineRandom | BaselineTopP | BaselineTopK


def parse_strategy(name: str, k: int = 8, p: float = 0.9, cap: int = 64) -> NegativeSamplingStrategy:
    table = {
        "uniform": UniformRandom(k),
        "baseline_random": BaselineRandom(k),
        "top_p": BaselineTopP(p, cap),
        "top_k": BaselineTopK(k),
    }
    if name not in table:
        raise ValueError(f"unknown negative-sampling strategy {name!r}")
    return table[name]


# ---------------------------------------------------------------------------
# Masked bilingual batches
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CmblmBatch:
    """One masked sentence pair: observed targets plus held-out gold tokens."""

    source: tuple[str, ...]
    observed: tuple[str, ...]
    masked_positions: tuple[int, ...]
    masked_words: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.masked_positions:
            raise ValueError("at least one target token must be masked")
        for pos in self.masked_positions:
            if self.observed[pos] != MASK:
                raise ValueError("observed sequence must carry [MASK] at masked positions")


def mask_targets(pair: SentencePair, ratio: float, rng: np.random.Generator) -> CmblmBatch:
    """Mask each target token independently with probability `ratio`.

    If the coin flips leave everything observed, one position is forced so the
    batch always trains on something.
    """
    if not 0 <= ratio <= 1:
        raise ValueError("ratio must lie in [0, 1]")
    draws = rng.random(len(pair.target)) < ratio
    positions = [i for i, hit in enumerate(draws) if hit]
    if not positions:
        positions = [int(rng.integers(len(pair.target)))]
    observed = list(pair.target)
    masked_words = []
    for pos in positions:
        masked_words.append(observed[pos])
        observed[pos] = MASK
    return CmblmBatch(
        source=pair.source,
        observed=tuple(observed),
        masked_positions=tuple(positions),
        masked_words=tuple(masked_words),
    )


# ---------------------------------------------------------------------------
# Shared loop machinery
# ---------------------------------------------------------------------------


def lr_at(step: int, cfg: TrainConfig) -> float:
    """Inverse-sqrt schedule with linear warmup, peaking at the configured rate."""
    s = max(step, 1)
    return cfg.learning_rate * min(s / cfg.warmup_steps, math.sqrt(cfg.warmup_steps / s))


def _make_optimizer(
    model: torch.nn.Module,
    cfg: TrainConfig,
    head_groups: dict[str, tuple[float, float]] | None = None,
) -> torch.optim.Adam:
    """Adam over one parameter group, or several with per-group lr/decay.

    `head_groups` maps parameter-name prefixes to (lr multiplier, weight
    decay); everything unclaimed trains at the base rate without decay.
    """
    if not head_groups:
        groups = [{"params": list(model.parameters()), "lr_scale": 1.0}]
    else:
        groups = []
        claimed: set[int] = set()
        for prefix, (scale, decay) in head_groups.items():
            params = [p for n, p in model.named_parameters() if n.startswith(prefix)]
            claimed.update(id(p) for p in params)
            groups.append({"params": params, "lr_scale": scale, "weight_decay": decay})
        rest = [p for p in model.parameters() if id(p) not in claimed]
        groups.append({"params": rest, "lr_scale": 1.0})
    return torch.optim.Adam(
        groups,
        lr=cfg.learning_rate,
        betas=(cfg.adam_beta1, cfg.adam_beta2),
        eps=cfg.adam_eps,
    )


def _set_lr(opt: torch.optim.Optimizer, lr: float) -> None:
    for group in opt.param_groups:
        group["lr"] = lr * group.get("lr_scale", 1.0)


class MetricsLog:
    def __init__(self, path: str | Path | None):
        self.records: list[dict] = []
        self._path = Path(path) if path else None
        if self._path:
            self._path.write_text("")

    def emit(self, record: dict) -> None:
        self.records.append(record)
        if self._path:
            with self._path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def _batch_indices(
    n_items: int, tokens_of: Sequence[int], budget: int, rng: np.random.Generator
) -> list[list[int]]:
    """Shuffle items and pack them greedily into batches within a token budget."""
    order = rng.permutation(n_items)
    batches: list[list[int]] = []
    batch: list[int] = []
    used = 0
    for idx in order:
        cost = tokens_of[int(idx)]
        if batch and used + cost > budget:
            batches.append(batch)
            batch, used = [], 0
        batch.append(int(idx))
        used += cost
    if batch:
        batches.append(batch)
    return batches


def pad_batch(seqs: Sequence[Sequence[int]], pad_id: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Right-pad id sequences; returns (ids, pad_mask) with True marking padding."""
    width = max(len(s) for s in seqs)
    ids = torch.full((len(seqs), width), pad_id, dtype=torch.long)
    mask = torch.ones((len(seqs), width), dtype=torch.bool)
    for row, seq in enumerate(seqs):
        ids[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
        mask[row, : len(seq)] = False
    return ids, mask


def _check_finite(loss: torch.Tensor, step: int) -> None:
    if not torch.isfinite(loss):
        raise TrainingDiverged(f"non-finite loss {loss.item()!r} at step {step}")


# ---------------------------------------------------------------------------
# CMBLM pretraining
# ---------------------------------------------------------------------------


def pretrain_cmblm(
    pairs: Sequence[SentencePair],
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    config: ModelConfig,
    train: TrainConfig,
    mask_ratio: float = 0.15,
    log_path: str | Path | None = None,
) -> tuple[BaselineWpm, list[dict]]:
    """Pretrain the shared backbone by predicting masked target tokens.

    Minimizes mean cross-entropy over masked positions only; masks are redrawn
    every epoch.
    """
    if not pairs:
        raise ValueError("pretraining corpus must be non-empty")
    torch.manual_seed(train.seed)
    rng = np.random.default_rng(train.seed)
    model = BaselineWpm(config)
    opt = _make_optimizer(model, train)
    log = MetricsLog(log_path)

    src_encoded = [src_vocab.encode(p.source)[: config.max_len] for p in pairs]
    tgt_tokens = [p.target[: config.max_len] for p in pairs]
    costs = [len(s) + len(t) for s, t in zip(src_encoded, tgt_tokens)]
    mask_id = tgt_vocab.mask_id

    step = 0
    model.train()
    while step < train.max_steps:
        for batch_ids in _batch_indices(len(pairs), costs, train.batch_tokens, rng):
            if step >= train.max_steps:
                break
            srcs, tgts, positions, golds = [], [], [], []
            for idx in batch_ids:
                masked = mask_targets(
                    SentencePair(pairs[idx].source, tuple(tgt_tokens[idx])), mask_ratio, rng
                )
                tgt_ids = tgt_vocab.encode(masked.observed)
                srcs.append(src_encoded[idx])
                tgts.append(tgt_ids)
                positions.append(masked.masked_positions)
                golds.append(tgt_vocab.encode(masked.masked_words))
            src_ids, src_pad = pad_batch(srcs, src_vocab.pad_id)
            tgt_ids, tgt_pad = pad_batch(tgts, tgt_vocab.pad_id)
            logits = model.sequence_logits(src_ids, tgt_ids, src_pad, tgt_pad)
            rows, cols, labels = [], [], []
            for row, (pos, gold) in enumerate(zip(positions, golds)):
                rows.extend([row] * len(pos))
                cols.extend(pos)
                labels.extend(gold)
            loss = torch.nn.functional.cross_entropy(
                logits[rows, cols], torch.tensor(labels, dtype=torch.long)
            )
            _check_finite(loss, step)
            if step % train.eval_interval == 0:
                log.emit(
                    {
                        "step": step,
                        "loss": float(loss.item()),
                        "lr": lr_at(step + 1, train),
                        "val_accuracy_by_type": None,
                    }
                )
            opt.zero_grad()
            loss.backward()
            _set_lr(opt, lr_at(step + 1, train))
            opt.step()
            step += 1
    model.eval()
    if train.max_steps > 0:
        log.emit(
            {
                "step": step,
                "loss": float(loss.item()),
                "lr": lr_at(step, train),
                "val_accuracy_by_type": None,
            }
        )
    return model, log.records


# ---------------------------------------------------------------------------
# Baseline word-prediction training
# ---------------------------------------------------------------------------


def _encode_instance(
    inst: WlacInstance, src_vocab: Vocabulary, tgt_vocab: Vocabulary, max_len: int
) -> tuple[list[int], TargetInput, int]:
    src_ids = src_vocab.encode(inst.source)[:max_len]
    left = tgt_vocab.encode(inst.left_ctx)
    right = tgt_vocab.encode(inst.right_ctx)
    tgt = TargetInput.build(left, tgt_vocab.mask_id, right)
    if len(tgt.tokens) > max_len:
        keep = max_len - 1
        left_keep = min(len(left), keep // 2)
        right_keep = keep - left_keep
        tgt = TargetInput.build(left[-left_keep:] if left_keep else [], tgt_vocab.mask_id, right[:right_keep])
    return src_ids, tgt, tgt_vocab.id_of(inst.gold)


def _validation_accuracy(pipeline, val_dataset, limit: int = 400) -> dict:
    from .evaluation import accuracy

    subset = val_dataset[:limit]
    report = accuracy(pipeline, subset)
    return report.per_type


def train_baseline(
    dataset: Sequence[WlacInstance],
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    config: ModelConfig,
    train: TrainConfig,
    init: BaselineWpm | None = None,
    val_dataset: Sequence[WlacInstance] | None = None,
    trie: CandidateTrie | None = None,
    head_lr_scale: float = 1.0,
    log_path: str | Path | None = None,
) -> tuple[BaselineWpm, list[dict]]:
    """Train the masked word predictor on simulated instances.

    `init` supplies pretrained weights (the pretraining head is architecture-
    compatible, so everything transfers); None starts from random.  When
    fine-tuning a pretrained backbone, `head_lr_scale` > 1 lets the classifier
    adapt to the probe-slot task quickly while the backbone drifts gently and
    keeps what pretraining learned.
    """
    if not dataset:
        raise ValueError("training dataset must be non-empty")
    torch.manual_seed(train.seed)
    rng = np.random.default_rng(train.seed)
    model = BaselineWpm(config)
    if init is not None:
        model.load_state_dict(init.state_dict())
    opt = _make_optimizer(
        model, train, {"out.": (head_lr_scale, 0.0)} if head_lr_scale != 1.0 else None
    )
    log = MetricsLog(log_path)

    encoded = [_encode_instance(i, src_vocab, tgt_vocab, config.max_len) for i in dataset]
    costs = [len(src) + len(tgt.tokens) for src, tgt, _ in encoded]

    pipeline = None
    if val_dataset:
        from .inference import SuggestPipeline

        trie = trie or build_trie(tgt_vocab)
        pipeline = SuggestPipeline(model, src_vocab, tgt_vocab, trie=trie)

    def run_validation() -> dict | None:
        if pipeline is None:
            return None
        model.eval()
        acc = _validation_accuracy(pipeline, val_dataset)
        model.train()
        return acc

    step = 0
    model.train()
    while step < train.max_steps:
        for batch_ids in _batch_indices(len(dataset), costs, train.batch_tokens, rng):
            if step >= train.max_steps:
                break
            srcs = [encoded[i][0] for i in batch_ids]
            tgts = [list(encoded[i][1].tokens) for i in batch_ids]
            probes = torch.tensor([encoded[i][1].probe_position for i in batch_ids])
            golds = torch.tensor([encoded[i][2] for i in batch_ids], dtype=torch.long)
            src_ids, src_pad = pad_batch(srcs, src_vocab.pad_id)
            tgt_ids, tgt_pad = pad_batch(tgts, tgt_vocab.pad_id)
            logits = model.probe_logits(src_ids, tgt_ids, probes, src_pad, tgt_pad)
            loss = torch.nn.functional.cross_entropy(logits, golds)
            _check_finite(loss, step)
            if step % train.eval_interval == 0:
                log.emit(
                    {
                        "step": step,
                        "loss": float(loss.item()),
                        "lr": lr_at(step + 1, train),
                        "val_accuracy_by_type": run_validation(),
                    }
                )
            opt.zero_grad()
            loss.backward()
            _set_lr(opt, lr_at(step + 1, train))
            opt.step()
            step += 1
    model.eval()
    if train.max_steps > 0:
        log.emit(
            {
                "step": step,
                "loss": float(loss.item()),
                "lr": lr_at(step, train),
                "val_accuracy_by_type": run_validation(),
            }
        )
    return model, log.records


# ---------------------------------------------------------------------------
# Negative sampling
# ---------------------------------------------------------------------------


def _baseline_probs(
    baseline: BaselineWpm,
    inst: WlacInstance,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
) -> np.ndarray:
    src_ids, tgt, _ = _encode_instance(inst, src_vocab, tgt_vocab, baseline.config.max_len)
    with torch.no_grad():
        logits = baseline.probe_logits(
            torch.tensor([src_ids]),
            torch.tensor([list(tgt.tokens)]),
            torch.tensor([tgt.probe_position]),
        )
        probs = torch.softmax(logits[0], dim=-1).numpy()
    return probs


def _content_probs(probs: np.ndarray, tgt_vocab: Vocabulary) -> np.ndarray:
    """Zero out special-token mass and renormalize over content words."""
    out = probs.copy()
    for sid in tgt_vocab.special_ids:
        out[sid] = 0.0
    total = out.sum()
    if total <= 0:
        out[len(tgt_vocab.special_ids):] = 1.0
        total = out.sum()
    return out / total


def rank_by_prob(probs: np.ndarray, ids: Sequence[int], vocab: Vocabulary) -> list[int]:
    """Sort ids by descending probability, breaking ties lexicographically."""
    return sorted(ids, key=lambda i: (-probs[i], vocab.word_of(i)))


def sample_negatives(
    inst: WlacInstance,
    strategy: NegativeSamplingStrategy,
    baseline: BaselineWpm | None,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    rng: np.random.Generator | None = None,
) -> list[int]:
    """Draw negative word ids for one instance under the configured strategy.

    Uniform sampling never touches the baseline; the other strategies read its
    predicted distribution with special tokens removed.
    """
    content = tgt_vocab.content_ids()
    if isinstance(strategy, UniformRandom):
        if rng is None:
            raise ValueError("uniform sampling needs a generator")
        draws = rng.integers(0, len(content), size=strategy.k)
        return [content[int(d)] for d in draws]
    if baseline is None:
        raise ValueError(f"{type(strategy).__name__} requires a baseline model")
    probs = _content_probs(_baseline_probs(baseline, inst, src_vocab, tgt_vocab), tgt_vocab)
    if isinstance(strategy, BaselineRandom):
        if rng is None:
            raise ValueError("baseline-random sampling needs a generator")
        draws = rng.choice(len(probs), size=strategy.k, replace=True, p=probs)
        return [int(d) for d in draws]
    ranked = rank_by_prob(probs, content, tgt_vocab)
    if isinstance(strategy, BaselineTopK):
        return ranked[: strategy.k]
    if isinstance(strategy, BaselineTopP):
        out, mass = [], 0.0
        for wid in ranked:
            out.append(wid)
            mass += float(probs[wid])
            if mass >= strategy.p or len(out) >= strategy.cap:
                break
        return out
    raise TypeError(f"unsupported strategy {strategy!r}")


# ---------------------------------------------------------------------------
# Energy objective and training
# ---------------------------------------------------------------------------


def energy_objective(
    model: EnergyModel,
    src_ids: Sequence[int],
    left_ids: Sequence[int],
    right_ids: Sequence[int],
    gold_id: int,
    negative_ids: Sequence[int],
) -> torch.Tensor:
    """Negative-sampling loss: -[S(gold) - log sum_D exp S(v)].

    The denominator set D is the gold plus the deduplicated negatives, so the
    loss is non-negative and zero exactly when D collapses to the gold.  With
    D equal to the whole vocabulary it is the exact negative log-likelihood of
    the normalized energy distribution.
    """
    if len(negative_ids) == 0:
        raise ValueError("negatives must be non-empty")
    seen = {gold_id}
    pool = [gold_id]
    for wid in negative_ids:
        if wid not in seen:
            seen.add(wid)
            pool.append(wid)
    from .model import energy_scores

    scores = energy_scores(model, pool, src_ids, left_ids, right_ids)
    return torch.logsumexp(scores, dim=0) - scores[0]


def _energy_batch_loss(
    model: EnergyModel,
    items: list[tuple[list[int], list[int], list[int], int, list[int]]],
    src_pad: int,
    tgt_pad: int,
) -> torch.Tensor:
    """Mean objective over instances, flattening all candidate probes into one batch."""
    flat_src, flat_tgt, flat_probe = [], [], []
    spans: list[tuple[int, int]] = []
    for src_ids, left, right, gold, negatives in items:
        seen = {gold}
        pool = [gold]
        for wid in negatives:
            if wid not in seen:
                seen.add(wid)
                pool.append(wid)
        start = len(flat_tgt)
        for wid in pool:
            flat_src.append(src_ids)
            flat_tgt.append([*left, wid, *right])
            flat_probe.append(len(left))
        spans.append((start, len(pool)))
    src_ids_t, src_mask = pad_batch(flat_src, src_pad)
    tgt_ids_t, tgt_mask = pad_batch(flat_tgt, tgt_pad)
    scores = model.probe_scores(
        src_ids_t, tgt_ids_t, torch.tensor(flat_probe), src_mask, tgt_mask
    )
    losses = []
    for start, size in spans:
        group = scores[start : start + size]
        losses.append(torch.logsumexp(group, dim=0) - group[0])
    return torch.stack(losses).mean()


def _all_baseline_probs(
    baseline: BaselineWpm,
    encoded: Sequence[tuple[list[int], TargetInput, int]],
    src_pad: int,
    tgt_pad: int,
    tgt_vocab: Vocabulary,
    chunk: int = 256,
) -> np.ndarray:
    """Content-renormalized baseline distributions for every instance, batched."""
    out = np.empty((len(encoded), baseline.config.tgt_vocab_size), dtype=np.float32)
    with torch.no_grad():
        for start in range(0, len(encoded), chunk):
            block = encoded[start : start + chunk]
            src_ids, src_mask = pad_batch([e[0] for e in block], src_pad)
            tgt_ids, tgt_mask = pad_batch([list(e[1].tokens) for e in block], tgt_pad)
            probes = torch.tensor([e[1].probe_position for e in block])
            logits = baseline.probe_logits(src_ids, tgt_ids, probes, src_mask, tgt_mask)
            out[start : start + len(block)] = torch.softmax(logits, dim=-1).numpy()
    for sid in tgt_vocab.special_ids:
        out[:, sid] = 0.0
    out /= out.sum(axis=1, keepdims=True)
    return out


def train_energy(
    dataset: Sequence[WlacInstance],
    baseline: BaselineWpm,
    strategy: NegativeSamplingStrategy,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    config: ModelConfig,
    train: TrainConfig,
    init: BaselineWpm | EnergyModel | str = "random",
    val_dataset: Sequence[WlacInstance] | None = None,
    trie: CandidateTrie | None = None,
    rerank_k: int = 8,
    head_lr_scale: float = 8.0,
    head_weight_decay: float = 0.01,
    log_path: str | Path | None = None,
) -> tuple[EnergyModel, list[dict]]:
    """Train the energy reranker against sampled negatives.

    `init` is "random" or a trained model whose backbone seeds this one (the
    scoring vector then starts at zero).  The frozen baseline's distributions
    are precomputed in one batched pass; deterministic strategies fix their
    negatives once while random strategies redraw every epoch.

    The objective is invariant to a common shift of all candidate scores and
    the sigmoid squashes them into a narrow band, so the scoring vector gets
    its own treatment: `head_lr_scale` times the backbone rate to separate
    candidates sooner, plus `head_weight_decay` to keep the shared component
    of the logits from drifting into sigmoid saturation, where every score
    rounds to the same value and gradients die.
    """
    if not dataset:
        raise ValueError("training dataset must be non-empty")
    torch.manual_seed(train.seed)
    rng = np.random.default_rng(train.seed)
    model = EnergyModel(config)
    if isinstance(init, (BaselineWpm, EnergyModel)):
        model.init_backbone_from(init)
        model.zero_head()
    elif init != "random":
        raise ValueError("init must be 'random' or a model to copy the backbone from")
    opt = _make_optimizer(model, train, {"theta.": (head_lr_scale, head_weight_decay)})
    log = MetricsLog(log_path)

    baseline.eval()
    encoded = [_encode_instance(i, src_vocab, tgt_vocab, config.max_len) for i in dataset]
    golds = [tgt_vocab.id_of(i.gold) for i in dataset]
    content = tgt_vocab.content_ids()

    probs: np.ndarray | None = None
    if not isinstance(strategy, UniformRandom):
        probs = _all_baseline_probs(
            baseline, encoded, src_vocab.pad_id, tgt_vocab.pad_id, tgt_vocab
        )
    fixed: list[list[int]] | None = None
    if isinstance(strategy, (BaselineTopK, BaselineTopP)):
        fixed = []
        for row in probs:
            ranked = rank_by_prob(row, content, tgt_vocab)
            if isinstance(strategy, BaselineTopK):
                fixed.append(ranked[: strategy.k])
            else:
                picked, mass = [], 0.0
                for wid in ranked:
                    picked.append(wid)
                    mass += float(row[wid])
                    if mass >= strategy.p or len(picked) >= strategy.cap:
                        break
                fixed.append(picked)

    def negatives_for(idx: int) -> list[int]:
        if fixed is not None:
            return fixed[idx]
        if isinstance(strategy, UniformRandom):
            draws = rng.integers(0, len(content), size=strategy.k)
            return [content[int(d)] for d in draws]
        draws = rng.choice(len(probs[idx]), size=strategy.k, replace=True, p=probs[idx])
        return [int(d) for d in draws]

    pipeline = None
    if val_dataset:
        from .inference import SuggestPipeline

        trie = trie or build_trie(tgt_vocab)
        pipeline = SuggestPipeline(baseline, src_vocab, tgt_vocab, trie=trie, energy=model)

    def run_validation() -> dict | None:
        if pipeline is None:
            return None
        model.eval()
        acc = _validation_accuracy(pipeline, val_dataset)
        model.train()
        return acc

    # Candidate forwards dominate cost, so budget tokens over probe sequences.
    k_hint = getattr(strategy, "k", getattr(strategy, "cap", 8)) + 1
    costs = [(len(src) + len(tgt.tokens) * k_hint) for src, tgt, _ in encoded]

    step = 0
    model.train()
    while step < train.max_steps:
        for batch_ids in _batch_indices(len(dataset), costs, train.batch_tokens, rng):
            if step >= train.max_steps:
                break
            items = []
            for idx in batch_ids:
                src_ids, tgt, _ = encoded[idx]
                left = list(tgt.tokens[: tgt.probe_position])
                right = list(tgt.tokens[tgt.probe_position + 1 :])
                items.append((src_ids, left, right, golds[idx], negatives_for(idx)))
            loss = _energy_batch_loss(model, items, src_vocab.pad_id, tgt_vocab.pad_id)
            _check_finite(loss, step)
            if step % train.eval_interval == 0:
                log.emit(
                    {
                        "step": step,
                        "loss": float(loss.item()),
                        "lr": lr_at(step + 1, train),
                        "val_accuracy_by_type": run_validation(),
                    }
                )
            opt.zero_grad()
            loss.backward()
            _set_lr(opt, lr_at(step + 1, train))
            opt.step()
            step += 1
    model.eval()
    if train.max_steps > 0:
        log.emit(
            {
                "step": step,
                "loss": float(loss.item()),
                "lr": lr_at(step, train),
                "val_accuracy_by_type": run_validation(),
            }
        )
    return model, log.records
