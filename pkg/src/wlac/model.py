"""Desk-scale transformer backbone shared by the word predictor and the energy scorer.

Two models share one architecture: a bidirectional source encoder and a target
encoder whose blocks run self-attention, then cross-attention to the source,
then a feed-forward layer.  The target input places a probe token between the
left and right context; the word-prediction model probes with ``[MASK]`` and
classifies the probe state over the vocabulary, while the energy model probes
with a concrete candidate word and squashes a learned scoring vector against
the probe state through a sigmoid.  Cross-attention weights are exposed as
traces for alignment analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import nn

DEFAULT_SPECIAL_IDS = frozenset(range(5))


@dataclass(frozen=True)
class ModelConfig:
    src_vocab_size: int
    tgt_vocab_size: int
    d_model: int = 64
    d_ffn: int = 256
    n_heads: int = 4
    n_src_layers: int = 2
    n_tgt_layers: int = 2
    dropout: float = 0.1
    max_len: int = 128

    def __post_init__(self) -> None:
        counts = (
            self.src_vocab_size,
            self.tgt_vocab_size,
            self.d_model,
            self.d_ffn,
            self.n_heads,
            self.n_src_layers,
            self.n_tgt_layers,
            self.max_len,
        )
        if any(c < 1 for c in counts):
            raise ValueError("all model dimensions must be >= 1")
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    def to_json(self) -> dict:
        return {
            "src_vocab_size": self.src_vocab_size,
            "tgt_vocab_size": self.tgt_vocab_size,
            "d_model": self.d_model,
            "d_ffn": self.d_ffn,
            "n_heads": self.n_heads,
            "n_src_layers": self.n_src_layers,
            "n_tgt_layers": self.n_tgt_layers,
            "dropout": self.dropout,
            "max_len": self.max_len,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


@dataclass(frozen=True)
class TargetInput:
    """Target-side token sequence ``c_l ++ [probe] ++ c_r`` with the probe index."""

    tokens: tuple[int, ...]
    probe_position: int

    def __post_init__(self) -> None:
        if not 0 <= self.probe_position < len(self.tokens):
            raise ValueError("probe_position must index into tokens")

    @classmethod
    def build(
        cls, left_ids: Sequence[int], probe_id: int, right_ids: Sequence[int]
    ) -> "TargetInput":
        return cls(
            tokens=(*left_ids, probe_id, *right_ids),
            probe_position=len(left_ids),
        )


@dataclass
class AttentionTrace:
    """Cross-attention weights from target to source positions.

    ``cross_layers[i]`` has shape (n_heads, tgt_len, src_len); ``probe_row`` is
    the mean over heads of the last layer's row at the probe position.
    """

    cross_layers: list[np.ndarray]
    probe_row: np.ndarray


def sinusoidal_encoding(max_len: int, d_model: int) -> torch.Tensor:
    position = torch.arange(max_len, dtype=torch.float32).unsqueeze(1)
    div = torch.exp(
        torch.arange(0, d_model, 2, dtype=torch.float32) * (-math.log(10000.0) / d_model)
    )
    pe = torch.zeros(max_len, d_model)
    pe[:, 0::2] = torch.sin(position * div)
    pe[:, 1::2] = torch.cos(position * div[: pe[:, 1::2].shape[1]])
    return pe


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int, dropout: float):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(
        self,
        query: torch.Tensor,
        memory: torch.Tensor,
        key_padding_mask: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Attend `query` (B, Tq, d) over `memory` (B, Tk, d).

        Returns the attended states and the post-softmax weights
        (B, n_heads, Tq, Tk); every weight row sums to 1.
        """
        bsz, q_len, _ = query.shape
        k_len = memory.shape[1]
        q = self.q_proj(query).view(bsz, q_len, self.n_heads, self.d_head).transpose(1, 2)
        k = self.k_proj(memory).view(bsz, k_len, self.n_heads, self.d_head).transpose(1, 2)
        v = self.v_proj(memory).view(bsz, k_len, self.n_heads, self.d_head).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        if key_padding_mask is not None:
            scores = scores.masked_fill(
                key_padding_mask[:, None, None, :], float("-inf")
            )
        weights = torch.softmax(scores, dim=-1)
        attended = self.dropout(weights) @ v
        attended = attended.transpose(1, 2).reshape(bsz, q_len, -1)
        return self.out_proj(attended), weights


class FeedForward(nn.Module):
    def __init__(self, d_model: int, d_ffn: int, dropout: float):
        super().__init__()
        self.inner = nn.Linear(d_model, d_ffn)
        self.outer = nn.Linear(d_ffn, d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.outer(self.dropout(torch.relu(self.inner(x))))


class SourceLayer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(config.d_model, config.n_heads, config.dropout)
        self.ffn = FeedForward(config.d_model, config.d_ffn, config.dropout)
        self.norm1 = nn.LayerNorm(config.d_model)
        self.norm2 = nn.LayerNorm(config.d_model)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x, pad_mask):
        attended, weights = self.self_attn(x, x, pad_mask)
        x = self.norm1(x + self.dropout(attended))
        x = self.norm2(x + self.dropout(self.ffn(x)))
        return x, weights


class TargetLayer(nn.Module):
    """Encoder block plus a cross-attention layer between self-attention and FFN.

    Self-attention is bidirectional: no causal mask, only padding masks.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(config.d_model, config.n_heads, config.dropout)
        self.cross_attn = MultiHeadAttention(config.d_model, config.n_heads, config.dropout)
        self.ffn = FeedForward(config.d_model, config.d_ffn, config.dropout)
        self.norm1 = nn.LayerNorm(config.d_model)
        self.norm2 = nn.LayerNorm(config.d_model)
        self.norm3 = nn.LayerNorm(config.d_model)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x, src_states, tgt_pad_mask, src_pad_mask):
        attended, self_w = self.self_attn(x, x, tgt_pad_mask)
        x = self.norm1(x + self.dropout(attended))
        attended, cross_w = self.cross_attn(x, src_states, src_pad_mask)
        x = self.norm2(x + self.dropout(attended))
        x = self.norm3(x + self.dropout(self.ffn(x)))
        return x, self_w, cross_w


class Backbone(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.src_embed = nn.Embedding(config.src_vocab_size, config.d_model)
        self.tgt_embed = nn.Embedding(config.tgt_vocab_size, config.d_model)
        self.register_buffer(
            "positions", sinusoidal_encoding(config.max_len, config.d_model), persistent=False
        )
        self.src_layers = nn.ModuleList(SourceLayer(config) for _ in range(config.n_src_layers))
        self.tgt_layers = nn.ModuleList(TargetLayer(config) for _ in range(config.n_tgt_layers))
        self.input_dropout = nn.Dropout(config.dropout)
        self.scale = math.sqrt(config.d_model)
        self.reset_parameters()

    def reset_parameters(self) -> None:
        for embed in (self.src_embed, self.tgt_embed):
            nn.init.normal_(embed.weight, mean=0.0, std=self.config.d_model**-0.5)
        for module in self.modules():
            if isinstance(module, nn.Linear):
                nn.init.xavier_uniform_(module.weight)
                if module.bias is not None:
                    nn.init.zeros_(module.bias)

    def _embed(self, ids: torch.Tensor, table: nn.Embedding) -> torch.Tensor:
        states = table(ids) * self.scale
        states = states + self.positions[: ids.shape[1]].to(states.dtype)
        return self.input_dropout(states)

    def forward_source(
        self, src_ids: torch.Tensor, src_pad_mask: torch.Tensor | None = None
    ) -> tuple[torch.Tensor, list[torch.Tensor]]:
        x = self._embed(src_ids, self.src_embed)
        weights = []
        for layer in self.src_layers:
            x, w = layer(x, src_pad_mask)
            weights.append(w)
        return x, weights

    def forward_target(
        self,
        tgt_ids: torch.Tensor,
        src_states: torch.Tensor,
        tgt_pad_mask: torch.Tensor | None = None,
        src_pad_mask: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, list[torch.Tensor], list[torch.Tensor]]:
        x = self._embed(tgt_ids, self.tgt_embed)
        self_weights, cross_weights = [], []
        for layer in self.tgt_layers:
            x, sw, cw = layer(x, src_states, tgt_pad_mask, src_pad_mask)
            self_weights.append(sw)
            cross_weights.append(cw)
        return x, self_weights, cross_weights


class BaselineWpm(nn.Module):
    """Masked word-prediction model: probe with [MASK], classify over the vocabulary."""

    kind = "baseline"

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.backbone = Backbone(config)
        self.out = nn.Linear(config.d_model, config.tgt_vocab_size, bias=False)
        nn.init.xavier_uniform_(self.out.weight)

    def probe_logits(
        self,
        src_ids: torch.Tensor,
        tgt_ids: torch.Tensor,
        probe_positions: torch.Tensor,
        src_pad_mask: torch.Tensor | None = None,
        tgt_pad_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Vocabulary logits at each sequence's probe position, shape (B, V)."""
        src_states, _ = self.backbone.forward_source(src_ids, src_pad_mask)
        tgt_states, _, _ = self.backbone.forward_target(
            tgt_ids, src_states, tgt_pad_mask, src_pad_mask
        )
        rows = torch.arange(tgt_ids.shape[0], device=tgt_ids.device)
        return self.out(tgt_states[rows, probe_positions])

    def sequence_logits(
        self,
        src_ids: torch.Tensor,
        tgt_ids: torch.Tensor,
        src_pad_mask: torch.Tensor | None = None,
        tgt_pad_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Vocabulary logits at every target position, shape (B, T, V)."""
        src_states, _ = self.backbone.forward_source(src_ids, src_pad_mask)
        tgt_states, _, _ = self.backbone.forward_target(
            tgt_ids, src_states, tgt_pad_mask, src_pad_mask
        )
        return self.out(tgt_states)


class EnergyModel(nn.Module):
    """Energy scorer: probe with a candidate word, squash theta . h through a sigmoid."""

    kind = "energy"

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.backbone = Backbone(config)
        self.theta = nn.Linear(config.d_model, 1, bias=False)
        nn.init.xavier_uniform_(self.theta.weight)

    def zero_head(self) -> None:
        """Start every candidate at score 0.5: no initial ordering bias."""
        with torch.no_grad():
            self.theta.weight.zero_()

    def init_backbone_from(self, other: "BaselineWpm | EnergyModel") -> None:
        self.backbone.load_state_dict(other.backbone.state_dict())

    def probe_scores(
        self,
        src_ids: torch.Tensor,
        tgt_ids: torch.Tensor,
        probe_positions: torch.Tensor,
        src_pad_mask: torch.Tensor | None = None,
        tgt_pad_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Sigmoid energies of each sequence's probe token, shape (B,), in (0, 1)."""
        src_states, _ = self.backbone.forward_source(src_ids, src_pad_mask)
        tgt_states, _, _ = self.backbone.forward_target(
            tgt_ids, src_states, tgt_pad_mask, src_pad_mask
        )
        rows = torch.arange(tgt_ids.shape[0], device=tgt_ids.device)
        return torch.sigmoid(self.theta(tgt_states[rows, probe_positions]).squeeze(-1))


def _check_ids(ids: Sequence[int], vocab_size: int, max_len: int, side: str) -> torch.Tensor:
    if len(ids) == 0:
        raise ValueError(f"{side} sequence must be non-empty")
    if len(ids) > max_len:
        raise ValueError(f"{side} sequence length {len(ids)} exceeds max_len {max_len}")
    if any(i < 0 or i >= vocab_size for i in ids):
        raise ValueError(f"{side} token id out of range for vocab size {vocab_size}")
    return torch.tensor(ids, dtype=torch.long)


def encode_source(model: BaselineWpm | EnergyModel, src_ids: Sequence[int]) -> torch.Tensor:
    """One d_model state per source token, shape (T, d_model)."""
    cfg = model.config
    ids = _check_ids(src_ids, cfg.src_vocab_size, cfg.max_len, "source")
    states, _ = model.backbone.forward_source(ids.unsqueeze(0))
    return states.squeeze(0)


def encode_target(
    model: BaselineWpm | EnergyModel,
    tgt_input: TargetInput,
    src_states: torch.Tensor,
) -> tuple[torch.Tensor, AttentionTrace]:
    """Target states plus the cross-attention trace for a single instance."""
    cfg = model.config
    ids = _check_ids(tgt_input.tokens, cfg.tgt_vocab_size, cfg.max_len, "target")
    states, _, cross = model.backbone.forward_target(ids.unsqueeze(0), src_states.unsqueeze(0))
    layers = [w.squeeze(0).detach().cpu().numpy() for w in cross]
    probe_row = layers[-1][:, tgt_input.probe_position, :].mean(axis=0)
    return states.squeeze(0), AttentionTrace(cross_layers=layers, probe_row=probe_row)


def baseline_logits(model: BaselineWpm, probe_state: torch.Tensor) -> torch.Tensor:
    """Vocabulary logits for one probe state; softmax of these is the word distribution."""
    if probe_state.shape != (model.config.d_model,):
        raise ValueError("probe_state must be a single d_model vector")
    return model.out(probe_state)


def energy_scores(
    model: EnergyModel,
    word_ids: Sequence[int],
    src_ids: Sequence[int],
    left_ids: Sequence[int],
    right_ids: Sequence[int],
    special_ids: frozenset[int] = DEFAULT_SPECIAL_IDS,
) -> torch.Tensor:
    """Batched sigmoid energies for a list of candidate words in one context.

    All candidates share the context, so the K probe sequences have equal
    length and run as one forward pass; results match sequential scoring.
    """
    cfg = model.config
    if not word_ids:
        raise ValueError("word_ids must be non-empty")
    for w in word_ids:
        if w in special_ids:
            raise ValueError(f"candidate id {w} is a special token")
        if not 0 <= w < cfg.tgt_vocab_size:
            raise ValueError(f"candidate id {w} out of range")
    src = _check_ids(src_ids, cfg.src_vocab_size, cfg.max_len, "source")
    probe_pos = len(left_ids)
    seqs = [
        _check_ids((*left_ids, w, *right_ids), cfg.tgt_vocab_size, cfg.max_len, "target")
        for w in word_ids
    ]
    tgt = torch.stack(seqs)
    src_states, _ = model.backbone.forward_source(src.unsqueeze(0))
    src_states = src_states.expand(len(word_ids), -1, -1)
    tgt_states, _, _ = model.backbone.forward_target(tgt, src_states)
    return torch.sigmoid(model.theta(tgt_states[:, probe_pos]).squeeze(-1))


def energy_score(
    model: EnergyModel,
    word_id: int,
    src_ids: Sequence[int],
    left_ids: Sequence[int],
    right_ids: Sequence[int],
    special_ids: frozenset[int] = DEFAULT_SPECIAL_IDS,
) -> float:
    return float(energy_scores(model, [word_id], src_ids, left_ids, right_ids, special_ids)[0])
