"""Finite-difference verification of analytic gradients for every training loss.

Each named case builds a tiny 64-bit model, evaluates one loss, and compares
backpropagated gradients against central differences parameter by parameter.
Dropout is inactive during checking so the loss is a deterministic function of
the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import torch

from .model import BaselineWpm, EnergyModel, ModelConfig

CASES = (
    "linear_squared_error",
    "baseline_cross_entropy",
    "cmblm_cross_entropy",
    "energy_objective",
)

_TINY = dict(d_model=8, d_ffn=16, n_heads=2, n_src_layers=1, n_tgt_layers=1, dropout=0.0, max_len=32)


@dataclass
class GradCheckReport:
    case: str
    per_group: dict[str, float]
    max_rel_error: float
    tolerance: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "case": self.case,
            "per_group": self.per_group,
            "max_rel_error": self.max_rel_error,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def _rel_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)


def _case_linear(seed: int) -> tuple[torch.nn.Module, Callable[[], torch.Tensor]]:
    torch.manual_seed(seed)
    layer = torch.nn.Linear(6, 4).double()
    x = torch.randn(3, 6, dtype=torch.float64)
    target = torch.randn(3, 4, dtype=torch.float64)

    def loss() -> torch.Tensor:
        return ((layer(x) - target) ** 2).sum()

    return layer, loss


def _tiny_config(src_vocab: int = 12, tgt_vocab: int = 12) -> ModelConfig:
    return ModelConfig(src_vocab_size=src_vocab, tgt_vocab_size=tgt_vocab, **_TINY)


def _case_baseline(seed: int) -> tuple[torch.nn.Module, Callable[[], torch.Tensor]]:
    torch.manual_seed(seed)
    model = BaselineWpm(_tiny_config()).double()
    model.eval()
    src = torch.tensor([[5, 7, 9, 6, 11]])
    tgt = torch.tensor([[8, 2, 10]])  # left word, [MASK] probe, right word
    probe = torch.tensor([1])
    gold = torch.tensor([7])

    def loss() -> torch.Tensor:
        logits = model.probe_logits(src, tgt, probe)
        return torch.nn.functional.cross_entropy(logits, gold)

    return model, loss


def _case_cmblm(seed: int) -> tuple[torch.nn.Module, Callable[[], torch.Tensor]]:
    torch.manual_seed(seed)
    model = BaselineWpm(_tiny_config()).double()
    model.eval()
    src = torch.tensor([[6, 9, 5, 10]])
    tgt = torch.tensor([[7, 2, 8, 2, 11]])  # two masked slots
    positions = [1, 3]
    golds = torch.tensor([9, 5])

    def loss() -> torch.Tensor:
        logits = model.sequence_logits(src, tgt)
        return torch.nn.functional.cross_entropy(logits[0, positions], golds)

    return model, loss


def _case_energy(seed: int) -> tuple[torch.nn.Module, Callable[[], torch.Tensor]]:
    torch.manual_seed(seed)
    model = EnergyModel(_tiny_config()).double()
    model.eval()
    src = torch.tensor([[5, 8, 10, 7]])
    left, right = [6], [9]
    pool = [7, 5, 11, 10]  # gold first, then three sampled negatives

    def loss() -> torch.Tensor:
        tgt = torch.tensor([[*left, w, *right] for w in pool])
        probe = torch.full((len(pool),), len(left), dtype=torch.long)
        scores = model.probe_scores(src.expand(len(pool), -1), tgt, probe)
        return torch.logsumexp(scores, dim=0) - scores[0]

    return model, loss


_BUILDERS = {
    "linear_squared_error": _case_linear,
    "baseline_cross_entropy": _case_baseline,
    "cmblm_cross_entropy": _case_cmblm,
    "energy_objective": _case_energy,
}


def grad_check(
    case: str,
    epsilon: float = 1e-5,
    tolerance: float = 1e-4,
    seed: int = 0,
    max_entries_per_param: int | None = None,
) -> GradCheckReport:
    """Compare analytic gradients with central finite differences at 64 bits.

    Reports the max relative error per parameter group; a non-finite loss is
    an immediate failure.  ``max_entries_per_param`` subsamples large tensors
    with a seeded choice; None checks every entry.
    """
    if case not in _BUILDERS:
        raise ValueError(f"unknown case {case!r}; choose from {CASES}")
    module, loss_fn = _BUILDERS[case](seed)

    value = loss_fn()
    if not torch.isfinite(value):
        raise FloatingPointError(f"loss is non-finite for case {case!r}")
    module.zero_grad()
    value.backward()
    analytic = {
        name: p.grad.detach().clone() for name, p in module.named_parameters() if p.grad is not None
    }

    rng = np.random.default_rng(seed)
    per_group: dict[str, float] = {}
    with torch.no_grad():
        for name, param in module.named_parameters():
            flat = param.view(-1)
            grad_flat = analytic[name].view(-1)
            indices = range(flat.numel())
            if max_entries_per_param is not None and flat.numel() > max_entries_per_param:
                indices = rng.choice(flat.numel(), size=max_entries_per_param, replace=False)
            worst = 0.0
            for idx in indices:
                idx = int(idx)
                original = flat[idx].item()
                flat[idx] = original + epsilon
                plus = loss_fn().item()
                flat[idx] = original - epsilon
                minus = loss_fn().item()
                flat[idx] = original
                numeric = (plus - minus) / (2.0 * epsilon)
                worst = max(worst, _rel_error(grad_flat[idx].item(), numeric))
            per_group[name] = worst
    max_err = max(per_group.values())
    return GradCheckReport(
        case=case,
        per_group=per_group,
        max_rel_error=max_err,
        tolerance=tolerance,
        passed=max_err < tolerance,
    )
