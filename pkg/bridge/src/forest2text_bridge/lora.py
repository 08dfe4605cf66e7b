"""Minimal LoRA adapters for T5-style attention projections.

A wrapped projection computes ``base(x) + (alpha / rank) * B(A(dropout(x)))``
with the base weights frozen; only the rank-decomposition matrices train.
``A`` starts from a small normal distribution and ``B`` from zeros, so an
untrained adapter leaves the base model's behaviour unchanged.
"""

from __future__ import annotations

import torch
from torch import nn


class LoRALinear(nn.Module):
    def __init__(self, base: nn.Linear, rank: int, alpha: float, dropout: float):
        super().__init__()
        self.base = base
        self.base.weight.requires_grad_(False)
        if self.base.bias is not None:
            self.base.bias.requires_grad_(False)
        self.lora_a = nn.Linear(base.in_features, rank, bias=False)
        self.lora_b = nn.Linear(rank, base.out_features, bias=False)
        nn.init.normal_(self.lora_a.weight, std=0.02)
        nn.init.zeros_(self.lora_b.weight)
        self.scaling = alpha / rank
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.scaling * self.lora_b(self.lora_a(self.dropout(x)))


def apply_lora(model: nn.Module, rank: int, alpha: float, dropout: float, targets) -> int:
    """Freeze ``model`` and wrap every attention projection named in
    ``targets`` (e.g. ("q", "v")) with a LoRALinear. Returns the number of
    wrapped projections."""
    for parameter in model.parameters():
        parameter.requires_grad_(False)

    wrapped = 0
    for module in model.modules():
        for name in targets:
            child = getattr(module, name, None)
            if isinstance(child, nn.Linear) and not isinstance(child, LoRALinear):
                # only attention blocks carry all four projection attributes
                if all(hasattr(module, p) for p in ("q", "k", "v", "o")):
                    setattr(module, name, LoRALinear(child, rank, alpha, dropout))
                    wrapped += 1
    if wrapped == 0:
        raise ValueError(f"no attention projections named {tuple(targets)} found to adapt")
    return wrapped


def adapter_state_dict(model: nn.Module) -> dict:
    """Only the LoRA matrices, keyed by their full module path."""
    return {
        key: value
        for key, value in model.state_dict().items()
        if ".lora_a." in key or ".lora_b." in key
    }


def load_adapter_state(model: nn.Module, state: dict) -> None:
    missing, unexpected = model.load_state_dict(state, strict=False)
    if unexpected:
        raise ValueError(f"adapter contains unknown tensors: {sorted(unexpected)[:3]}")
    still_missing = [key for key in missing if ".lora_a." in key or ".lora_b." in key]
    if still_missing:
        raise ValueError(f"adapter is missing tensors: {still_missing[:3]}")


def trainable_parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad)
