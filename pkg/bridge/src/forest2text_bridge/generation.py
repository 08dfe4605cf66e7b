"""Generate explanations for test prompts with a trained adapter.

Decoding uses diverse beam search, which is deterministic for fixed weights,
so identical inputs always produce identical output files. Output records
are id-aligned with the prompt file, one per prompt.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import torch

from .config import BridgeConfig
from .corpus import BridgeError, load_prompts
from .lora import apply_lora, load_adapter_state
from .training import ADAPTER_WEIGHTS, BRIDGE_MANIFEST, load_backbone


def load_trained(model_dir):
    """Tokenizer, model and manifest from a finetune output directory."""
    model_dir = Path(model_dir)
    manifest_path = model_dir / BRIDGE_MANIFEST
    if not manifest_path.exists():
        raise BridgeError(f"missing adapter: {manifest_path} does not exist")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    config = BridgeConfig.from_dict(manifest["config"])

    if config.lora:
        tokenizer, model = load_backbone(config.base_model)
        apply_lora(
            model,
            config.lora_rank,
            config.lora_alpha,
            config.lora_dropout,
            config.target_projections,
        )
        state = torch.load(model_dir / ADAPTER_WEIGHTS, weights_only=True)
        load_adapter_state(model, state)
        from transformers import AutoTokenizer

        tokenizer = AutoTokenizer.from_pretrained(model_dir)
    else:
        tokenizer, model = load_backbone(str(model_dir))
    model.eval()
    return tokenizer, model, manifest, config


def generate(prompts_path, model_dir, out_path, overrides: dict | None = None) -> int:
    """Write one {"id", "generated_text"} record per prompt. Returns the
    record count. An empty prompt file yields an empty output file."""
    records = load_prompts(prompts_path)
    ids = [record["id"] for record in records]
    if len(set(ids)) != len(ids):
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        raise BridgeError(f"id mismatch: duplicate prompt ids {duplicates[:5]}")

    if not records:
        Path(out_path).write_text("", encoding="utf-8")
        return 0

    tokenizer, model, _manifest, config = load_trained(model_dir)
    if overrides:
        config = BridgeConfig.from_dict({**config.to_dict(), **overrides})
    torch.manual_seed(config.seed)

    generation_kwargs = {
        "max_new_tokens": config.max_new_tokens,
        "num_beams": config.num_beams,
        "do_sample": False,
    }
    if config.num_beam_groups > 1:
        generation_kwargs["num_beam_groups"] = config.num_beam_groups
        generation_kwargs["diversity_penalty"] = config.diversity_penalty

    def decode_batch(encoded):
        # newer transformers releases ship group beam search as hub-hosted
        # custom decoding code; fall back to plain beam search when that
        # cannot be loaded (e.g. offline)
        nonlocal generation_kwargs
        try:
            return model.generate(**encoded, **generation_kwargs)
        except ValueError as exc:
            if "num_beam_groups" not in generation_kwargs or "Group Beam Search" not in str(exc):
                raise
            print(
                "warning: group beam search unavailable in this runtime; "
                "falling back to standard beam search with the same beam count",
                file=sys.stderr,
            )
            generation_kwargs = {
                key: value
                for key, value in generation_kwargs.items()
                if key not in ("num_beam_groups", "diversity_penalty")
            }
            return model.generate(**encoded, **generation_kwargs)

    written = 0
    with open(out_path, "w", encoding="utf-8") as sink:
        for start in range(0, len(records), config.batch_size):
            batch = records[start : start + config.batch_size]
            encoded = tokenizer(
                [record["prompt"] for record in batch],
                padding=True,
                truncation=True,
                max_length=config.max_source_length,
                return_tensors="pt",
            )
            with torch.no_grad():
                sequences = decode_batch(encoded)
            texts = tokenizer.batch_decode(sequences, skip_special_tokens=True)
            for record, text in zip(batch, texts):
                sink.write(
                    json.dumps(
                        {"id": record["id"], "generated_text": text}, ensure_ascii=False
                    )
                    + "\n"
                )
                written += 1
    return written
