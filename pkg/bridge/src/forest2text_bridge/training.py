"""Fine-tune a sequence-to-sequence model on a corpus of prompt/output pairs.

With LoRA active only the adapter matrices train and only they are saved;
the base model is referenced by name in the bridge manifest. Without LoRA
the whole model trains and the output directory holds a complete model.
Training loss is logged per epoch and recorded in the manifest, together
with every hyperparameter, so a run is reproducible from the manifest alone.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import torch
from torch.utils.data import DataLoader, Dataset

from .config import BridgeConfig
from .corpus import BridgeError, load_corpus
from .lora import adapter_state_dict, apply_lora, trainable_parameter_count

BRIDGE_MANIFEST = "bridge-manifest.json"
ADAPTER_WEIGHTS = "adapter.pt"


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def load_backbone(name_or_path: str):
    """Tokenizer and model for a hub id or local directory."""
    from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(name_or_path)
        model = AutoModelForSeq2SeqLM.from_pretrained(name_or_path)
    except Exception as exc:
        raise BridgeError(
            f"cannot load base model {name_or_path!r}: {exc}"
        ) from exc
    return tokenizer, model


class _PairDataset(Dataset):
    def __init__(self, records):
        self.records = records

    def __len__(self):
        return len(self.records)

    def __getitem__(self, index):
        record = self.records[index]
        return record["prompt"], record["output"]


def _collate(tokenizer, config: BridgeConfig):
    def fn(batch):
        prompts = [p for p, _ in batch]
        outputs = [o for _, o in batch]
        encoded = tokenizer(
            prompts,
            padding=True,
            truncation=True,
            max_length=config.max_source_length,
            return_tensors="pt",
        )
        targets = tokenizer(
            text_target=outputs,
            padding=True,
            truncation=True,
            max_length=config.max_target_length,
            return_tensors="pt",
        )
        labels = targets["input_ids"]
        labels[labels == tokenizer.pad_token_id] = -100
        encoded["labels"] = labels
        return encoded

    return fn


def _epoch_loss(model, loader, optimizer=None) -> float:
    total, batches = 0.0, 0
    for batch in loader:
        outputs = model(**batch)
        loss = outputs.loss
        if optimizer is not None:
            loss.backward()
            optimizer.step()
            optimizer.zero_grad()
        total += float(loss.detach())
        batches += 1
    return total / max(batches, 1)


def finetune(corpus_path, out_dir, config: BridgeConfig) -> dict:
    """Train on the corpus's train split and save the adapter into
    ``out_dir``. Returns the written bridge manifest."""
    train_records, validation_records = load_corpus(corpus_path)
    torch.manual_seed(config.seed)

    tokenizer, model = load_backbone(config.base_model)
    if config.lora:
        wrapped = apply_lora(
            model,
            config.lora_rank,
            config.lora_alpha,
            config.lora_dropout,
            config.target_projections,
        )
    else:
        wrapped = 0
    model.train()

    generator = torch.Generator().manual_seed(config.seed)
    loader = DataLoader(
        _PairDataset(train_records),
        batch_size=config.batch_size,
        shuffle=True,
        generator=generator,
        collate_fn=_collate(tokenizer, config),
    )
    validation_loader = None
    if validation_records:
        validation_loader = DataLoader(
            _PairDataset(validation_records),
            batch_size=config.batch_size,
            shuffle=False,
            collate_fn=_collate(tokenizer, config),
        )

    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(trainable, lr=config.learning_rate)

    history = []
    try:
        for epoch in range(config.epochs):
            train_loss = _epoch_loss(model, loader, optimizer)
            entry = {"epoch": epoch, "train_loss": train_loss}
            if validation_loader is not None:
                model.eval()
                with torch.no_grad():
                    entry["validation_loss"] = _epoch_loss(model, validation_loader)
                model.train()
            history.append(entry)
            message = f"epoch {epoch}: train_loss={train_loss:.4f}"
            if "validation_loss" in entry:
                message += f" validation_loss={entry['validation_loss']:.4f}"
            print(message, flush=True)
    except RuntimeError as exc:
        if "out of memory" in str(exc).lower():
            raise BridgeError(
                f"out of memory during training; reduce --batch-size "
                f"(currently {config.batch_size}) or --max-source-length"
            ) from exc
        raise

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tokenizer.save_pretrained(out_dir)
    if config.lora:
        torch.save(adapter_state_dict(model), out_dir / ADAPTER_WEIGHTS)
    else:
        model.save_pretrained(out_dir)

    manifest = {
        "format": "bridge-manifest/v1",
        "config": config.to_dict(),
        "corpus": {"path": str(corpus_path), "sha256": _sha256_file(corpus_path)},
        "train_records": len(train_records),
        "validation_records": len(validation_records),
        "adapted_projections": wrapped,
        "trainable_parameters": trainable_parameter_count(model),
        "loss_history": history,
    }
    with open(out_dir / BRIDGE_MANIFEST, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    return manifest
