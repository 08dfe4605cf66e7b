import json

import pytest
import torch

from forest2text_bridge.config import BridgeConfig
from forest2text_bridge.corpus import BridgeError
from forest2text_bridge.training import ADAPTER_WEIGHTS, BRIDGE_MANIFEST, finetune


def smoke_config(micro_base, **overrides) -> BridgeConfig:
    defaults = dict(
        base_model=str(micro_base),
        lora=True,
        lora_rank=4,
        lora_alpha=8.0,
        lora_dropout=0.0,
        learning_rate=1e-3,
        epochs=3,
        batch_size=4,
        max_source_length=64,
        max_target_length=48,
        seed=1,
    )
    defaults.update(overrides)
    return BridgeConfig(**defaults)


def test_loss_decreases_and_artifacts_written(tmp_path, micro_base, smoke_corpus):
    out_dir = tmp_path / "adapter"
    manifest = finetune(smoke_corpus, out_dir, smoke_config(micro_base, epochs=6))
    history = manifest["loss_history"]
    assert len(history) == 6
    assert history[-1]["train_loss"] < history[0]["train_loss"]
    assert all("validation_loss" in entry for entry in history)
    assert (out_dir / ADAPTER_WEIGHTS).exists()
    assert (out_dir / BRIDGE_MANIFEST).exists()
    stored = json.loads((out_dir / BRIDGE_MANIFEST).read_text())
    assert stored["config"]["lora_rank"] == 4
    assert stored["train_records"] == 12
    assert stored["corpus"]["sha256"]


def test_zero_epochs_keeps_adapter_at_initialisation(tmp_path, micro_base, smoke_corpus):
    out_dir = tmp_path / "adapter0"
    manifest = finetune(smoke_corpus, out_dir, smoke_config(micro_base, epochs=0))
    assert manifest["loss_history"] == []
    state = torch.load(out_dir / ADAPTER_WEIGHTS, weights_only=True)
    b_matrices = [v for k, v in state.items() if ".lora_b." in k]
    assert b_matrices
    assert all(torch.all(v == 0) for v in b_matrices)


def test_schema_mismatch_surfaces(tmp_path, micro_base):
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps({"id": 0, "prompt": "p"}) + "\n")
    with pytest.raises(BridgeError, match="schema mismatch"):
        finetune(bad, tmp_path / "out", smoke_config(micro_base))


def test_full_finetune_saves_complete_model(tmp_path, micro_base, smoke_corpus):
    out_dir = tmp_path / "full"
    manifest = finetune(smoke_corpus, out_dir, smoke_config(micro_base, lora=False, epochs=1))
    assert (out_dir / "config.json").exists()
    assert not (out_dir / ADAPTER_WEIGHTS).exists()
    assert manifest["adapted_projections"] == 0


def test_unloadable_base_model_is_bridge_error(tmp_path, smoke_corpus):
    with pytest.raises(BridgeError, match="cannot load base model"):
        finetune(
            smoke_corpus,
            tmp_path / "out",
            BridgeConfig(base_model=str(tmp_path / "nonexistent"), epochs=1),
        )


def test_deterministic_adapter_for_fixed_seed(tmp_path, micro_base, smoke_corpus):
    state = []
    for name in ("a", "b"):
        out_dir = tmp_path / name
        finetune(smoke_corpus, out_dir, smoke_config(micro_base, epochs=2, seed=9))
        state.append(torch.load(out_dir / ADAPTER_WEIGHTS, weights_only=True))
    assert state[0].keys() == state[1].keys()
    for key in state[0]:
        assert torch.equal(state[0][key], state[1][key])
