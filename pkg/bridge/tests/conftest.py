import json
from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def micro_base(tmp_path_factory) -> Path:
    """A from-scratch byte-level T5 small enough for fast CPU tests."""
    from transformers import ByT5Tokenizer, T5Config, T5ForConditionalGeneration

    target = tmp_path_factory.mktemp("micro_base")
    config = T5Config(
        vocab_size=384,
        d_model=64,
        d_kv=16,
        d_ff=128,
        num_layers=2,
        num_decoder_layers=2,
        num_heads=4,
        decoder_start_token_id=0,
        dropout_rate=0.0,
    )
    T5ForConditionalGeneration(config).save_pretrained(target)
    ByT5Tokenizer().save_pretrained(target)
    return target


def corpus_record(i, split="train", prompt=None, output=None, label=0):
    return {
        "id": i,
        "group_id": i,
        "split": split,
        "prompt": prompt or f"state {i % 3}:",
        "output": output or f"f0 {i % 3} > 0. Label: {label}",
        "label": label,
        "tree_index": 0,
    }


@pytest.fixture()
def smoke_corpus(tmp_path) -> Path:
    """A tiny memorisable corpus in the generator's record schema."""
    path = tmp_path / "corpus.jsonl"
    with open(path, "w") as fh:
        for i in range(12):
            fh.write(json.dumps(corpus_record(i, label=i % 2)) + "\n")
        for i in range(12, 15):
            fh.write(json.dumps(corpus_record(i, split="validation", label=i % 2)) + "\n")
        for i in range(15, 18):
            fh.write(json.dumps(corpus_record(i, split="test", label=i % 2)) + "\n")
    return path


@pytest.fixture()
def smoke_prompts(tmp_path) -> Path:
    path = tmp_path / "prompts.jsonl"
    with open(path, "w") as fh:
        for i in (15, 16, 17):
            fh.write(
                json.dumps(
                    {"id": i, "group_id": i, "split": "test", "prompt": f"state {i % 3}:", "label": i % 2}
                )
                + "\n"
            )
    return path
