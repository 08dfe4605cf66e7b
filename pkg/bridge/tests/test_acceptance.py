"""End-to-end acceptance for the bridge.

Both tests drive the corpus generator strictly through its command-line
interface and file formats: split, train, emit, then finetune/generate here,
then validate back in the generator. The reference-recipe test needs the
pretrained base model and therefore skips, with the blocking analysis, when
the model hub is unreachable; the small-model test runs fully offline with a
from-scratch byte-level backbone and checks the same file contract and
report shape.
"""

import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from forest2text_bridge.config import BridgeConfig
from forest2text_bridge.corpus import BridgeError
from forest2text_bridge.generation import generate
from forest2text_bridge.training import finetune, load_backbone

REPO_DATA = Path(__file__).resolve().parents[2] / "data" / "iris.csv"

GENERATOR_CLI = shutil.which("forest2text")

pytestmark = pytest.mark.skipif(
    GENERATOR_CLI is None or not REPO_DATA.exists(),
    reason="needs the corpus-generator CLI and the vendored iris fixture",
)


def run_generator(*argv):
    result = subprocess.run(
        [GENERATOR_CLI, *map(str, argv)], capture_output=True, text=True
    )
    assert result.returncode == 0, result.stderr
    return result.stdout


def emit_iris_corpus(workdir: Path) -> dict:
    paths = {
        "split": workdir / "split.json",
        "forest": workdir / "forest.json",
        "corpus": workdir / "corpus.jsonl",
        "prompts": workdir / "prompts.jsonl",
        "manifest": workdir / "manifest.json",
    }
    run_generator("split", "--data", REPO_DATA, "--out", paths["split"], "--seed", 7)
    run_generator(
        "train", "--data", REPO_DATA, "--split", paths["split"],
        "--out", paths["forest"], "--seed", 7,
    )
    run_generator(
        "emit", "--data", REPO_DATA, "--split", paths["split"], "--forest", paths["forest"],
        "--integer-normalisation", "--verbal-description", "--relation-encoding",
        "--out-corpus", paths["corpus"], "--out-prompts", paths["prompts"],
        "--out-manifest", paths["manifest"], "--seed", 7,
    )
    return paths


def validate_outputs(workdir: Path, paths: dict, outputs: Path) -> dict:
    report = workdir / "report.csv"
    run_generator(
        "validate", "--inputs", outputs, "--data", REPO_DATA,
        "--manifest", paths["manifest"], "--tag", "iris",
        "--out-report", report, "--out-audit", workdir / "audit.jsonl",
    )
    with open(report) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    return {key: float(value) if key != "ds_name" else value for key, value in rows[0].items()}


def reference_model_available() -> tuple[bool, str]:
    try:
        load_backbone(BridgeConfig().base_model)
        return True, ""
    except BridgeError as exc:
        return False, str(exc)


class TestReferenceRecipe:
    def test_recipe_on_iris_meets_sanity_bands(self, tmp_path):
        available, detail = reference_model_available()
        if not available:
            pytest.skip(
                "blocked by environment: the pretrained base model cannot be "
                "loaded here (the model hub does not resolve from this sandbox "
                "and the weights are not cached). The recipe itself (LoRA rank "
                "32, alpha 32, dropout 0.05 on q/v, lr 1e-3, 150 epochs, 6 "
                "beams in 2 groups, diversity 0.5, temperature 0.5) is "
                "implemented and unit-tested; rerun on a networked machine to "
                f"execute this test. Loader said: {detail[:200]}"
            )
        paths = emit_iris_corpus(tmp_path)
        finetune(paths["corpus"], tmp_path / "adapter", BridgeConfig(seed=0))
        outputs = tmp_path / "outputs.jsonl"
        generate(paths["prompts"], tmp_path / "adapter", outputs)
        row = validate_outputs(tmp_path, paths, outputs)
        assert row["correct"] >= 95.0
        assert row["label_accuracy"] >= 85.0
        print(
            f"ACCEPTANCE bridge reference recipe: PASS ({row})", flush=True
        )


class TestSmallModelEndToEnd:
    """Offline surrogate: a from-scratch byte-level backbone trained long
    enough to master the output format. Verifies the full file contract and
    the report shape; the reference-recipe accuracy bands stay with the test
    above."""

    def build_backbone(self, target: Path) -> None:
        import torch
        from transformers import ByT5Tokenizer, T5Config, T5ForConditionalGeneration

        torch.manual_seed(0)
        config = T5Config(
            vocab_size=384,
            d_model=128,
            d_kv=32,
            d_ff=256,
            num_layers=3,
            num_decoder_layers=3,
            num_heads=4,
            decoder_start_token_id=0,
            dropout_rate=0.0,
        )
        T5ForConditionalGeneration(config).save_pretrained(target)
        ByT5Tokenizer().save_pretrained(target)

    def test_pipeline_report_shape_and_parse_rate(self, tmp_path):
        paths = emit_iris_corpus(tmp_path)
        backbone = tmp_path / "backbone"
        self.build_backbone(backbone)
        manifest = finetune(
            paths["corpus"],
            tmp_path / "model",
            BridgeConfig(
                base_model=str(backbone),
                lora=False,
                epochs=60,
                batch_size=16,
                # covers the whole feature fragment; the footer tail may truncate
                max_source_length=208,
                learning_rate=1e-3,
                seed=0,
            ),
        )
        history = manifest["loss_history"]
        assert history[-1]["train_loss"] < 0.2 < history[0]["train_loss"]

        outputs = tmp_path / "outputs.jsonl"
        count = generate(
            paths["prompts"],
            tmp_path / "model",
            outputs,
            overrides={"max_new_tokens": 200},
        )
        prompts = [json.loads(l) for l in open(paths["prompts"], encoding="utf-8")]
        assert count == len(prompts) == 30

        row = validate_outputs(tmp_path, paths, outputs)
        assert row["ds_name"] == "iris(IN+VN)"
        for column in ("label_accuracy", "statement_accuracy", "statement_recall", "correct"):
            assert 0.0 <= row[column] <= 100.0
        assert row["correct"] >= 95.0
        assert row["statement_accuracy"] > 0.0
        assert row["statement_recall"] > 0.0
        print(f"ACCEPTANCE bridge small-model end-to-end: PASS ({row})", flush=True)
