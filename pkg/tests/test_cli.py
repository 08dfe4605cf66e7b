import json
import shutil

import pytest

from forest2text.cli import main

from conftest import DATA_DIR


def run(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture()
def iris_csv(tmp_path):
    target = tmp_path / "iris.csv"
    shutil.copy(DATA_DIR / "iris.csv", target)
    return target


@pytest.fixture()
def pipeline(tmp_path, iris_csv):
    """Artifacts of a full split/train/emit run with seed 11."""
    paths = {
        "data": iris_csv,
        "split": tmp_path / "split.json",
        "forest": tmp_path / "forest.json",
        "corpus": tmp_path / "corpus.jsonl",
        "prompts": tmp_path / "prompts.jsonl",
        "manifest": tmp_path / "manifest.json",
    }
    assert run("split", "--data", paths["data"], "--out", paths["split"], "--seed", 11) == 0
    assert (
        run(
            "train",
            "--data", paths["data"],
            "--split", paths["split"],
            "--n-estimators", 25,
            "--out", paths["forest"],
            "--seed", 11,
        )
        == 0
    )
    assert (
        run(
            "emit",
            "--data", paths["data"],
            "--split", paths["split"],
            "--forest", paths["forest"],
            "--out-corpus", paths["corpus"],
            "--out-prompts", paths["prompts"],
            "--out-manifest", paths["manifest"],
            "--seed", 11,
        )
        == 0
    )
    return paths


class TestSplit:
    def test_iris_default_fractions(self, pipeline):
        doc = json.loads(pipeline["split"].read_text())
        counts = {name: doc["partition"].count(name) for name in ("train", "validation", "test")}
        assert counts == {"train": 105, "validation": 15, "test": 30}

    def test_seed_repeat_identical_file(self, tmp_path, iris_csv):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run("split", "--data", iris_csv, "--out", a, "--seed", 4) == 0
        assert run("split", "--data", iris_csv, "--out", b, "--seed", 4) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_bad_fractions_exit_code(self, tmp_path, iris_csv, capsys):
        code = run(
            "split", "--data", iris_csv, "--out", tmp_path / "s.json",
            "--fractions", 0.5, 0.2, 0.2,
        )
        assert code == 1
        assert "sum to 1" in capsys.readouterr().err


class TestTrain:
    def test_forest_file_shape(self, pipeline):
        doc = json.loads(pipeline["forest"].read_text())
        assert doc["format"] == "forest/v1"
        assert len(doc["trees"]) == 25
        assert doc["params"]["max_depth"] == 2

    def test_single_class_train_fails(self, tmp_path, capsys):
        csv = tmp_path / "one.csv"
        csv.write_text("a,label\n" + "".join(f"{i}.0,x\n" for i in range(12)))
        split = tmp_path / "split.json"
        assert run("split", "--data", csv, "--out", split) == 0
        code = run("train", "--data", csv, "--split", split, "--out", tmp_path / "f.json")
        assert code == 1
        assert "single class" in capsys.readouterr().err

    def test_hash_mismatch_detected(self, tmp_path, pipeline):
        (pipeline["data"]).write_text(
            (pipeline["data"]).read_text().replace("5.1", "9.9", 1)
        )
        code = run(
            "train",
            "--data", pipeline["data"],
            "--split", pipeline["split"],
            "--out", tmp_path / "f2.json",
        )
        assert code == 1


class TestEmit:
    def test_manifest_records_chain(self, pipeline):
        doc = json.loads(pipeline["manifest"].read_text())
        assert doc["format"] == "run-manifest/v1"
        for artifact in ("dataset", "split", "forest", "corpus", "prompts"):
            assert "sha256" in doc[artifact]
        assert doc["preprocess"]["range_max"] == 99
        assert len(doc["scaling"]["v_min"]) == 4
        assert doc["stats"]["pairs_emitted"] > 0

    def test_deterministic_corpus(self, tmp_path, pipeline):
        out2 = tmp_path / "corpus2.jsonl"
        assert (
            run(
                "emit",
                "--data", pipeline["data"],
                "--split", pipeline["split"],
                "--forest", pipeline["forest"],
                "--out-corpus", out2,
                "--out-prompts", tmp_path / "p2.jsonl",
                "--out-manifest", tmp_path / "m2.json",
                "--seed", 11,
            )
            == 0
        )
        assert out2.read_bytes() == pipeline["corpus"].read_bytes()

    def test_prompt_count_matches_test_split(self, pipeline):
        lines = pipeline["prompts"].read_text().splitlines()
        assert len(lines) == 30


class TestValidate:
    def test_echo_oracle_all_perfect(self, tmp_path, pipeline, capsys):
        report = tmp_path / "report.csv"
        audit = tmp_path / "audit.jsonl"
        code = run(
            "validate",
            "--inputs", pipeline["corpus"],
            "--data", pipeline["data"],
            "--manifest", pipeline["manifest"],
            "--tag", "iris",
            "--out-report", report,
            "--out-audit", audit,
        )
        assert code == 0
        header, row = report.read_text().splitlines()
        assert header == "ds_name,label_accuracy,statement_accuracy,statement_recall,correct"
        name, label_acc, _stmt_acc, _stmt_rec, correct = row.split(",")
        assert name == "iris"
        assert label_acc == "100.00"
        assert correct == "100.00"
        audits = [json.loads(line) for line in audit.read_text().splitlines()]
        assert all(a["parse_ok"] for a in audits)

    def test_generated_outputs_flow(self, tmp_path, pipeline):
        prompts = [json.loads(l) for l in pipeline["prompts"].read_text().splitlines()]
        outputs = tmp_path / "outputs.jsonl"
        with open(outputs, "w") as fh:
            for record in prompts:
                fh.write(
                    json.dumps(
                        {
                            "id": record["id"],
                            "generated_text": f"petal length (cm) 1.00 <= 2.45. Label: {record['label']}",
                        }
                    )
                    + "\n"
                )
        report = tmp_path / "report.csv"
        code = run(
            "validate",
            "--inputs", outputs,
            "--data", pipeline["data"],
            "--manifest", pipeline["manifest"],
            "--out-report", report,
            "--out-audit", tmp_path / "audit.jsonl",
        )
        assert code == 0
        row = report.read_text().splitlines()[1]
        assert row.split(",")[1] == "100.00"

    def test_output_id_missing_from_prompts_rejected(self, tmp_path, pipeline):
        outputs = tmp_path / "outputs.jsonl"
        outputs.write_text(json.dumps({"id": 99999, "generated_text": "x. Label: 0"}) + "\n")
        code = run(
            "validate",
            "--inputs", outputs,
            "--data", pipeline["data"],
            "--manifest", pipeline["manifest"],
            "--out-report", tmp_path / "r.csv",
            "--out-audit", tmp_path / "a.jsonl",
        )
        assert code == 1

    def test_report_and_audit_byte_deterministic(self, tmp_path, pipeline):
        outputs = {}
        for name in ("a", "b"):
            report = tmp_path / f"{name}.csv"
            audit = tmp_path / f"{name}.jsonl"
            assert (
                run(
                    "validate",
                    "--inputs", pipeline["corpus"],
                    "--data", pipeline["data"],
                    "--manifest", pipeline["manifest"],
                    "--tag", "iris",
                    "--out-report", report,
                    "--out-audit", audit,
                )
                == 0
            )
            outputs[name] = (report.read_bytes(), audit.read_bytes())
        assert outputs["a"] == outputs["b"]

    def test_stale_manifest_detected(self, tmp_path, pipeline):
        # regenerate the split with a different seed: the manifest hash no
        # longer matches, so validation must refuse to run
        assert run("split", "--data", pipeline["data"], "--out", pipeline["split"], "--seed", 99) == 0
        code = run(
            "validate",
            "--inputs", pipeline["corpus"],
            "--data", pipeline["data"],
            "--manifest", pipeline["manifest"],
            "--out-report", tmp_path / "r.csv",
            "--out-audit", tmp_path / "a.jsonl",
        )
        assert code == 1


class TestParse:
    def test_parse_subcommand(self, tmp_path, pipeline):
        out = tmp_path / "parsed.jsonl"
        code = run(
            "parse",
            "--inputs", pipeline["corpus"],
            "--data", pipeline["data"],
            "--out", out,
        )
        assert code == 0
        records = [json.loads(l) for l in out.read_text().splitlines()]
        assert all(r["parse_ok"] for r in records)
        assert all(r["predicates"] for r in records)


class TestCv:
    def test_cv_output_file(self, tmp_path, iris_csv):
        out = tmp_path / "cv.json"
        code = run(
            "cv", "--data", iris_csv, "--folds", 3, "--repeats", 1,
            "--n-estimators", 10, "--out", out,
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert 0.8 < doc["mean_accuracy"] <= 1.0


class TestReport:
    def test_merge_rows(self, tmp_path, pipeline):
        r1 = tmp_path / "r1.csv"
        r2 = tmp_path / "r2.csv"
        for path, tag in ((r1, "iris"), (r2, "wine")):
            assert (
                run(
                    "validate",
                    "--inputs", pipeline["corpus"],
                    "--data", pipeline["data"],
                    "--manifest", pipeline["manifest"],
                    "--tag", tag,
                    "--out-report", path,
                    "--out-audit", tmp_path / f"{tag}.audit.jsonl",
                )
                == 0
            )
        merged = tmp_path / "merged.csv"
        assert run("report", "--inputs", r1, r2, "--out", merged) == 0
        lines = merged.read_text().splitlines()
        assert len(lines) == 3
        assert lines[1].startswith("iris,") and lines[2].startswith("wine,")


class TestConfigFile:
    def test_file_values_applied_and_flags_win(self, tmp_path, iris_csv):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed=42\nfractions=0.6 0.2 0.2\n")
        out = tmp_path / "split.json"
        assert run("--config-file", cfg, "split", "--data", iris_csv, "--out", out) == 0
        doc = json.loads(out.read_text())
        assert doc["seed"] == 42
        assert doc["fractions"] == [0.6, 0.2, 0.2]
        # explicit flag beats the file
        assert (
            run("--config-file", cfg, "split", "--data", iris_csv, "--out", out, "--seed", 1)
            == 0
        )
        assert json.loads(out.read_text())["seed"] == 1

    def test_unknown_config_key_rejected(self, tmp_path, iris_csv):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bogus_key=1\n")
        assert (
            run("--config-file", cfg, "split", "--data", iris_csv, "--out", tmp_path / "s.json")
            == 1
        )


def test_unknown_flag_is_usage_error(iris_csv, tmp_path, capsys):
    assert run("split", "--data", iris_csv, "--out", tmp_path / "s.json", "--bogus") == 1
    capsys.readouterr()
