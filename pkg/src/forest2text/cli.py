"""Command-line pipeline: split, train, emit, validate, cv, parse, report.

All stages are manifest-driven and reproducible: one base seed determines
every random draw, and artifact hashes are verified across stages. Exit
codes: 0 success, 1 input error, 2 internal failure.

Flags can also come from a plain key=value file (--config-file); explicit
flags win over file entries.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import manifest as mf
from .dataset import DatasetError, SplitAssignment, SplitError, grouped_stratified_split, load_csv
from .forest import ForestParams, cross_validate, fit_forest, load_forest, save_forest
from .preprocess import (
    PreprocessConfig,
    QUANTILES,
    ScalingParams,
    fit_percentiles,
    fit_scaling,
)
from .ruleparse import ParseFailure, parse_output
from .serialize import emit_corpus, emit_prompts
from .validate import aggregate_report, report_csv, score_text, undefined_counts

USAGE_ERROR = 1
INTERNAL_ERROR = 2


def _write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def _read_jsonl(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {line_no} is not valid JSON: {exc}") from None
    return records


def _load_split(path) -> tuple[dict, SplitAssignment]:
    doc = mf.read_json(path)
    if doc.get("format") != mf.SPLIT_FORMAT:
        raise ValueError(f"{path}: unsupported split format {doc.get('format')!r}")
    return doc, SplitAssignment(partition=tuple(doc["partition"]), seed=int(doc["seed"]))


def _preprocess_config(args) -> PreprocessConfig:
    return PreprocessConfig(
        integer_normalisation=args.integer_normalisation,
        verbal_description=args.verbal_description,
        relation_encoding=args.relation_encoding,
        range_min=args.range_min,
        range_max=args.range_max,
    )


def _forest_params(args) -> ForestParams:
    return ForestParams(
        n_estimators=args.n_estimators,
        max_depth=args.max_depth,
        max_features=args.max_features,
        bootstrap=not args.no_bootstrap,
    )


def cmd_split(args) -> int:
    dataset = load_csv(args.data)
    # Before corpus generation each example is its own group; pairs inherit
    # the example's partition through their group_id.
    assignment = grouped_stratified_split(
        dataset,
        group_ids=list(range(dataset.n_examples)),
        fractions=tuple(args.fractions),
        seed=args.seed,
    )
    doc = {
        "format": mf.SPLIT_FORMAT,
        "seed": args.seed,
        "fractions": list(args.fractions),
        "dataset": mf.artifact_ref(args.data),
        "partition": list(assignment.partition),
    }
    mf.write_json(args.out, doc)
    counts = assignment.counts()
    print(
        f"wrote {args.out}: "
        + ", ".join(f"{name}={counts[name]}" for name in ("train", "validation", "test"))
    )
    return 0


def cmd_train(args) -> int:
    dataset = load_csv(args.data)
    split_doc, assignment = _load_split(args.split)
    mf.verify_artifact(split_doc["dataset"], args.data, "dataset")
    train = dataset.subset(assignment.indices("train"))
    forest = fit_forest(train, _forest_params(args), args.seed)
    save_forest(
        forest,
        args.out,
        extra={
            "provenance": {
                "dataset": mf.artifact_ref(args.data),
                "split": mf.artifact_ref(args.split),
            }
        },
    )
    depths = [tree.depth for tree in forest.trees]
    print(
        f"wrote {args.out}: {len(forest.trees)} trees, depth<= {max(depths)}, "
        f"trained on {train.n_examples} examples"
    )
    return 0


def cmd_emit(args) -> int:
    dataset = load_csv(args.data)
    split_doc, assignment = _load_split(args.split)
    mf.verify_artifact(split_doc["dataset"], args.data, "dataset")
    forest_doc = mf.read_json(args.forest)
    provenance = forest_doc.get("provenance", {})
    if "dataset" in provenance:
        mf.verify_artifact(provenance["dataset"], args.data, "dataset")
    if "split" in provenance:
        mf.verify_artifact(provenance["split"], args.split, "split")
    forest = load_forest(args.forest)

    train = dataset.subset(assignment.indices("train"))
    scaling = fit_scaling(train)
    bins = fit_percentiles(train)
    config = _preprocess_config(args)

    with open(args.out_corpus, "w", encoding="utf-8") as sink:
        stats = emit_corpus(
            dataset, assignment, forest, scaling, bins, config, args.n_trees, args.seed, sink
        )
    with open(args.out_prompts, "w", encoding="utf-8") as sink:
        n_prompts = emit_prompts(dataset, assignment, scaling, bins, config, sink, split="test")

    doc = {
        "format": mf.MANIFEST_FORMAT,
        "seed": args.seed,
        "n_trees": args.n_trees,
        "preprocess": config.to_dict(),
        "dataset": mf.artifact_ref(args.data),
        "split": mf.artifact_ref(args.split),
        "forest": mf.artifact_ref(args.forest),
        "corpus": mf.artifact_ref(args.out_corpus),
        "prompts": mf.artifact_ref(args.out_prompts),
        "scaling": {"v_min": scaling.v_min.tolist(), "v_max": scaling.v_max.tolist()},
        "percentile_bins": {"quantiles": list(QUANTILES), "cuts": bins.cuts.tolist()},
        "stats": stats.to_dict(),
        "notes": {
            "statement_recall": "averaged per output",
            "validation_space": "scaled" if config.integer_normalisation else "raw",
            "footer_mirrors_config": True,
        },
    }
    mf.write_json(args.out_manifest, doc)
    print(
        f"wrote {args.out_corpus}: {stats.pairs_emitted} pairs covering "
        f"{stats.examples_covered} examples ({stats.examples_without_paths} without a correct path); "
        f"{n_prompts} test prompts -> {args.out_prompts}"
    )
    return 0


def _scored_records(records, dataset, assignment, manifest_doc):
    config = PreprocessConfig.from_dict(manifest_doc["preprocess"])
    scaling = ScalingParams(
        v_min=np.array(manifest_doc["scaling"]["v_min"]),
        v_max=np.array(manifest_doc["scaling"]["v_max"]),
    )
    train = dataset.subset(assignment.indices("train"))

    prompt_labels = None
    if any("generated_text" in r for r in records):
        prompts = _read_jsonl(manifest_doc["prompts"]["path"])
        mf.verify_artifact(manifest_doc["prompts"], manifest_doc["prompts"]["path"], "prompts")
        prompt_labels = {int(r["id"]): int(r["label"]) for r in prompts}

    scored = []
    for record in records:
        record_id = int(record["id"])
        if "generated_text" in record:
            if record_id not in prompt_labels:
                raise ValueError(f"output id {record_id} does not exist in the prompt file")
            text = record["generated_text"]
            true_label = prompt_labels[record_id]
        elif "output" in record:
            text = record["output"]
            true_label = int(record["label"])
        else:
            raise ValueError(f"record {record_id} has neither 'generated_text' nor 'output'")
        scored.append(score_text(record_id, text, true_label, train, config, scaling))
    return scored, config


def cmd_validate(args) -> int:
    dataset = load_csv(args.data)
    manifest_doc = mf.read_json(args.manifest)
    if manifest_doc.get("format") != mf.MANIFEST_FORMAT:
        raise ValueError(f"{args.manifest}: unsupported manifest format")
    mf.verify_artifact(manifest_doc["dataset"], args.data, "dataset")
    split_doc, assignment = _load_split(manifest_doc["split"]["path"])
    mf.verify_artifact(manifest_doc["split"], manifest_doc["split"]["path"], "split")

    records = _read_jsonl(args.inputs)
    if not records:
        raise ValueError(f"{args.inputs}: no records to validate")
    scored, config = _scored_records(records, dataset, assignment, manifest_doc)

    base = args.tag or Path(args.data).stem
    tag = f"{base}({config.tag()})" if config.tag() else base
    row = aggregate_report(scored, tag)
    with open(args.out_report, "w", encoding="utf-8") as fh:
        fh.write(report_csv([row]))
    _write_jsonl(args.out_audit, (r.to_dict() for r in scored))

    extra = undefined_counts(scored)
    print(row.csv_row())
    print(
        f"records={len(scored)} precision_undefined={extra['precision_undefined']} "
        f"recall_undefined={extra['recall_undefined']}"
    )
    return 0


def cmd_cv(args) -> int:
    dataset = load_csv(args.data)
    mean, std = cross_validate(dataset, args.folds, args.repeats, _forest_params(args), args.seed)
    print(f"mean_accuracy={100.0 * mean:.2f} std={100.0 * std:.2f}")
    if args.out:
        mf.write_json(
            args.out,
            {
                "dataset": str(args.data),
                "folds": args.folds,
                "repeats": args.repeats,
                "mean_accuracy": mean,
                "std": std,
            },
        )
    return 0


def cmd_parse(args) -> int:
    dataset = load_csv(args.data)
    records = _read_jsonl(args.inputs)
    out = []
    for record in records:
        text = record.get("generated_text", record.get("output", ""))
        outcome = parse_output(text, dataset.feature_names)
        if isinstance(outcome, ParseFailure):
            out.append(
                {
                    "id": record["id"],
                    "parse_ok": False,
                    "reason": outcome.reason.value,
                    "offset": outcome.offset,
                    "predicates": [],
                    "label": outcome.label,
                }
            )
        else:
            out.append(
                {
                    "id": record["id"],
                    "parse_ok": True,
                    "predicates": [
                        {
                            "feature_name": p.feature_name,
                            "comparator": p.comparator.value,
                            "threshold": p.threshold,
                        }
                        for p in outcome.predicates
                    ],
                    "label": outcome.predicted_label,
                }
            )
    _write_jsonl(args.out, out)
    parsed = sum(1 for r in out if r["parse_ok"])
    print(f"wrote {args.out}: {parsed}/{len(out)} parsed")
    return 0


def cmd_report(args) -> int:
    from .validate import REPORT_HEADER

    rows = []
    for path in args.inputs:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line.rstrip("\n") for line in fh if line.strip()]
        if not lines or lines[0] != REPORT_HEADER:
            raise ValueError(f"{path}: not a report CSV (bad header)")
        rows.extend(lines[1:])
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join([REPORT_HEADER] + rows) + "\n")
    print(f"wrote {args.out}: {len(rows)} rows")
    return 0


def _add_preprocess_flags(parser) -> None:
    parser.add_argument("--integer-normalisation", action="store_true")
    parser.add_argument("--verbal-description", action="store_true")
    parser.add_argument("--relation-encoding", action="store_true")
    parser.add_argument("--range-min", type=int, default=0)
    parser.add_argument("--range-max", type=int, default=99)


def _add_forest_flags(parser) -> None:
    parser.add_argument("--n-estimators", type=int, default=100)
    parser.add_argument("--max-depth", type=int, default=2)
    parser.add_argument("--max-features", type=int, default=None)
    parser.add_argument("--no-bootstrap", action="store_true")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="forest2text",
        description="Random-forest knowledge transfer to text corpora, with rule validation",
    )
    parser.add_argument("--config-file", help="key=value defaults; explicit flags win")
    sub = parser.add_subparsers(dest="command", required=True)
    parsers: dict[str, argparse.ArgumentParser] = {}

    p = parsers["split"] = sub.add_parser("split", help="stratified grouped split")
    p.add_argument("--data", required=True)
    p.add_argument("--fractions", type=float, nargs=3, default=[0.7, 0.1, 0.2])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = parsers["train"] = sub.add_parser("train", help="fit the random forest")
    p.add_argument("--data", required=True)
    p.add_argument("--split", required=True)
    _add_forest_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = parsers["emit"] = sub.add_parser("emit", help="emit the corpus, prompts and manifest")
    p.add_argument("--data", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--forest", required=True)
    p.add_argument("--n-trees", type=int, default=2)
    _add_preprocess_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-corpus", required=True)
    p.add_argument("--out-prompts", required=True)
    p.add_argument("--out-manifest", required=True)
    p.set_defaults(func=cmd_emit)

    p = parsers["validate"] = sub.add_parser(
        "validate", help="score outputs (or the corpus itself) against the training partition"
    )
    p.add_argument("--inputs", required=True, help="corpus JSONL or generated-outputs JSONL")
    p.add_argument("--data", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--tag", default=None)
    p.add_argument("--out-report", required=True)
    p.add_argument("--out-audit", required=True)
    p.set_defaults(func=cmd_validate)

    p = parsers["cv"] = sub.add_parser("cv", help="repeated stratified cross-validation")
    p.add_argument("--data", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--repeats", type=int, default=5)
    _add_forest_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cv)

    p = parsers["parse"] = sub.add_parser("parse", help="parse generated texts to predicates")
    p.add_argument("--inputs", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_parse)

    p = parsers["report"] = sub.add_parser("report", help="merge report CSVs")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser, parsers


def _convert_config_value(raw: str):
    lowered = raw.strip().lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    parts = raw.replace(",", " ").split()
    if len(parts) > 1:
        return [float(p) for p in parts]
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def _read_config_file(path) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {line_no}: expected key=value")
            key, raw = line.split("=", 1)
            values[key.strip().replace("-", "_")] = _convert_config_value(raw)
    return values


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, parsers = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config-file", default=None)
        known, _ = pre.parse_known_args(argv)
        if known.config_file:
            defaults = _read_config_file(known.config_file)
            command = next((a for a in argv if a in parsers), None)
            if command:
                known_dests = {
                    action.dest for action in parsers[command]._actions
                }
                unknown = set(defaults) - known_dests
                if unknown:
                    raise ValueError(
                        f"{known.config_file}: unknown config keys {sorted(unknown)}"
                    )
                parsers[command].set_defaults(**defaults)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return 0 if not exc.code else USAGE_ERROR
        return args.func(args)
    except (DatasetError, SplitError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:  # anything unexpected is an internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
