"""Reading and checking the JSONL file contract with the corpus generator."""

from __future__ import annotations

import json


class BridgeError(ValueError):
    """Raised for broken input files or unusable configurations."""


CORPUS_FIELDS = ("id", "group_id", "split", "prompt", "output", "label")
PROMPT_FIELDS = ("id", "prompt")


def read_jsonl(path) -> list[dict]:
    records = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except FileNotFoundError:
        raise BridgeError(f"file not found: {path}") from None
    with fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise BridgeError(f"{path}: line {line_no}: invalid JSON ({exc})") from None
    return records


def check_fields(records: list[dict], required: tuple[str, ...], path) -> None:
    for index, record in enumerate(records):
        missing = [field for field in required if field not in record]
        if missing:
            raise BridgeError(
                f"{path}: record {index} is missing fields {missing} "
                f"(corpus schema mismatch)"
            )


def load_corpus(path) -> tuple[list[dict], list[dict]]:
    """Training and validation records of a corpus file, in file order."""
    records = read_jsonl(path)
    if not records:
        raise BridgeError(f"{path}: empty corpus")
    check_fields(records, CORPUS_FIELDS, path)
    train = [r for r in records if r["split"] == "train"]
    validation = [r for r in records if r["split"] == "validation"]
    if not train:
        raise BridgeError(f"{path}: corpus has no train-split records")
    return train, validation


def load_prompts(path) -> list[dict]:
    records = read_jsonl(path)
    check_fields(records, PROMPT_FIELDS, path)
    return records
