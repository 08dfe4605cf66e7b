"""Run manifests: the glue that makes multi-stage runs reproducible.

Every stage writes the SHA-256 of the artifacts it consumed, and every later
stage refuses to run when a hash no longer matches, so a report can always be
traced back to the exact dataset, split, forest and corpus that produced it.
"""

from __future__ import annotations

import hashlib
import json

MANIFEST_FORMAT = "run-manifest/v1"
SPLIT_FORMAT = "split/v1"


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def artifact_ref(path) -> dict:
    return {"path": str(path), "sha256": sha256_file(path)}


def verify_artifact(ref: dict, path, what: str) -> None:
    """Check that ``path`` still matches the hash recorded for ``what``."""
    actual = sha256_file(path)
    if actual != ref["sha256"]:
        raise ValueError(
            f"{what} at {path} does not match the manifest "
            f"(expected sha256 {ref['sha256'][:12]}..., found {actual[:12]}...)"
        )


def write_json(path, document: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(document, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
