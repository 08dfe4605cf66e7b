"""Tabular dataset loading and leakage-safe grouped splits.

The CSV contract: UTF-8, comma-separated, one header row of feature names
followed by a final ``label`` column; every feature cell must parse as a
finite real. Class ids are assigned by lexicographic order of the distinct
label strings so they are stable across runs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .seeding import derive_seed

PARTITIONS = ("train", "validation", "test")


class DatasetError(ValueError):
    """Raised for malformed dataset files."""


class SplitError(ValueError):
    """Raised when a grouped stratified split cannot be built."""


@dataclass(frozen=True)
class Dataset:
    """An N x F feature table with integer class labels.

    ``labels[i]`` indexes into ``class_names``. Arrays are marked read-only;
    instances are safe to share across threads.
    """

    features: np.ndarray
    feature_names: tuple[str, ...]
    labels: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise DatasetError("features must be a 2-D matrix")
        if features.shape[0] != labels.shape[0]:
            raise DatasetError(
                f"{features.shape[0]} feature rows but {labels.shape[0]} labels"
            )
        if features.shape[1] != len(self.feature_names):
            raise DatasetError(
                f"{features.shape[1]} feature columns but {len(self.feature_names)} names"
            )
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DatasetError("feature names must be unique")
        if any(not name for name in self.feature_names):
            raise DatasetError("feature names must be non-empty")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
            raise DatasetError("labels must index into class_names")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n_examples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, indices) -> "Dataset":
        """A new Dataset restricted to ``indices`` (same metadata)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[idx].copy(),
            feature_names=self.feature_names,
            labels=self.labels[idx].copy(),
            class_names=self.class_names,
        )


@dataclass(frozen=True)
class SplitAssignment:
    """Partition name per example index, plus the seed that produced it."""

    partition: tuple[str, ...]
    seed: int

    def __post_init__(self):
        unknown = set(self.partition) - set(PARTITIONS)
        if unknown:
            raise SplitError(f"unknown partition names: {sorted(unknown)}")

    def indices(self, name: str) -> np.ndarray:
        """Sorted example indices assigned to partition ``name``."""
        if name not in PARTITIONS:
            raise SplitError(f"unknown partition {name!r}")
        return np.array(
            [i for i, part in enumerate(self.partition) if part == name], dtype=np.int64
        )

    def counts(self) -> dict[str, int]:
        return {name: int(sum(p == name for p in self.partition)) for name in PARTITIONS}


def load_csv(path) -> Dataset:
    """Load a labelled feature table from ``path``.

    Errors carry the 1-based file line and column of the offending cell.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise DatasetError(f"dataset file not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: file is empty") from None
        if len(header) < 2:
            raise DatasetError(f"{path}: header must list at least one feature and 'label'")
        if header[-1] != "label":
            raise DatasetError(f"{path}: last header column must be 'label', got {header[-1]!r}")
        feature_names = tuple(header[:-1])

        rows: list[list[float]] = []
        label_strings: list[str] = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}: line {line_no} has {len(row)} columns, expected {len(header)}"
                )
            values = []
            for col, cell in enumerate(row[:-1], start=1):
                try:
                    value = float(cell)
                except ValueError:
                    raise DatasetError(
                        f"{path}: line {line_no}, column {col}: {cell!r} is not a number"
                    ) from None
                if not math.isfinite(value):
                    raise DatasetError(
                        f"{path}: line {line_no}, column {col}: value must be finite"
                    )
                values.append(value)
            rows.append(values)
            label_strings.append(row[-1])

    if not rows:
        raise DatasetError(f"{path}: no data rows (empty dataset)")

    class_names = tuple(sorted(set(label_strings)))
    class_index = {name: i for i, name in enumerate(class_names)}
    labels = np.array([class_index[s] for s in label_strings], dtype=np.int64)
    return Dataset(
        features=np.array(rows, dtype=np.float64),
        feature_names=feature_names,
        labels=labels,
        class_names=class_names,
    )


def _group_class(dataset: Dataset, members: list[int]) -> int:
    """Majority class among a group's members, ties to the lowest class id."""
    counts = np.bincount(dataset.labels[members], minlength=dataset.n_classes)
    return int(np.argmax(counts))


def _largest_remainder(n_groups: int, fractions: tuple[float, ...]) -> list[int]:
    """Allocate ``n_groups`` items to len(fractions) buckets, each within one
    of its exact share. Ties in remainder go to the earlier bucket."""
    exact = [n_groups * f for f in fractions]
    base = [math.floor(e) for e in exact]
    leftover = n_groups - sum(base)
    order = sorted(range(len(fractions)), key=lambda p: (-(exact[p] - base[p]), p))
    for p in order[:leftover]:
        base[p] += 1
    return base


def grouped_stratified_split(
    dataset: Dataset,
    group_ids: list[int],
    fractions: tuple[float, float, float] = (0.7, 0.1, 0.2),
    seed: int = 0,
) -> SplitAssignment:
    """Assign every example to train/validation/test, keeping groups whole.

    Stratification happens at the group level: within each class, groups are
    shuffled deterministically and dealt to partitions by largest-remainder
    allocation of the requested fractions. All members of a group land in the
    same partition, which prevents leakage when one source example yields
    several corpus pairs.
    """
    if len(group_ids) != dataset.n_examples:
        raise SplitError(
            f"group_ids has {len(group_ids)} entries for {dataset.n_examples} examples"
        )
    if len(fractions) != len(PARTITIONS):
        raise SplitError(f"expected {len(PARTITIONS)} fractions")
    if any(not (0.0 < f < 1.0) for f in fractions):
        raise SplitError(f"fractions must each lie in (0, 1): {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise SplitError(f"fractions must sum to 1: {fractions}")

    members: dict[int, list[int]] = {}
    for idx, gid in enumerate(group_ids):
        members.setdefault(int(gid), []).append(idx)

    by_class: dict[int, list[int]] = {}
    for gid in sorted(members):
        by_class.setdefault(_group_class(dataset, members[gid]), []).append(gid)

    partition = [""] * dataset.n_examples
    for class_id in sorted(by_class):
        gids = np.array(by_class[class_id], dtype=np.int64)
        if len(gids) < len(PARTITIONS):
            raise SplitError(
                f"class {class_id} has only {len(gids)} groups for {len(PARTITIONS)} partitions"
            )
        rng = np.random.default_rng(derive_seed(seed, "split", class_id))
        shuffled = gids[rng.permutation(len(gids))]
        counts = _largest_remainder(len(gids), tuple(fractions))
        start = 0
        for name, count in zip(PARTITIONS, counts):
            for gid in shuffled[start : start + count]:
                for idx in members[int(gid)]:
                    partition[idx] = name
            start += count

    return SplitAssignment(partition=tuple(partition), seed=seed)
