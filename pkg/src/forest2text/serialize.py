"""Render prompts and rule outputs, and emit the fine-tuning corpus.

Prompt shape: a fixed header, the comma-separated encoded features, then a
footer instructing the model to answer with threshold-comparison rules and a
label. Output shape: the path's statements joined by " and ", then
". Label: <class id>". Raw values always print with two decimals; integer
normalisation switches both values and thresholds to scaled integers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, SplitAssignment
from .forest import DecisionPath, NodeDecision, RandomForest, sample_correct_path_draws
from .preprocess import (
    PercentileBins,
    PreprocessConfig,
    ScalingParams,
    describe_value,
    encode_relation,
    scale_value,
)
from .seeding import derive_seed

PROMPT_HEADER = "Here is the description of system state:"

CORPUS_FIELDS = ("id", "group_id", "split", "prompt", "output", "label", "tree_index")


@dataclass(frozen=True)
class TrainingPair:
    """One prompt/output pair with provenance back to its source example."""

    pair_id: int
    group_id: int
    prompt: str
    output: str
    label: int
    tree_index: int
    path: DecisionPath


@dataclass(frozen=True)
class CorpusStats:
    examples_covered: int
    pairs_emitted: int
    examples_without_paths: int

    def to_dict(self) -> dict:
        return {
            "examples_covered": self.examples_covered,
            "pairs_emitted": self.pairs_emitted,
            "examples_without_paths": self.examples_without_paths,
        }


def _format_number(
    value: float,
    feature: int,
    scaling: ScalingParams,
    config: PreprocessConfig,
) -> str:
    if config.integer_normalisation:
        return str(scale_value(scaling, feature, value, config))
    return f"{value:.2f}"


def _render_value(
    value: float,
    feature: int,
    scaling: ScalingParams,
    bins: PercentileBins,
    config: PreprocessConfig,
) -> str:
    text = _format_number(value, feature, scaling, config)
    if config.verbal_description:
        text += f" ({describe_value(bins, feature, value)})"
    return text


def render_statement(
    node: NodeDecision,
    x: np.ndarray,
    feature_names: tuple[str, ...],
    scaling: ScalingParams,
    bins: PercentileBins,
    config: PreprocessConfig,
) -> str:
    """One comparison statement: feature name, observed value, relation,
    threshold. Verbal tags decorate both numbers when VD is active."""
    name = feature_names[node.feature_index]
    value = _render_value(float(x[node.feature_index]), node.feature_index, scaling, bins, config)
    threshold = _render_value(node.threshold, node.feature_index, scaling, bins, config)
    relation = encode_relation(node.direction, config)
    return f"{name} {value} {relation} {threshold}"


def render_output(
    path: DecisionPath,
    x: np.ndarray,
    feature_names: tuple[str, ...],
    scaling: ScalingParams,
    bins: PercentileBins,
    config: PreprocessConfig,
) -> str:
    """The textual form of a decision path for example ``x``."""
    statements = " and ".join(
        render_statement(node, x, feature_names, scaling, bins, config) for node in path.nodes
    )
    return f"{statements}. Label: {path.label}"


def prompt_footer(class_ids: tuple[int, ...], config: PreprocessConfig) -> str:
    """Footer instructing the model, mirroring the active preprocessing in its
    embedded format example."""
    if config.relation_encoding:
        relation_words = "'is greater/less than'"
        example_relation = "is less than"
    else:
        relation_words = "'<=' and '>'"
        example_relation = "<="
    low, high = ("0", "10") if config.integer_normalisation else ("0.00", "10.00")
    low_tag = " (lower whisker)" if config.verbal_description else ""
    high_tag = " (upper quantile)" if config.verbal_description else ""
    example = f"feature_name {low}{low_tag} {example_relation} {high}{high_tag}. Label: 0"
    labels = "{" + ", ".join(str(c) for c in class_ids) + "}"
    return (
        "Based on values of system features, classify the state of the system "
        "and explain the decision. "
        f"Use logical rules comparing feature values with thresholds using {relation_words}. "
        f"Format: '[feature_name] [value] [inequality] [threshold]', for example: '{example}'. "
        f"Provide a classification label from {labels}. Explanation and system label:"
    )


def render_prompt(
    x: np.ndarray,
    feature_names: tuple[str, ...],
    class_ids: tuple[int, ...],
    scaling: ScalingParams,
    bins: PercentileBins,
    config: PreprocessConfig,
) -> str:
    features = ", ".join(
        f"{name}: {_render_value(float(x[j]), j, scaling, bins, config)}"
        for j, name in enumerate(feature_names)
    )
    return f"{PROMPT_HEADER} {features}. {prompt_footer(class_ids, config)}"


def build_pairs(
    dataset: Dataset,
    forest: RandomForest,
    scaling: ScalingParams,
    bins: PercentileBins,
    config: PreprocessConfig,
    n_trees: int,
    seed: int,
    example_indices=None,
) -> tuple[list[TrainingPair], CorpusStats]:
    """Sample correct paths and render one TrainingPair per draw.

    Pairs are ordered by (source example, draw index); identical
    (group, output) pairs collapse to the first draw. Examples that no tree
    classifies correctly yield nothing and are counted.
    """
    if example_indices is None:
        example_indices = range(dataset.n_examples)
    class_ids = tuple(range(dataset.n_classes))

    pairs: list[TrainingPair] = []
    seen: set[tuple[int, str]] = set()
    covered = 0
    without = 0
    for i in example_indices:
        x = dataset.features[i]
        y = int(dataset.labels[i])
        draws = sample_correct_path_draws(
            forest, x, y, n_trees, derive_seed(seed, "paths", i)
        )
        if not draws:
            without += 1
            continue
        covered += 1
        prompt = render_prompt(x, dataset.feature_names, class_ids, scaling, bins, config)
        for tree_index, path in draws:
            output = render_output(path, x, dataset.feature_names, scaling, bins, config)
            key = (i, output)
            if key in seen:
                continue
            seen.add(key)
            pairs.append(
                TrainingPair(
                    pair_id=len(pairs),
                    group_id=i,
                    prompt=prompt,
                    output=output,
                    label=path.label,
                    tree_index=tree_index,
                    path=path,
                )
            )
    return pairs, CorpusStats(covered, len(pairs), without)


def pair_record(pair: TrainingPair, split: str) -> dict:
    return {
        "id": pair.pair_id,
        "group_id": pair.group_id,
        "split": split,
        "prompt": pair.prompt,
        "output": pair.output,
        "label": pair.label,
        "tree_index": pair.tree_index,
    }


def emit_corpus(
    dataset: Dataset,
    assignment: SplitAssignment,
    forest: RandomForest,
    scaling: ScalingParams,
    bins: PercentileBins,
    config: PreprocessConfig,
    n_trees: int,
    seed: int,
    sink,
) -> CorpusStats:
    """Write the JSONL corpus for every example, tagged with its partition.

    One line per retained pair, in (group_id, draw) order; byte-identical for
    identical inputs and seed.
    """
    pairs, stats = build_pairs(dataset, forest, scaling, bins, config, n_trees, seed)
    for pair in pairs:
        record = pair_record(pair, assignment.partition[pair.group_id])
        sink.write(json.dumps(record, ensure_ascii=False) + "\n")
    return stats


def emit_prompts(
    dataset: Dataset,
    assignment: SplitAssignment,
    scaling: ScalingParams,
    bins: PercentileBins,
    config: PreprocessConfig,
    sink,
    split: str = "test",
) -> int:
    """Write one prompt record per example of ``split`` (for generation)."""
    class_ids = tuple(range(dataset.n_classes))
    count = 0
    for i in assignment.indices(split):
        record = {
            "id": int(i),
            "group_id": int(i),
            "split": split,
            "prompt": render_prompt(
                dataset.features[i], dataset.feature_names, class_ids, scaling, bins, config
            ),
            "label": int(dataset.labels[i]),
        }
        sink.write(json.dumps(record, ensure_ascii=False) + "\n")
        count += 1
    return count
