"""CART-style random forest with inspectable decision paths.

Trees are grown greedily on Gini impurity over bootstrap resamples, with a
uniformly random feature subset considered at each split. The comparison
convention everywhere is "x[j] <= threshold goes left"; a decision path
records, per node, the feature index, threshold and taken direction (-1 for
left, +1 for right) plus the leaf's majority label.

Determinism: each tree draws its randomness from a seed derived from the
forest seed and the tree index, so results are independent of fit order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .seeding import derive_seed

FOREST_FORMAT = "forest/v1"


@dataclass(frozen=True)
class NodeDecision:
    """One comparison along a decision path: x[feature_index] vs threshold."""

    feature_index: int
    threshold: float
    direction: int

    def __post_init__(self):
        if self.direction not in (-1, +1):
            raise ValueError(f"direction must be -1 or +1, got {self.direction}")


@dataclass(frozen=True)
class DecisionPath:
    """Root-to-leaf decisions plus the leaf's class label."""

    nodes: tuple[NodeDecision, ...]
    label: int

    def __post_init__(self):
        if not self.nodes:
            raise ValueError("a decision path needs at least one node")


@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature_index/threshold/children set) or leaf
    (counts/label set)."""

    feature_index: int | None = None
    threshold: float | None = None
    left: int | None = None
    right: int | None = None
    counts: tuple[int, ...] | None = None
    label: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature_index is None


@dataclass(frozen=True)
class DecisionTree:
    nodes: tuple[TreeNode, ...]
    root: int
    n_classes: int

    def leaf_for(self, x: np.ndarray) -> TreeNode:
        node = self.nodes[self.root]
        while not node.is_leaf:
            if x[node.feature_index] <= node.threshold:
                node = self.nodes[node.left]
            else:
                node = self.nodes[node.right]
        return node

    def apply_batch(self, features: np.ndarray) -> np.ndarray:
        """Leaf labels for every row of ``features``."""
        out = np.empty(features.shape[0], dtype=np.int64)
        stack = [(self.root, np.arange(features.shape[0]))]
        while stack:
            node_id, idx = stack.pop()
            node = self.nodes[node_id]
            if node.is_leaf:
                out[idx] = node.label
            elif idx.size:
                mask = features[idx, node.feature_index] <= node.threshold
                stack.append((node.left, idx[mask]))
                stack.append((node.right, idx[~mask]))
        return out

    @property
    def depth(self) -> int:
        def walk(node_id: int) -> int:
            node = self.nodes[node_id]
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 100
    max_depth: int = 2
    max_features: int | None = None  # None -> ceil(sqrt(F))
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be at least 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")

    def resolved_max_features(self, n_features: int) -> int:
        if self.max_features is None:
            return min(n_features, math.ceil(math.sqrt(n_features)))
        return min(n_features, self.max_features)

    def to_dict(self) -> dict:
        return {
            "n_estimators": self.n_estimators,
            "max_depth": self.max_depth,
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ForestParams":
        return cls(**data)


@dataclass(frozen=True)
class RandomForest:
    trees: tuple[DecisionTree, ...]
    params: ForestParams
    seed: int
    n_features: int
    n_classes: int


def _gini_from_counts(counts: np.ndarray, total: int) -> float:
    if total == 0:
        return 0.0
    p = counts / total
    return 1.0 - float(np.dot(p, p))


def _best_split(
    x_col: np.ndarray, y: np.ndarray, n_classes: int, parent_gini: float
) -> tuple[float, float] | None:
    """Best (impurity decrease, threshold) for one feature column.

    Candidates are midpoints between consecutive distinct sorted values; the
    first maximum wins, i.e. ties resolve to the lowest threshold. Returns
    None when the column is constant within the node.
    """
    order = np.argsort(x_col, kind="stable")
    sv = x_col[order]
    sy = y[order]
    boundaries = np.nonzero(sv[1:] != sv[:-1])[0]
    if boundaries.size == 0:
        return None

    n = x_col.shape[0]
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), sy] = 1.0
    prefix = np.cumsum(onehot, axis=0)

    left = prefix[boundaries]
    total = prefix[-1]
    right = total - left
    n_left = (boundaries + 1).astype(np.float64)
    n_right = n - n_left

    gini_left = 1.0 - np.einsum("ij,ij->i", left / n_left[:, None], left / n_left[:, None])
    gini_right = 1.0 - np.einsum("ij,ij->i", right / n_right[:, None], right / n_right[:, None])
    decrease = parent_gini - (n_left * gini_left + n_right * gini_right) / n

    best = int(np.argmax(decrease))
    b = boundaries[best]
    threshold = (sv[b] + sv[b + 1]) / 2.0
    return float(decrease[best]), threshold


def _fit_tree(
    features: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    max_depth: int,
    max_features: int,
    rng: np.random.Generator,
) -> DecisionTree:
    nodes: list[TreeNode] = []
    n_total_features = features.shape[1]

    def leaf(counts: np.ndarray) -> int:
        nodes.append(
            TreeNode(counts=tuple(int(c) for c in counts), label=int(np.argmax(counts)))
        )
        return len(nodes) - 1

    def grow(indices: np.ndarray, depth: int) -> int:
        y = labels[indices]
        counts = np.bincount(y, minlength=n_classes)
        parent_gini = _gini_from_counts(counts.astype(np.float64), indices.size)
        if depth >= max_depth or indices.size < 2 or parent_gini == 0.0:
            return leaf(counts)

        candidates = np.sort(rng.permutation(n_total_features)[:max_features])
        best_decrease = 0.0
        best_feature = -1
        best_threshold = 0.0
        for f in candidates:
            found = _best_split(features[indices, f], y, n_classes, parent_gini)
            if found is None:
                continue
            decrease, threshold = found
            if decrease > best_decrease:
                best_decrease, best_feature, best_threshold = decrease, int(f), threshold

        if best_feature < 0:
            return leaf(counts)

        mask = features[indices, best_feature] <= best_threshold
        left_id = grow(indices[mask], depth + 1)
        right_id = grow(indices[~mask], depth + 1)
        nodes.append(
            TreeNode(
                feature_index=best_feature,
                threshold=best_threshold,
                left=left_id,
                right=right_id,
            )
        )
        return len(nodes) - 1

    root = grow(np.arange(features.shape[0]), 0)
    return DecisionTree(nodes=tuple(nodes), root=root, n_classes=n_classes)


def fit_forest(train: Dataset, params: ForestParams, seed: int) -> RandomForest:
    """Fit ``params.n_estimators`` trees on bootstrap resamples of ``train``."""
    if train.n_examples == 0:
        raise ValueError("cannot fit a forest on an empty dataset")
    present = np.unique(train.labels)
    if present.size < 2:
        raise ValueError(
            f"training set contains a single class (id {int(present[0])}); need at least 2"
        )

    max_features = params.resolved_max_features(train.n_features)
    trees = []
    for i in range(params.n_estimators):
        rng = np.random.default_rng(derive_seed(seed, "tree", i))
        if params.bootstrap:
            sample = rng.integers(0, train.n_examples, size=train.n_examples)
        else:
            sample = np.arange(train.n_examples)
        trees.append(
            _fit_tree(
                train.features[sample],
                train.labels[sample],
                train.n_classes,
                params.max_depth,
                max_features,
                rng,
            )
        )
    return RandomForest(
        trees=tuple(trees),
        params=params,
        seed=seed,
        n_features=train.n_features,
        n_classes=train.n_classes,
    )


def predict(forest: RandomForest, x: np.ndarray) -> int:
    """Majority vote over trees, ties to the lowest class id."""
    votes = np.zeros(forest.n_classes, dtype=np.int64)
    for tree in forest.trees:
        votes[tree.leaf_for(x).label] += 1
    return int(np.argmax(votes))


def predict_batch(forest: RandomForest, features: np.ndarray) -> np.ndarray:
    votes = np.zeros((features.shape[0], forest.n_classes), dtype=np.int64)
    rows = np.arange(features.shape[0])
    for tree in forest.trees:
        votes[rows, tree.apply_batch(features)] += 1
    return np.argmax(votes, axis=1)


def tree_decision_path(tree: DecisionTree, x: np.ndarray) -> DecisionPath:
    """The root-to-leaf path ``x`` takes through ``tree``.

    Direction is -1 when x[j] <= threshold (left) and +1 otherwise. A tree
    whose root is already a leaf has no comparisons to record, so it yields a
    ValueError; forests grown with max_depth >= 1 on non-degenerate data do
    not produce such trees.
    """
    nodes = []
    node = tree.nodes[tree.root]
    while not node.is_leaf:
        direction = -1 if x[node.feature_index] <= node.threshold else +1
        nodes.append(
            NodeDecision(
                feature_index=node.feature_index,
                threshold=node.threshold,
                direction=direction,
            )
        )
        node = tree.nodes[node.left if direction == -1 else node.right]
    return DecisionPath(nodes=tuple(nodes), label=node.label)


def path_contains(path: DecisionPath, x: np.ndarray) -> bool:
    """Whether ``x`` satisfies every comparison along ``path``."""
    for node in path.nodes:
        value = x[node.feature_index]
        if node.direction == -1:
            if not value <= node.threshold:
                return False
        else:
            if not value > node.threshold:
                return False
    return True


def sample_correct_path_draws(
    forest: RandomForest, x: np.ndarray, y: int, n_trees: int, seed: int
) -> list[tuple[int, DecisionPath]]:
    """Like ``sample_correct_paths`` but pairs each path with its tree index."""
    if n_trees < 1:
        raise ValueError("n_trees must be at least 1")
    qualifying = []
    for tree_index, tree in enumerate(forest.trees):
        if tree.nodes[tree.root].is_leaf:
            continue
        path = tree_decision_path(tree, x)
        if path.label == y:
            qualifying.append((tree_index, path))
    if not qualifying:
        return []
    rng = np.random.default_rng(seed)
    return [qualifying[int(i)] for i in rng.integers(0, len(qualifying), size=n_trees)]


def sample_correct_paths(
    forest: RandomForest, x: np.ndarray, y: int, n_trees: int, seed: int
) -> list[DecisionPath]:
    """Draw ``n_trees`` decision paths for ``x`` from trees that label it ``y``.

    Each repetition picks one qualifying tree uniformly at random, with
    replacement across repetitions, so duplicates are possible. When no tree
    classifies ``x`` as ``y`` the result is empty. Degenerate single-leaf
    trees carry no conditions and never qualify.
    """
    return [path for _, path in sample_correct_path_draws(forest, x, y, n_trees, seed)]


def cross_validate(
    dataset: Dataset, folds: int, repeats: int, params: ForestParams, seed: int
) -> tuple[float, float]:
    """Mean and standard deviation of accuracy over repeated stratified k-fold.

    Each repeat deals the class-wise shuffled examples round-robin into
    ``folds`` buckets; fold and repeat seeds derive from ``seed``. The std is
    the population deviation over all folds x repeats accuracies.
    """
    if folds < 2:
        raise ValueError("folds must be at least 2")
    class_counts = np.bincount(dataset.labels, minlength=dataset.n_classes)
    for class_id, count in enumerate(class_counts):
        if 0 < count < folds:
            raise ValueError(
                f"class {class_id} has {count} examples, fewer than {folds} folds"
            )

    accuracies = []
    for r in range(repeats):
        rng = np.random.default_rng(derive_seed(seed, "cv-shuffle", r))
        fold_members: list[list[int]] = [[] for _ in range(folds)]
        for class_id in range(dataset.n_classes):
            idx = np.nonzero(dataset.labels == class_id)[0]
            idx = idx[rng.permutation(idx.size)]
            for pos, example in enumerate(idx):
                fold_members[pos % folds].append(int(example))
        for k in range(folds):
            test_idx = np.array(sorted(fold_members[k]), dtype=np.int64)
            train_idx = np.array(
                sorted(i for f in range(folds) if f != k for i in fold_members[f]),
                dtype=np.int64,
            )
            model = fit_forest(
                dataset.subset(train_idx), params, derive_seed(seed, "cv-fit", r, k)
            )
            predicted = predict_batch(model, dataset.features[test_idx])
            accuracies.append(float(np.mean(predicted == dataset.labels[test_idx])))

    acc = np.array(accuracies)
    return float(acc.mean()), float(acc.std())


def _node_to_json(tree: DecisionTree, node_id: int) -> dict:
    node = tree.nodes[node_id]
    if node.is_leaf:
        return {"counts": list(node.counts), "label": node.label}
    return {
        "feature_index": node.feature_index,
        "threshold": node.threshold,
        "left": _node_to_json(tree, node.left),
        "right": _node_to_json(tree, node.right),
    }


def _node_from_json(data: dict, nodes: list[TreeNode]) -> int:
    if "label" in data:
        nodes.append(TreeNode(counts=tuple(data["counts"]), label=int(data["label"])))
        return len(nodes) - 1
    left = _node_from_json(data["left"], nodes)
    right = _node_from_json(data["right"], nodes)
    nodes.append(
        TreeNode(
            feature_index=int(data["feature_index"]),
            threshold=float(data["threshold"]),
            left=left,
            right=right,
        )
    )
    return len(nodes) - 1


def forest_to_json(forest: RandomForest) -> dict:
    """JSON document (versioned) with trees as nested node objects."""
    return {
        "format": FOREST_FORMAT,
        "params": forest.params.to_dict(),
        "seed": forest.seed,
        "n_features": forest.n_features,
        "n_classes": forest.n_classes,
        "trees": [_node_to_json(tree, tree.root) for tree in forest.trees],
    }


def forest_from_json(data: dict) -> RandomForest:
    if data.get("format") != FOREST_FORMAT:
        raise ValueError(f"unsupported forest document format: {data.get('format')!r}")
    n_classes = int(data["n_classes"])
    trees = []
    for tree_doc in data["trees"]:
        nodes: list[TreeNode] = []
        root = _node_from_json(tree_doc, nodes)
        trees.append(DecisionTree(nodes=tuple(nodes), root=root, n_classes=n_classes))
    return RandomForest(
        trees=tuple(trees),
        params=ForestParams.from_dict(data["params"]),
        seed=int(data["seed"]),
        n_features=int(data["n_features"]),
        n_classes=n_classes,
    )


def save_forest(forest: RandomForest, path, extra: dict | None = None) -> None:
    doc = forest_to_json(forest)
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False)
        fh.write("\n")


def load_forest(path) -> RandomForest:
    with open(path, "r", encoding="utf-8") as fh:
        return forest_from_json(json.load(fh))
