"""Bagged Gini decision trees for echo versus clutter detection.

Trees are stored as flat node arrays so a trained forest serializes to plain
JSON. Randomness comes from one PCG64 stream per tree, spawned from the
configured seed.
"""

import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.echo.features import FeatureMatrix
from app.shared.constants import (
    FOREST_MAX_DEPTH,
    FOREST_MIN_SAMPLES_LEAF,
    FOREST_MIN_SAMPLES_SPLIT,
    FOREST_TREES,
)
from app.shared.exceptions import (
    DegenerateTrainingError,
    ShapeError,
    SplitError,
    UsageError,
)

logger = logging.getLogger(__name__)

LEAF = -1
_MIN_DECREASE = 1e-12


class ForestConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_trees: int = Field(default=FOREST_TREES, ge=1)
    max_depth: int = Field(default=FOREST_MAX_DEPTH, ge=1)
    min_samples_leaf: int = Field(default=FOREST_MIN_SAMPLES_LEAF, ge=1)
    min_samples_split: int = Field(default=FOREST_MIN_SAMPLES_SPLIT, ge=2)
    features_per_split: int | None = Field(default=None, ge=1)
    seed: int = 0
    bootstrap: bool = True

    def candidates(self, n_features: int) -> int:
        if self.features_per_split is None:
            return max(1, math.ceil(math.sqrt(n_features)))
        return min(self.features_per_split, n_features)


class DecisionTree(BaseModel):
    """Flat node arrays; ``left[i] == -1`` marks a leaf."""

    model_config = ConfigDict(frozen=True)

    feature: tuple[int, ...]
    threshold: tuple[float, ...]
    left: tuple[int, ...]
    right: tuple[int, ...]
    counts: tuple[tuple[int, ...], ...]
    bootstrap: tuple[int, ...] = ()

    def leaf_for(self, row: np.ndarray) -> int:
        node = 0
        while self.left[node] != LEAF:
            if row[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return node

    def vote(self, row: np.ndarray) -> int:
        return int(np.argmax(self.counts[self.leaf_for(row)]))


class Prediction(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    labels: np.ndarray
    votes: np.ndarray


class TrainedForest(BaseModel):
    model_config = ConfigDict(frozen=True)

    config: ForestConfig
    columns: tuple[str, ...]
    n_classes: int
    trees: tuple[DecisionTree, ...]
    feature_importances: tuple[float, ...]

    def importances(self) -> dict[str, float]:
        return dict(zip(self.columns, self.feature_importances))

    def oob_score(self, features: FeatureMatrix) -> float:
        """Accuracy of out-of-bag votes on the training rows.

        Args:
            features: The exact matrix the forest was trained on.

        Returns:
            float: Fraction of rows with at least one out-of-bag vote whose
            majority vote matches the label.
        """
        if features.labels is None:
            raise UsageError("out-of-bag score needs labelled rows")
        rows = _rows_for(self, features)
        votes = np.zeros((rows.shape[0], self.n_classes), dtype=int)
        for tree in self.trees:
            in_bag = np.zeros(rows.shape[0], dtype=bool)
            in_bag[list(tree.bootstrap)] = True
            for i in np.flatnonzero(~in_bag):
                votes[i, tree.vote(rows[i])] += 1
        scored = votes.sum(axis=1) > 0
        if not scored.any():
            raise DegenerateTrainingError("every row is in every bootstrap sample")
        hits = np.argmax(votes[scored], axis=1) == features.labels[scored]
        return float(hits.mean())


class ClassificationReport(BaseModel):
    """Binary scores for the object class (label 1)."""

    model_config = ConfigDict(frozen=True)

    f1: float
    precision: float
    recall: float
    confusion: tuple[tuple[int, int], tuple[int, int]]
    recall_defined: bool = True


class CrossValidationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    fold_f1: tuple[float, ...]

    @property
    def mean_f1(self) -> float:
        return float(np.mean(self.fold_f1))


def _gini(counts: np.ndarray, totals: np.ndarray) -> np.ndarray:
    share = counts / totals[:, None]
    return 1.0 - np.sum(share * share, axis=1)


def _best_split(
    X: np.ndarray, y: np.ndarray, candidates: np.ndarray, n_classes: int, min_leaf: int
) -> tuple[int, float, float] | None:
    """Lowest weighted child impurity over candidate features.

    Ties keep the lowest feature index, then the lowest threshold.
    """
    n = y.shape[0]
    best: tuple[int, float, float] | None = None
    for feature in np.sort(candidates):
        order = np.argsort(X[:, feature], kind="stable")
        values = X[order, feature]
        onehot = np.eye(n_classes, dtype=float)[y[order]]
        left_counts = np.cumsum(onehot, axis=0)[:-1]
        right_counts = left_counts[-1] + onehot[-1] - left_counts
        n_left = np.arange(1, n, dtype=float)
        n_right = n - n_left
        valid = (values[1:] > values[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        impurity = (
            n_left * _gini(left_counts, n_left) + n_right * _gini(right_counts, n_right)
        ) / n
        impurity = np.where(valid, impurity, np.inf)
        pos = int(np.argmin(impurity))
        if best is None or impurity[pos] < best[2]:
            threshold = 0.5 * (values[pos] + values[pos + 1])
            best = (int(feature), float(threshold), float(impurity[pos]))
    return best


class _TreeBuilder:
    def __init__(
        self, cfg: ForestConfig, n_classes: int, n_features: int, rng: np.random.Generator
    ):
        self.cfg = cfg
        self.n_classes = n_classes
        self.n_features = n_features
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.counts: list[tuple[int, ...]] = []
        self.importance = np.zeros(n_features)

    def grow(self, X: np.ndarray, y: np.ndarray, depth: int, n_total: int) -> int:
        counts = np.bincount(y, minlength=self.n_classes)
        node = len(self.feature)
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.counts.append(tuple(int(c) for c in counts))

        n = y.shape[0]
        if depth >= self.cfg.max_depth or n < self.cfg.min_samples_split or counts.max() == n:
            return node
        parent = float(_gini(counts[None, :].astype(float), np.array([float(n)]))[0])
        picks = self.rng.choice(
            self.n_features, size=self.cfg.candidates(self.n_features), replace=False
        )
        split = _best_split(X, y, picks, self.n_classes, self.cfg.min_samples_leaf)
        if split is None or parent - split[2] <= _MIN_DECREASE:
            return node

        feature, threshold, impurity = split
        self.importance[feature] += n / n_total * (parent - impurity)
        goes_left = X[:, feature] <= threshold
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = self.grow(X[goes_left], y[goes_left], depth + 1, n_total)
        self.right[node] = self.grow(X[~goes_left], y[~goes_left], depth + 1, n_total)
        return node

    def build(self, bootstrap: np.ndarray) -> DecisionTree:
        return DecisionTree(
            feature=tuple(self.feature),
            threshold=tuple(self.threshold),
            left=tuple(self.left),
            right=tuple(self.right),
            counts=tuple(self.counts),
            bootstrap=tuple(int(i) for i in bootstrap),
        )


def _labelled(features: FeatureMatrix) -> np.ndarray:
    if features.labels is None:
        raise UsageError("training rows carry no labels")
    return features.labels


def _rows_for(forest: TrainedForest, features: FeatureMatrix) -> np.ndarray:
    if features.columns != forest.columns:
        raise ShapeError(f"feature columns {features.columns} differ from {forest.columns}")
    return features.values


def train(features: FeatureMatrix, cfg: ForestConfig | None = None) -> TrainedForest:
    """Grow a bagged forest on labelled feature rows.

    Args:
        features: Labelled training rows; the positional column mu must be
            excluded beforehand.
        cfg: Forest hyperparameters.

    Returns:
        TrainedForest: Trees, normalized impurity-decrease importances and
        the bootstrap indices used for each tree.
    """
    cfg = cfg or ForestConfig()
    if "mu" in features.columns:
        raise UsageError("positional feature mu must not be used for classification")
    y = _labelled(features)
    X = features.values
    if np.unique(y).size < 2:
        raise DegenerateTrainingError("training labels contain a single class")
    n, n_features = X.shape
    n_classes = max(2, int(y.max()) + 1)

    trees = []
    importance = np.zeros(n_features)
    for child in np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees):
        rng = np.random.Generator(np.random.PCG64(child))
        sample = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        builder = _TreeBuilder(cfg, n_classes, n_features, rng)
        builder.grow(X[sample], y[sample], 0, n)
        total = builder.importance.sum()
        if total > 0:
            importance += builder.importance / total
        trees.append(builder.build(sample))

    if importance.sum() > 0:
        importance = importance / importance.sum()
    logger.info(
        "forest.train.complete trees=%d rows=%d features=%d", cfg.n_trees, n, n_features
    )
    return TrainedForest(
        config=cfg,
        columns=features.columns,
        n_classes=n_classes,
        trees=tuple(trees),
        feature_importances=tuple(importance.tolist()),
    )


def predict(forest: TrainedForest, features: FeatureMatrix) -> Prediction:
    """Majority vote over trees; ties go to the lower class index."""
    rows = _rows_for(forest, features)
    votes = np.zeros((rows.shape[0], forest.n_classes))
    for tree in forest.trees:
        for i, row in enumerate(rows):
            votes[i, tree.vote(row)] += 1
    fractions = votes / len(forest.trees)
    labels = np.argmax(fractions, axis=1) if rows.shape[0] else np.zeros(0, dtype=int)
    return Prediction(labels=labels, votes=fractions)


def evaluate(pred: np.ndarray, truth: np.ndarray) -> ClassificationReport:
    """F1, precision and recall of the object class with a 2x2 confusion matrix.

    Rows of the confusion matrix are truth, columns prediction.
    """
    pred = np.asarray(pred, dtype=int).reshape(-1)
    truth = np.asarray(truth, dtype=int).reshape(-1)
    if pred.shape != truth.shape:
        raise ShapeError("predictions and truth differ in length")
    tp = int(np.sum((pred == 1) & (truth == 1)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    tn = int(np.sum((pred == 0) & (truth == 0)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall_defined = tp + fn > 0
    if not recall_defined:
        logger.warning("forest.evaluate.undefined_recall rows=%d", truth.shape[0])
    recall = tp / (tp + fn) if recall_defined else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassificationReport(
        f1=f1,
        precision=precision,
        recall=recall,
        confusion=((tn, fp), (fn, tp)),
        recall_defined=recall_defined,
    )


def _frame_strata(features: FeatureMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Unique frames and whether each holds at least one object row."""
    frames = np.unique(features.frames)
    if features.labels is None:
        return frames, np.zeros(frames.shape[0], dtype=int)
    has_object = np.array(
        [int(np.any(features.labels[features.frames == f] == 1)) for f in frames]
    )
    return frames, has_object


def _quotas(sizes: list[int], total: int) -> list[int]:
    """Largest-remainder apportionment of ``total`` over strata sizes."""
    n = sum(sizes)
    exact = [total * size / n for size in sizes]
    quotas = [math.floor(q) for q in exact]
    order = sorted(range(len(sizes)), key=lambda i: (-(exact[i] - quotas[i]), i))
    for i in order[: total - sum(quotas)]:
        quotas[i] += 1
    return quotas


def split_frames(
    features: FeatureMatrix, train_fraction: float, seed: int = 0
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Partition rows by frame, stratified on frames holding an object.

    Args:
        features: Rows to split.
        train_fraction: Fraction of frames used for training, in (0, 1).
        seed: Seed of the shuffling generator.

    Returns:
        tuple[FeatureMatrix, FeatureMatrix]: Train and test rows. The test
        frame count is floor(N * (1 - train_fraction)).
    """
    if not 0.0 < train_fraction < 1.0:
        raise SplitError(f"train fraction {train_fraction} outside (0, 1)")
    frames, strata = _frame_strata(features)
    n_test = math.floor(frames.shape[0] * (1.0 - train_fraction) + 1e-9)
    if n_test == 0 or n_test == frames.shape[0]:
        raise SplitError(f"{frames.shape[0]} frames leave an empty partition")

    rng = np.random.default_rng(seed)
    groups = [frames[strata == s] for s in (0, 1)]
    quotas = _quotas([g.shape[0] for g in groups], n_test)
    test_frames: list[int] = []
    for group, quota in zip(groups, quotas):
        test_frames.extend(rng.permutation(group)[:quota].tolist())
    is_test = np.isin(features.frames, test_frames)
    train_part, test_part = features.take(~is_test), features.take(is_test)
    logger.debug(
        "forest.split frames=%d test_frames=%d train_rows=%d test_rows=%d",
        frames.shape[0],
        n_test,
        train_part.n_rows,
        test_part.n_rows,
    )
    return train_part, test_part


def cross_validate(
    features: FeatureMatrix, cfg: ForestConfig | None = None, folds: int = 3, seed: int = 0
) -> CrossValidationReport:
    """Stratified k-fold by frame; returns the held-out F1 of every fold."""
    cfg = cfg or ForestConfig()
    frames, strata = _frame_strata(features)
    if not 2 <= folds <= frames.shape[0]:
        raise SplitError(f"{folds} folds over {frames.shape[0]} frames")
    rng = np.random.default_rng(seed)
    ordered = np.concatenate([rng.permutation(frames[strata == s]) for s in (0, 1)])
    assignment = {int(f): i % folds for i, f in enumerate(ordered)}
    fold_of_row = np.array([assignment[int(f)] for f in features.frames])

    scores = []
    for fold in range(folds):
        held_out = fold_of_row == fold
        forest = train(features.take(~held_out), cfg)
        test = features.take(held_out)
        scores.append(evaluate(predict(forest, test).labels, _labelled(test)).f1)
    return CrossValidationReport(fold_f1=tuple(scores))
