"""Feature selection: extra-trees Gini importance, ANOVA F, variance
threshold, and PCA.

The extra-trees randomness is counter-based: every random draw is a hash of
(seed, tree index, node id, feature name), so reordering feature columns
permutes importances identically instead of changing them. Node ids follow
depth-first preorder, which depends only on the split structure.
"""

from __future__ import annotations

import csv
import hashlib
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, NumericError, ValidationError

NUM_CLASSES = 3

# ---------------------------------------------------------------------------
# domain types


@dataclass
class FeatureMatrix:
    """values (n_samples, n_features) with one unique name per column."""

    values: np.ndarray
    names: List[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.names = list(self.names)
        if self.values.ndim != 2:
            raise DimensionError(f"values must be 2D, got {self.values.ndim} axes")
        if self.values.shape[0] < 2:
            raise ValidationError("need at least 2 samples")
        if len(self.names) != self.values.shape[1]:
            raise DimensionError(
                f"{len(self.names)} names for {self.values.shape[1]} feature columns"
            )
        if len(set(self.names)) != len(self.names):
            raise ValidationError("feature names must be unique")
        if not np.isfinite(self.values).all():
            raise NumericError("feature values contain non-finite entries")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


@dataclass
class ImportanceRanking:
    """(name, score) pairs sorted by descending score, ties by name."""

    entries: List[Tuple[str, float]]

    def __post_init__(self):
        for name, score in self.entries:
            if score < 0:
                raise ValidationError(f"score for {name} is negative")
        ordered = sorted(self.entries, key=lambda e: (-e[1], e[0]))
        if [n for n, _ in ordered] != [n for n, _ in self.entries]:
            raise ValidationError("entries must be sorted by descending score")

    def names(self) -> List[str]:
        return [name for name, _ in self.entries]

    def scores(self) -> np.ndarray:
        return np.array([score for _, score in self.entries])


@dataclass
class ExtraTreesConfig:
    n_trees: int = 100
    k_features: Optional[int] = None  # default ceil(sqrt(n_features)) at fit time
    min_samples_split: int = 2
    max_depth: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValidationError("n_trees must be >= 1")
        if self.k_features is not None and self.k_features < 1:
            raise ValidationError("k_features must be >= 1")
        if self.min_samples_split < 1:
            raise ValidationError("min_samples_split must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValidationError("max_depth must be >= 1")


@dataclass
class TreeNode:
    """Internal node (feature >= 0) or leaf (feature == -1, children -1)."""

    feature: int
    cut: float
    n_samples: int
    left: int = -1
    right: int = -1


@dataclass
class PcaModel:
    """mean (f,), components (k, f) row-orthonormal, explained_variance (k,)."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.components = np.asarray(self.components, dtype=np.float64)
        self.explained_variance = np.asarray(self.explained_variance, dtype=np.float64)
        k, f = self.components.shape
        if self.mean.shape != (f,):
            raise DimensionError(f"mean axis has {self.mean.shape}, expected ({f},)")
        if self.explained_variance.shape != (k,):
            raise DimensionError("one explained variance per component required")
        gram = self.components @ self.components.T
        if not np.allclose(gram, np.eye(k), atol=1e-8):
            raise NumericError("component rows are not orthonormal within 1e-8")
        if np.any(self.explained_variance < 0):
            raise NumericError("explained variances must be >= 0")
        if np.any(np.diff(self.explained_variance) > 1e-12):
            raise NumericError("explained variances must be non-increasing")

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


# ---------------------------------------------------------------------------
# label checks


def _check_labels(y: np.ndarray, n_samples: int, min_classes: int = 1) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n_samples,):
        raise DimensionError(f"labels axis has {y.shape}, expected ({n_samples},)")
    if not np.issubdtype(y.dtype, np.integer):
        raise ValidationError("labels must be integers")
    if y.min() < 0 or y.max() >= NUM_CLASSES:
        raise ValidationError("labels must lie in {0, 1, 2}")
    if len(np.unique(y)) < min_classes:
        raise ValidationError(f"need at least {min_classes} distinct classes")
    return y.astype(np.int64)


# ---------------------------------------------------------------------------
# Gini


def gini_impurity(labels: Sequence[int]) -> float:
    """1 - sum_c p_c^2 over the label subset."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValidationError("gini impurity of an empty subset is undefined")
    counts = np.bincount(labels, minlength=NUM_CLASSES)
    p = counts / labels.size
    return float(1.0 - np.sum(p * p))


def _gini_from_counts(counts: np.ndarray, n: int) -> float:
    return 1.0 - float(np.sum(counts * counts)) / (n * n)


# ---------------------------------------------------------------------------
# counter-based randomness (splitmix64)

_MASK64 = (1 << 64) - 1
_PRIORITY_TAG = 0x70726900  # distinct draw purposes per node
_CUT_TAG = 0x63757400


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _splitmix64_vec(x: np.ndarray) -> np.ndarray:
    x = (x + np.uint64(0x9E3779B97F4A7C15))
    z = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _name_hashes(names: Sequence[str]) -> np.ndarray:
    digests = [hashlib.sha256(n.encode("utf-8")).digest()[:8] for n in names]
    return np.array([int.from_bytes(d, "big") for d in digests], dtype=np.uint64)


def _node_draws(seed: int, tree: int, node: int, tag: int, hashes: np.ndarray) -> np.ndarray:
    """One u64 per feature for this (tree, node, purpose)."""
    key = _splitmix64(seed & _MASK64)
    key = _splitmix64(key ^ tree)
    key = _splitmix64(key ^ node)
    key = _splitmix64(key ^ tag)
    v = _splitmix64_vec(hashes ^ np.uint64(key))
    return _splitmix64_vec(v ^ np.uint64(_splitmix64(key)))


def _unit_interval(u: np.ndarray) -> np.ndarray:
    """Map u64 draws to the open interval (0, 1)."""
    return ((u >> np.uint64(11)).astype(np.float64) + 0.5) / float(1 << 53)


# ---------------------------------------------------------------------------
# extra trees


def fit_extra_trees(
    X: FeatureMatrix, y: np.ndarray, cfg: Optional[ExtraTreesConfig] = None
) -> Tuple[List[List[TreeNode]], ImportanceRanking]:
    """Build an extremely randomized forest and rank features by importance.

    Every tree sees the full training set (no bootstrap). At each node the
    k_features lowest-hash candidates among the locally non-constant features
    each get one uniform cut in the open (min, max) of their node range; the
    candidate with the largest Gini decrease wins. Importance is the decrease
    weighted by the node's sample fraction, summed per feature, averaged over
    trees, and normalized to sum 1.
    """
    cfg = cfg or ExtraTreesConfig()
    y = _check_labels(y, X.n_samples)
    k = cfg.k_features
    if k is None:
        k = int(np.ceil(np.sqrt(X.n_features)))
    if k > X.n_features:
        raise ValidationError(
            f"k_features is {k} but the matrix has {X.n_features} features"
        )

    values = X.values
    hashes = _name_hashes(X.names)
    n_root = X.n_samples

    root_impure = len(np.unique(y)) > 1
    root_all_constant = bool(np.all(values.min(axis=0) == values.max(axis=0)))
    if root_impure and root_all_constant:
        warnings.warn(
            "all features are constant; no split is possible and importances are 0",
            stacklevel=2,
        )

    totals = np.zeros(X.n_features)
    forest: List[List[TreeNode]] = []
    for tree_idx in range(cfg.n_trees):
        nodes: List[TreeNode] = []
        imp = np.zeros(X.n_features)
        # stack entries: (row indices, depth, parent node index, is_left_child)
        stack = [(np.arange(n_root), 0, -1, False)]
        while stack:
            rows, depth, parent, is_left = stack.pop()
            node_id = len(nodes)
            if parent >= 0:
                if is_left:
                    nodes[parent].left = node_id
                else:
                    nodes[parent].right = node_id
            n = rows.size
            labels = y[rows]
            counts = np.bincount(labels, minlength=NUM_CLASSES)
            node_gini = _gini_from_counts(counts, n)
            leaf = TreeNode(feature=-1, cut=np.nan, n_samples=n)
            if (
                node_gini == 0.0
                or n < cfg.min_samples_split
                or (cfg.max_depth is not None and depth >= cfg.max_depth)
            ):
                nodes.append(leaf)
                continue

            # scan features in priority order, keeping the first k that are
            # non-constant at this node; columns are fetched lazily so a node
            # touches ~k columns, not all of them
            priorities = _node_draws(cfg.seed, tree_idx, node_id, _PRIORITY_TAG, hashes)
            order = np.argsort(priorities)
            candidates = []
            for f in order:
                col = values[rows, f]
                lo = col.min()
                hi = col.max()
                if lo < hi:
                    candidates.append((int(f), col, lo, hi))
                    if len(candidates) == k:
                        break
            if not candidates:
                nodes.append(leaf)
                continue

            cut_units = _unit_interval(
                _node_draws(cfg.seed, tree_idx, node_id, _CUT_TAG, hashes)
            )
            best_feature = -1
            best_cut = np.nan
            best_decrease = 0.0
            best_left = None
            for f, col, lo, hi in candidates:
                cut = lo + cut_units[f] * (hi - lo)
                left = col <= cut
                n_left = int(left.sum())
                cl = np.bincount(labels[left], minlength=NUM_CLASSES)
                gl = _gini_from_counts(cl, n_left)
                gr = _gini_from_counts(counts - cl, n - n_left)
                decrease = node_gini - (n_left * gl + (n - n_left) * gr) / n
                if decrease > best_decrease:
                    best_feature = f
                    best_cut = float(cut)
                    best_decrease = decrease
                    best_left = left

            if best_feature < 0:
                # every candidate cut left impurity unchanged
                nodes.append(leaf)
                continue

            imp[best_feature] += (n / n_root) * best_decrease
            nodes.append(TreeNode(feature=best_feature, cut=best_cut, n_samples=n))
            # push right first so the left child takes the next preorder id
            stack.append((rows[~best_left], depth + 1, node_id, False))
            stack.append((rows[best_left], depth + 1, node_id, True))
        forest.append(nodes)
        totals += imp

    mean_imp = totals / cfg.n_trees
    total = mean_imp.sum()
    if total > 0:
        mean_imp = mean_imp / total
    entries = sorted(zip(X.names, mean_imp.tolist()), key=lambda e: (-e[1], e[0]))
    return forest, ImportanceRanking(entries)


def select_top_k(ranking: ImportanceRanking, k: int) -> List[str]:
    """First k feature names of the descending ranking."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    if k > len(ranking.entries):
        raise ValidationError(
            f"k is {k} but only {len(ranking.entries)} features are ranked"
        )
    return ranking.names()[:k]


# ---------------------------------------------------------------------------
# ANOVA F


def anova_f(X: FeatureMatrix, y: np.ndarray) -> np.ndarray:
    """One-way ANOVA F score per feature: (SSB/(C-1)) / (SSW/(N-C)).

    Constant features score 0; zero within-class variance with nonzero
    between-class variance scores +inf (ranks first).
    """
    y = _check_labels(y, X.n_samples, min_classes=2)
    classes = np.unique(y)
    n, _ = X.values.shape
    c = len(classes)
    if n <= c:
        raise ValidationError(f"need more samples ({n}) than classes ({c})")

    grand = X.values.mean(axis=0)
    ssb = np.zeros(X.n_features)
    ssw = np.zeros(X.n_features)
    for cls in classes:
        sub = X.values[y == cls]
        mean_c = sub.mean(axis=0)
        ssb += sub.shape[0] * (mean_c - grand) ** 2
        ssw += ((sub - mean_c) ** 2).sum(axis=0)

    constant = X.values.min(axis=0) == X.values.max(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = (ssb / (c - 1)) / (ssw / (n - c))
    scores[ssw == 0] = np.inf
    scores[constant] = 0.0
    return scores


def anova_ranking(X: FeatureMatrix, y: np.ndarray) -> ImportanceRanking:
    """Features ordered by descending F score (inf sentinels first)."""
    scores = anova_f(X, y)
    entries = sorted(zip(X.names, scores.tolist()), key=lambda e: (-e[1], e[0]))
    return ImportanceRanking(entries)


# ---------------------------------------------------------------------------
# variance threshold


def variance_threshold(X: FeatureMatrix, tau: float) -> np.ndarray:
    """Boolean mask keeping features whose population variance exceeds tau."""
    if not np.isfinite(tau):
        raise ValidationError("tau must be finite")
    return X.values.var(axis=0) > tau


# ---------------------------------------------------------------------------
# PCA


def pca_fit(X: FeatureMatrix, n_components: int) -> PcaModel:
    """Top eigenvectors of the sample covariance, descending eigenvalue.

    Each component's sign is fixed so its largest-magnitude entry is
    positive, making the decomposition deterministic.
    """
    if n_components < 1:
        raise ValidationError("n_components must be >= 1")
    limit = min(X.n_samples, X.n_features)
    if n_components > limit:
        raise ValidationError(
            f"n_components is {n_components}, limit is min(n_samples, n_features) = {limit}"
        )
    mean = X.values.mean(axis=0)
    centered = X.values - mean
    cov = (centered.T @ centered) / (X.n_samples - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:n_components]
    components = eigvecs[:, order].T
    for i in range(components.shape[0]):
        j = np.argmax(np.abs(components[i]))
        if components[i, j] < 0:
            components[i] = -components[i]
    variances = np.maximum(eigvals[order], 0.0)
    return PcaModel(mean=mean, components=components, explained_variance=variances)


def pca_transform(model: PcaModel, values: np.ndarray) -> np.ndarray:
    """Project rows onto the components: (X - mean) @ components.T."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != model.mean.shape[0]:
        raise DimensionError(
            f"rows must have {model.mean.shape[0]} features, got shape {values.shape}"
        )
    return (values - model.mean) @ model.components.T


def pca_inverse(model: PcaModel, reduced: np.ndarray) -> np.ndarray:
    """Map reduced rows back to the original space (lossy unless full rank)."""
    reduced = np.asarray(reduced, dtype=np.float64)
    if reduced.ndim != 2 or reduced.shape[1] != model.n_components:
        raise DimensionError(
            f"rows must have {model.n_components} components, got shape {reduced.shape}"
        )
    return reduced @ model.components + model.mean


# ---------------------------------------------------------------------------
# export


def write_ranking_csv(path, ranking: ImportanceRanking, method: str) -> None:
    """CSV with columns (rank, feature_name, score, method), best first."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "feature_name", "score", "method"])
        for rank, (name, score) in enumerate(ranking.entries, start=1):
            writer.writerow([rank, name, "%.17g" % score, method])
