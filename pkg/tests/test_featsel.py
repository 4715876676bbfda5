"""Feature selection tests: Gini, extra trees, ANOVA F, variance threshold,
PCA, and the ranking CSV export."""

import csv
import warnings

import numpy as np
import pytest

from cogload.errors import DimensionError, NumericError, ValidationError
from cogload.featsel import (
    ExtraTreesConfig,
    FeatureMatrix,
    ImportanceRanking,
    PcaModel,
    anova_f,
    anova_ranking,
    fit_extra_trees,
    gini_impurity,
    pca_fit,
    pca_inverse,
    pca_transform,
    select_top_k,
    variance_threshold,
    write_ranking_csv,
)

from oracles import anova_f_brute, jacobi_eigh


def matrix(rng, n=20, f=4):
    values = rng.normal(size=(n, f))
    return FeatureMatrix(values, [f"feat_{i}" for i in range(f)])


class TestFeatureMatrix:
    def test_rejects_non_2d(self):
        with pytest.raises(DimensionError):
            FeatureMatrix(np.zeros(5), ["a"])

    def test_rejects_single_sample(self):
        with pytest.raises(ValidationError):
            FeatureMatrix(np.zeros((1, 3)), ["a", "b", "c"])

    def test_rejects_name_count_mismatch(self):
        with pytest.raises(DimensionError):
            FeatureMatrix(np.zeros((3, 2)), ["a"])

    def test_rejects_duplicate_names(self):
        with pytest.raises(ValidationError):
            FeatureMatrix(np.zeros((3, 2)), ["a", "a"])

    def test_rejects_non_finite(self):
        vals = np.zeros((3, 2))
        vals[1, 1] = np.nan
        with pytest.raises(NumericError):
            FeatureMatrix(vals, ["a", "b"])


class TestImportanceRanking:
    def test_rejects_negative_scores(self):
        with pytest.raises(ValidationError):
            ImportanceRanking([("a", -0.1)])

    def test_rejects_unsorted(self):
        with pytest.raises(ValidationError):
            ImportanceRanking([("a", 0.2), ("b", 0.5)])

    def test_ties_break_by_name(self):
        with pytest.raises(ValidationError):
            ImportanceRanking([("b", 0.5), ("a", 0.5)])
        ok = ImportanceRanking([("a", 0.5), ("b", 0.5)])
        assert ok.names() == ["a", "b"]


class TestGini:
    def test_pure(self):
        assert gini_impurity([1, 1, 1]) == 0.0

    def test_two_even_classes(self):
        assert gini_impurity([0, 1]) == 0.5

    def test_three_even_classes(self):
        assert np.isclose(gini_impurity([0, 1, 2]), 2.0 / 3.0, rtol=0, atol=1e-15)

    def test_skewed(self):
        # p = (3/4, 1/4): 1 - 9/16 - 1/16 = 6/16
        assert np.isclose(gini_impurity([0, 0, 0, 1]), 0.375, rtol=0, atol=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            gini_impurity([])


class TestAnova:
    def test_hand_case_f_equals_8(self):
        # class 0 -> {0, 1}, class 1 -> {2, 3}: SSB=4, SSW=1, F=(4/1)/(1/2)=8
        X = FeatureMatrix(np.array([[0.0], [1.0], [2.0], [3.0]]), ["a"])
        y = np.array([0, 0, 1, 1])
        assert np.isclose(anova_f(X, y)[0], 8.0, rtol=0, atol=1e-12)

    def test_constant_feature_scores_zero(self):
        X = FeatureMatrix(
            np.column_stack([np.ones(6), np.arange(6.0)]), ["const", "rising"]
        )
        y = np.array([0, 0, 1, 1, 2, 2])
        scores = anova_f(X, y)
        assert scores[0] == 0.0
        assert scores[1] > 0.0

    def test_perfect_separation_scores_inf(self):
        X = FeatureMatrix(np.array([[1.0], [1.0], [5.0], [5.0]]), ["a"])
        y = np.array([0, 0, 1, 1])
        assert anova_f(X, y)[0] == np.inf

    def test_matches_brute_oracle(self):
        rng = np.random.default_rng(31)
        X = matrix(rng, n=24, f=5)
        y = rng.integers(0, 3, size=24)
        scores = anova_f(X, y)
        for j in range(5):
            want = anova_f_brute(X.values[:, j], y)
            assert np.isclose(scores[j], want, rtol=0, atol=1e-9), j

    def test_needs_two_classes(self):
        rng = np.random.default_rng(0)
        X = matrix(rng, n=6, f=2)
        with pytest.raises(ValidationError):
            anova_f(X, np.zeros(6, dtype=int))

    def test_needs_more_samples_than_classes(self):
        X = FeatureMatrix(np.array([[0.0], [1.0], [2.0]]), ["a"])
        with pytest.raises(ValidationError):
            anova_f(X, np.array([0, 1, 2]))

    def test_ranking_puts_inf_first(self):
        X = FeatureMatrix(
            np.column_stack([[1.0, 1.0, 5.0, 5.0], [0.0, 1.0, 2.0, 3.0]]),
            ["sep", "noisy"],
        )
        y = np.array([0, 0, 1, 1])
        ranking = anova_ranking(X, y)
        assert ranking.names()[0] == "sep"


class TestVarianceThreshold:
    def test_population_variance_strictly_greater(self):
        # column a: population var of [0,2] about mean 1 is exactly 1.0, so a
        # tau of 1.0 must drop it (strict >); column b has var 4.0
        X = FeatureMatrix(
            np.array([[0.0, 0.0, 3.0], [2.0, 4.0, 3.0]]), ["a", "b", "c"]
        )
        mask = variance_threshold(X, 1.0)
        assert mask.tolist() == [False, True, False]

    def test_zero_tau_drops_constants_only(self):
        X = FeatureMatrix(
            np.array([[1.0, 0.0], [1.0, 1e-8]]), ["const", "tiny"]
        )
        mask = variance_threshold(X, 0.0)
        assert mask.tolist() == [False, True]

    def test_rejects_non_finite_tau(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValidationError):
            variance_threshold(matrix(rng), np.nan)


class TestPca:
    def test_components_orthonormal_and_variances_descending(self):
        rng = np.random.default_rng(32)
        X = matrix(rng, n=40, f=6)
        model = pca_fit(X, 4)
        gram = model.components @ model.components.T
        assert np.allclose(gram, np.eye(4), rtol=0, atol=1e-10)
        assert np.all(np.diff(model.explained_variance) <= 1e-12)

    def test_sign_convention(self):
        rng = np.random.default_rng(33)
        X = matrix(rng, n=30, f=5)
        model = pca_fit(X, 5)
        for row in model.components:
            assert row[np.argmax(np.abs(row))] > 0

    def test_full_rank_round_trip(self):
        rng = np.random.default_rng(34)
        X = matrix(rng, n=25, f=4)
        model = pca_fit(X, 4)
        back = pca_inverse(model, pca_transform(model, X.values))
        assert np.allclose(back, X.values, rtol=0, atol=1e-9)

    def test_matches_jacobi_oracle(self):
        rng = np.random.default_rng(35)
        X = matrix(rng, n=30, f=4)
        model = pca_fit(X, 4)
        centered = X.values - X.values.mean(axis=0)
        cov = centered.T @ centered / (X.n_samples - 1)
        eigvals, eigrows = jacobi_eigh(cov)
        assert np.allclose(model.explained_variance, eigvals, rtol=0, atol=1e-9)
        for got, want in zip(model.components, eigrows):
            assert np.isclose(abs(got @ want), 1.0, rtol=0, atol=1e-8)

    def test_projection_captures_planted_direction(self):
        rng = np.random.default_rng(36)
        direction = np.array([3.0, 0.0, 4.0]) / 5.0
        scale = rng.normal(size=(200, 1)) * 10.0
        X = FeatureMatrix(
            scale * direction + rng.normal(size=(200, 3)) * 0.1, ["a", "b", "c"]
        )
        model = pca_fit(X, 1)
        assert abs(model.components[0] @ direction) > 0.999

    def test_transform_checks_width(self):
        rng = np.random.default_rng(0)
        model = pca_fit(matrix(rng, n=10, f=4), 2)
        with pytest.raises(DimensionError):
            pca_transform(model, np.zeros((3, 5)))
        with pytest.raises(DimensionError):
            pca_inverse(model, np.zeros((3, 3)))

    def test_component_count_limit(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValidationError):
            pca_fit(matrix(rng, n=3, f=5), 4)
        with pytest.raises(ValidationError):
            pca_fit(matrix(rng, n=10, f=4), 0)

    def test_model_validation(self):
        with pytest.raises(NumericError):
            PcaModel(
                mean=np.zeros(2),
                components=np.array([[1.0, 1.0]]),  # not unit norm
                explained_variance=np.array([1.0]),
            )
        with pytest.raises(NumericError):
            PcaModel(
                mean=np.zeros(2),
                components=np.eye(2),
                explained_variance=np.array([1.0, 2.0]),  # increasing
            )


def planted_matrix(rng, n=60, informative=3, noise=9, effect=3.0):
    y = rng.integers(0, 3, size=n)
    cols = [y * effect + rng.normal(size=n) for _ in range(informative)]
    cols += [rng.normal(size=n) for _ in range(noise)]
    names = [f"inf_{i}" for i in range(informative)] + [
        f"noise_{i}" for i in range(noise)
    ]
    return FeatureMatrix(np.column_stack(cols), names), y


class TestExtraTrees:
    def test_deterministic(self):
        rng = np.random.default_rng(37)
        X, y = planted_matrix(rng)
        cfg = ExtraTreesConfig(n_trees=10, seed=5)
        _, r1 = fit_extra_trees(X, y, cfg)
        _, r2 = fit_extra_trees(X, y, cfg)
        assert r1.entries == r2.entries

    def test_seed_changes_forest(self):
        rng = np.random.default_rng(38)
        X, y = planted_matrix(rng)
        _, r1 = fit_extra_trees(X, y, ExtraTreesConfig(n_trees=10, seed=0))
        _, r2 = fit_extra_trees(X, y, ExtraTreesConfig(n_trees=10, seed=1))
        assert r1.entries != r2.entries

    def test_column_permutation_invariance(self):
        # draws are keyed by feature name, so shuffling columns must permute
        # scores without changing them
        rng = np.random.default_rng(39)
        X, y = planted_matrix(rng, n=40, informative=2, noise=6)
        cfg = ExtraTreesConfig(n_trees=8, seed=2)
        _, base = fit_extra_trees(X, y, cfg)
        perm = rng.permutation(X.n_features)
        shuffled = FeatureMatrix(X.values[:, perm], [X.names[i] for i in perm])
        _, moved = fit_extra_trees(shuffled, y, cfg)
        assert base.entries == moved.entries

    def test_recovers_planted_features(self):
        rng = np.random.default_rng(40)
        X, y = planted_matrix(rng, n=80, informative=3, noise=12)
        _, ranking = fit_extra_trees(X, y, ExtraTreesConfig(n_trees=30, seed=0))
        top = set(ranking.names()[:5])
        assert {"inf_0", "inf_1", "inf_2"} <= top

    def test_importances_sum_to_one(self):
        rng = np.random.default_rng(41)
        X, y = planted_matrix(rng)
        _, ranking = fit_extra_trees(X, y, ExtraTreesConfig(n_trees=10, seed=0))
        assert np.isclose(ranking.scores().sum(), 1.0, rtol=0, atol=1e-9)

    def test_pure_root_gives_zero_importances_without_warning(self):
        rng = np.random.default_rng(42)
        X = matrix(rng, n=10, f=3)
        y = np.ones(10, dtype=int)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            forest, ranking = fit_extra_trees(X, y, ExtraTreesConfig(n_trees=3))
        assert all(score == 0.0 for _, score in ranking.entries)
        assert all(len(tree) == 1 and tree[0].feature == -1 for tree in forest)

    def test_all_constant_features_warn(self):
        X = FeatureMatrix(np.ones((6, 2)), ["a", "b"])
        y = np.array([0, 1, 2, 0, 1, 2])
        with pytest.warns(UserWarning, match="constant"):
            _, ranking = fit_extra_trees(X, y, ExtraTreesConfig(n_trees=2))
        assert all(score == 0.0 for _, score in ranking.entries)

    def test_forest_shape_and_node_invariants(self):
        rng = np.random.default_rng(43)
        X, y = planted_matrix(rng, n=30)
        forest, _ = fit_extra_trees(X, y, ExtraTreesConfig(n_trees=4, seed=1))
        assert len(forest) == 4
        for tree in forest:
            for node in tree:
                if node.feature == -1:
                    assert node.left == -1 and node.right == -1
                else:
                    assert 0 <= node.feature < X.n_features
                    assert node.left >= 0 and node.right >= 0

    def test_max_depth_limits_tree(self):
        rng = np.random.default_rng(44)
        X, y = planted_matrix(rng, n=60)
        forest, _ = fit_extra_trees(
            X, y, ExtraTreesConfig(n_trees=2, max_depth=1, seed=0)
        )
        for tree in forest:
            assert len(tree) <= 3  # root plus two leaves

    def test_k_features_validation(self):
        rng = np.random.default_rng(0)
        X, y = planted_matrix(rng, n=20, informative=1, noise=2)
        with pytest.raises(ValidationError):
            fit_extra_trees(X, y, ExtraTreesConfig(k_features=10))
        with pytest.raises(ValidationError):
            ExtraTreesConfig(n_trees=0)

    def test_bad_labels(self):
        rng = np.random.default_rng(0)
        X = matrix(rng, n=6, f=2)
        with pytest.raises(ValidationError):
            fit_extra_trees(X, np.array([0, 1, 2, 3, 0, 1]))
        with pytest.raises(ValidationError):
            fit_extra_trees(X, np.array([0.0, 1.0, 2.0, 0.0, 1.0, 2.0]))


class TestSelection:
    def test_select_top_k(self):
        ranking = ImportanceRanking([("a", 0.6), ("b", 0.3), ("c", 0.1)])
        assert select_top_k(ranking, 2) == ["a", "b"]

    def test_select_top_k_bounds(self):
        ranking = ImportanceRanking([("a", 1.0)])
        with pytest.raises(ValidationError):
            select_top_k(ranking, 0)
        with pytest.raises(ValidationError):
            select_top_k(ranking, 2)


class TestRankingCsv:
    def test_format(self, tmp_path):
        ranking = ImportanceRanking([("a", 0.75), ("b", 0.25)])
        path = tmp_path / "ranking.csv"
        write_ranking_csv(path, ranking, "extra_trees")
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["rank", "feature_name", "score", "method"]
        assert rows[1] == ["1", "a", "0.75", "extra_trees"]
        assert rows[2] == ["2", "b", "0.25", "extra_trees"]

    def test_scores_survive_round_trip_exactly(self, tmp_path):
        score = 1.0 / 3.0
        ranking = ImportanceRanking([("x", score)])
        path = tmp_path / "ranking.csv"
        write_ranking_csv(path, ranking, "anova")
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert float(rows[1][2]) == score
