"""CART trees, bagged forest, standardizer, and stratified K-fold."""

import numpy as np
import numpy.testing as npt
import pytest

from deepagent.errors import UsageError
from deepagent.forest import (
    apply_standardizer,
    fit_standardizer,
    predict_forest,
    predict_forest_batch,
    stratified_kfold,
    train_forest,
    train_tree,
)


class TestStandardizer:
    def test_simple_column(self):
        std = fit_standardizer(np.array([[1.0], [2.0], [3.0]]))
        out = apply_standardizer(std, np.array([[1.0], [2.0], [3.0]]))
        npt.assert_allclose(out[:, 0], [-1.22474, 0.0, 1.22474], atol=1e-5)

    def test_constant_column_guard(self):
        std = fit_standardizer(np.array([[5.0, 1.0], [5.0, 2.0]]))
        out = apply_standardizer(std, np.array([[5.0, 1.5]]))
        assert out[0, 0] == 0.0

    def test_train_columns_centered(self):
        rng = np.random.default_rng(50)
        Z = rng.normal(loc=3.0, scale=2.0, size=(40, 2))
        std = fit_standardizer(Z)
        out = apply_standardizer(std, Z)
        assert np.abs(out.mean(axis=0)).max() < 1e-12
        npt.assert_allclose(out.std(axis=0), 1.0, rtol=1e-12)


class TestDecisionTree:
    def test_pure_input_single_leaf(self):
        tree = train_tree(np.array([[0.1], [0.2]]), np.array([1, 1]),
                          np.random.default_rng(0))
        assert tree.root.is_leaf and tree.root.vote == 1

    def test_two_point_split_at_midpoint(self):
        tree = train_tree(np.array([[0.0], [1.0]]), np.array([0, 1]),
                          np.random.default_rng(1))
        assert not tree.root.is_leaf
        assert tree.root.threshold == 0.5
        assert tree.predict_one(np.array([0.2])) == 0
        assert tree.predict_one(np.array([0.8])) == 1

    def test_separable_data_fit_to_purity(self):
        rng = np.random.default_rng(2)
        X = np.vstack([rng.normal(-2, 0.3, size=(30, 2)),
                       rng.normal(2, 0.3, size=(30, 2))])
        y = np.array([0] * 30 + [1] * 30)
        tree = train_tree(X, y, np.random.default_rng(3))
        npt.assert_array_equal(tree.predict(X), y)

    def test_constant_feature_falls_through(self):
        # feature 0 constant, feature 1 separates; purity still reached
        X = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]])
        y = np.array([0, 0, 1, 1])
        for seed in range(10):
            tree = train_tree(X, y, np.random.default_rng(seed))
            npt.assert_array_equal(tree.predict(X), y)

    def test_tie_votes_class_one(self):
        X = np.array([[1.0], [1.0]])
        y = np.array([0, 1])
        tree = train_tree(X, y, np.random.default_rng(4))
        assert tree.root.is_leaf and tree.root.vote == 1


class TestForest:
    def test_single_tree_no_bootstrap_matches_tree(self):
        rng = np.random.default_rng(5)
        Z = rng.normal(size=(20, 2))
        y = (Z[:, 0] > 0).astype(int)
        model = train_forest(Z, y, n_trees=1, seed=9, bootstrap=False)
        probs, labels = predict_forest_batch(model, Z)
        single = model.trees[0]
        std = model.standardizer
        for z, p in zip(Z, probs):
            assert p == float(single.predict_one(apply_standardizer(std, z[None])[0]))

    def test_unanimous_vote_gives_probability_one(self):
        Z = np.vstack([np.full((10, 2), -1.0) + np.random.default_rng(6).normal(0, .01, (10,2)),
                       np.full((10, 2), 1.0) + np.random.default_rng(7).normal(0, .01, (10,2))])
        y = np.array([0] * 10 + [1] * 10)
        model = train_forest(Z, y, n_trees=25, seed=1)
        prob, label = predict_forest(model, np.array([1.0, 1.0]))
        assert prob == 1.0 and label == 1

    def test_probability_equals_vote_fraction(self):
        rng = np.random.default_rng(8)
        Z = rng.normal(size=(30, 2))
        y = rng.integers(0, 2, 30)
        y[:2] = [0, 1]
        model = train_forest(Z, y, n_trees=17, seed=3)
        for _ in range(50):
            z = rng.normal(size=2)
            prob, label = predict_forest(model, z)
            zs = apply_standardizer(model.standardizer, z[None])[0]
            votes = [t.predict_one(zs) for t in model.trees]
            assert prob == sum(votes) / 17
            assert label == int(prob >= 0.5)

    def test_threshold_boundary_maps_to_one(self):
        # hand-built forest voting exactly half and half
        rng = np.random.default_rng(9)
        Z = rng.normal(size=(10, 2))
        y = rng.integers(0, 2, 10)
        y[:2] = [0, 1]
        model = train_forest(Z, y, n_trees=2, seed=4)
        from deepagent.forest import DecisionTree, TreeNode
        model.trees = [DecisionTree(TreeNode(vote=0)), DecisionTree(TreeNode(vote=1))]
        prob, label = predict_forest(model, np.zeros(2))
        assert prob == 0.5 and label == 1
        model.trees = [DecisionTree(TreeNode(vote=0)), DecisionTree(TreeNode(vote=0))]
        model.trees.append(DecisionTree(TreeNode(vote=1)))
        model.n_trees = 3
        prob, label = predict_forest(model, np.zeros(2))
        assert prob < 0.5 and label == 0

    def test_adding_positive_tree_never_decreases_probability(self):
        from deepagent.forest import DecisionTree, ForestModel, TreeNode
        std = fit_standardizer(np.array([[0.0, 0.0], [1.0, 1.0]]))
        rng = np.random.default_rng(10)
        votes = [TreeNode(vote=int(v)) for v in rng.integers(0, 2, 9)]
        model = ForestModel([DecisionTree(n) for n in votes], list(range(9)), std)
        before, _ = predict_forest(model, np.array([0.5, 0.5]))
        model.trees.append(DecisionTree(TreeNode(vote=1)))
        model.n_trees += 1
        after, _ = predict_forest(model, np.array([0.5, 0.5]))
        assert after >= before

    def test_single_class_rejected(self):
        with pytest.raises(UsageError):
            train_forest(np.zeros((4, 2)), np.ones(4, dtype=int), n_trees=2, seed=0)

    def test_empty_forest_rejected(self):
        from deepagent.forest import ForestModel
        model = ForestModel([], [], fit_standardizer(np.zeros((2, 2))))
        with pytest.raises(UsageError):
            predict_forest(model, np.zeros(2))


class TestStratifiedKfold:
    def test_balanced_hundred(self):
        y = np.array([0] * 50 + [1] * 50)
        for train_idx, val_idx in stratified_kfold(y, 5, seed=42):
            assert len(val_idx) == 20
            assert (y[val_idx] == 0).sum() == 10
            assert (y[val_idx] == 1).sum() == 10

    def test_52_48_split(self):
        y = np.array([1] * 52 + [0] * 48)
        for _, val_idx in stratified_kfold(y, 5, seed=7):
            fake = int((y[val_idx] == 1).sum())
            assert fake in (10, 11)

    def test_partition_property(self):
        rng = np.random.default_rng(51)
        y = rng.integers(0, 2, 83)
        y[:5] = [0, 0, 0, 1, 1]
        y[5:10] = [1, 1, 1, 0, 0]
        folds = stratified_kfold(y, 5, seed=3)
        seen = np.concatenate([v for _, v in folds])
        assert sorted(seen) == list(range(83))
        for train_idx, val_idx in folds:
            assert set(train_idx) | set(val_idx) == set(range(83))
            assert not set(train_idx) & set(val_idx)

    def test_small_class_rejected(self):
        y = np.array([0] * 20 + [1] * 4)
        with pytest.raises(UsageError):
            stratified_kfold(y, 5, seed=0)

    def test_balance_bound_random_sweep(self):
        rng = np.random.default_rng(52)
        for _ in range(100):
            n = int(rng.integers(12, 120))
            y = rng.integers(0, 2, n)
            counts = np.bincount(y, minlength=2)
            if counts.min() < 5:
                continue
            for _, val_idx in stratified_kfold(y, 5, seed=int(rng.integers(1e6))):
                for c in (0, 1):
                    got = int((y[val_idx] == c).sum())
                    assert abs(got - counts[c] / 5) <= 1.0
