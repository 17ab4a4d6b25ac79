import numpy as np
import pytest

from core.data import Dataset, TaskKind
from core.distributions import TabularGaussian
from core.errors import DimensionMismatch, IncompatibleTask, UnsupportedAlgorithm
from core.learners import LearnerSpec, correctness, performance, predict, train
from utils.seeding import derive_seed


CLASSIFIERS = ["dt", "logit", "gnb", "rf", "gbm", "mlp"]


def test_logit_reaches_bayes_level_accuracy(two_gaussians):
    train_set, test_set = two_gaussians
    model = train(LearnerSpec("logit"), train_set)

    assert performance(model, test_set) >= 0.995
    assert model.diagnostics.converged


@pytest.mark.parametrize("algorithm", CLASSIFIERS)
def test_every_classifier_learns_separated_gaussians(algorithm, two_gaussians):
    train_set, test_set = two_gaussians
    model = train(LearnerSpec(algorithm, seed=3), train_set)

    assert performance(model, test_set) >= 0.95
    assert model.diagnostics.n_train == len(train_set)


def test_decision_tree_train_accuracy_is_at_least_test_accuracy(two_gaussians):
    train_set, test_set = two_gaussians
    model = train(LearnerSpec("dt", {"max_depth": 5}), train_set)

    assert model.diagnostics.train_performance >= performance(model, test_set)


def test_gnb_tolerates_a_constant_feature():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 2, size=400)
    x = np.column_stack([np.where(labels == 1, 2.0, -2.0) + rng.standard_normal(400), np.full(400, 7.0)])
    model = train(LearnerSpec("gnb"), Dataset(x, labels, np.zeros(400)))

    queries = np.array([[3.0, 7.0], [-3.0, 7.0]])
    assert predict(model, queries).tolist() == [1.0, 0.0]


def test_single_class_training_gives_constant_predictor():
    data = Dataset(np.random.default_rng(1).standard_normal((30, 2)), np.ones(30), np.zeros(30))
    model = train(LearnerSpec("logit"), data)

    assert model.diagnostics.constant
    assert (predict(model, np.random.default_rng(2).standard_normal((10, 2))) == 1.0).all()


def test_performance_counts_correct_predictions():
    model = train(LearnerSpec("constant"), Dataset(np.zeros((4, 1)), np.ones(4), np.zeros(4)))
    queries = Dataset(np.zeros((4, 1)), [1, 1, 1, 0], np.zeros(4))

    assert performance(model, queries) == 0.75
    assert correctness(model, queries).tolist() == [1.0, 1.0, 1.0, 0.0]


def test_regression_tree_memorizes_a_tiny_set():
    data = Dataset([[0.0], [1.0], [2.0], [3.0]], [0.5, -1.0, 2.0, 4.0], np.zeros(4), TaskKind.REGRESSION)
    model = train(LearnerSpec("dt"), data)

    assert performance(model, data) == 0.0
    assert predict(model, np.array([2.0])) == pytest.approx(2.0)


def test_regression_mlp_fits_a_tiny_set():
    x = np.array([[0.0], [0.3], [0.6], [1.0]])
    y = np.array([0.0, 0.6, 1.2, 2.0])
    data = Dataset(x, y, np.zeros(4), TaskKind.REGRESSION)
    model = train(LearnerSpec("mlp", {"epochs": 2000, "batch_size": 4, "learning_rate": 0.01}, seed=0), data)

    assert np.abs(predict(model, x) - y).max() < 0.3


def test_logit_rejects_regression():
    data = Dataset([[0.0], [1.0]], [0.1, 0.2], [0, 0], TaskKind.REGRESSION)
    with pytest.raises(IncompatibleTask):
        train(LearnerSpec("logit"), data)


def test_predict_checks_dimensionality(two_gaussians):
    model = train(LearnerSpec("dt"), two_gaussians[0])
    with pytest.raises(DimensionMismatch):
        predict(model, np.zeros((3, 5)))


def test_spec_validation():
    with pytest.raises(UnsupportedAlgorithm):
        LearnerSpec("svm")
    with pytest.raises(ValueError):
        LearnerSpec("knn")
    with pytest.raises(ValueError):
        LearnerSpec("dt", {"max_depth": 0})
    with pytest.raises(ValueError):
        LearnerSpec("mlp", {"learning_rate": -1.0})
    with pytest.raises(ValueError):
        LearnerSpec("dt", {"n_estimators": 10})


def test_same_seed_gives_same_predictions():
    data = TabularGaussian(3, class_sep=1.0).sample(500, np.random.default_rng(3))
    queries = np.random.default_rng(4).standard_normal((200, 3))

    a = predict(train(LearnerSpec("rf", seed=11), data), queries)
    b = predict(train(LearnerSpec("rf", seed=11), data), queries)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("algorithm", ["dt", "rf", "gbm"])
def test_trees_ignore_monotone_rescaling(algorithm):
    data = TabularGaussian(1, class_sep=1.5).sample(300, np.random.default_rng(5))
    rescaled = Dataset(np.exp(data.features), data.labels, data.groups)

    a = predict(train(LearnerSpec(algorithm, seed=2), data), data.features)
    b = predict(train(LearnerSpec(algorithm, seed=2), rescaled), rescaled.features)
    assert np.array_equal(a, b)


def test_random_forest_overfits_more_than_logit():
    pool = TabularGaussian(4, class_sep=1.0, label_noise=0.2)
    train_set = pool.sample(1000, np.random.default_rng(6))
    test_set = pool.sample(1000, np.random.default_rng(7))

    def gap(spec):
        model = train(spec, train_set)
        return model.diagnostics.train_performance - performance(model, test_set)

    assert gap(LearnerSpec("rf", seed=1)) > gap(LearnerSpec("logit")) + 0.1


@pytest.mark.parametrize("algorithm", ["dt", "rf", "gbm", "mlp"])
def test_derived_seeds_wider_than_32_bits_are_accepted(algorithm):
    data = TabularGaussian(2, class_sep=2.0).sample(200, np.random.default_rng(8))
    seed = derive_seed(0, "target", 3)
    assert seed >= 2**32
    spec = LearnerSpec(algorithm, {"epochs": 20} if algorithm == "mlp" else {}, seed=seed)

    a = predict(train(spec, data), data.features)
    b = predict(train(spec, data), data.features)
    assert np.array_equal(a, b)
