"""
Learning-algorithm zoo used for target and shadow models

Downstream code only ever sees a TrainedModel through ``predict`` and
``performance``; the fitted estimator stays private.
"""

import warnings
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping

import numpy as np
from loguru import logger
from sklearn.dummy import DummyClassifier, DummyRegressor
from sklearn.ensemble import (
    GradientBoostingClassifier,
    GradientBoostingRegressor,
    RandomForestClassifier,
    RandomForestRegressor,
)
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression
from sklearn.naive_bayes import GaussianNB
from sklearn.neural_network import MLPClassifier, MLPRegressor
from sklearn.tree import DecisionTreeClassifier, DecisionTreeRegressor

from core.data import Dataset, TaskKind
from core.errors import DimensionMismatch, IncompatibleTask, UnsupportedAlgorithm
from utils.seeding import make_rng, rng_seed


ALGORITHMS = ("dt", "logit", "gnb", "rf", "gbm", "mlp", "constant")
UNSUPPORTED_ALGORITHMS = ("svm",)

REGRESSION_ALGORITHMS = ("dt", "rf", "gbm", "mlp", "constant")

DEFAULT_HYPERPARAMETERS: Dict[str, Dict[str, Any]] = {
    "dt": {"max_depth": 5},
    "logit": {"l2_penalty": 1e-4, "tol": 1e-6, "max_iter": 1000},
    "gnb": {"var_smoothing": 1e-9},
    "rf": {"n_estimators": 50, "max_depth": None},
    "gbm": {"n_estimators": 100, "max_depth": 3, "learning_rate": 0.1},
    "mlp": {"hidden_width": 32, "epochs": 100, "batch_size": 32, "learning_rate": 1e-3},
    "constant": {},
}


@dataclass(frozen=True)
class LearnerSpec:
    """Algorithm id, hyperparameter overrides and seed"""
    algorithm: str = "dt"
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.algorithm in UNSUPPORTED_ALGORITHMS:
            raise UnsupportedAlgorithm(f"algorithm {self.algorithm!r} is not supported")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        unknown = set(self.hyperparameters) - set(DEFAULT_HYPERPARAMETERS[self.algorithm])
        if unknown:
            raise ValueError(f"unknown hyperparameters for {self.algorithm}: {sorted(unknown)}")
        params = self.params
        for name in ("max_depth", "n_estimators", "hidden_width", "epochs", "batch_size"):
            value = params.get(name)
            if value is not None and int(value) < 1:
                raise ValueError(f"{self.algorithm}.{name} must be at least 1, got {value}")
        for name in ("learning_rate", "l2_penalty", "tol"):
            value = params.get(name)
            if value is not None and not float(value) > 0:
                raise ValueError(f"{self.algorithm}.{name} must be positive, got {value}")
        object.__setattr__(self, "hyperparameters", dict(self.hyperparameters))

    @property
    def params(self) -> Dict[str, Any]:
        merged = dict(DEFAULT_HYPERPARAMETERS[self.algorithm])
        merged.update(self.hyperparameters)
        return merged

    def with_seed(self, seed: int) -> "LearnerSpec":
        return LearnerSpec(self.algorithm, self.hyperparameters, seed)


@dataclass(frozen=True)
class TrainingDiagnostics:
    """Bookkeeping recorded for every fit"""
    train_performance: float
    converged: bool
    n_train: int
    constant: bool = False


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Black-box predictor; query it through predict/performance only"""
    algorithm: str
    task: TaskKind
    dimensionality: int
    diagnostics: TrainingDiagnostics
    _estimator: Any = field(repr=False)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return predict(self, x)


def _build_estimator(spec: LearnerSpec, task: TaskKind, n_train: int):
    p = spec.params
    # sklearn takes 32-bit random_state; derived seeds span 63 bits
    seed = rng_seed(make_rng(spec.seed))
    classification = task is TaskKind.CLASSIFICATION
    if spec.algorithm == "dt":
        cls = DecisionTreeClassifier if classification else DecisionTreeRegressor
        return cls(max_depth=p["max_depth"], random_state=seed)
    if spec.algorithm == "logit":
        # C scales with n so the penalty is l2_penalty on the mean loss
        return LogisticRegression(
            C=1.0 / (p["l2_penalty"] * n_train),
            tol=p["tol"],
            max_iter=p["max_iter"],
            solver="lbfgs",
        )
    if spec.algorithm == "gnb":
        return GaussianNB(var_smoothing=p["var_smoothing"])
    if spec.algorithm == "rf":
        cls = RandomForestClassifier if classification else RandomForestRegressor
        return cls(n_estimators=p["n_estimators"], max_depth=p["max_depth"], random_state=seed, n_jobs=1)
    if spec.algorithm == "gbm":
        cls = GradientBoostingClassifier if classification else GradientBoostingRegressor
        return cls(
            n_estimators=p["n_estimators"],
            max_depth=p["max_depth"],
            learning_rate=p["learning_rate"],
            random_state=seed,
        )
    if spec.algorithm == "mlp":
        cls = MLPClassifier if classification else MLPRegressor
        return cls(
            hidden_layer_sizes=(p["hidden_width"],),
            activation="relu",
            solver="adam",
            learning_rate_init=p["learning_rate"],
            batch_size=p["batch_size"],
            max_iter=p["epochs"],
            random_state=seed,
        )
    if spec.algorithm == "constant":
        return DummyClassifier(strategy="most_frequent") if classification else DummyRegressor(strategy="mean")
    raise UnsupportedAlgorithm(spec.algorithm)


def _score(task: TaskKind, predictions: np.ndarray, labels: np.ndarray) -> float:
    if task is TaskKind.CLASSIFICATION:
        return float(np.mean(predictions == labels))
    return float(np.mean((predictions - labels) ** 2))


def train(spec: LearnerSpec, data: Dataset) -> TrainedModel:
    """Fit ``spec`` on ``data`` and record training diagnostics"""
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    if data.task is TaskKind.REGRESSION and spec.algorithm not in REGRESSION_ALGORITHMS:
        raise IncompatibleTask(f"{spec.algorithm} does not support regression")

    constant = data.is_classification and len(np.unique(data.labels)) < 2
    if constant:
        # single-class training sets yield a constant predictor
        estimator = DummyClassifier(strategy="most_frequent")
    else:
        estimator = _build_estimator(spec, data.task, len(data))

    labels = data.labels.astype(np.int64) if data.is_classification else data.labels
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        estimator.fit(data.features, labels)
    converged = not any(issubclass(w.category, ConvergenceWarning) for w in caught)
    if not converged:
        logger.warning(f"{spec.algorithm} did not converge (seed {spec.seed}, n={len(data)})")

    train_performance = _score(data.task, np.asarray(estimator.predict(data.features), dtype=np.float64), data.labels)
    diagnostics = TrainingDiagnostics(train_performance, converged, len(data), constant)
    model = TrainedModel(
        algorithm=spec.algorithm,
        task=data.task,
        dimensionality=data.dimensionality,
        diagnostics=diagnostics,
        _estimator=estimator,
    )
    logger.debug(
        f"Trained {spec.algorithm} on {len(data)} rows: train performance {diagnostics.train_performance:.4f}"
    )
    return model


def predict(model: TrainedModel, x: np.ndarray) -> np.ndarray:
    """Hard predictions for one feature vector or a batch of them"""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x.reshape(1, -1) if single else x
    if batch.ndim != 2 or batch.shape[1] != model.dimensionality:
        raise DimensionMismatch(f"model expects {model.dimensionality} features, got shape {x.shape}")
    out = np.asarray(model._estimator.predict(batch), dtype=np.float64)
    return out[0] if single else out


def performance(model: TrainedModel, data: Dataset) -> float:
    """Mean accuracy for classification, mean squared error for regression"""
    if len(data) == 0:
        raise ValueError("cannot measure performance on an empty dataset")
    return _score(model.task, predict(model, data.features), data.labels)


def correctness(model: TrainedModel, data: Dataset) -> np.ndarray:
    """Per-example performance: 0/1 correctness or squared error"""
    predictions = predict(model, data.features)
    if model.task is TaskKind.CLASSIFICATION:
        return (predictions == data.labels).astype(np.float64)
    return (predictions - data.labels) ** 2
