"""
Black-box shadow-training attack

Each bundle is the mean performance of one model over n_q query points. A
one-dimensional logistic meta-classifier learns to tell target bundles from
shadow bundles; its balanced accuracy (overall or per group) is the audit
statistic.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import balanced_accuracy_score
from sklearn.preprocessing import StandardScaler

from core.data import Dataset
from core.distributions import Distribution
from core.errors import MissingGroup, NotEnoughQueries, SingleClass
from core.learners import LearnerSpec, TrainedModel, correctness
from utils.seeding import make_rng


ATTACK_TOLERANCE = 1e-8


class Origin(str, Enum):
    TARGET = "target"
    SHADOW = "shadow"


@dataclass(frozen=True)
class AttackBundle:
    """Aggregate performance of one model on one bundle of n_q query points"""
    feature: float
    origin: Origin
    size: int
    group: Optional[int] = None


@dataclass(frozen=True)
class ShadowSetup:
    """How many shadow models to train, with which learner and data"""
    learner: LearnerSpec
    n_s: int = 1
    source: Optional[Distribution] = None

    def __post_init__(self):
        if self.n_s < 1:
            raise ValueError(f"n_s must be at least 1, got {self.n_s}")


@dataclass(frozen=True)
class AttackModel:
    """Logistic meta-classifier over the scalar bundle feature

    Predicts "target" iff weight * feature + bias > 0.
    """
    weight: float
    bias: float
    n_t: int
    converged: bool = field(default=True, compare=False)

    def decision(self, features: np.ndarray) -> np.ndarray:
        return self.weight * np.asarray(features, dtype=np.float64) + self.bias

    def predict_target(self, features: np.ndarray) -> np.ndarray:
        return self.decision(features) > 0


def _bundle_indices(n: int, n_q: int, rng: np.random.Generator) -> List[np.ndarray]:
    order = rng.permutation(n)
    n_bundles = n // n_q
    return [order[i * n_q:(i + 1) * n_q] for i in range(n_bundles)]


def _emit(bundles: List[AttackBundle], scores: List[np.ndarray], origins: List[Origin],
          indices: List[np.ndarray], n_q: int, group: Optional[int]):
    for idx in indices:
        for per_point, origin in zip(scores, origins):
            bundles.append(AttackBundle(float(per_point[idx].mean()), origin, n_q, group))


def build_attack_dataset(
    target: TrainedModel,
    shadows: Sequence[TrainedModel],
    attack_data: Dataset,
    n_q: int,
    seed,
    group_pure: bool = False,
) -> List[AttackBundle]:
    """Query every model on disjoint bundles of n_q points

    One AttackBundle is produced per (bundle, model) pair. With
    ``group_pure`` the bundles are formed within each protected group and
    tagged with it.
    """
    if n_q < 1:
        raise ValueError(f"n_q must be at least 1, got {n_q}")
    if not shadows:
        raise ValueError("at least one shadow model is required")
    rng = make_rng(seed)

    models = [target, *shadows]
    origins = [Origin.TARGET] + [Origin.SHADOW] * len(shadows)
    scores = [correctness(model, attack_data) for model in models]

    bundles: List[AttackBundle] = []
    if not group_pure:
        if len(attack_data) < 2 * n_q:
            raise NotEnoughQueries(f"{len(attack_data)} query points cannot form 2 bundles of {n_q}")
        _emit(bundles, scores, origins, _bundle_indices(len(attack_data), n_q, rng), n_q, None)
    else:
        for group in (0, 1):
            members = np.flatnonzero(attack_data.groups == group)
            if len(members) < n_q:
                raise MissingGroup(f"group {group} has {len(members)} query points, fewer than n_q={n_q}")
            local = _bundle_indices(len(members), n_q, rng)
            _emit(bundles, scores, origins, [members[i] for i in local], n_q, group)

    logger.debug(f"Built {len(bundles)} attack bundles (n_q={n_q}, models={len(models)}, group_pure={group_pure})")
    return bundles


def _arrays(bundles: Sequence[AttackBundle]):
    x = np.array([b.feature for b in bundles], dtype=np.float64)
    y = np.array([b.origin is Origin.TARGET for b in bundles], dtype=np.int64)
    return x, y


def train_attack(bundles: Sequence[AttackBundle], orient_to_target: bool = False) -> AttackModel:
    """Fit the logistic meta-classifier on labelled bundles

    With ``orient_to_target`` the fitted direction is fixed so that a bundle
    on which the queried model performs better reads as "target". The
    boundary stays where the fit put it; only its sides may be swapped.
    """
    if not bundles:
        raise SingleClass("no attack bundles")
    sizes = {b.size for b in bundles}
    if len(sizes) != 1:
        raise ValueError(f"bundles mix sizes {sorted(sizes)}")
    x, y = _arrays(bundles)
    n_target = int(y.sum())
    n_shadow = len(y) - n_target
    if n_target == 0 or n_shadow == 0:
        raise SingleClass("attack training needs both target and shadow bundles")

    # n_s > 1: duplicate target bundles so the classes are balanced
    copies = max(1, n_shadow // n_target)
    if copies > 1:
        x = np.concatenate([x[y == 0], np.tile(x[y == 1], copies)])
        y = np.concatenate([np.zeros(n_shadow, dtype=np.int64), np.ones(n_target * copies, dtype=np.int64)])

    scaler = StandardScaler()
    z = scaler.fit_transform(x.reshape(-1, 1))
    classifier = LogisticRegression(tol=ATTACK_TOLERANCE, max_iter=10_000, solver="lbfgs")
    classifier.fit(z, y)

    coef = float(classifier.coef_[0, 0])
    intercept = float(classifier.intercept_[0])
    scale = float(scaler.scale_[0])
    mean = float(scaler.mean_[0])
    weight = coef / scale
    bias = intercept - coef * mean / scale
    if orient_to_target and weight < 0:
        weight, bias = -weight, -bias
    converged = bool(classifier.n_iter_[0] < classifier.max_iter)
    model = AttackModel(weight=weight, bias=bias, n_t=sizes.pop(), converged=converged)
    logger.debug(f"Attack model: weight={weight:.6g} bias={bias:.6g} (n_t={model.n_t})")
    return model


def attack_accuracy(model: AttackModel, test_bundles: Sequence[AttackBundle]) -> float:
    """Balanced accuracy of the meta-classifier on test bundles"""
    if not test_bundles:
        raise SingleClass("no test bundles")
    if any(b.size != model.n_t for b in test_bundles):
        raise ValueError(f"test bundles must have n_t={model.n_t} queries")
    x, y = _arrays(test_bundles)
    if y.min() == y.max():
        raise SingleClass("attack evaluation needs both target and shadow bundles")
    predicted = model.predict_target(x).astype(np.int64)
    return float(balanced_accuracy_score(y, predicted))


def inter_group_attack_gap(model: AttackModel, group_pure_bundles: Sequence[AttackBundle]) -> float:
    """Attack accuracy on group-0 bundles minus accuracy on group-1 bundles"""
    if any(b.group is None for b in group_pure_bundles):
        raise ValueError("inter-group gap needs group-pure bundles")
    by_group = {g: [b for b in group_pure_bundles if b.group == g] for g in (0, 1)}
    for group, members in by_group.items():
        if not members:
            raise MissingGroup(f"no bundles for group {group}")
    return attack_accuracy(model, by_group[0]) - attack_accuracy(model, by_group[1])
