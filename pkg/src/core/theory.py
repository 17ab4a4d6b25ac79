"""
Overfitting-model theory of the shadow-training attack

A model is correct with probability pi_tr on query points within epsilon of
one of its training points and pi_te elsewhere. The attack guesses "target"
iff the queried model is correct, which wins with probability
1/2 + 1/2 (pi_tr - pi_te) (f_t - f_s), where f_t and f_s are the
probabilities that a query lands near the target's or the shadow's training
set. Training sets and queries live in the one-dimensional GDS family.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.stats import norm

from core.distributions import GaussianGds
from utils.seeding import derive_seed, make_rng


DEFAULT_MC_SAMPLES = 1_000_000
DEFAULT_RESAMPLES = 100


class QueryDist(str, Enum):
    """Query distribution of the one-dimensional family"""
    D = "D"
    D0 = "D0"
    D1 = "D1"

    @property
    def group_mix(self) -> float:
        return {"D": 0.5, "D0": 0.0, "D1": 1.0}[self.value]


class ClosenessMethod(str, Enum):
    EXACT = "exact-interval-union"
    MONTE_CARLO = "monte-carlo"


QueryLike = Union[QueryDist, str]


@dataclass(frozen=True)
class TheoryParams:
    tau: float = 0.0
    epsilon: float = 0.001
    n_train: int = 1000
    pi_tr: float = 0.9
    pi_te: float = 0.6

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.n_train < 1:
            raise ValueError(f"n_train must be positive, got {self.n_train}")
        for name in ("pi_tr", "pi_te"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if not self.pi_tr > self.pi_te:
            raise ValueError("pi_tr must exceed pi_te (the model overfits)")


@dataclass(frozen=True)
class ClosenessResult:
    f_value: float
    method: ClosenessMethod
    mc_std_err: Optional[float] = None


@dataclass(frozen=True)
class TheorySimulation:
    """Empirical attack win rate next to the closed form on the same training sets"""
    win_rate: float
    f_t: float
    f_s: float
    predicted: float
    std_err: float
    n_trials: int

    @property
    def deviation(self) -> float:
        return abs(self.win_rate - self.predicted)


@dataclass(frozen=True)
class TheoryCurveRow:
    tau: float
    ft_d0: float
    ft_d1: float
    ft_d: float
    fs_d: float
    fs_d0: float
    fs_d1: float
    mc_stderr: float


CURVE_COLUMNS = ("tau", "ft_d0", "ft_d1", "ft_d", "fs_d", "fs_d0", "fs_d1", "mc_stderr")


def _query(query_dist: QueryLike, tau: float) -> GaussianGds:
    return GaussianGds(tau=tau, group_mix=QueryDist(query_dist).group_mix)


def _components(query_dist: QueryLike, tau: float) -> Tuple[np.ndarray, np.ndarray]:
    """(weights, means) of the unit-variance Gaussian mixture"""
    q = QueryDist(query_dist)
    group0 = [(0.5, -1.0), (0.5, 1.0)]
    group1 = [(0.5, -1.0 + tau), (0.5, 1.0 + tau)]
    parts = {QueryDist.D0: group0, QueryDist.D1: group1}.get(q)
    if parts is None:
        parts = [(w * 0.5, m) for w, m in group0 + group1]
    weights, means = zip(*parts)
    return np.asarray(weights), np.asarray(means)


def merge_intervals(points: Sequence[float], epsilon: float) -> Tuple[np.ndarray, np.ndarray]:
    """Disjoint (lo, hi) intervals covering the union of [x - eps, x + eps]"""
    x = np.sort(np.asarray(points, dtype=np.float64).reshape(-1))
    if x.size == 0:
        raise ValueError("training set must be non-empty")
    # a new interval starts wherever the gap to the previous point exceeds 2 eps
    starts = np.concatenate([[True], np.diff(x) > 2.0 * epsilon])
    ends = np.concatenate([starts[1:], [True]])
    return x[starts] - epsilon, x[ends] + epsilon


def _near(sorted_points: np.ndarray, queries: np.ndarray, epsilon: float) -> np.ndarray:
    idx = np.searchsorted(sorted_points, queries)
    left = sorted_points[np.clip(idx - 1, 0, len(sorted_points) - 1)]
    right = sorted_points[np.clip(idx, 0, len(sorted_points) - 1)]
    return (np.abs(queries - left) <= epsilon) | (np.abs(queries - right) <= epsilon)


def closeness_probability(
    train_points: Sequence[float],
    query_dist: QueryLike,
    epsilon: float,
    tau: float = 0.0,
    method: Union[ClosenessMethod, str] = ClosenessMethod.EXACT,
    n_samples: int = DEFAULT_MC_SAMPLES,
    seed=0,
) -> ClosenessResult:
    """Probability that a query from ``query_dist`` is within epsilon of a training point"""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    method = ClosenessMethod(method)
    lo, hi = merge_intervals(train_points, epsilon)

    if method is ClosenessMethod.EXACT:
        weights, means = _components(query_dist, tau)
        mass = norm.cdf(hi[None, :] - means[:, None]) - norm.cdf(lo[None, :] - means[:, None])
        f = float(np.clip(weights @ mass.sum(axis=1), 0.0, 1.0))
        return ClosenessResult(f, method)

    queries = _query(query_dist, tau).sample(n_samples, make_rng(seed)).features[:, 0]
    points = np.sort(np.asarray(train_points, dtype=np.float64).reshape(-1))
    f = float(np.mean(_near(points, queries, epsilon)))
    return ClosenessResult(f, method, float(np.sqrt(f * (1.0 - f) / n_samples)))


def attack_accuracy_closed_form(params: TheoryParams, f_t: float, f_s: float) -> float:
    """1/2 + 1/2 (pi_tr - pi_te)(f_t - f_s)"""
    for name, value in (("f_t", f_t), ("f_s", f_s)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {value}")
    return 0.5 + 0.5 * (params.pi_tr - params.pi_te) * (f_t - f_s)


def draw_training_sets(params: TheoryParams, seed) -> Tuple[np.ndarray, np.ndarray]:
    """(S_t from D_0, S_s from D) as one-dimensional point arrays"""
    rng = make_rng(seed)
    target = _query(QueryDist.D0, params.tau).sample(params.n_train, rng).features[:, 0]
    shadow = _query(QueryDist.D, params.tau).sample(params.n_train, rng).features[:, 0]
    return target, shadow


def simulate_theory_attack(
    params: TheoryParams,
    query_dist: QueryLike,
    n_trials: int,
    seed,
) -> TheorySimulation:
    """Play the idealized attack n_trials times against oracle models"""
    if n_trials < 1:
        raise ValueError(f"n_trials must be positive, got {n_trials}")
    target_points, shadow_points = draw_training_sets(params, derive_seed(int(seed), "theory-training"))
    f_t = closeness_probability(target_points, query_dist, params.epsilon, params.tau).f_value
    f_s = closeness_probability(shadow_points, query_dist, params.epsilon, params.tau).f_value

    rng = make_rng(derive_seed(int(seed), "theory-trials"))
    is_target = rng.random(n_trials) < 0.5
    queries = _query(query_dist, params.tau).sample(n_trials, rng).features[:, 0]
    close = np.where(
        is_target,
        _near(np.sort(target_points), queries, params.epsilon),
        _near(np.sort(shadow_points), queries, params.epsilon),
    )
    correct = rng.random(n_trials) < np.where(close, params.pi_tr, params.pi_te)
    win_rate = float(np.mean(correct == is_target))

    result = TheorySimulation(
        win_rate=win_rate,
        f_t=f_t,
        f_s=f_s,
        predicted=attack_accuracy_closed_form(params, f_t, f_s),
        std_err=float(np.sqrt(0.25 / n_trials)),
        n_trials=n_trials,
    )
    logger.debug(
        f"Theory attack tau={params.tau} query={QueryDist(query_dist).value}: "
        f"win {result.win_rate:.5f} vs closed form {result.predicted:.5f}"
    )
    return result


def theory_curve(
    epsilon: float,
    n_train: int,
    tau_grid: Sequence[float],
    seed: int,
    n_resamples: int = DEFAULT_RESAMPLES,
) -> List[TheoryCurveRow]:
    """Closeness probabilities per tau, averaged over resampled training sets

    mc_stderr is the largest standard error of the resample mean across the
    reported columns.
    """
    if len(tau_grid) == 0:
        raise ValueError("tau grid must be non-empty")
    if n_resamples < 1:
        raise ValueError(f"n_resamples must be positive, got {n_resamples}")

    rows = []
    for i, tau in enumerate(tau_grid):
        params = TheoryParams(tau=float(tau), epsilon=epsilon, n_train=n_train)
        values = np.empty((n_resamples, 6))
        for r in range(n_resamples):
            target_points, shadow_points = draw_training_sets(params, derive_seed(seed, f"curve-{i}", r))
            values[r] = [
                closeness_probability(target_points, QueryDist.D0, epsilon, params.tau).f_value,
                closeness_probability(target_points, QueryDist.D1, epsilon, params.tau).f_value,
                closeness_probability(target_points, QueryDist.D, epsilon, params.tau).f_value,
                closeness_probability(shadow_points, QueryDist.D, epsilon, params.tau).f_value,
                closeness_probability(shadow_points, QueryDist.D0, epsilon, params.tau).f_value,
                closeness_probability(shadow_points, QueryDist.D1, epsilon, params.tau).f_value,
            ]
        means = values.mean(axis=0)
        stderr = values.std(axis=0, ddof=1) / np.sqrt(n_resamples) if n_resamples > 1 else np.zeros(6)
        ft_d0, ft_d1, ft_d, fs_d, fs_d0, fs_d1 = (float(v) for v in means)
        rows.append(TheoryCurveRow(
            tau=float(tau),
            ft_d0=ft_d0,
            ft_d1=ft_d1,
            ft_d=ft_d,
            fs_d=fs_d,
            fs_d0=fs_d0,
            fs_d1=fs_d1,
            mc_stderr=float(stderr.max()),
        ))
        logger.debug(f"tau={tau}: f_t(D0)={ft_d0:.4f} f_t(D1)={ft_d1:.4f} f_s(D)={fs_d:.4f}")
    logger.info(f"Theory curve: {len(rows)} grid points, {n_resamples} resamples each")
    return rows


def max_closed_form_deviation(params: TheoryParams, tau_grid: Sequence[float], n_trials: int, seed: int) -> float:
    """Largest |simulated - closed form| over the grid, query distribution D"""
    deviations = [
        simulate_theory_attack(
            TheoryParams(float(tau), params.epsilon, params.n_train, params.pi_tr, params.pi_te),
            QueryDist.D,
            n_trials,
            derive_seed(seed, "deviation", i),
        ).deviation
        for i, tau in enumerate(tau_grid)
    ]
    return float(max(deviations))
