"""
Synthetic and pool-backed samplers for normative and shifted distributions

Every distribution handle exposes ``sample(n, rng, ledger=None) -> Dataset``
plus its ``dimensionality`` and ``task``. Group membership and mixture
components are drawn per example, so the sampled datasets are i.i.d. draws.
Finite pools record the rows they hand out in a DrawLedger so that draws
within one experiment run never share rows.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Protocol, Tuple, Union, runtime_checkable

import numpy as np
from loguru import logger

from core.data import Dataset, TaskKind
from core.errors import DimensionMismatch, PoolExhausted
from utils.seeding import make_rng


SeedLike = Union[int, np.random.Generator]


@runtime_checkable
class Distribution(Protocol):
    """Anything that can draw a Dataset"""

    @property
    def dimensionality(self) -> int: ...

    @property
    def task(self) -> TaskKind: ...

    def sample(self, n: int, rng: np.random.Generator, ledger: Optional["DrawLedger"] = None) -> Dataset: ...


def _check_n(n: int):
    if n < 0:
        raise ValueError(f"sample size must be nonnegative, got {n}")


class DrawLedger:
    """Pool rows already handed out within one experiment run

    Pools that share a ``source`` draw disjoint rows while they sample
    through the same ledger. Synthetic distributions ignore it.
    """

    def __init__(self):
        self._taken: Dict[str, np.ndarray] = {}

    def taken(self, source: str) -> np.ndarray:
        return self._taken.get(source, np.empty(0, dtype=np.int64))

    def record(self, source: str, row_ids: np.ndarray):
        self._taken[source] = np.union1d(self.taken(source), np.asarray(row_ids, dtype=np.int64))

    def __len__(self) -> int:
        return sum(len(rows) for rows in self._taken.values())


@dataclass(frozen=True)
class GaussianGds:
    """One-dimensional two-group Gaussian family

    Group 0: X | Y=0 ~ N(-1, 1), X | Y=1 ~ N(1, 1).
    Group 1: X | Y=0 ~ N(-s + tau, 1), X | Y=1 ~ N(s + tau, 1) with
    s = group1_spread. ``offset`` shifts every x and ``noise_scale``
    multiplies the unit noise; neither touches the group marginal.
    """
    tau: float = 0.0
    group_mix: float = 0.5
    offset: float = 0.0
    group1_spread: float = 1.0
    noise_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.group_mix <= 1.0:
            raise ValueError(f"group_mix must be in [0, 1], got {self.group_mix}")
        if not self.noise_scale > 0:
            raise ValueError(f"noise_scale must be positive, got {self.noise_scale}")

    @property
    def dimensionality(self) -> int:
        return 1

    @property
    def task(self) -> TaskKind:
        return TaskKind.CLASSIFICATION

    def sample(self, n: int, rng: np.random.Generator, ledger: Optional[DrawLedger] = None) -> Dataset:
        _check_n(n)
        groups = (rng.random(n) < self.group_mix).astype(np.int8)
        labels = rng.integers(0, 2, size=n)
        sign = 2.0 * labels - 1.0
        magnitude = np.where(groups == 1, self.group1_spread, 1.0)
        means = sign * magnitude + self.tau * groups + self.offset
        x = means + self.noise_scale * rng.standard_normal(n)
        return Dataset(x.reshape(-1, 1), labels, groups, TaskKind.CLASSIFICATION)


@dataclass(frozen=True)
class TabularGaussian:
    """Multi-dimensional two-class Gaussian pool

    Class means sit at +/- class_sep/2 along the first axis, shifted by
    ``offset`` on every axis; ``label_noise`` flips that fraction of labels.
    For regression the label is a noisy linear response of the features.
    """
    dimensionality: int = 4
    class_sep: float = 2.0
    offset: float = 0.0
    group_mix: float = 0.5
    label_noise: float = 0.0
    task: TaskKind = TaskKind.CLASSIFICATION
    weights: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.dimensionality < 1:
            raise ValueError("dimensionality must be positive")
        if not 0.0 <= self.group_mix <= 1.0:
            raise ValueError(f"group_mix must be in [0, 1], got {self.group_mix}")
        if not 0.0 <= self.label_noise <= 0.5:
            raise ValueError(f"label_noise must be in [0, 0.5], got {self.label_noise}")
        if self.weights is not None and len(self.weights) != self.dimensionality:
            raise DimensionMismatch("weights must match dimensionality")
        object.__setattr__(self, "task", TaskKind(self.task))

    def sample(self, n: int, rng: np.random.Generator, ledger: Optional[DrawLedger] = None) -> Dataset:
        _check_n(n)
        groups = (rng.random(n) < self.group_mix).astype(np.int8)
        x = rng.standard_normal((n, self.dimensionality)) + self.offset
        if self.task is TaskKind.REGRESSION:
            weights = np.asarray(self.weights or np.ones(self.dimensionality), dtype=np.float64)
            y = x @ weights + self.label_noise * rng.standard_normal(n)
            return Dataset(x, y, groups, self.task)
        labels = rng.integers(0, 2, size=n)
        x[:, 0] += (2.0 * labels - 1.0) * self.class_sep / 2.0
        flips = rng.random(n) < self.label_noise
        labels = np.where(flips, 1 - labels, labels)
        return Dataset(x, labels, groups, self.task)


def _draw_two(
    first, second, p_first: float, n: int, rng: np.random.Generator, ledger: Optional[DrawLedger] = None
) -> Tuple[Dataset, np.ndarray]:
    """Draw each example from ``first`` with probability p_first, else ``second``"""
    from_first = rng.random(n) < p_first
    k = int(from_first.sum())
    a = first.sample(k, rng, ledger)
    b = second.sample(n - k, rng, ledger)
    a.check_compatible(b)
    order = np.empty(n, dtype=np.int64)
    order[np.flatnonzero(from_first)] = np.arange(k)
    order[np.flatnonzero(~from_first)] = k + np.arange(n - k)
    return Dataset.concat([a, b]).subset(order), from_first


def _check_pair(first, second):
    if first.dimensionality != second.dimensionality:
        raise DimensionMismatch(
            f"component dimensionality differs: {first.dimensionality} != {second.dimensionality}"
        )
    if TaskKind(first.task) is not TaskKind(second.task):
        raise DimensionMismatch(f"component tasks differ: {first.task} != {second.task}")


@dataclass(frozen=True)
class MixtureSpec:
    """alpha * base + (1 - alpha) * alt"""
    alpha: float
    base: Distribution
    alt: Distribution

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")

    @property
    def dimensionality(self) -> int:
        return self.base.dimensionality

    @property
    def task(self) -> TaskKind:
        return self.base.task

    def sample_with_components(
        self, n: int, rng: np.random.Generator, ledger: Optional[DrawLedger] = None
    ) -> Tuple[Dataset, np.ndarray]:
        """Sample and return a boolean tag per example (True = drawn from base)"""
        _check_n(n)
        _check_pair(self.base, self.alt)
        return _draw_two(self.base, self.alt, self.alpha, n, rng, ledger)

    def sample(self, n: int, rng: np.random.Generator, ledger: Optional[DrawLedger] = None) -> Dataset:
        return self.sample_with_components(n, rng, ledger)[0]


@dataclass(frozen=True)
class UnderrepSpec:
    """beta * D_0 + (1 - beta) * D_1; beta = 0.5 is the normative 50-50 mix"""
    beta: float
    group0: Distribution
    group1: Distribution

    def __post_init__(self):
        if not 0.5 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0.5, 1], got {self.beta}")

    @property
    def dimensionality(self) -> int:
        return self.group0.dimensionality

    @property
    def task(self) -> TaskKind:
        return self.group0.task

    def sample(self, n: int, rng: np.random.Generator, ledger: Optional[DrawLedger] = None) -> Dataset:
        _check_n(n)
        _check_pair(self.group0, self.group1)
        return _draw_two(self.group0, self.group1, self.beta, n, rng, ledger)[0]


@dataclass(frozen=True, eq=False)
class DataPool:
    """Finite pool of examples drawn without replacement

    Each ``sample`` call draws distinct rows; asking for more rows than the
    pool holds raises PoolExhausted instead of reusing rows. ``row_ids``
    index the rows within ``source``, so pools carved or split from one
    another stay disjoint under a shared DrawLedger.
    """
    data: Dataset
    name: str = "pool"
    source: Optional[str] = None
    row_ids: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.source is None:
            object.__setattr__(self, "source", f"dataset@{id(self.data):x}")
        ids = np.arange(len(self.data)) if self.row_ids is None else np.asarray(self.row_ids, dtype=np.int64)
        if len(ids) != len(self.data):
            raise ValueError(f"{self.name}: {len(ids)} row ids for {len(self.data)} rows")
        object.__setattr__(self, "row_ids", ids)

    @property
    def dimensionality(self) -> int:
        return self.data.dimensionality

    @property
    def task(self) -> TaskKind:
        return self.data.task

    def __len__(self) -> int:
        return len(self.data)

    def _derived(self, rows: np.ndarray, name: str) -> "DataPool":
        return DataPool(self.data.subset(rows), name, self.source, self.row_ids[rows])

    def sample(self, n: int, rng: np.random.Generator, ledger: Optional[DrawLedger] = None) -> Dataset:
        _check_n(n)
        candidates = np.arange(len(self.data))
        if ledger is not None:
            candidates = candidates[~np.isin(self.row_ids, ledger.taken(self.source))]
        if n > len(candidates):
            raise PoolExhausted(
                f"{self.name}: requested {n} rows, {len(candidates)} of {len(self.data)} are still free"
            )
        chosen = candidates[rng.choice(len(candidates), size=n, replace=False)]
        if ledger is not None:
            ledger.record(self.source, self.row_ids[chosen])
        return self.data.subset(chosen)

    def carve(self, reserve: int, seed: SeedLike) -> Tuple["DataPool", "DataPool"]:
        """Split off ``reserve`` rows; returns (reserved, remainder)"""
        if not 0 < reserve < len(self.data):
            raise PoolExhausted(f"{self.name}: cannot reserve {reserve} of {len(self.data)} rows")
        order = make_rng(seed).permutation(len(self.data))
        reserved = self._derived(np.sort(order[:reserve]), f"{self.name}[reserved]")
        remainder = self._derived(np.sort(order[reserve:]), f"{self.name}[remainder]")
        logger.debug(f"Carved {self.name}: {len(reserved)} reserved, {len(remainder)} remaining")
        return reserved, remainder

    def split_by_group(self) -> Tuple["DataPool", "DataPool"]:
        """(D_0, D_1) pools from the group column"""
        return (
            self._derived(np.flatnonzero(self.data.groups == 0), f"{self.name}[z=0]"),
            self._derived(np.flatnonzero(self.data.groups == 1), f"{self.name}[z=1]"),
        )


@dataclass(frozen=True)
class GaussianGdsSpec:
    """Parameters of the one-dimensional GDS family plus a sample size"""
    tau: float
    n: int
    offset: float = 0.0
    group1_spread: float = 1.0
    noise_scale: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")

    def distribution(self, group_mix: float) -> GaussianGds:
        return GaussianGds(self.tau, group_mix, self.offset, self.group1_spread, self.noise_scale)


def gds_groups(
    tau: float, offset: float = 0.0, group1_spread: float = 1.0, noise_scale: float = 1.0
) -> Tuple[GaussianGds, GaussianGds]:
    """(D_0, D_1) handles of the one-dimensional family"""
    return (
        GaussianGds(tau, 0.0, offset, group1_spread, noise_scale),
        GaussianGds(tau, 1.0, offset, group1_spread, noise_scale),
    )


def sample_gaussian_gds(spec: GaussianGdsSpec, group_mix: float, seed: SeedLike) -> Dataset:
    """Draw spec.n examples; group_mix=0.5 realizes D, group_mix=0 realizes D_0"""
    return spec.distribution(group_mix).sample(spec.n, make_rng(seed))


def sample_mixture(spec: MixtureSpec, n: int, seed: SeedLike, debug: bool = False):
    """Draw n examples from the alpha-mixture

    With ``debug`` the boolean component tags (True = base) are returned too.
    """
    dataset, from_base = spec.sample_with_components(n, make_rng(seed))
    if debug:
        return dataset, from_base
    return dataset


def sample_underrep(spec: UnderrepSpec, n: int, seed: SeedLike) -> Dataset:
    """Draw n examples, each from D_0 with probability beta, else D_1"""
    return spec.sample(n, make_rng(seed))
