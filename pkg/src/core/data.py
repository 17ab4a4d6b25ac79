"""
Tabular data model: datasets, five-way partitioning and CSV ingestion
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from core.errors import (
    DimensionMismatch,
    EmptyPartition,
    ParseError,
    SchemaMismatch,
    StratumTooSmall,
)


PARTITION_NAMES = ("target_train", "shadow_train", "attack_train", "model_test", "attack_test")
FRACTION_TOLERANCE = 1e-9


class TaskKind(str, Enum):
    """Learning task of an experiment"""
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


@dataclass(frozen=True)
class Example:
    """A single (x, y, z) data point"""
    features: Tuple[float, ...]
    label: float
    group: int


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of examples with labels and binary group tags"""
    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    task: TaskKind = TaskKind.CLASSIFICATION

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        if features.ndim != 2 or features.shape[1] < 1:
            raise DimensionMismatch(f"features must be a 2-D array with at least one column, got shape {features.shape}")
        labels = np.array(self.labels, dtype=np.float64).reshape(-1)
        groups = np.array(self.groups, dtype=np.int8).reshape(-1)
        n = features.shape[0]
        if labels.shape[0] != n or groups.shape[0] != n:
            raise DimensionMismatch(
                f"features ({n}), labels ({labels.shape[0]}) and groups ({groups.shape[0]}) differ in length"
            )
        if not np.all(np.isfinite(features)) or not np.all(np.isfinite(labels)):
            raise ValueError("features and labels must be finite")
        if n and not np.isin(groups, (0, 1)).all():
            raise ValueError("group tags must be 0 or 1")
        task = TaskKind(self.task)
        if task is TaskKind.CLASSIFICATION and n and not np.isin(labels, (0.0, 1.0)).all():
            raise ValueError("classification labels must be 0 or 1")

        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "groups", _frozen(groups))
        object.__setattr__(self, "task", task)

    @classmethod
    def empty(cls, dimensionality: int, task: TaskKind = TaskKind.CLASSIFICATION) -> "Dataset":
        """Create a dataset with no rows"""
        return cls(np.empty((0, dimensionality)), np.empty(0), np.empty(0, dtype=np.int8), task)

    @classmethod
    def from_examples(cls, examples: Sequence[Example], task: TaskKind = TaskKind.CLASSIFICATION) -> "Dataset":
        """Build a dataset from Example records"""
        if not examples:
            raise ValueError("cannot infer dimensionality from an empty example list")
        dims = {len(e.features) for e in examples}
        if len(dims) != 1:
            raise DimensionMismatch(f"examples have mixed dimensionality: {sorted(dims)}")
        return cls(
            np.array([e.features for e in examples], dtype=np.float64),
            np.array([e.label for e in examples], dtype=np.float64),
            np.array([e.group for e in examples], dtype=np.int8),
            task,
        )

    def __len__(self) -> int:
        return int(self.features.shape[0])

    def __getitem__(self, index: int) -> Example:
        return Example(tuple(float(v) for v in self.features[index]), float(self.labels[index]), int(self.groups[index]))

    def __iter__(self) -> Iterator[Example]:
        for i in range(len(self)):
            yield self[i]

    @property
    def dimensionality(self) -> int:
        return int(self.features.shape[1])

    @property
    def examples(self) -> List[Example]:
        return list(self)

    @property
    def is_classification(self) -> bool:
        return self.task is TaskKind.CLASSIFICATION

    def subset(self, indices: Union[Sequence[int], np.ndarray]) -> "Dataset":
        """Rows at the given indices, in that order"""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.groups[idx], self.task)

    def group_subset(self, group: int) -> "Dataset":
        """Rows whose group tag equals ``group``"""
        return self.subset(np.flatnonzero(self.groups == group))

    def class_counts(self) -> dict:
        values, counts = np.unique(self.labels, return_counts=True)
        return {float(v): int(c) for v, c in zip(values, counts)}

    def check_compatible(self, other: "Dataset"):
        if self.dimensionality != other.dimensionality:
            raise DimensionMismatch(f"dimensionality {self.dimensionality} != {other.dimensionality}")
        if self.task is not other.task:
            raise DimensionMismatch(f"task {self.task.value} != {other.task.value}")

    @staticmethod
    def concat(parts: Sequence["Dataset"]) -> "Dataset":
        """Concatenate datasets of identical dimensionality and task"""
        if not parts:
            raise ValueError("nothing to concatenate")
        first = parts[0]
        for part in parts[1:]:
            first.check_compatible(part)
        return Dataset(
            np.concatenate([p.features for p in parts]),
            np.concatenate([p.labels for p in parts]),
            np.concatenate([p.groups for p in parts]),
            first.task,
        )


@dataclass(frozen=True)
class PartitionPlan:
    """Fractions for the five audit partitions"""
    fractions: Tuple[float, float, float, float, float] = (0.2, 0.2, 0.2, 0.2, 0.2)
    stratify: bool = True
    seed: int = 0

    def __post_init__(self):
        fractions = tuple(float(f) for f in self.fractions)
        if len(fractions) != len(PARTITION_NAMES):
            raise ValueError(f"expected {len(PARTITION_NAMES)} fractions, got {len(fractions)}")
        if any(f < 0 or not np.isfinite(f) for f in fractions):
            raise ValueError(f"fractions must be finite and nonnegative: {fractions}")
        if abs(sum(fractions) - 1.0) > FRACTION_TOLERANCE:
            raise ValueError(f"fractions must sum to 1, got {sum(fractions)!r}")
        object.__setattr__(self, "fractions", fractions)

    @property
    def active(self) -> List[int]:
        return [i for i, f in enumerate(self.fractions) if f > 0]

    def with_seed(self, seed: int) -> "PartitionPlan":
        return PartitionPlan(self.fractions, self.stratify, seed)


class Partitions(NamedTuple):
    """The five audit partitions"""
    target_train: Dataset
    shadow_train: Dataset
    attack_train: Dataset
    model_test: Dataset
    attack_test: Dataset


def apportion(total: int, fractions: Sequence[float]) -> np.ndarray:
    """Largest-remainder apportionment of ``total`` items; ties go to the lowest index"""
    quotas = np.asarray(fractions, dtype=np.float64) * total
    counts = np.floor(quotas).astype(np.int64)
    remainders = quotas - counts
    leftover = total - int(counts.sum())
    if leftover > 0:
        order = np.argsort(-remainders, kind="stable")
        counts[order[:leftover]] += 1
    return counts


def stratified_split(data: Dataset, plan: PartitionPlan) -> Partitions:
    """Split a dataset into the five disjoint audit partitions"""
    if len(data) == 0:
        raise EmptyPartition("cannot split an empty dataset")

    rng = np.random.default_rng(plan.seed)
    active = plan.active
    if plan.stratify and data.is_classification:
        strata = [np.flatnonzero(data.labels == value) for value in np.unique(data.labels)]
    else:
        strata = [np.arange(len(data))]

    assigned: List[List[np.ndarray]] = [[] for _ in PARTITION_NAMES]
    for stratum in strata:
        if plan.stratify and data.is_classification and len(stratum) < len(active):
            label = data.labels[stratum[0]]
            raise StratumTooSmall(
                f"class {label:g} has {len(stratum)} examples but {len(active)} partitions need covering"
            )
        shuffled = rng.permutation(stratum)
        counts = apportion(len(stratum), plan.fractions)
        bounds = np.concatenate([[0], np.cumsum(counts)])
        for p in range(len(PARTITION_NAMES)):
            assigned[p].append(shuffled[bounds[p]:bounds[p + 1]])

    parts = []
    for p, name in enumerate(PARTITION_NAMES):
        indices = np.concatenate(assigned[p]) if assigned[p] else np.empty(0, dtype=np.int64)
        if p in active and indices.size == 0:
            raise EmptyPartition(f"partition {name} (fraction {plan.fractions[p]}) received no examples")
        indices = rng.permutation(indices)
        parts.append(data.subset(indices))

    logger.debug(f"Split {len(data)} examples into {[len(p) for p in parts]}")
    return Partitions(*parts)


@dataclass(frozen=True)
class CsvSchema:
    """Column roles of a CSV file"""
    label_col: str
    group_col: Optional[str] = None
    feature_cols: Optional[Tuple[str, ...]] = None


def _parse_numeric(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column]
    parsed = pd.to_numeric(raw.str.strip(), errors="coerce")
    bad = parsed.isna() | ~np.isfinite(parsed.to_numpy(dtype=np.float64, na_value=np.nan))
    if bad.any():
        position = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(row=position + 1, column=column, value=raw.iloc[position])
    return parsed.to_numpy(dtype=np.float64)


def load_csv(
    path: Union[str, Path],
    schema: CsvSchema,
    task: TaskKind = TaskKind.CLASSIFICATION,
) -> Dataset:
    """Read a header-first, comma-separated UTF-8 file into a Dataset

    Rows are numbered from 1 (the first data row after the header) in
    ParseError locations.
    """
    path = Path(path)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8", sep=",")
    header = list(frame.columns)

    if schema.label_col not in header:
        raise SchemaMismatch(f"{path}: label column {schema.label_col!r} not in header {header}")
    if schema.group_col is not None:
        if schema.group_col == schema.label_col:
            raise SchemaMismatch("label and group columns must differ")
        if schema.group_col not in header:
            raise SchemaMismatch(f"{path}: group column {schema.group_col!r} not in header {header}")

    reserved = {schema.label_col, schema.group_col}
    if schema.feature_cols is None:
        feature_cols = [c for c in header if c not in reserved]
    else:
        feature_cols = list(schema.feature_cols)
        missing = [c for c in feature_cols if c not in header]
        if missing:
            raise SchemaMismatch(f"{path}: feature columns {missing} not in header {header}")
        if reserved & set(feature_cols):
            raise SchemaMismatch("feature columns may not include the label or group column")
    if not feature_cols:
        raise SchemaMismatch(f"{path}: no feature columns")

    features = np.column_stack([_parse_numeric(frame, c) for c in feature_cols]) if len(frame) else np.empty((0, len(feature_cols)))
    labels = _parse_numeric(frame, schema.label_col) if len(frame) else np.empty(0)
    if task is TaskKind.CLASSIFICATION:
        bad = ~np.isin(labels, (0.0, 1.0))
        if bad.any():
            position = int(np.flatnonzero(bad)[0])
            raise ParseError(row=position + 1, column=schema.label_col, value=frame[schema.label_col].iloc[position])

    if schema.group_col is None:
        groups = np.zeros(len(frame), dtype=np.int8)
    else:
        groups = _parse_numeric(frame, schema.group_col)
        bad = ~np.isin(groups, (0.0, 1.0))
        if bad.any():
            position = int(np.flatnonzero(bad)[0])
            raise ParseError(row=position + 1, column=schema.group_col, value=frame[schema.group_col].iloc[position])

    dataset = Dataset(features, labels, groups, task)
    logger.info(f"Loaded {len(dataset)} rows x {dataset.dimensionality} features from {path}")
    return dataset
