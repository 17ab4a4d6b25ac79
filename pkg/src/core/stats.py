"""
Statistical primitives of the audit: nearest-rank thresholds, TPR and AUC-ROC
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Tuple, Union

import numpy as np
from scipy.stats import rankdata

from core.errors import EmptySample


class Setting(str, Enum):
    CONTROL = "control"
    SHIFTED = "shifted"


@dataclass(frozen=True, eq=False)
class ScoreSample:
    """Non-empty collection of finite statistic values from one setting"""
    values: Tuple[float, ...]
    setting: Setting = Setting.CONTROL

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise EmptySample(f"{Setting(self.setting).value} sample is empty")
        if not all(math.isfinite(v) for v in values):
            raise ValueError("score samples must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "setting", Setting(self.setting))

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


SampleLike = Union[ScoreSample, Iterable[float]]


def _values(sample: SampleLike, setting: Setting) -> np.ndarray:
    if not isinstance(sample, ScoreSample):
        sample = ScoreSample(tuple(sample), setting)
    return sample.as_array()


def percentile_threshold(control: SampleLike, p: float = 0.9) -> float:
    """Nearest-rank percentile: the ceil(p*n)-th smallest control value (1-based)"""
    if not 0.0 < p < 1.0:
        raise ValueError(f"percentile must be in (0, 1), got {p}")
    values = np.sort(_values(control, Setting.CONTROL))
    # rounding guards against products like 0.1 * 30 = 3.0000000000000004
    rank = max(1, math.ceil(round(p * len(values), 9)))
    return float(values[rank - 1])


def tpr_at_threshold(shifted: SampleLike, threshold: float) -> float:
    """Fraction of shifted values strictly above the threshold"""
    values = _values(shifted, Setting.SHIFTED)
    return float(np.count_nonzero(values > threshold) / len(values))


def auc_roc(control: SampleLike, shifted: SampleLike) -> float:
    """Mann-Whitney AUC: P(shifted > control) + 0.5 * P(tie), with midranks"""
    c = _values(control, Setting.CONTROL)
    s = _values(shifted, Setting.SHIFTED)
    ranks = rankdata(np.concatenate([s, c]), method="average")
    u = ranks[: len(s)].sum() - len(s) * (len(s) + 1) / 2.0
    return float(u / (len(s) * len(c)))


def mean_and_sd(values: Iterable[float]) -> Tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)"""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise EmptySample("cannot summarise an empty sample")
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd
