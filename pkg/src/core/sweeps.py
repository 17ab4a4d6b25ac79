"""
Experiment campaigns over one axis: alpha mixture, beta underrepresentation,
learning algorithm or auditor data fraction
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.stats import linregress

from core.audit import AuditConfig, AuditReport, build_report, collect_runs
from core.distributions import DataPool, Distribution, MixtureSpec, UnderrepSpec
from core.errors import DegenerateGrid, ShiftAuditError
from core.learners import ALGORITHMS, UNSUPPORTED_ALGORITHMS, LearnerSpec
from utils.seeding import derive_seed


AXES = ("alpha", "beta", "learner", "data_fraction")

AxisValue = Union[float, str]


@dataclass(frozen=True, eq=False)
class SweepSpec:
    """One axis, its grid and the base experiment

    ``components`` holds (D*, D'*) for the alpha axis and (D_0, D_1) for the
    beta axis. ``reserve`` carves that many rows out of a finite D* pool for
    the shifted target before mixing.
    """
    axis: str
    grid: Tuple[AxisValue, ...]
    base: AuditConfig
    components: Optional[Tuple[Distribution, Distribution]] = None
    reserve: Optional[int] = None

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}; expected one of {AXES}")
        grid = tuple(self.grid)
        if not grid:
            raise ValueError("sweep grid must be non-empty")
        if self.axis == "learner":
            bad = [v for v in grid if v not in ALGORITHMS + UNSUPPORTED_ALGORITHMS]
            if bad:
                raise ValueError(f"unknown learners in grid: {bad}")
        else:
            grid = tuple(float(v) for v in grid)
            low, high, low_open = {"alpha": (0.0, 1.0, False), "beta": (0.5, 1.0, False), "data_fraction": (0.0, 1.0, True)}[self.axis]
            for v in grid:
                if v > high or v < low or (low_open and v == low):
                    raise ValueError(f"{self.axis} value {v} outside its legal range")
        if self.axis in ("alpha", "beta") and self.components is None:
            raise ValueError(f"{self.axis} sweeps need their two component distributions")
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class SweepRow:
    value: AxisValue
    status: str
    control_mean: Optional[float] = None
    control_sd: Optional[float] = None
    shifted_mean: Optional[float] = None
    shifted_sd: Optional[float] = None
    auc_roc: Optional[float] = None
    tpr_at_percentile: Optional[float] = None
    naive_auc_roc: Optional[float] = None
    generalization_gap: Optional[float] = None
    error: Optional[str] = None
    control_scores: Tuple[float, ...] = field(default=(), repr=False)
    shifted_scores: Tuple[float, ...] = field(default=(), repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def summary(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "status": self.status,
            "control_mean": self.control_mean,
            "control_sd": self.control_sd,
            "shifted_mean": self.shifted_mean,
            "shifted_sd": self.shifted_sd,
            "auc_roc": self.auc_roc,
            "tpr_at_percentile": self.tpr_at_percentile,
            "naive_auc_roc": self.naive_auc_roc,
            "generalization_gap": self.generalization_gap,
            "error": self.error,
        }


@dataclass(frozen=True)
class SweepResult:
    axis: str
    rows: Tuple[SweepRow, ...]

    @property
    def failed(self) -> int:
        return sum(not row.ok for row in self.rows)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float


def cell_seed(spec: SweepSpec, value: AxisValue) -> int:
    """Per-cell seed keyed by the grid value, not its position"""
    return derive_seed(spec.base.seed, f"{spec.axis}={value!r}")


def cell_config(spec: SweepSpec, value: AxisValue) -> AuditConfig:
    """The AuditConfig of one grid cell"""
    base = spec.base.replace(seed=cell_seed(spec, value))
    if spec.axis == "learner":
        hyperparameters = base.learner.hyperparameters if base.learner.algorithm == value else {}
        return base.replace(learner=LearnerSpec(str(value), hyperparameters, base.learner.seed))
    if spec.axis == "data_fraction":
        return base.replace(auditor_fraction=float(value))
    first, second = spec.components
    if spec.axis == "beta":
        return base.replace(
            normative=UnderrepSpec(0.5, first, second),
            alternative=UnderrepSpec(float(value), first, second),
        )
    # alpha: the audited target trains on D*, shadows on alpha D* + (1 - alpha) D'*
    shifted_source, mix_source = first, first
    if spec.reserve:
        if not isinstance(first, DataPool):
            raise ValueError("reserve only applies to finite pools")
        shifted_source, mix_source = first.carve(spec.reserve, derive_seed(spec.base.seed, "alpha-reserve"))
    return base.replace(
        normative=MixtureSpec(float(value), mix_source, second),
        alternative=shifted_source,
    )


def run_cell(spec: SweepSpec, value: AxisValue) -> Tuple[AuditReport, AuditReport]:
    """(attack report, naive report) of one cell"""
    cfg = cell_config(spec, value)
    runs = collect_runs(cfg)
    return build_report(cfg, runs.control, runs.shifted), build_report(cfg, runs.control, runs.shifted, scorer="naive")


def run_sweep(spec: SweepSpec) -> SweepResult:
    """One full audit per grid value; failing cells become ``error`` rows"""
    rows = []
    for value in spec.grid:
        logger.info(f"Sweep {spec.axis}={value}")
        try:
            report, naive = run_cell(spec, value)
        except (ShiftAuditError, ValueError) as e:
            logger.warning(f"Sweep cell {spec.axis}={value} failed: {type(e).__name__}: {e}")
            rows.append(SweepRow(value, "error", error=f"{type(e).__name__}: {e}"))
            continue
        control_mean, control_sd = report.control_mean_sd
        shifted_mean, shifted_sd = report.shifted_mean_sd
        rows.append(SweepRow(
            value=value,
            status="ok",
            control_mean=control_mean,
            control_sd=control_sd,
            shifted_mean=shifted_mean,
            shifted_sd=shifted_sd,
            auc_roc=report.auc_roc,
            tpr_at_percentile=report.tpr_at_percentile,
            naive_auc_roc=naive.auc_roc,
            generalization_gap=report.mean_generalization_gap(),
            control_scores=report.control_scores,
            shifted_scores=report.shifted_scores,
        ))
    result = SweepResult(spec.axis, tuple(rows))
    if result.failed:
        logger.warning(f"Sweep finished with {result.failed} failed cell(s)")
    return result


def linearity_check(table: Union[SweepResult, Sequence[Tuple[float, float]]]) -> LinearFit:
    """Least-squares line through (axis value, shifted mean statistic)"""
    if isinstance(table, SweepResult):
        points = [(float(r.value), r.shifted_mean) for r in table.rows if r.ok]
    else:
        points = [(float(x), float(y)) for x, y in table]
    if len(points) < 3:
        raise DegenerateGrid(f"linearity check needs at least 3 points, got {len(points)}")
    x, y = (np.asarray(v, dtype=np.float64) for v in zip(*points))
    if np.ptp(x) == 0:
        raise DegenerateGrid("all grid values are identical")
    if np.ptp(y) == 0:
        return LinearFit(0.0, float(y[0]), 0.0)
    fit = linregress(x, y)
    return LinearFit(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2))
