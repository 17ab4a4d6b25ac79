"""
Experiment configuration: TOML files validated with pydantic
"""

import json
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from dotenv import load_dotenv
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.audit import AuditConfig, Statistic
from core.data import CsvSchema, PartitionPlan, TaskKind, load_csv
from core.distributions import (
    DataPool,
    Distribution,
    GaussianGds,
    TabularGaussian,
    UnderrepSpec,
    gds_groups,
)
from core.errors import ConfigError
from core.learners import ALGORITHMS, DEFAULT_HYPERPARAMETERS, UNSUPPORTED_ALGORITHMS, LearnerSpec
from core.sweeps import SweepSpec
from core.theory import TheoryParams


SEED_ENV_VAR = "SHIFT_AUDIT_SEED"
RESOLVED_CONFIG_NAME = "config.resolved.json"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ExperimentSection(_Section):
    """[experiment]"""
    name: str = Field("audit", description="Experiment name used in log and report headers")
    seed: int = Field(0, ge=0, description=f"Master seed; overridden by ${SEED_ENV_VAR}")
    output_dir: str = Field("results", description="Directory for reports and logs")
    workers: int = Field(1, ge=1, description="Process pool size; 1 runs inline")


class AuditSection(_Section):
    """[audit]"""
    statistic: Statistic = Field(Statistic.INTER_GROUP_GAP, description="overall_accuracy (DS) or inter_group_gap (GDS)")
    sample_size: int = Field(5000, ge=5, description="Examples drawn from the normative distribution per run")
    n_control_runs: int = Field(50, ge=10, description="Control-setting runs calibrating the threshold")
    n_shifted_runs: int = Field(50, ge=1, description="Shifted-setting runs")
    percentile: float = Field(0.9, gt=0.0, lt=1.0, description="Nearest-rank percentile of the control scores")
    n_q: int = Field(50, ge=1, description="Query points per attack bundle")
    n_shadows: int = Field(1, ge=1, description="Shadow models per run")
    auditor_fraction: float = Field(1.0, gt=0.0, le=1.0, description="Share of the auditor-side partitions used")


class PartitionSection(_Section):
    """[partition]"""
    fractions: List[float] = Field(
        [0.2] * 5,
        description="target_train, shadow_train, attack_train, model_test, attack_test",
    )
    stratify: bool = Field(True, description="Stratify the split by class label")

    @field_validator("fractions")
    @classmethod
    def _five_fractions(cls, value: List[float]) -> List[float]:
        if len(value) != 5:
            raise ValueError("exactly five fractions are required")
        return value


class LearnerSection(BaseModel):
    """[learner]; every other key is a hyperparameter of the algorithm"""
    model_config = ConfigDict(extra="allow")

    algorithm: str = Field("dt", description=f"One of {', '.join(ALGORITHMS)}")

    @field_validator("algorithm")
    @classmethod
    def _known_algorithm(cls, value: str) -> str:
        if value not in ALGORITHMS + UNSUPPORTED_ALGORITHMS:
            raise ValueError(f"unknown algorithm {value!r}")
        return value

    @model_validator(mode="after")
    def _known_hyperparameters(self):
        unknown = set(self.hyperparameters) - set(DEFAULT_HYPERPARAMETERS.get(self.algorithm, {}))
        if unknown:
            raise ValueError(f"unknown hyperparameters for {self.algorithm}: {sorted(unknown)}")
        return self

    @property
    def hyperparameters(self) -> Dict[str, Any]:
        return dict(self.model_extra or {})


class DistributionSection(_Section):
    """[normative] / [alternative]"""
    kind: Literal["gaussian_gds", "underrep", "tabular", "csv"] = Field(
        "gaussian_gds", description="gaussian_gds, underrep, tabular or csv"
    )
    tau: float = Field(0.0, description="Group-1 location shift (gaussian_gds, underrep)")
    group_mix: float = Field(0.5, ge=0.0, le=1.0, description="P(z = 1) (gaussian_gds, tabular)")
    beta: float = Field(0.5, ge=0.5, le=1.0, description="P(z = 0) (underrep)")
    offset: float = Field(0.0, description="Location shift of every feature")
    group1_spread: float = Field(1.0, gt=0.0, description="Class-mean magnitude of group 1 (gaussian_gds, underrep)")
    noise_scale: float = Field(1.0, gt=0.0, description="Standard deviation of the class noise (gaussian_gds, underrep)")
    dimensionality: int = Field(4, ge=1, description="Feature count (tabular)")
    class_sep: float = Field(2.0, ge=0.0, description="Distance between class means (tabular)")
    label_noise: float = Field(0.0, ge=0.0, le=0.5, description="Fraction of flipped labels (tabular)")
    task: TaskKind = Field(TaskKind.CLASSIFICATION, description="classification or regression (tabular, csv)")
    path: Optional[str] = Field(None, description="CSV file (csv)")
    label_col: Optional[str] = Field(None, description="Label column (csv)")
    group_col: Optional[str] = Field(None, description="Group column; absent means every row is group 0 (csv)")
    feature_cols: Optional[List[str]] = Field(None, description="Feature columns; default all remaining (csv)")

    @model_validator(mode="after")
    def _csv_fields(self):
        if self.kind == "csv" and (self.path is None or self.label_col is None):
            raise ValueError("csv distributions need path and label_col")
        return self

    def groups(self) -> Tuple[Distribution, Distribution]:
        """(D_0, D_1) handles behind this distribution"""
        if self.kind in ("gaussian_gds", "underrep"):
            return gds_groups(self.tau, self.offset, self.group1_spread, self.noise_scale)
        if self.kind == "csv":
            return self.build().split_by_group()
        raise ConfigError(f"{self.kind} distributions have no group components")

    def build(self) -> Distribution:
        if self.kind == "gaussian_gds":
            return GaussianGds(self.tau, self.group_mix, self.offset, self.group1_spread, self.noise_scale)
        if self.kind == "underrep":
            return UnderrepSpec(self.beta, *self.groups())
        if self.kind == "tabular":
            return TabularGaussian(
                dimensionality=self.dimensionality,
                class_sep=self.class_sep,
                offset=self.offset,
                group_mix=self.group_mix,
                label_noise=self.label_noise,
                task=self.task,
            )
        schema = CsvSchema(self.label_col, self.group_col, tuple(self.feature_cols) if self.feature_cols else None)
        path = Path(self.path)
        # rows of one file share a source, so repeated loads still draw disjointly
        return DataPool(load_csv(path, schema, self.task), path.name, source=str(path.resolve()))


class SweepSection(_Section):
    """[sweep]"""
    axis: Literal["alpha", "beta", "learner", "data_fraction"] = Field("beta", description="Swept parameter")
    grid: List[Union[float, str]] = Field(
        [1.0, 0.9, 0.8, 0.7, 0.6, 0.5], description="Axis values; learner names for the learner axis"
    )
    reserve: Optional[int] = Field(
        None, ge=1, description="alpha axis: rows carved from a csv [alternative] pool for the shifted target"
    )


class TheorySection(_Section):
    """[theory]"""
    epsilon: float = Field(0.001, gt=0.0, description="Closeness radius")
    n_train: int = Field(1000, ge=1, description="Training-set size of target and shadow")
    tau_grid: List[float] = Field([0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0], min_length=1, description="Group-1 shifts")
    pi_tr: float = Field(0.9, ge=0.0, le=1.0, description="Accuracy near training points")
    pi_te: float = Field(0.6, ge=0.0, le=1.0, description="Accuracy elsewhere")
    trials: int = Field(100_000, ge=1, description="Simulated attack trials per grid point")
    n_resamples: int = Field(100, ge=1, description="Training-set resamples averaged per grid point")


class ExperimentConfig(_Section):
    """A whole experiment file"""
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    audit: AuditSection = Field(default_factory=AuditSection)
    partition: PartitionSection = Field(default_factory=PartitionSection)
    learner: LearnerSection = Field(default_factory=LearnerSection)
    normative: DistributionSection = Field(default_factory=DistributionSection)
    alternative: DistributionSection = Field(default_factory=lambda: DistributionSection(kind="underrep", beta=1.0))
    sweep: SweepSection = Field(default_factory=SweepSection)
    theory: TheorySection = Field(default_factory=TheorySection)
    source: Optional[str] = Field(None, exclude=True)

    @property
    def output_dir(self) -> Path:
        return Path(self.experiment.output_dir)

    def audit_config(self, workers: Optional[int] = None) -> AuditConfig:
        """Domain AuditConfig; construction errors surface as ConfigError"""
        try:
            return AuditConfig(
                normative=self.normative.build(),
                alternative=self.alternative.build(),
                learner=LearnerSpec(self.learner.algorithm, self.learner.hyperparameters, self.experiment.seed),
                statistic=self.audit.statistic,
                partition=PartitionPlan(tuple(self.partition.fractions), self.partition.stratify, self.experiment.seed),
                sample_size=self.audit.sample_size,
                n_control_runs=self.audit.n_control_runs,
                n_shifted_runs=self.audit.n_shifted_runs,
                percentile=self.audit.percentile,
                n_q=self.audit.n_q,
                n_shadows=self.audit.n_shadows,
                auditor_fraction=self.audit.auditor_fraction,
                seed=self.experiment.seed,
                workers=workers or self.experiment.workers,
            )
        except ConfigError:
            raise
        except (ValueError, TypeError) as e:
            raise ConfigError(str(e)) from e

    def sweep_spec(self, workers: Optional[int] = None) -> SweepSpec:
        axis = self.sweep.axis
        components = None
        if axis == "alpha":
            # D* is what the audited model trains on; D'* is mixed in with weight 1 - alpha
            components = (self.alternative.build(), self.normative.build())
        elif axis == "beta":
            components = self.normative.groups()
        try:
            return SweepSpec(axis, tuple(self.sweep.grid), self.audit_config(workers), components, self.sweep.reserve)
        except ConfigError:
            raise
        except (ValueError, TypeError) as e:
            raise ConfigError(str(e)) from e

    def theory_params(self, tau: float = 0.0) -> TheoryParams:
        try:
            return TheoryParams(tau, self.theory.epsilon, self.theory.n_train, self.theory.pi_tr, self.theory.pi_te)
        except ValueError as e:
            raise ConfigError(str(e)) from e


def _resolve_paths(data: Dict[str, Any], base_dir: Path):
    for section in ("normative", "alternative"):
        table = data.get(section)
        if isinstance(table, dict) and table.get("path"):
            path = Path(table["path"])
            if not path.is_absolute():
                path = base_dir / path
            if not path.exists():
                raise ConfigError(f"[{section}] path does not exist: {path}")
            table["path"] = str(path)


def apply_env_overrides(data: Dict[str, Any]) -> Dict[str, Any]:
    """Apply SHIFT_AUDIT_SEED (read from the environment or a .env file)"""
    load_dotenv()
    raw = os.getenv(SEED_ENV_VAR)
    if raw:
        try:
            seed = int(raw)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}")
        data.setdefault("experiment", {})["seed"] = seed
        logger.info(f"Seed overridden by {SEED_ENV_VAR}={seed}")
    return data


def parse_config(data: Dict[str, Any], source: Optional[str] = None) -> ExperimentConfig:
    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration{f' in {source}' if source else ''}:\n{e}") from e
    config.source = source
    return config


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read, override and validate a TOML experiment file"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    _resolve_paths(data, path.parent)
    config = parse_config(apply_env_overrides(data), str(path))
    logger.info(f"Configuration loaded from {path}")
    return config


def save_resolved(config: ExperimentConfig, output_dir: Union[str, Path]) -> Path:
    """Write the validated configuration as JSON next to the reports"""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    target = output_dir / RESOLVED_CONFIG_NAME
    data = config.model_dump(mode="json")
    data["learner"] = {"algorithm": config.learner.algorithm, **config.learner.hyperparameters}
    with open(target, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    logger.debug(f"Resolved configuration saved to {target}")
    return target


def config_reference() -> str:
    """Every key of every section with type, default and description"""
    lines = ["# Experiment configuration reference", ""]
    for section, info in ExperimentConfig.model_fields.items():
        if section == "source":
            continue
        model = info.annotation
        lines.append(f"[{section}]")
        if section == "learner":
            lines.append("  # extra keys are hyperparameters:")
            for algorithm, params in DEFAULT_HYPERPARAMETERS.items():
                if params:
                    defaults = ", ".join(f"{k}={v!r}" for k, v in params.items())
                    lines.append(f"  #   {algorithm}: {defaults}")
        for name, field in model.model_fields.items():
            annotation = getattr(field.annotation, "__name__", None) or str(field.annotation).replace("typing.", "")
            default = field.default.value if hasattr(field.default, "value") else field.default
            lines.append(f"  {name}: {annotation} = {default!r}")
            if field.description:
                lines.append(f"      {field.description}")
        lines.append("")
    return "\n".join(lines)
