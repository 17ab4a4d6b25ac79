"""
Controlled experiment, hypothesis test and audit game

The control setting trains a stand-in target on the normative distribution
D; the shifted setting puts the audited model (or one trained on D') in the
target slot. Shadows and attack data always come from D. The control
statistics calibrate a nearest-rank threshold that the shifted statistics
are tested against.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from core.attack import (
    ShadowSetup,
    attack_accuracy,
    build_attack_dataset,
    inter_group_attack_gap,
    train_attack,
)
from core.data import Dataset, PartitionPlan, apportion, stratified_split
from core.distributions import Distribution, DrawLedger
from core.errors import AuditFailed, MissingGroup, RunFailed, ShiftAuditError
from core.learners import LearnerSpec, TrainedModel, performance, train
from core.stats import Setting, auc_roc, mean_and_sd, percentile_threshold, tpr_at_threshold
from utils.seeding import derive_seed, make_rng


MIN_CONTROL_RUNS = 10


class Statistic(str, Enum):
    OVERALL_ACCURACY = "overall_accuracy"
    INTER_GROUP_GAP = "inter_group_gap"


@dataclass(frozen=True, eq=False)
class AuditConfig:
    """Everything one controlled experiment needs"""
    normative: Distribution
    alternative: Distribution
    learner: LearnerSpec = field(default_factory=LearnerSpec)
    statistic: Statistic = Statistic.INTER_GROUP_GAP
    partition: PartitionPlan = field(default_factory=PartitionPlan)
    sample_size: int = 5000
    n_control_runs: int = 50
    n_shifted_runs: int = 50
    percentile: float = 0.9
    n_q: int = 50
    n_shadows: int = 1
    auditor_fraction: float = 1.0
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "statistic", Statistic(self.statistic))
        if self.n_control_runs < MIN_CONTROL_RUNS:
            raise ValueError(f"n_control_runs must be at least {MIN_CONTROL_RUNS}, got {self.n_control_runs}")
        if self.n_shifted_runs < 1:
            raise ValueError(f"n_shifted_runs must be positive, got {self.n_shifted_runs}")
        if not 0.0 < self.percentile < 1.0:
            raise ValueError(f"percentile must be in (0, 1), got {self.percentile}")
        if self.n_q < 1 or self.n_shadows < 1 or self.workers < 1:
            raise ValueError("n_q, n_shadows and workers must be positive")
        if not 0.0 < self.auditor_fraction <= 1.0:
            raise ValueError(f"auditor_fraction must be in (0, 1], got {self.auditor_fraction}")
        if self.sample_size < len(self.partition.active):
            raise ValueError(f"sample_size {self.sample_size} cannot cover the partitions")
        if self.normative.dimensionality != self.alternative.dimensionality:
            raise ValueError("normative and alternative distributions differ in dimensionality")

    def replace(self, **changes) -> "AuditConfig":
        return replace(self, **changes)

    @property
    def shadow_setup(self) -> ShadowSetup:
        return ShadowSetup(self.learner, self.n_shadows, self.normative)

    @property
    def target_train_size(self) -> int:
        return int(apportion(self.sample_size, self.partition.fractions)[0])


@dataclass(frozen=True)
class RunDiagnostics:
    """Target and shadow bookkeeping for one run"""
    target_train_performance: float
    target_test_performance: float
    target_test_group0: Optional[float]
    target_test_group1: Optional[float]
    shadow_test_performance: float
    target_converged: bool
    shadows_converged: bool
    attack_converged: bool

    @property
    def generalization_gap(self) -> float:
        return self.target_train_performance - self.target_test_performance


@dataclass(frozen=True)
class RunOutcome:
    """Attack statistic and naive score of one run"""
    setting: Setting
    run_index: int
    seed: int
    statistic: float
    naive_score: float
    diagnostics: RunDiagnostics


@dataclass(frozen=True)
class AuditRuns:
    control: Tuple[RunOutcome, ...]
    shifted: Tuple[RunOutcome, ...]


@dataclass(frozen=True)
class AuditReport:
    """Control/shifted score distributions, threshold and verdicts"""
    statistic: str
    scorer: str
    percentile: float
    control_scores: Tuple[float, ...]
    shifted_scores: Tuple[float, ...]
    threshold: float
    verdicts: Tuple[bool, ...]
    tpr_at_percentile: float
    auc_roc: float
    control_diagnostics: Tuple[RunDiagnostics, ...] = ()
    shifted_diagnostics: Tuple[RunDiagnostics, ...] = ()

    @property
    def control_mean_sd(self) -> Tuple[float, float]:
        return mean_and_sd(self.control_scores)

    @property
    def shifted_mean_sd(self) -> Tuple[float, float]:
        return mean_and_sd(self.shifted_scores)

    @property
    def non_converged_runs(self) -> int:
        return sum(
            not (d.target_converged and d.shadows_converged)
            for d in (*self.control_diagnostics, *self.shifted_diagnostics)
        )

    def mean_generalization_gap(self, setting: Setting = Setting.SHIFTED) -> Optional[float]:
        diagnostics = self.shifted_diagnostics if Setting(setting) is Setting.SHIFTED else self.control_diagnostics
        if not diagnostics:
            return None
        return float(np.mean([d.generalization_gap for d in diagnostics]))

    def to_dict(self) -> Dict[str, Any]:
        control_mean, control_sd = self.control_mean_sd
        shifted_mean, shifted_sd = self.shifted_mean_sd
        return {
            "statistic": self.statistic,
            "scorer": self.scorer,
            "percentile": self.percentile,
            "threshold": self.threshold,
            "tpr_at_percentile": self.tpr_at_percentile,
            "auc_roc": self.auc_roc,
            "control_mean": control_mean,
            "control_sd": control_sd,
            "shifted_mean": shifted_mean,
            "shifted_sd": shifted_sd,
            "control_scores": list(self.control_scores),
            "shifted_scores": list(self.shifted_scores),
            "verdicts": list(self.verdicts),
            "non_converged_runs": self.non_converged_runs,
            "control_diagnostics": [asdict(d) for d in self.control_diagnostics],
            "shifted_diagnostics": [asdict(d) for d in self.shifted_diagnostics],
        }


def _subsample(data: Dataset, fraction: float, rng: np.random.Generator) -> Dataset:
    if fraction >= 1.0:
        return data
    keep = max(1, int(round(fraction * len(data))))
    return data.subset(np.sort(rng.choice(len(data), size=keep, replace=False)))


def _group_performance(model: TrainedModel, data: Dataset, group: int) -> Optional[float]:
    members = data.group_subset(group)
    return performance(model, members) if len(members) else None


def _naive_score(cfg: AuditConfig, diagnostics: RunDiagnostics) -> float:
    if cfg.statistic is Statistic.OVERALL_ACCURACY:
        return diagnostics.target_test_performance
    if diagnostics.target_test_group0 is None or diagnostics.target_test_group1 is None:
        raise MissingGroup("model-test partition lacks one of the groups")
    return diagnostics.target_test_group0 - diagnostics.target_test_group1


def _run_setting(
    cfg: AuditConfig,
    setting: Setting,
    run_seed: int,
    run_index: int = 0,
    audited: Optional[TrainedModel] = None,
    ledger: Optional[DrawLedger] = None,
) -> RunOutcome:
    # finite pools hand out each row once per run: auditor data and D' target data never overlap
    ledger = DrawLedger() if ledger is None else ledger
    pool = cfg.normative.sample(cfg.sample_size, make_rng(derive_seed(run_seed, "normative")), ledger)
    parts = stratified_split(pool, cfg.partition.with_seed(derive_seed(run_seed, "split")))

    auditor_rng = make_rng(derive_seed(run_seed, "auditor-fraction"))
    shadow_train = _subsample(parts.shadow_train, cfg.auditor_fraction, auditor_rng)
    attack_train = _subsample(parts.attack_train, cfg.auditor_fraction, auditor_rng)
    attack_test = _subsample(parts.attack_test, cfg.auditor_fraction, auditor_rng)

    if setting is Setting.CONTROL:
        target = train(cfg.learner.with_seed(derive_seed(run_seed, "target")), parts.target_train)
    elif audited is None:
        target_train = cfg.alternative.sample(
            len(parts.target_train), make_rng(derive_seed(run_seed, "alternative")), ledger
        )
        target = train(cfg.learner.with_seed(derive_seed(run_seed, "target")), target_train)
    else:
        if audited.dimensionality != pool.dimensionality or audited.task is not pool.task:
            raise ValueError("audited model is not query-compatible with the normative distribution")
        target = audited

    chunks = np.array_split(np.arange(len(shadow_train)), cfg.n_shadows)
    shadows = [
        train(cfg.learner.with_seed(derive_seed(run_seed, "shadow", i)), shadow_train.subset(chunk))
        for i, chunk in enumerate(chunks)
    ]

    train_bundles = build_attack_dataset(target, shadows, attack_train, cfg.n_q, derive_seed(run_seed, "bundles-train"))
    # group gaps read higher bundle performance as "target"
    attack = train_attack(train_bundles, orient_to_target=cfg.statistic is Statistic.INTER_GROUP_GAP)
    if cfg.statistic is Statistic.OVERALL_ACCURACY:
        test_bundles = build_attack_dataset(target, shadows, attack_test, cfg.n_q, derive_seed(run_seed, "bundles-test"))
        statistic = attack_accuracy(attack, test_bundles)
    else:
        test_bundles = build_attack_dataset(
            target, shadows, attack_test, cfg.n_q, derive_seed(run_seed, "bundles-test"), group_pure=True
        )
        statistic = inter_group_attack_gap(attack, test_bundles)

    model_test = parts.model_test
    diagnostics = RunDiagnostics(
        target_train_performance=target.diagnostics.train_performance,
        target_test_performance=performance(target, model_test),
        target_test_group0=_group_performance(target, model_test, 0),
        target_test_group1=_group_performance(target, model_test, 1),
        shadow_test_performance=float(np.mean([performance(s, model_test) for s in shadows])),
        target_converged=target.diagnostics.converged,
        shadows_converged=all(s.diagnostics.converged for s in shadows),
        attack_converged=attack.converged,
    )
    logger.debug(f"{setting.value} run {run_index}: statistic {statistic:.6g}")
    return RunOutcome(setting, run_index, run_seed, statistic, _naive_score(cfg, diagnostics), diagnostics)


def run_control_setting(cfg: AuditConfig, run_seed: int, run_index: int = 0) -> RunOutcome:
    """One control run: target stand-in and shadows both trained on D"""
    return _run_setting(cfg, Setting.CONTROL, run_seed, run_index)


def run_shifted_setting(
    cfg: AuditConfig,
    audited: Optional[TrainedModel],
    run_seed: int,
    run_index: int = 0,
    ledger: Optional[DrawLedger] = None,
) -> RunOutcome:
    """One shifted run; ``audited=None`` trains the target on a fresh draw from D'

    Pass the ledger that drew the audited model's training data to keep the
    auditor's pool rows disjoint from it.
    """
    return _run_setting(cfg, Setting.SHIFTED, run_seed, run_index, audited, ledger)


def _execute(task: Tuple[AuditConfig, Setting, int, int]):
    cfg, setting, run_seed, run_index = task
    try:
        return _run_setting(cfg, setting, run_seed, run_index), None
    except Exception as e:
        # any failure is reported with its setting and run index
        return None, f"{type(e).__name__}: {e}"


def _map_runs(cfg: AuditConfig, tasks: List[Tuple[AuditConfig, Setting, int, int]]) -> List[RunOutcome]:
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_execute, tasks))
    else:
        results = [_execute(task) for task in tasks]

    failures = [
        RunFailed(task[1].value, task[3], ShiftAuditError(error))
        for task, (_, error) in zip(tasks, results)
        if error is not None
    ]
    if failures:
        for failure in failures:
            logger.error(str(failure))
        raise AuditFailed(failures)
    return [outcome for outcome, _ in results]


def collect_runs(cfg: AuditConfig, include_shifted: bool = True) -> AuditRuns:
    """Execute all control (and shifted) runs with independently derived seeds"""
    tasks = [(cfg, Setting.CONTROL, derive_seed(cfg.seed, "control", i), i) for i in range(cfg.n_control_runs)]
    if include_shifted:
        tasks += [(cfg, Setting.SHIFTED, derive_seed(cfg.seed, "shifted", i), i) for i in range(cfg.n_shifted_runs)]
    logger.info(
        f"Running {cfg.n_control_runs} control"
        + (f" and {cfg.n_shifted_runs} shifted" if include_shifted else "")
        + f" runs ({cfg.statistic.value}, learner {cfg.learner.algorithm}, workers {cfg.workers})"
    )
    outcomes = _map_runs(cfg, tasks)
    control = tuple(o for o in outcomes if o.setting is Setting.CONTROL)
    shifted = tuple(o for o in outcomes if o.setting is Setting.SHIFTED)
    return AuditRuns(control, shifted)


def build_report(
    cfg: AuditConfig,
    control: Sequence[RunOutcome],
    shifted: Sequence[RunOutcome],
    scorer: str = "attack",
) -> AuditReport:
    """Threshold the control scores and test the shifted ones"""
    pick = (lambda o: o.statistic) if scorer == "attack" else (lambda o: o.naive_score)
    control_scores = tuple(pick(o) for o in control)
    shifted_scores = tuple(pick(o) for o in shifted)
    threshold = percentile_threshold(control_scores, cfg.percentile)
    report = AuditReport(
        statistic=cfg.statistic.value,
        scorer=scorer,
        percentile=cfg.percentile,
        control_scores=control_scores,
        shifted_scores=shifted_scores,
        threshold=threshold,
        verdicts=tuple(score > threshold for score in shifted_scores),
        tpr_at_percentile=tpr_at_threshold(shifted_scores, threshold),
        auc_roc=auc_roc(control_scores, shifted_scores),
        control_diagnostics=tuple(o.diagnostics for o in control),
        shifted_diagnostics=tuple(o.diagnostics for o in shifted),
    )
    logger.info(
        f"{scorer} audit: threshold {threshold:.6g}, TPR {report.tpr_at_percentile:.3f}, AUC {report.auc_roc:.3f}"
    )
    return report


def run_audit(cfg: AuditConfig, runs: Optional[AuditRuns] = None) -> AuditReport:
    """Full controlled experiment scored by the attack statistic"""
    runs = runs or collect_runs(cfg)
    return build_report(cfg, runs.control, runs.shifted, scorer="attack")


def naive_baseline(cfg: AuditConfig, runs: Optional[AuditRuns] = None) -> AuditReport:
    """Same experiment scored by the target model's own (group) test performance"""
    runs = runs or collect_runs(cfg)
    return build_report(cfg, runs.control, runs.shifted, scorer="naive")


def calibrate_threshold(cfg: AuditConfig) -> Tuple[float, Tuple[float, ...]]:
    """Control phase only: returns (threshold, control scores)"""
    runs = collect_runs(cfg, include_shifted=False)
    scores = tuple(o.statistic for o in runs.control)
    return percentile_threshold(scores, cfg.percentile), scores


def audit_model(cfg: AuditConfig, audited: TrainedModel, seed: Optional[int] = None) -> AuditReport:
    """Deployment mode: calibrate on control runs, then audit one given model"""
    runs = collect_runs(cfg, include_shifted=False)
    shifted_seed = derive_seed(cfg.seed if seed is None else seed, "deployment")
    outcome = run_shifted_setting(cfg, audited, shifted_seed)
    return build_report(cfg, runs.control, [outcome], scorer="attack")


@dataclass(frozen=True)
class GameOutcome:
    auditor_guess: int
    true_b: int
    win: bool
    statistic: float


def play_game(cfg: AuditConfig, threshold: float, seed: int) -> GameOutcome:
    """One round of the audit game

    The challenger flips b, trains on D (b=0) or D' (b=1); the auditor runs
    one shifted-setting evaluation and guesses b=1 iff the statistic exceeds
    the threshold.
    """
    rng = make_rng(derive_seed(seed, "game"))
    true_b = int(rng.integers(0, 2))
    source = cfg.alternative if true_b else cfg.normative
    ledger = DrawLedger()
    training_set = source.sample(cfg.target_train_size, make_rng(derive_seed(seed, "challenger-data")), ledger)
    challenger = train(cfg.learner.with_seed(derive_seed(seed, "challenger-model")), training_set)
    outcome = run_shifted_setting(cfg, challenger, derive_seed(seed, "auditor"), ledger=ledger)
    guess = int(outcome.statistic > threshold)
    return GameOutcome(guess, true_b, guess == true_b, outcome.statistic)


def estimate_win_rate(cfg: AuditConfig, threshold: float, n_games: int, seed: int) -> float:
    """Long-run fraction of games the auditor wins"""
    if n_games < 1:
        raise ValueError("n_games must be positive")
    wins = [play_game(cfg, threshold, derive_seed(seed, "round", i)).win for i in range(n_games)]
    return float(np.mean(wins))
