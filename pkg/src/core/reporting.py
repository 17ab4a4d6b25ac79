"""
Report emission

Reports are written single-threaded with sorted keys and shortest
round-trip float formatting, so identical runs give identical bytes.
"""

import json
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import pandas as pd
from loguru import logger

from core.audit import AuditReport
from core.sweeps import SweepResult
from core.theory import CURVE_COLUMNS, TheoryCurveRow


SCHEMA_VERSION = 1

PathLike = Union[str, Path]


def _dump_json(data: Any, path: Path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")


def _write_csv(frame: pd.DataFrame, path: Path):
    frame.to_csv(path, index=False, lineterminator="\n", float_format=repr)


def report_payload(report: AuditReport, naive: AuditReport, name: str, seed: int) -> Dict[str, Any]:
    payload = report.to_dict()
    payload.update({
        "schema_version": SCHEMA_VERSION,
        "experiment": name,
        "seed": seed,
        "generalization_gap": {
            "control": report.mean_generalization_gap(setting="control"),
            "shifted": report.mean_generalization_gap(),
        },
        "naive_baseline": {
            key: value
            for key, value in naive.to_dict().items()
            if not key.endswith("_diagnostics")
        },
    })
    return payload


def write_audit_report(
    report: AuditReport,
    naive: AuditReport,
    output_dir: PathLike,
    name: str = "audit",
    seed: int = 0,
) -> List[Path]:
    """report.json, scores.csv and summary.txt"""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    report_path = output_dir / "report.json"
    _dump_json(report_payload(report, naive, name, seed), report_path)

    scores_path = output_dir / "scores.csv"
    rows = [("control", i, s) for i, s in enumerate(report.control_scores)]
    rows += [("shifted", i, s) for i, s in enumerate(report.shifted_scores)]
    _write_csv(pd.DataFrame(rows, columns=["setting", "run", "score"]), scores_path)

    summary_path = output_dir / "summary.txt"
    with open(summary_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_summary(report, naive, name))

    logger.info(f"Audit report written to {output_dir}")
    return [report_path, scores_path, summary_path]


def format_summary(report: AuditReport, naive: AuditReport, name: str = "audit") -> str:
    control_mean, control_sd = report.control_mean_sd
    shifted_mean, shifted_sd = report.shifted_mean_sd
    flagged = sum(report.verdicts)
    lines = [
        f"experiment: {name}",
        f"statistic: {report.statistic}",
        f"control: mean {control_mean!r} sd {control_sd!r} (n={len(report.control_scores)})",
        f"shifted: mean {shifted_mean!r} sd {shifted_sd!r} (n={len(report.shifted_scores)})",
        f"threshold (p={report.percentile!r}): {report.threshold!r}",
        f"shifted runs flagged: {flagged}/{len(report.verdicts)}",
        f"tpr_at_percentile: {report.tpr_at_percentile!r}",
        f"auc_roc: {report.auc_roc!r}",
        f"naive auc_roc: {naive.auc_roc!r}",
        f"naive tpr_at_percentile: {naive.tpr_at_percentile!r}",
        f"non-converged runs: {report.non_converged_runs}",
    ]
    return "\n".join(lines) + "\n"


def write_sweep(result: SweepResult, output_dir: PathLike) -> List[Path]:
    """summary.csv, summary.json and raw_scores.jsonl"""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    summaries = [row.summary() for row in result.rows]

    csv_path = output_dir / "summary.csv"
    _write_csv(pd.DataFrame(summaries, columns=list(summaries[0].keys())), csv_path)

    json_path = output_dir / "summary.json"
    _dump_json({"schema_version": SCHEMA_VERSION, "axis": result.axis, "rows": summaries}, json_path)

    raw_path = output_dir / "raw_scores.jsonl"
    with open(raw_path, "w", encoding="utf-8", newline="\n") as f:
        for row in result.rows:
            for setting, scores in (("control", row.control_scores), ("shifted", row.shifted_scores)):
                for i, score in enumerate(scores):
                    record = {"axis": result.axis, "value": row.value, "setting": setting, "run": i, "score": score}
                    f.write(json.dumps(record, sort_keys=True) + "\n")

    logger.info(f"Sweep outputs written to {output_dir}")
    return [csv_path, json_path, raw_path]


def write_theory_curve(rows: Sequence[TheoryCurveRow], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(pd.DataFrame([asdict(r) for r in rows], columns=list(CURVE_COLUMNS)), path)
    logger.info(f"Theory curve written to {path}")
    return path


def read_raw_scores(path: PathLike) -> List[Dict[str, Any]]:
    """One record per (cell, setting, run) from a raw_scores.jsonl file"""
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
