#!/usr/bin/env python3
"""
Demo script for shift-audit
"""

import sys
import tempfile
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / "src"))

from core.audit import AuditConfig, Statistic, build_report, collect_runs
from core.distributions import GaussianGds, UnderrepSpec, gds_groups
from core.learners import LearnerSpec
from core.reporting import format_summary, write_audit_report
from core.theory import theory_curve
from utils.logger import setup_logging


def run_demo():
    """Run a small theory curve and a small GDS audit"""
    print("Starting shift-audit demo")
    print("=" * 50)

    setup_logging("WARNING")

    print("\nCloseness probabilities (epsilon=0.001, n=1000)")
    print(f"{'tau':>5} {'f_t(D0)':>9} {'f_t(D1)':>9} {'f_s(D)':>9}")
    for row in theory_curve(0.001, 1000, [0.0, 1.0, 2.0, 4.0], seed=0, n_resamples=10):
        print(f"{row.tau:5.1f} {row.ft_d0:9.4f} {row.ft_d1:9.4f} {row.fs_d:9.4f}")

    print("\nAuditing a decision tree that never saw group 1 (tau=2)")
    group0, group1 = gds_groups(2.0)
    cfg = AuditConfig(
        normative=GaussianGds(tau=2.0),
        alternative=UnderrepSpec(1.0, group0, group1),
        learner=LearnerSpec("dt", {"max_depth": 12}),
        statistic=Statistic.INTER_GROUP_GAP,
        sample_size=2000,
        n_control_runs=20,
        n_shifted_runs=20,
        n_q=20,
        seed=1,
        workers=2,
    )
    runs = collect_runs(cfg)
    report = build_report(cfg, runs.control, runs.shifted)
    naive = build_report(cfg, runs.control, runs.shifted, scorer="naive")
    print(format_summary(report, naive, "demo"))

    output_dir = Path(tempfile.mkdtemp(prefix="shift-audit-demo-"))
    write_audit_report(report, naive, output_dir, "demo", cfg.seed)
    print(f"Reports written to {output_dir}")


if __name__ == "__main__":
    run_demo()
