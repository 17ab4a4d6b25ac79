"""
Shared fixtures for the test suite
"""

import sys
from pathlib import Path

# Add the src directory to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

import numpy as np
import pytest
from loguru import logger

from core.audit import AuditConfig, Statistic
from core.data import Dataset, TaskKind
from core.distributions import GaussianGds, TabularGaussian, UnderrepSpec, gds_groups
from core.learners import LearnerSpec


@pytest.fixture(autouse=True)
def quiet_logging():
    logger.remove()
    logger.add(sys.stderr, level="WARNING")
    yield
    logger.remove()


@pytest.fixture
def two_gaussians():
    """Train/test pair: class means (-3, 0) and (3, 0), unit covariance"""
    def draw(n, seed):
        rng = np.random.default_rng(seed)
        labels = rng.integers(0, 2, size=n)
        x = rng.standard_normal((n, 2))
        x[:, 0] += np.where(labels == 1, 3.0, -3.0)
        return Dataset(x, labels, np.zeros(n, dtype=np.int8))
    return draw(2000, 1), draw(2000, 2)


@pytest.fixture
def tiny_gds_config():
    group0, group1 = gds_groups(2.0)
    return AuditConfig(
        normative=GaussianGds(tau=2.0),
        alternative=UnderrepSpec(1.0, group0, group1),
        learner=LearnerSpec("dt", {"max_depth": 8}),
        statistic=Statistic.INTER_GROUP_GAP,
        sample_size=600,
        n_control_runs=10,
        n_shifted_runs=5,
        n_q=10,
        seed=42,
    )


@pytest.fixture
def tiny_ds_config():
    """Overall-accuracy audit whose alternative sits far away from D"""
    return AuditConfig(
        normative=TabularGaussian(dimensionality=2, class_sep=2.0),
        alternative=TabularGaussian(dimensionality=2, class_sep=2.0, offset=6.0),
        learner=LearnerSpec("dt", {"max_depth": 4}),
        statistic=Statistic.OVERALL_ACCURACY,
        sample_size=1000,
        n_control_runs=10,
        n_shifted_runs=10,
        n_q=20,
        seed=7,
    )


def write_config(path: Path, body: str) -> Path:
    path.write_text(body, encoding="utf-8")
    return path
