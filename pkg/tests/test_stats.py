import numpy as np
import pytest

from core.errors import EmptySample
from core.stats import ScoreSample, Setting, auc_roc, mean_and_sd, percentile_threshold, tpr_at_threshold


def _brute_force_auc(control, shifted):
    wins = sum((s > c) + 0.5 * (s == c) for s in shifted for c in control)
    return wins / (len(shifted) * len(control))


def test_nearest_rank_threshold():
    assert percentile_threshold(range(1, 11), 0.9) == 9
    assert percentile_threshold([2, 2, 2, 5], 0.9) == 5
    assert percentile_threshold([3.5], 0.1) == 3.5
    assert percentile_threshold([3.5], 0.99) == 3.5


def test_threshold_is_exact_at_integer_ranks():
    # 0.1 * 30 is slightly above 3 in floating point
    assert percentile_threshold(range(1, 31), 0.1) == 3


def test_tpr_uses_strict_inequality():
    assert tpr_at_threshold([9.5, 8.0], 9) == 0.5
    assert tpr_at_threshold([9.0, 9.0, 9.0], 9.0) == 0.0


def test_tpr_is_non_increasing_in_threshold():
    shifted = np.random.default_rng(0).normal(size=50)
    tprs = [tpr_at_threshold(shifted, t) for t in np.linspace(-3, 3, 25)]
    assert all(a >= b for a, b in zip(tprs, tprs[1:]))


def test_auc_examples():
    assert auc_roc([0.1, 0.2], [0.3, 0.4]) == 1.0
    assert auc_roc([1, 2, 2, 3], [3, 2, 1, 2]) == 0.5
    assert auc_roc([1, 3], [2, 4]) == 0.75


def test_auc_matches_brute_force_pair_count():
    rng = np.random.default_rng(1)
    for _ in range(200):
        control = rng.integers(0, 10, size=rng.integers(1, 40)).astype(float)
        shifted = rng.integers(0, 10, size=rng.integers(1, 40)).astype(float)
        assert auc_roc(control, shifted) == pytest.approx(_brute_force_auc(control, shifted), abs=1e-12)


@pytest.mark.slow
def test_auc_matches_brute_force_on_many_pairs():
    rng = np.random.default_rng(2)
    for _ in range(10_000):
        control = np.round(rng.normal(size=rng.integers(1, 201)), 1)
        shifted = np.round(rng.normal(0.3, size=rng.integers(1, 201)), 1)
        c = control[:, None]
        brute = float(((shifted > c) + 0.5 * (shifted == c)).mean())
        assert auc_roc(control, shifted) == pytest.approx(brute, abs=1e-12)


def test_auc_is_antisymmetric():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=30), rng.normal(0.5, size=45)
    assert auc_roc(a, b) + auc_roc(b, a) == pytest.approx(1.0)


def test_monotone_transform_keeps_auc_and_threshold_rank():
    rng = np.random.default_rng(4)
    control, shifted = rng.normal(size=40), rng.normal(1.0, size=40)

    assert auc_roc(np.exp(control), np.exp(shifted)) == pytest.approx(auc_roc(control, shifted))
    assert percentile_threshold(np.exp(control)) == pytest.approx(np.exp(percentile_threshold(control)))


def test_empty_samples_are_rejected():
    with pytest.raises(EmptySample):
        percentile_threshold([])
    with pytest.raises(EmptySample):
        tpr_at_threshold([], 0.0)
    with pytest.raises(EmptySample):
        auc_roc([1.0], [])


def test_score_sample_rejects_non_finite_values():
    with pytest.raises(ValueError):
        ScoreSample((1.0, float("nan")), Setting.SHIFTED)


def test_mean_and_sd():
    assert mean_and_sd([1.0, 3.0]) == (2.0, pytest.approx(np.sqrt(2.0)))
    assert mean_and_sd([4.0]) == (4.0, 0.0)
