import numpy as np
import pytest
from scipy.stats import chisquare, ks_2samp

from core.data import Dataset
from core.distributions import (
    DataPool,
    DrawLedger,
    GaussianGds,
    GaussianGdsSpec,
    MixtureSpec,
    TabularGaussian,
    UnderrepSpec,
    gds_groups,
    sample_gaussian_gds,
    sample_mixture,
    sample_underrep,
)
from core.errors import DimensionMismatch, PoolExhausted


def test_gaussian_gds_without_shift_has_identical_groups():
    data = sample_gaussian_gds(GaussianGdsSpec(tau=0.0, n=100_000), 0.5, seed=1)
    x = data.features[:, 0]

    assert abs(x[data.labels == 1].mean() - 1.0) < 0.02
    assert ks_2samp(x[data.groups == 0], x[data.groups == 1]).pvalue > 0.01


def test_gaussian_gds_shifts_group_one_means():
    data = sample_gaussian_gds(GaussianGdsSpec(tau=2.0, n=100_000), 0.5, seed=2)
    x = data.features[:, 0]

    mask = (data.labels == 0) & (data.groups == 1)
    assert abs(x[mask].mean() - 1.0) < 0.02
    assert abs(x[(data.labels == 1) & (data.groups == 0)].mean() - 1.0) < 0.02


def test_group_mix_zero_realizes_group_zero_only():
    data = sample_gaussian_gds(GaussianGdsSpec(tau=3.0, n=1000), 0.0, seed=3)
    assert not data.groups.any()


def test_offset_moves_features_but_not_groups():
    plain = GaussianGds(tau=1.0).sample(50_000, np.random.default_rng(4))
    moved = GaussianGds(tau=1.0, offset=1.5).sample(50_000, np.random.default_rng(4))

    assert np.array_equal(plain.groups, moved.groups)
    assert np.allclose(moved.features - plain.features, 1.5)


def test_samplers_are_deterministic_per_seed():
    spec = UnderrepSpec(0.8, *gds_groups(2.0))
    a = sample_underrep(spec, 500, seed=5)
    b = sample_underrep(spec, 500, seed=5)

    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.groups, b.groups)


@pytest.mark.parametrize("alpha, expected", [(1.0, True), (0.0, False)])
def test_mixture_boundaries_draw_from_one_component(alpha, expected):
    spec = MixtureSpec(alpha, TabularGaussian(2), TabularGaussian(2, offset=5.0))
    data, from_base = sample_mixture(spec, 1000, seed=6, debug=True)

    assert len(data) == 1000
    assert (from_base == expected).all()


def test_mixture_tags_follow_their_component():
    spec = MixtureSpec(0.5, TabularGaussian(2), TabularGaussian(2, offset=50.0))
    data, from_base = sample_mixture(spec, 100_000, seed=7, debug=True)

    assert 0.495 <= from_base.mean() <= 0.505
    assert (data.features[from_base, 1] < 25).all()
    assert (data.features[~from_base, 1] > 25).all()


def test_mixture_rejects_mismatched_components():
    spec = MixtureSpec(0.5, GaussianGds(), TabularGaussian(3))
    with pytest.raises(DimensionMismatch):
        sample_mixture(spec, 10, seed=0)


def test_underrep_beta_one_has_no_group_one():
    data = sample_underrep(UnderrepSpec(1.0, *gds_groups(2.0)), 1000, seed=8)
    assert not data.groups.any()


def test_underrep_group_fraction():
    data = sample_underrep(UnderrepSpec(0.9, *gds_groups(2.0)), 100_000, seed=9)
    assert abs((data.groups == 0).mean() - 0.9) < 0.005


def test_underrep_half_matches_normative_group_counts():
    n = 20_000
    data = sample_underrep(UnderrepSpec(0.5, *gds_groups(2.0)), n, seed=10)
    counts = np.bincount(data.groups, minlength=2)

    assert chisquare(counts, [n / 2, n / 2]).pvalue > 0.01


def test_underrep_keeps_conditional_law_of_each_group():
    group0, group1 = gds_groups(2.0)
    data = sample_underrep(UnderrepSpec(0.7, group0, group1), 50_000, seed=11)
    reference = group1.sample(50_000, np.random.default_rng(12))

    x = data.features[(data.groups == 1) & (data.labels == 1), 0]
    ref = reference.features[reference.labels == 1, 0]
    assert ks_2samp(x, ref).pvalue > 0.01


def test_underrep_rejects_beta_below_half():
    with pytest.raises(ValueError):
        UnderrepSpec(0.4, *gds_groups(1.0))


def _pool(n):
    labels = np.arange(n) % 2
    return DataPool(Dataset(np.arange(n, dtype=float), labels, (np.arange(n) // 2) % 2), "test")


def test_pool_draws_without_replacement():
    pool = _pool(10)
    drawn = pool.sample(10, np.random.default_rng(0))

    assert sorted(drawn.features[:, 0].tolist()) == list(range(10))
    with pytest.raises(PoolExhausted):
        pool.sample(11, np.random.default_rng(0))


def test_pool_carve_is_disjoint():
    reserved, remainder = _pool(40).carve(15, seed=3)
    a = set(reserved.data.features[:, 0].tolist())
    b = set(remainder.data.features[:, 0].tolist())

    assert len(reserved) == 15 and len(remainder) == 25
    assert not a & b
    assert a | b == set(range(40))


def test_pool_split_by_group():
    group0, group1 = _pool(40).split_by_group()

    assert not group0.data.groups.any()
    assert group1.data.groups.all()
    assert len(group0) + len(group1) == 40


def test_ledger_keeps_repeated_pool_draws_disjoint():
    pool = _pool(30)
    ledger = DrawLedger()
    first = pool.sample(20, np.random.default_rng(0), ledger)
    second = pool.sample(10, np.random.default_rng(0), ledger)

    a = set(first.features[:, 0].tolist())
    b = set(second.features[:, 0].tolist())
    assert not a & b
    assert len(ledger) == 30
    with pytest.raises(PoolExhausted):
        pool.sample(1, np.random.default_rng(1), ledger)


def test_ledger_spans_pools_derived_from_one_source():
    group0, group1 = _pool(80).split_by_group()
    normative = UnderrepSpec(0.5, group0, group1)
    alternative = UnderrepSpec(1.0, group0, group1)
    ledger = DrawLedger()

    auditor = normative.sample(24, np.random.default_rng(2), ledger)
    target = alternative.sample(8, np.random.default_rng(3), ledger)

    assert not set(auditor.features[:, 0].tolist()) & set(target.features[:, 0].tolist())
    assert not target.groups.any()


def test_pools_wrapping_the_same_rows_share_a_source():
    data = _pool(10).data
    ledger = DrawLedger()
    DataPool(data, "a").sample(6, np.random.default_rng(0), ledger)

    with pytest.raises(PoolExhausted):
        DataPool(data, "b").sample(5, np.random.default_rng(0), ledger)


def test_noise_scale_widens_each_class_and_keeps_the_group_mix():
    wide = GaussianGds(tau=2.0, noise_scale=1.5).sample(100_000, np.random.default_rng(13))
    x = wide.features[:, 0]

    assert abs(x[(wide.groups == 0) & (wide.labels == 1)].std() - 1.5) < 0.03
    assert abs(wide.groups.mean() - 0.5) < 0.01
    with pytest.raises(ValueError):
        GaussianGds(noise_scale=0.0)
