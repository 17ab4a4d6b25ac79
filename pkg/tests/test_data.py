import numpy as np
import pytest

from core.data import (
    CsvSchema,
    Dataset,
    Example,
    PartitionPlan,
    TaskKind,
    apportion,
    load_csv,
    stratified_split,
)
from core.errors import DimensionMismatch, EmptyPartition, ParseError, SchemaMismatch, StratumTooSmall


def _indexed(labels):
    """Dataset whose single feature is the row index"""
    n = len(labels)
    return Dataset(np.arange(n, dtype=float), labels, np.zeros(n, dtype=np.int8))


def _ids(part):
    return part.features[:, 0].astype(int).tolist()


def test_two_way_split_of_eight_examples():
    data = _indexed([0, 0, 0, 0, 1, 1, 1, 1])
    parts = stratified_split(data, PartitionPlan((0.5, 0.5, 0, 0, 0), seed=3))

    for part in parts[:2]:
        assert part.class_counts() == {0.0: 2, 1.0: 2}
    assert all(len(p) == 0 for p in parts[2:])


def test_split_is_deterministic_per_seed():
    data = _indexed([0] * 50 + [1] * 50)

    first = stratified_split(data, PartitionPlan(seed=1))
    again = stratified_split(data, PartitionPlan(seed=1))
    other = stratified_split(data, PartitionPlan(seed=2))

    assert [_ids(p) for p in first] == [_ids(p) for p in again]
    assert [_ids(p) for p in first] != [_ids(p) for p in other]
    assert [p.class_counts() for p in first] == [p.class_counts() for p in other]


def test_split_is_a_partition_and_stratified():
    labels = [0] * 300 + [1] * 700
    data = _indexed(labels)
    plan = PartitionPlan(seed=9)
    parts = stratified_split(data, plan)

    ids = sorted(i for p in parts for i in _ids(p))
    assert ids == list(range(1000))

    for part, fraction in zip(parts, plan.fractions):
        counts = part.class_counts()
        assert abs(counts[1.0] - fraction * 700) <= 1
        assert abs(counts[0.0] - fraction * 300) <= 1


def test_uneven_fractions_keep_totals_exact():
    data = _indexed([0] * 37 + [1] * 64)
    plan = PartitionPlan((0.3, 0.25, 0.2, 0.15, 0.1), seed=4)
    parts = stratified_split(data, plan)

    assert sum(len(p) for p in parts) == 101
    for part, fraction in zip(parts, plan.fractions):
        assert abs(part.class_counts()[0.0] - fraction * 37) <= 1
        assert abs(part.class_counts()[1.0] - fraction * 64) <= 1


def test_positive_fraction_rounding_to_zero_is_an_error():
    data = Dataset(np.arange(10.0), np.linspace(0, 1, 10), np.zeros(10), TaskKind.REGRESSION)
    plan = PartitionPlan((0.96, 0.01, 0.01, 0.01, 0.01), stratify=False)

    with pytest.raises(EmptyPartition):
        stratified_split(data, plan)


def test_small_class_cannot_cover_every_partition():
    data = _indexed([0] * 20 + [1] * 3)

    with pytest.raises(StratumTooSmall):
        stratified_split(data, PartitionPlan())


def test_plan_rejects_fractions_not_summing_to_one():
    with pytest.raises(ValueError):
        PartitionPlan((0.2, 0.2, 0.2, 0.2, 0.1))


def test_apportion_breaks_ties_toward_lowest_index():
    assert apportion(7, [0.2] * 5).tolist() == [2, 2, 1, 1, 1]


def test_dataset_validates_labels_and_groups():
    with pytest.raises(ValueError):
        Dataset([[0.0]], [2], [0])
    with pytest.raises(ValueError):
        Dataset([[0.0]], [1], [3])
    with pytest.raises(DimensionMismatch):
        Dataset.from_examples([Example((1.0,), 0, 0), Example((1.0, 2.0), 1, 0)])


def test_dataset_is_immutable():
    data = _indexed([0, 1])
    with pytest.raises(ValueError):
        data.features[0, 0] = 5.0


def test_load_csv_maps_columns(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("f1,f2,y,z\n0.5,1,0,1\n-1,2.5,1,0\n3,0,1,1\n", encoding="utf-8")

    data = load_csv(path, CsvSchema("y", "z"))

    assert len(data) == 3
    assert data.dimensionality == 2
    assert data.labels.tolist() == [0.0, 1.0, 1.0]
    assert data.groups.tolist() == [1, 0, 1]
    assert data[1].features == (-1.0, 2.5)


def test_load_csv_without_group_column_defaults_to_group_zero(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("a,y\n1,0\n2,1\n", encoding="utf-8")

    data = load_csv(path, CsvSchema("y"))

    assert data.groups.tolist() == [0, 0]


def test_load_csv_reports_bad_cell_location(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("f1,f2,y\n1,2,0\nabc,3,1\n", encoding="utf-8")

    with pytest.raises(ParseError) as info:
        load_csv(path, CsvSchema("y"))

    assert info.value.row == 2
    assert info.value.column == "f1"


def test_load_csv_rejects_unknown_columns(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("f1,y\n1,0\n", encoding="utf-8")

    with pytest.raises(SchemaMismatch):
        load_csv(path, CsvSchema("label"))
    with pytest.raises(SchemaMismatch):
        load_csv(path, CsvSchema("y", "z"))
