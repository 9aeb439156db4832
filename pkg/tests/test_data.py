"""Ingestion, preprocessing, and scenario-independent share splitting."""

import numpy as np
import pytest

from helpers import CODEC
from ssgpr.data import (Dataset, IngestError, PartitionError, ScenarioSplit,
                        ingest_csv, read_matrix, split_scenario, standardize)
from ssgpr.sharing import reconstruct


def test_ingest_csv_shapes(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1,2,10\n3,4,20\n5,6,30\n")
    ds = ingest_csv(str(path))
    assert ds.n == 3 and ds.d == 2
    assert ds.y.tolist() == [10.0, 20.0, 30.0]


def test_ingest_csv_header(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,t\n1,2,10\n3,4,20\n")
    ds = ingest_csv(str(path), has_header=True)
    assert ds.n == 2 and ds.d == 2


def test_ingest_csv_target_column(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("10,1,2\n20,3,4\n")
    ds = ingest_csv(str(path), target_col=0)
    assert ds.y.tolist() == [10.0, 20.0]
    assert ds.X.tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_read_matrix_reports_bad_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,oops\n")
    with pytest.raises(IngestError, match="row 2.*column 2"):
        read_matrix(str(path))


def test_read_matrix_reports_ragged_row(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("1,2\n3\n")
    with pytest.raises(IngestError, match="row 2"):
        read_matrix(str(path))


def test_ingest_needs_two_columns(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("1\n2\n")
    with pytest.raises(IngestError):
        ingest_csv(str(path))


def test_dataset_validation():
    with pytest.raises(IngestError):
        Dataset(np.ones((3, 2)), np.ones(2))


def test_standardize_centers_and_scales():
    ds = Dataset([[1.0, 10.0], [3.0, 30.0], [5.0, 50.0]], [4.0, 6.0, 8.0])
    out, prep = standardize(ds)
    assert np.allclose(out.X.mean(axis=0), 0.0)
    assert np.allclose(out.X.std(axis=0), 1.0)
    assert prep.y_shift == 6.0
    assert np.allclose(out.y, [-2.0, 0.0, 2.0])
    assert np.allclose(prep.apply_x([[3.0, 30.0]]), 0.0)


def test_standardize_constant_column_names_offender():
    ds = Dataset([[1.0, 7.0], [2.0, 7.0]], [0.0, 1.0])
    with pytest.raises(IngestError, match="column 1"):
        standardize(ds)


def test_standardize_disabled_is_identity():
    ds = Dataset([[1.0], [2.0]], [3.0, 4.0])
    out, prep = standardize(ds, normalize=False)
    assert np.array_equal(out.X, ds.X)
    assert prep.y_shift == 0.0


def _reconstruct_bundle(b0, b1):
    return {k: reconstruct(b0[k], b1[k]) for k in b0}


def test_hds_partition_matches_single_owner():
    rng = np.random.default_rng(0)
    ds = Dataset(rng.uniform(-1, 1, (80, 3)), rng.normal(size=80))
    xs = rng.uniform(-1, 1, (5, 3))
    single = split_scenario(ds, xs, ScenarioSplit("hds", row_ranges=[(0, 80)]),
                            CODEC, seed=9)
    two = split_scenario(ds, xs, ScenarioSplit("hds", row_ranges=[(0, 40), (40, 80)]),
                         CODEC, seed=9)
    for key in ("X", "y", "x_star"):
        assert np.array_equal(single[0][key].values, two[0][key].values)
        assert np.array_equal(single[1][key].values, two[1][key].values)


def test_vds_partition_matches_single_owner():
    rng = np.random.default_rng(1)
    ds = Dataset(rng.uniform(-1, 1, (10, 10)), rng.normal(size=10))
    xs = rng.uniform(-1, 1, (2, 10))
    single = split_scenario(ds, xs, ScenarioSplit("vds", col_ranges=[(0, 10)]),
                            CODEC, seed=3)
    two = split_scenario(ds, xs, ScenarioSplit("vds", col_ranges=[(0, 5), (5, 10)]),
                         CODEC, seed=3)
    for key in ("X", "y", "x_star"):
        assert np.array_equal(single[0][key].values, two[0][key].values)


def test_shares_reconstruct_to_encoded_data():
    rng = np.random.default_rng(2)
    ds = Dataset(rng.uniform(-1, 1, (6, 2)), rng.normal(size=6))
    xs = rng.uniform(-1, 1, (2, 2))
    b0, b1 = split_scenario(ds, xs, ScenarioSplit("pds"), CODEC, seed=5)
    got = _reconstruct_bundle(b0, b1)
    assert np.array_equal(got["X"], CODEC.decode(CODEC.encode(ds.X)))
    assert np.array_equal(got["y"], CODEC.decode(CODEC.encode(ds.y)))
    assert np.array_equal(got["x_star"], CODEC.decode(CODEC.encode(xs)))


def test_partition_gap_rejected():
    ds = Dataset(np.ones((4, 2)), np.ones(4))
    with pytest.raises(PartitionError):
        split_scenario(ds, np.ones((1, 2)),
                       ScenarioSplit("hds", row_ranges=[(0, 2), (3, 4)]), CODEC, 0)


def test_partition_overlap_rejected():
    ds = Dataset(np.ones((4, 2)), np.ones(4))
    with pytest.raises(PartitionError):
        split_scenario(ds, np.ones((1, 2)),
                       ScenarioSplit("hds", row_ranges=[(0, 3), (2, 4)]), CODEC, 0)


def test_partition_short_cover_rejected():
    ds = Dataset(np.ones((4, 2)), np.ones(4))
    with pytest.raises(PartitionError):
        split_scenario(ds, np.ones((1, 2)),
                       ScenarioSplit("vds", col_ranges=[(0, 1)]), CODEC, 0)


def test_unknown_scenario_rejected():
    ds = Dataset(np.ones((2, 2)), np.ones(2))
    with pytest.raises(PartitionError):
        split_scenario(ds, np.ones((1, 2)), ScenarioSplit("xds"), CODEC, 0)
