"""Dataset container, CSV IO, and contrast constructors."""

import numpy as np
import pytest

from mvtsens import (
    ContrastVector,
    EmptyTreatmentLevel,
    InputError,
    InvalidLevelPair,
    MissingColumn,
    NonFiniteValue,
    ObservationalDataset,
    ParseError,
    all_pairwise_contrasts,
    load_csv,
    pairwise_contrast,
    write_csv,
)

from conftest import random_dataset


def make_dataset(**kw):
    base = dict(
        treatments=np.array([1, 2, 3, 1, 2, 3]),
        covariates=np.arange(12.0).reshape(6, 2),
        outcomes=np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0]),
        num_levels=3,
        covariate_names=("a", "b"),
    )
    base.update(kw)
    return ObservationalDataset(**base)


class TestObservationalDataset:
    def test_basic_properties(self):
        ds = make_dataset()
        assert ds.n == 6
        assert ds.num_covariates == 2
        assert list(ds.arm_sizes()) == [2, 2, 2]
        assert ds.arm_mask(2).tolist() == [False, True, False, False, True, False]
        assert ds.label_for(3) == "3"

    def test_arrays_are_locked_copies(self):
        t = np.array([1, 2, 1, 2])
        ds = make_dataset(
            treatments=t,
            covariates=np.zeros((4, 2)),
            outcomes=np.zeros(4),
            num_levels=2,
        )
        t[0] = 99  # caller mutation must not leak in
        assert ds.treatments[0] == 1
        with pytest.raises(ValueError):
            ds.outcomes[0] = 1.0

    def test_units_view(self):
        ds = make_dataset()
        units = ds.units
        assert len(units) == 6
        assert units[3].treatment == 1
        assert units[3].outcome == 3.0
        assert np.array_equal(units[3].covariates, ds.covariates[3])

    def test_rejects_1d_covariates(self):
        with pytest.raises(InputError):
            make_dataset(covariates=np.zeros(6))

    def test_rejects_length_mismatch(self):
        with pytest.raises(InputError):
            make_dataset(outcomes=np.zeros(5))

    def test_rejects_empty(self):
        with pytest.raises(InputError):
            make_dataset(
                treatments=np.array([], dtype=int),
                covariates=np.zeros((0, 2)),
                outcomes=np.array([]),
            )

    def test_rejects_single_level(self):
        with pytest.raises(InputError):
            make_dataset(num_levels=1, treatments=np.ones(6, dtype=int))

    def test_rejects_out_of_range_label(self):
        with pytest.raises(InputError, match="outside 1..3"):
            make_dataset(treatments=np.array([1, 2, 3, 4, 2, 3]))

    def test_rejects_missing_level(self):
        with pytest.raises(EmptyTreatmentLevel) as exc:
            make_dataset(treatments=np.array([1, 3, 3, 1, 3, 1]))
        assert exc.value.level == 2

    def test_rejects_nonfinite_covariate(self):
        x = np.arange(12.0).reshape(6, 2)
        x[4, 1] = np.nan
        with pytest.raises(NonFiniteValue) as exc:
            make_dataset(covariates=x)
        assert exc.value.row == 5
        assert exc.value.col == "b"

    def test_rejects_nonfinite_outcome(self):
        y = np.zeros(6)
        y[2] = np.inf
        with pytest.raises(NonFiniteValue):
            make_dataset(outcomes=y)

    def test_level_labels_length_check(self):
        with pytest.raises(InputError):
            make_dataset(level_labels=("none", "low"))
        ds = make_dataset(level_labels=("none", "low", "high"))
        assert ds.label_for(1) == "none"


class TestContrasts:
    def test_pairwise_values(self):
        c = pairwise_contrast(1, 3, 3)
        assert c.c.tolist() == [1.0, 0.0, -1.0]
        assert c.label == "ate_1_3"
        assert len(c) == 3

    def test_pairwise_rejects_bad_pairs(self):
        for k, l in [(0, 1), (2, 2), (3, 2), (1, 4)]:
            with pytest.raises(InvalidLevelPair):
                pairwise_contrast(k, l, 3)

    def test_all_pairwise_order(self):
        labels = [c.label for c in all_pairwise_contrasts(4)]
        assert labels == [
            "ate_1_2", "ate_1_3", "ate_1_4", "ate_2_3", "ate_2_4", "ate_3_4",
        ]

    def test_vector_contrast_label_and_locking(self):
        c = ContrastVector(np.array([0.5, 0.5, -1.0]))
        assert c.label == "c[0.5,0.5,-1]"
        with pytest.raises(ValueError):
            c.c[0] = 2.0

    def test_rejects_zero_vector(self):
        with pytest.raises(InputError):
            ContrastVector(np.zeros(3))

    def test_rejects_2d(self):
        with pytest.raises(InputError):
            ContrastVector(np.zeros((2, 2)))


class TestCsvIO:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        ds = random_dataset(rng, n=80, num_levels=3)
        path = tmp_path / "ds.csv"
        write_csv(ds, path)
        back = load_csv(path, "treatment", "outcome", list(ds.covariate_names))
        assert np.array_equal(back.treatments, ds.treatments)
        assert np.array_equal(back.covariates, ds.covariates)
        assert np.array_equal(back.outcomes, ds.outcomes)

    def test_string_levels_round_trip(self, tmp_path):
        path = tmp_path / "ds.csv"
        path.write_text(
            "dose,x1,y\nhigh,0.5,1\nnone,1.0,2\nlow,1.5,3\nnone,2.0,4\n"
        )
        ds = load_csv(path, "dose", "y", ["x1"], levels=["none", "low", "high"])
        assert ds.treatments.tolist() == [3, 1, 2, 1]
        assert ds.level_labels == ("none", "low", "high")
        out = tmp_path / "out.csv"
        write_csv(ds, out, treatment_col="dose", outcome_col="y")
        again = load_csv(out, "dose", "y", ["x1"], levels=["none", "low", "high"])
        assert np.array_equal(again.treatments, ds.treatments)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "ds.csv"
        path.write_text("treatment,x1,outcome\n1,0.5,1\n2,1.0,2\n")
        with pytest.raises(MissingColumn, match="x9"):
            load_csv(path, "treatment", "outcome", ["x9"])

    def test_bad_cell_reports_row_and_col(self, tmp_path):
        path = tmp_path / "ds.csv"
        path.write_text("treatment,x1,outcome\n1,0.5,1\n2,oops,2\n")
        with pytest.raises(ParseError) as exc:
            load_csv(path, "treatment", "outcome", ["x1"])
        assert exc.value.row == 2
        assert exc.value.col == "x1"

    def test_nonfinite_cell(self, tmp_path):
        path = tmp_path / "ds.csv"
        path.write_text("treatment,x1,outcome\n1,0.5,inf\n2,1.0,2\n")
        with pytest.raises(NonFiniteValue):
            load_csv(path, "treatment", "outcome", ["x1"])

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "ds.csv"
        path.write_text("treatment,x1,outcome\n1,0.5,1\n2,1.0\n")
        with pytest.raises(ParseError):
            load_csv(path, "treatment", "outcome", ["x1"])

    def test_integer_levels_must_cover_range(self, tmp_path):
        # labels {1,3} imply J=3 with level 2 unobserved
        path = tmp_path / "ds.csv"
        path.write_text("treatment,x1,outcome\n1,0.5,1\n3,1.0,2\n1,2.0,3\n")
        with pytest.raises(EmptyTreatmentLevel) as exc:
            load_csv(path, "treatment", "outcome", ["x1"])
        assert exc.value.level == 2

    def test_undeclared_string_labels_rejected(self, tmp_path):
        path = tmp_path / "ds.csv"
        path.write_text("treatment,x1,outcome\nlow,0.5,1\nhigh,1.0,2\n")
        with pytest.raises(ParseError):
            load_csv(path, "treatment", "outcome", ["x1"])

    def test_empty_file(self, tmp_path):
        path = tmp_path / "ds.csv"
        path.write_text("")
        with pytest.raises(InputError):
            load_csv(path, "treatment", "outcome", ["x1"])

    def test_header_only(self, tmp_path):
        path = tmp_path / "ds.csv"
        path.write_text("treatment,x1,outcome\n")
        with pytest.raises(InputError, match="no data rows"):
            load_csv(path, "treatment", "outcome", ["x1"])
