"""Dataset ingestion, recoding, round trips, and validation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oplearn import (
    ColumnSchema,
    DataFormatError,
    Dataset,
    canonical_schema,
    load_dataset,
    save_dataset,
    validate_dataset,
)

from helpers import make_dataset

SCHEMA = ColumnSchema(outcome="y", action="treat", features=("x1",))


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoad:
    def test_actions_recoded_by_ascending_label(self, tmp_path):
        path = write(
            tmp_path,
            "y,treat,x1\n"
            "1.0,3,0.1\n"
            "2.0,1,0.2\n"
            "3.0,2,0.3\n"
            "4.0,1,0.4\n"
            "5.0,3,0.5\n"
            "6.0,2,0.6\n",
        )
        d = load_dataset(path, SCHEMA)
        assert d.n_actions == 3
        assert d.action_labels == ("1", "2", "3")
        assert d.actions.tolist() == [2, 0, 1, 0, 2, 1]

    def test_blank_cell_names_row(self, tmp_path):
        path = write(
            tmp_path,
            "y,treat,x1\n"
            "1.0,0,0.1\n"
            "2.0,1,0.2\n"
            "3.0,0,0.3\n"
            ",1,0.4\n"
            "5.0,0,0.5\n"
            "6.0,1,0.6\n",
        )
        with pytest.raises(DataFormatError, match="row 4"):
            load_dataset(path, SCHEMA)

    def test_expected_action_unobserved(self, tmp_path):
        path = write(
            tmp_path,
            "y,treat,x1\n0.5,0,0.1\n0.6,0,0.2\n0.7,0,0.3\n0.8,0,0.4\n",
        )
        with pytest.raises(DataFormatError, match="action 1 unobserved"):
            load_dataset(path, SCHEMA, expected_actions=(0, 1))

    def test_missing_column(self, tmp_path):
        path = write(tmp_path, "y,x1\n1.0,0.1\n")
        with pytest.raises(DataFormatError, match="missing column 'treat'"):
            load_dataset(path, SCHEMA)

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        path = write(tmp_path, "y,treat,x1\n1.0,0,abc\n2.0,1,0.2\n")
        with pytest.raises(DataFormatError, match="column 'x1' at row 1"):
            load_dataset(path, SCHEMA)

    def test_empty_file(self, tmp_path):
        path = write(tmp_path, "")
        with pytest.raises(DataFormatError, match="empty file"):
            load_dataset(path, SCHEMA)

    def test_non_integer_action(self, tmp_path):
        path = write(tmp_path, "y,treat,x1\n1.0,0.5,0.1\n2.0,1,0.2\n")
        with pytest.raises(DataFormatError, match="non-integer action"):
            load_dataset(path, SCHEMA)

    def test_semicolon_delimiter(self, tmp_path):
        path = write(tmp_path, "y;treat;x1\n1.0;0;0.1\n2.0;1;0.2\n")
        d = load_dataset(path, SCHEMA, delimiter=";")
        assert d.n_units == 2


class TestRoundTrip:
    def test_save_load_is_bit_exact(self, tmp_path):
        d = make_dataset(np.random.default_rng(3), n=60, m=3, p=2)
        path = tmp_path / "out.csv"
        save_dataset(d, path)
        back = load_dataset(path, canonical_schema(d))
        assert np.array_equal(back.outcomes, d.outcomes)
        assert np.array_equal(back.actions, d.actions)
        assert np.array_equal(back.features, d.features)
        assert back.action_labels == d.action_labels

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(
            st.floats(allow_nan=False, allow_infinity=False, width=64),
            min_size=4,
            max_size=12,
        )
    )
    def test_round_trip_arbitrary_floats(self, tmp_path_factory, outcomes):
        n = len(outcomes)
        d = Dataset(
            outcomes=np.array(outcomes),
            actions=np.arange(n) % 2,
            features=np.linspace(-1, 1, n)[:, None],
            n_actions=2,
        )
        path = tmp_path_factory.mktemp("rt") / "d.csv"
        save_dataset(d, path)
        back = load_dataset(path, canonical_schema(d))
        assert np.array_equal(back.outcomes, d.outcomes)
        assert np.array_equal(back.features, d.features)

    def test_recode_is_a_bijection(self, tmp_path):
        path = write(
            tmp_path,
            "y,treat,x1\n1,10,0\n2,-5,0\n3,10,0\n4,7,0\n5,-5,0\n6,7,0\n",
        )
        d = load_dataset(path, SCHEMA)
        assert d.action_labels == ("-5", "7", "10")
        # every label maps back to exactly one recoded level and vice versa
        assert sorted(set(d.actions.tolist())) == [0, 1, 2]


class TestDatasetInvariants:
    def test_rejects_single_action(self):
        with pytest.raises(ValueError):
            Dataset(
                outcomes=np.ones(4),
                actions=np.zeros(4, dtype=int),
                features=np.ones((4, 1)),
                n_actions=1,
            )

    def test_rejects_missing_arm(self):
        with pytest.raises(ValueError, match="action 2 unobserved"):
            Dataset(
                outcomes=np.ones(4),
                actions=np.array([0, 1, 0, 1]),
                features=np.ones((4, 1)),
                n_actions=3,
            )

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            Dataset(
                outcomes=np.array([1.0, np.nan, 2.0, 3.0]),
                actions=np.array([0, 1, 0, 1]),
                features=np.ones((4, 1)),
                n_actions=2,
            )

    def test_arrays_are_read_only(self):
        d = make_dataset(np.random.default_rng(0), n=20)
        with pytest.raises(ValueError):
            d.outcomes[0] = 99.0


class TestValidate:
    def test_healthy_dataset_passes_clean(self):
        rng = np.random.default_rng(1)
        actions = np.array([0] * 60 + [1] * 40)
        d = Dataset(
            outcomes=rng.random(100) + 1.0,
            actions=actions,
            features=rng.standard_normal((100, 3)),
            n_actions=2,
        )
        report = validate_dataset(d)
        assert report.passed
        assert report.warnings == []
        assert report.arm_counts.tolist() == [60, 40]

    def test_thin_arm_fails(self):
        rng = np.random.default_rng(2)
        actions = np.array([0] * 99 + [1])
        d = Dataset(
            outcomes=rng.random(100),
            actions=actions,
            features=rng.standard_normal((100, 3)),
            n_actions=2,
        )
        report = validate_dataset(d)
        assert not report.passed  # 1 < p + 2

    def test_negative_outcome_warns(self):
        d = make_dataset(np.random.default_rng(3), n=40)
        shifted = d.with_outcomes(np.where(np.arange(40) == 7, -2.0, d.outcomes))
        report = validate_dataset(shifted)
        assert any("negative outcomes" in w for w in report.warnings)

    def test_arm_counts_sum_to_n(self):
        d = make_dataset(np.random.default_rng(4), n=77, m=3)
        assert validate_dataset(d).arm_counts.sum() == 77
