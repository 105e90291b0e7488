import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import povcast as pc
from povcast.data import drop_zero_rows
from povcast.errors import DomainError, EmptyError, ParseError, ShapeError


def test_table1_shape_and_anchor_cell(table1):
    assert table1.n_entities == 24
    assert table1.n_periods == 5
    assert table1.entity_names[0] == "Eddard"
    assert table1.period_labels[0] == "AGOT"
    assert table1.counts[0, 0] == 15


def test_single_cell_matrix():
    m = pc.load_matrix(io.StringIO("name,B1\nX,1\n"))
    assert m.counts.tolist() == [[1]]


def test_negative_cell_rejected():
    with pytest.raises(ParseError, match="negative"):
        pc.load_matrix(io.StringIO("name,B1\nX,-3\n"))


def test_non_numeric_cell_rejected():
    with pytest.raises(ParseError, match="row 2"):
        pc.load_matrix(io.StringIO("name,B1\nX,abc\n"))


def test_ragged_rows_rejected():
    with pytest.raises(ShapeError):
        pc.load_matrix(io.StringIO("name,B1,B2\nX,1\n"))


def test_empty_input_rejected():
    with pytest.raises(EmptyError):
        pc.load_matrix(io.StringIO("name,B1\n"))


def test_zero_row_rejected_in_observed_data():
    with pytest.raises(ParseError, match="Z"):
        pc.load_matrix(io.StringIO("name,B1\nX,1\nZ,0\n"))


class TestSmooth:
    def test_jon_snow_redistribution(self, table1, smoothed):
        # weights default to the source pair's column sums (45 and 71)
        i = table1.entity_names.index("Jon Snow")
        assert smoothed.counts[i, 3] == pytest.approx(45 * 13 / 116, abs=1e-12)
        assert smoothed.counts[i, 4] == pytest.approx(71 * 13 / 116, abs=1e-12)

    def test_default_weights_are_column_sums(self, table1):
        assert table1.counts[:, 3].sum() == 45
        assert table1.counts[:, 4].sum() == 71

    def test_pair_sums_preserved_exactly(self, table1, smoothed):
        before = table1.counts[:, 3] + table1.counts[:, 4]
        after = smoothed.counts[:, 3] + smoothed.counts[:, 4]
        assert (after == before).all()

    def test_untouched_columns_identical(self, table1, smoothed):
        assert (smoothed.counts[:, :3] == table1.counts[:, :3]).all()

    def test_arys_melisandre_rows_identical(self, table1, smoothed):
        i = table1.entity_names.index("Arys")
        j = table1.entity_names.index("Melisandre")
        assert (smoothed.counts[i] == smoothed.counts[j]).all()

    def test_zero_pair_unchanged(self):
        m = pc.load_matrix(io.StringIO("n,B1,B2,B3\nX,5,0,0\n"))
        s = pc.smooth(m, 2, 3, 1.0, 2.0)
        assert s.counts.tolist() == [[5.0, 0.0, 0.0]]

    def test_column_totals_match_weights(self, smoothed):
        assert smoothed.counts[:, 3].sum() == pytest.approx(45, rel=1e-12)
        assert smoothed.counts[:, 4].sum() == pytest.approx(71, rel=1e-12)

    def test_idempotent(self, smoothed):
        twice = pc.smooth(smoothed, 4, 5, 45.0, 71.0)
        assert np.allclose(twice.counts, smoothed.counts, rtol=0, atol=1e-12)

    def test_bad_column_raises(self, table1):
        with pytest.raises(IndexError):
            pc.smooth(table1, 4, 9)
        with pytest.raises(IndexError):
            pc.smooth(table1, 4, 4)

    def test_nonpositive_weight_raises(self, table1):
        with pytest.raises(DomainError):
            pc.smooth(table1, 4, 5, 0.0, 1.0)


class TestSubmatrix:
    def test_nine_by_two(self, table1):
        sub = pc.submatrix(table1, range(1, 10), [1, 2])
        assert sub.counts.shape == (9, 2)
        assert sub.counts[0].tolist() == [15, 0]

    def test_identity_copy(self, table1):
        sub = pc.submatrix(table1, range(1, 25), range(1, 6))
        assert (sub.counts == table1.counts).all()
        assert sub.entity_names == table1.entity_names

    def test_twelve_by_three(self, table1):
        sub = pc.submatrix(table1, range(1, 13), range(1, 4))
        assert sub.counts.shape == (12, 3)

    def test_zero_rows_flagged(self, table1):
        with pytest.warns(UserWarning, match="all-zero"):
            sub = pc.submatrix(table1, range(1, 25), [1, 2])
        assert len(sub.zero_row_indices) > 0
        kept = drop_zero_rows(sub)
        assert kept.n_entities == 24 - len(sub.zero_row_indices)

    def test_out_of_range(self, table1):
        with pytest.raises(IndexError):
            pc.submatrix(table1, [0], [1])
        with pytest.raises(IndexError):
            pc.submatrix(table1, [1], [6])


class TestNewEntityCounts:
    def test_table1_history(self, table1):
        assert pc.new_entity_counts(table1) == [9, 14, 27, 11]

    def test_all_rows_start_in_period_one(self):
        m = pc.load_matrix(io.StringIO("n,B1,B2\nX,1,5\nY,2,0\n"))
        assert pc.new_entity_counts(m) == [0]

    def test_single_new_entity(self):
        m = pc.PovMatrix(("a", "b"), np.array([[1, 0], [0, 3]]), ("B1", "B2"))
        assert pc.new_entity_counts(m) == [3]


names = st.integers(min_value=0, max_value=10_000).map(lambda i: f"e{i}")


@given(
    st.lists(
        st.lists(st.integers(min_value=0, max_value=99), min_size=3, max_size=3),
        min_size=1,
        max_size=8,
    ).filter(lambda rows: all(any(v > 0 for v in r) for r in rows))
)
@settings(max_examples=50)
def test_serialize_roundtrip(rows):
    m = pc.PovMatrix(
        tuple(f"e{i}" for i in range(len(rows))),
        np.array(rows, dtype=np.int64),
        ("P1", "P2", "P3"),
    )
    back = pc.load_matrix(io.StringIO(pc.serialize(m)))
    assert back.entity_names == m.entity_names
    assert back.period_labels == m.period_labels
    assert (back.counts == m.counts).all()


def test_serialize_rejects_comma_names():
    m = pc.PovMatrix(("a,b",), np.array([[1]]), ("P1",))
    with pytest.raises(ParseError):
        pc.serialize(m)
