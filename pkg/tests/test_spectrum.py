import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fuzzyspace.errors import StructuralMismatchError
from fuzzyspace.spectrum import (
    EigenvalueTable,
    NEGATIVE,
    POSITIVE,
    analytic_spectrum,
    compare_spectra,
    numeric_spectrum,
)
from fuzzyspace.triple import DeformationParams, build_deformed_dirac


def as_counter(table):
    vals, counts = np.unique(np.round(table.expanded(), 9), return_counts=True)
    return dict(zip(vals.tolist(), counts.tolist()))


def test_n1():
    t = analytic_spectrum(1, 1, 1)
    assert as_counter(t) == {-1.0: 2, 1.0: 2}
    assert set(t.branches) == {POSITIVE}


def test_n2_c2_hand_substitution():
    r3 = round(math.sqrt(3), 9)
    assert as_counter(analytic_spectrum(2, 1, 2)) == {-3.0: 2, -r3: 4, -1.0: 2, 1.0: 2, r3: 4, 3.0: 2}


@pytest.mark.parametrize("n", range(1, 13))
def test_round_values_are_integers(n):
    t = analytic_spectrum(n, 1, 1)
    assert set(np.round(t.values, 9)) == set(range(-n, 0)) | set(range(1, n + 1))


@given(st.integers(1, 15), st.floats(0, 6), st.floats(-3, 3))
def test_table_invariants(n, c, a):
    t = analytic_spectrum(n, a, c)
    assert t.total == 4 * n * n and t.is_complete
    assert np.all(t.multiplicities == 2)
    ex = t.expanded()
    assert np.allclose(ex, -ex[::-1])
    assert set(t.branches) <= {POSITIVE, NEGATIVE}
    assert np.all(t.two_k <= t.two_j) and np.all(t.two_k % 2 == 1)


def test_label_ranges():
    t = analytic_spectrum(4, 1, 1.5)
    pos = t.two_j[np.array(t.branches) == POSITIVE]
    neg = t.two_j[np.array(t.branches) == NEGATIVE]
    assert pos.min() == 1 and pos.max() == 7
    assert neg.min() == 1 and neg.max() == 5


@pytest.mark.parametrize("n,c", [(2, 1), (6, 5), (8, 2)])
def test_numeric_matches_analytic(n, c):
    num = numeric_spectrum(build_deformed_dirac(n, DeformationParams.restricted(1, c)))
    assert num.total == 4 * n * n and set(num.branches) == {"numeric"}
    assert compare_spectra(analytic_spectrum(n, 1, c), num).max_deviation < 1e-9


def test_numeric_n1():
    assert np.allclose(numeric_spectrum(build_deformed_dirac(1)).expanded(), [-1, -1, 1, 1])


def test_compare_identical_and_mismatch():
    t = analytic_spectrum(3, 1, 2)
    assert compare_spectra(t, t).max_deviation == 0
    with pytest.raises(StructuralMismatchError):
        compare_spectra(analytic_spectrum(2), analytic_spectrum(3))


def test_csv_roundtrip(tmp_path):
    t = analytic_spectrum(5, 1, 1.5)
    p = tmp_path / "s.csv"
    t.to_csv(p)
    assert p.read_text().splitlines()[0] == "value,multiplicity,branch,two_j,two_k"
    back = EigenvalueTable.from_csv(p)
    assert back.n == 5
    assert np.array_equal(back.values, t.values)
    assert np.array_equal(back.two_j, t.two_j) and back.branches == t.branches


def test_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,y\n1,2\n")
    with pytest.raises(ValueError):
        EigenvalueTable.from_csv(p)


def test_smallest_magnitude_at_c0():
    # 1 - sqrt((j+1)^2 - k^2) never vanishes for half-integer j >= k; the
    # closest approach to zero is j = k = 1/2, giving 1 - sqrt(2).
    for n in (2, 8, 20):
        t = analytic_spectrum(n, 1, 0)
        assert np.isclose(np.abs(t.values).min(), math.sqrt(2) - 1)
        assert np.abs(t.values).min() < np.abs(analytic_spectrum(n, 1, 1).values).min()


def test_lambda_max_grows_with_c():
    lm = [analytic_spectrum(20, 1, c).lambda_max for c in (1, 1.1, 1.5, 2, 5)]
    assert all(a < b for a, b in zip(lm, lm[1:]))
