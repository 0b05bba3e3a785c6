"""Momentum-lattice mode sets: construction, ordering, negation closure."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bogoscope.modes import TWO_PI, LatticeVector, ModeSet, build_mode_set


def test_lattice_vector_momentum():
    v = LatticeVector((1, -2, 3))
    assert np.allclose(v.momentum, TWO_PI * np.array([1.0, -2.0, 3.0]))
    assert v.p_norm == pytest.approx(TWO_PI * np.sqrt(14.0))
    assert (-v).n == (-1, 2, -3)
    assert (v + LatticeVector((0, 2, -3))).n == (1, 0, 0)


def test_lattice_vector_rejects_non_integer():
    with pytest.raises(ValueError):
        LatticeVector((1.5, 0, 0))
    with pytest.raises(ValueError):
        LatticeVector((1, 0))


def test_sup_cutoff_counts():
    # sup-norm ball of radius m has (2m+1)^3 triples, minus the origin
    for m in (1, 2, 3):
        ms = build_mode_set("sup", m, include_zero=False)
        assert ms.size == (2 * m + 1) ** 3 - 1
        msz = build_mode_set("sup", m, include_zero=True)
        assert msz.size == (2 * m + 1) ** 3
        assert msz.zero_index is not None
        assert ms.zero_index is None


def test_euclidean_cutoff_counts():
    # |2*pi*n| <= 2*pi  <->  |n| <= 1: six unit vectors
    ms = build_mode_set("euclidean", TWO_PI, include_zero=False)
    assert ms.size == 6
    # |n|^2 <= 2: adds the twelve (1,1,0)-type vectors
    ms2 = build_mode_set("euclidean", TWO_PI * np.sqrt(2.0), include_zero=False)
    assert ms2.size == 18


def test_lexicographic_ordering():
    ms = build_mode_set("sup", 1, include_zero=True)
    lab = ms.labels
    keys = [tuple(row) for row in lab]
    assert keys == sorted(keys)


def test_index_lookup_and_negation():
    ms = build_mode_set("sup", 2, include_zero=True)
    for i in range(ms.size):
        n = tuple(int(x) for x in ms.labels[i])
        assert ms.index_of(n) == i
        j = ms.neg_index[i]
        assert tuple(ms.labels[j]) == tuple(-x for x in ms.labels[i])
    assert ms.index_of((9, 9, 9)) == -1


def test_negation_closure_enforced():
    lab = np.array([[1, 0, 0], [0, 1, 0]])  # missing the negatives
    with pytest.raises(ValueError):
        ModeSet(lab)


def test_duplicate_labels_rejected():
    lab = np.array([[1, 0, 0], [1, 0, 0], [-1, 0, 0]])
    with pytest.raises(ValueError):
        ModeSet(lab)


def test_drop_zero():
    ms = build_mode_set("sup", 1, include_zero=True)
    nz = ms.drop_zero()
    assert nz.size == ms.size - 1
    assert nz.zero_index is None
    assert np.all(nz.p_squared > 0)


def test_momenta_scale():
    ms = build_mode_set("sup", 1, include_zero=False)
    assert np.allclose(ms.momenta, TWO_PI * ms.labels)
    assert np.allclose(ms.p_squared, np.sum(ms.momenta**2, axis=1))
    assert np.allclose(ms.p_norm, np.sqrt(ms.p_squared))


@given(st.integers(min_value=1, max_value=4))
def test_neg_index_is_involution(m):
    ms = build_mode_set("sup", m, include_zero=True)
    assert np.array_equal(ms.neg_index[ms.neg_index], np.arange(ms.size))


@given(st.floats(min_value=1.0, max_value=4.5))
def test_euclidean_subset_of_sup(radius):
    eu = build_mode_set("euclidean", TWO_PI * radius, include_zero=False)
    sup = build_mode_set("sup", int(np.ceil(radius)), include_zero=False)
    for row in eu.labels:
        assert sup.index_of(tuple(int(x) for x in row)) >= 0
