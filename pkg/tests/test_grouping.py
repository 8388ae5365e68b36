import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seglab.errors import (
    EndpointMismatch,
    IndexOutOfRange,
    NegativeEntry,
    NonMonotoneBreakpoints,
    NonzeroIntraGroup,
    NotSymmetric,
    ShapeMismatch,
    ZeroCrossGroup,
)
from seglab.grouping import (
    PairKind,
    classify_pair,
    default_coupling,
    make_decomposition,
    validate_coupling,
)


@st.composite
def decompositions(draw, max_d=7):
    d = draw(st.integers(1, max_d))
    inner = draw(st.sets(st.integers(1, d - 1), max_size=d - 1)) if d > 1 else set()
    return make_decomposition(d, [0, *sorted(inner), d])


@pytest.mark.parametrize("d, bps, groups, k1, k2", [
    (3, [0, 1, 3], [(1,), (2, 3)], {(2, 3), (3, 2)},
     {(1, 2), (2, 1), (1, 3), (3, 1)}),
    (2, [0, 1, 2], [(1,), (2,)], set(), {(1, 2), (2, 1)}),
])
def test_index_sets(d, bps, groups, k1, k2):
    dec = make_decomposition(d, bps)
    assert dec.groups == groups
    assert dec.k1 == k1
    assert dec.k2 == k2


def test_four_components_two_groups():
    dec = make_decomposition(4, [0, 2, 4])
    assert dec.groups == [(1, 2), (3, 4)]
    assert (1, 2) in dec.k1
    assert (2, 3) in dec.k2


@pytest.mark.parametrize("d, bps, err", [
    (3, [0, 2, 1, 3], NonMonotoneBreakpoints),
    (3, [0, 1, 1, 3], NonMonotoneBreakpoints),
    (3, [0, 1, 2], EndpointMismatch),
    (3, [1, 3], EndpointMismatch),
    (0, [0, 0], EndpointMismatch),
])
def test_bad_breakpoints(d, bps, err):
    with pytest.raises(err):
        make_decomposition(d, bps)


@pytest.mark.parametrize("i, j, kind", [
    (2, 3, PairKind.SAME_GROUP),
    (1, 3, PairKind.CROSS_GROUP),
    (2, 2, PairKind.DIAGONAL),
])
def test_classify_pair(i, j, kind):
    assert classify_pair(make_decomposition(3, [0, 1, 3]), i, j) is kind


@pytest.mark.parametrize("i, j", [(0, 1), (1, 4), (-1, 2)])
def test_classify_pair_out_of_range(i, j):
    with pytest.raises(IndexOutOfRange):
        classify_pair(make_decomposition(3, [0, 1, 3]), i, j)


def test_group_members_are_one_based():
    dec = make_decomposition(3, [0, 1, 3])
    assert dec.group(2) == (2, 3)
    assert dec.group_of(1) == 1
    with pytest.raises(IndexOutOfRange):
        dec.group(3)


BLOCK = [[0, 1, 1], [1, 0, 0], [1, 0, 0]]


def test_block_matrix_accepted():
    A = validate_coupling(make_decomposition(3, [0, 1, 3]), BLOCK)
    assert A[1, 2] == 1.0
    assert A[2, 3] == 0.0


@pytest.mark.parametrize("edit, err", [
    ({(1, 2): 0.5, (2, 1): 0.5}, NonzeroIntraGroup),
    ({(0, 1): 1.0, (1, 0): 2.0}, NotSymmetric),
    ({(0, 1): 0.0, (1, 0): 0.0}, ZeroCrossGroup),
    ({(0, 2): -1.0, (2, 0): -1.0}, NegativeEntry),
    ({(0, 0): 1.0}, NonzeroIntraGroup),
])
def test_coupling_rejections(edit, err):
    a = np.array(BLOCK, dtype=float)
    for (i, j), v in edit.items():
        a[i, j] = v
    with pytest.raises(err):
        validate_coupling(make_decomposition(3, [0, 1, 3]), a)


def test_coupling_shape():
    with pytest.raises(ShapeMismatch):
        validate_coupling(make_decomposition(3, [0, 1, 3]), np.zeros((2, 2)))


@given(decompositions())
def test_pair_kinds_partition(dec):
    counts = {k: 0 for k in PairKind}
    for i in range(1, dec.d + 1):
        for j in range(1, dec.d + 1):
            counts[classify_pair(dec, i, j)] += 1
            if i != j:
                assert classify_pair(dec, i, j) is classify_pair(dec, j, i)
    assert counts[PairKind.DIAGONAL] == dec.d
    assert counts[PairKind.SAME_GROUP] == len(dec.k1)
    assert counts[PairKind.CROSS_GROUP] == len(dec.k2)
    assert len(dec.k1) + len(dec.k2) + dec.d == dec.d ** 2


@given(decompositions(), st.data())
def test_validate_iff_support_is_k2(dec, data):
    d = dec.d
    upper = data.draw(st.lists(st.sampled_from([0.0, 0.5, 2.0]),
                               min_size=d * d, max_size=d * d))
    a = np.triu(np.array(upper).reshape(d, d), 1)
    a = a + a.T
    support = {(i + 1, j + 1) for i, j in zip(*np.nonzero(a))}
    try:
        validate_coupling(dec, a)
        accepted = True
    except (NonzeroIntraGroup, ZeroCrossGroup):
        accepted = False
    assert accepted == (support == set(dec.k2))


@given(decompositions(), st.floats(0.1, 10.0))
def test_default_coupling_is_valid(dec, value):
    if dec.m < 2:
        return
    A = default_coupling(dec, value)
    assert np.array_equal(A.entries != 0, dec.cross_group_mask())
