import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subwigner.errors import NoClosedFormError, ParameterError
from subwigner.indexing import (
    Arithmetic,
    BlockSwap,
    Explicit,
    GoodFamily,
    Identity,
    alpha_estimate,
    alpha_limit,
    overlap_count,
    four_sheet_family,
    prefix,
    sequence_from_dict,
    sequence_to_dict,
)


def piecewise_block_swap(n, L):
    # a_n = n + L on the first block, n - L on the second, n afterwards
    if n <= L:
        return n + L
    if n <= 2 * L:
        return n - L
    return n


# -- prefixes ---------------------------------------------------------------------


def test_prefix_examples():
    assert prefix(Identity(), 4).tolist() == [1, 2, 3, 4]
    assert prefix(Arithmetic(2, 0), 3).tolist() == [2, 4, 6]
    assert prefix(BlockSwap(3), 4).tolist() == [4, 5, 6, 1]
    assert prefix(Arithmetic(2, 1), 3).tolist() == [3, 5, 7]
    assert prefix(Identity(), 0).size == 0


def test_block_swap_matches_piecewise_definition():
    for L in (1, 2, 5, 17):
        assert prefix(BlockSwap(L), 4 * L).tolist() == [piecewise_block_swap(n, L) for n in range(1, 4 * L + 1)]


def test_prefix_rejects_negative_length():
    with pytest.raises(ParameterError):
        prefix(Identity(), -1)


def test_explicit_extension_and_injectivity():
    seq = Explicit((5, 2, 9))
    assert prefix(seq, 7).tolist() == [5, 2, 9, 1, 3, 4, 6]
    assert prefix(seq, 2).tolist() == [5, 2]
    with pytest.raises(ParameterError, match=r"\[2\]"):
        Explicit((2, 3, 2))
    with pytest.raises(ParameterError):
        Explicit((0, 1))


@pytest.mark.parametrize(
    "seq", [Identity(), Arithmetic(3, 2), BlockSwap(7), Explicit((10, 4, 7, 1))]
)
def test_sequences_injective_and_positive(seq):
    vals = prefix(seq, 500)
    assert np.unique(vals).size == vals.size
    assert vals.min() >= 1


def test_invalid_parameters():
    with pytest.raises(ParameterError):
        Arithmetic(0, 1)
    with pytest.raises(ParameterError):
        Arithmetic(2, -1)
    with pytest.raises(ParameterError):
        BlockSwap(0)
    with pytest.raises(ParameterError):
        sequence_from_dict({"kind": "Fibonacci"})


def test_sequence_round_trip():
    for seq in (Identity(), Arithmetic(2, 1), BlockSwap(4), Explicit((3, 1))):
        assert sequence_from_dict(sequence_to_dict(seq)) == seq
    assert sequence_from_dict({"kind": "BlockSwap"}, L=12) == BlockSwap(12)


# -- overlaps -------------------------------------------------------------------


def test_overlap_examples():
    assert overlap_count(Identity(), 10, Identity(), 7) == 7
    assert overlap_count(Identity(), 10, Arithmetic(2, 0), 10) == 5
    assert overlap_count(Arithmetic(2, 0), 5, Arithmetic(2, 1), 5) == 0


seq_strategy = st.sampled_from(
    [Identity(), Arithmetic(2, 0), Arithmetic(2, 1), Arithmetic(3, 1), BlockSwap(10), Explicit((7, 3, 12))]
)


@settings(max_examples=100)
@given(seq_strategy, seq_strategy, st.integers(0, 60), st.integers(0, 60), st.integers(0, 5))
def test_overlap_symmetric_and_monotone(a, b, m, n, extra):
    base = overlap_count(a, m, b, n)
    brute = len(set(prefix(a, m).tolist()) & set(prefix(b, n).tolist()))
    assert base == brute
    assert overlap_count(b, n, a, m) == base
    assert overlap_count(a, m + extra, b, n) >= base
    assert overlap_count(a, m, b, n + extra) >= base
    assert base <= min(m, n)


# -- overlap profile ---------------------------------------------------------------


@settings(max_examples=100)
@given(st.floats(0.01, 5), st.floats(0.01, 5))
def test_alpha_examples(x, y):
    assert alpha_limit(Identity(), x, Identity(), y) == pytest.approx(min(x, y))
    assert alpha_limit(Identity(), x, Arithmetic(2, 0), y) == pytest.approx(min(x / 2, y))
    assert alpha_limit(Arithmetic(2, 0), x, Arithmetic(2, 1), y) == 0


def test_alpha_estimate_examples():
    assert alpha_estimate(Identity(), Identity(), 1, 0.5, [10, 100, 1000]) == [Fraction(1, 2)] * 3
    assert alpha_estimate(Identity(), Arithmetic(2, 0), 1, 1, [1000]) == [Fraction(1, 2)]
    assert alpha_estimate(Identity(), BlockSwap(1), 0.5, 0.5, [1000]) == [0]
    assert overlap_count(Identity(), 500, BlockSwap(1000), 500) == 0


def test_alpha_estimate_needs_increasing_grid():
    with pytest.raises(ParameterError):
        alpha_estimate(Identity(), Identity(), 1, 1, [100, 100])


def test_explicit_has_no_closed_form():
    with pytest.raises(NoClosedFormError):
        alpha_limit(Explicit((1, 2)), 1, Identity(), 1)


def test_alpha_rejects_nonpositive():
    with pytest.raises(ParameterError):
        alpha_limit(Identity(), 0, Identity(), 1)


GRID = [0.25, 0.5, 1, 2]
FAMILY_SEQS = [Identity(), Arithmetic(2, 0), Arithmetic(2, 1), BlockSwap(1), Arithmetic(3, 2)]


def test_alpha_estimate_converges_at_rate_one_over_L():
    for a, b in itertools.product(FAMILY_SEQS, repeat=2):
        for x, y in itertools.product(GRID, repeat=2):
            limit = alpha_limit(a, x, b, y)
            grid = [100, 1000, 10000]
            for L, est in zip(grid, alpha_estimate(a, b, x, y, grid)):
                assert abs(float(est) - limit) * L <= 2, (a, b, x, y, L)


def test_alpha_bounds_symmetry_and_monotonicity():
    for a, b in itertools.product(FAMILY_SEQS, repeat=2):
        for x, y in itertools.product(GRID, repeat=2):
            v = alpha_limit(a, x, b, y)
            assert 0 <= v <= min(x, y) + 1e-15
            assert v == pytest.approx(alpha_limit(b, y, a, x), abs=1e-15)
            for x2 in GRID:
                if x2 > x:
                    assert alpha_limit(a, x2, b, y) >= v - 1e-15
        for x in GRID:
            if type(a) is type(b) and a == b:
                assert alpha_limit(a, x, a, x) == pytest.approx(x)


def test_four_sheet_family_alpha():
    fam = four_sheet_family(100)
    assert fam.alpha("1", 1, "1", 0.5) == 0.5
    assert fam.alpha("2", 1, "3", 1) == 0
    assert fam.alpha("1", 1, "4", 1) == 0
    assert fam.alpha("1", 2, "4", 1) == pytest.approx(1)
    assert fam.alpha("4", 1.5, "1", 1) == pytest.approx(0.5)
    assert fam.alpha("2", 2, "4", 2) == pytest.approx(1)
    assert fam.labels() == ["1", "2", "3", "4"]


def test_family_rejects_mismatched_block_swap():
    with pytest.raises(ParameterError):
        GoodFamily({"a": BlockSwap(10)}, L=20)
    fam = GoodFamily.from_dict({"a": {"kind": "BlockSwap"}, "b": {"kind": "Identity"}}, L=20)
    assert fam["a"] == BlockSwap(20)
    assert GoodFamily.from_dict(fam.to_dict(), L=20).sequences == fam.sequences
    with pytest.raises(ParameterError):
        fam["zzz"]
