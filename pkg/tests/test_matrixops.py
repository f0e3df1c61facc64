import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subwigner import ensembles as E
from subwigner.ensembles import EntryKey, entry
from subwigner.errors import NumericalContractError, ParameterError
from subwigner.matrixops import (
    batch_chebyshev_traces,
    batch_power_traces,
    centered_statistic,
    height_moment_from_traces,
    realize,
    realize_batch,
    trace_chebyshev,
    trace_power,
)

SPECS = [E.goe(), E.gue()]


def recurrence_trace(A, n, a):
    """Tr T_n(A/a) by the plain three-term matrix recurrence."""
    Y = A / a
    prev, cur = np.eye(A.shape[0]), Y
    if n == 0:
        return float(np.trace(prev).real)
    for _ in range(n - 1):
        prev, cur = cur, 2 * Y @ cur - prev
    return float(np.trace(cur).real)


# -- realize -------------------------------------------------------------------------


@pytest.mark.parametrize("spec", SPECS)
def test_realize_entries_match_keyed_entries(spec):
    B = [9, 2, 14, 5]
    M = realize(spec, 11, 4, B)
    for a, i in enumerate(B):
        for b, j in enumerate(B):
            assert M.data[a, b] == entry(spec, EntryKey(11, 4, i, j))
    assert np.array_equal(M.data, M.data.conj().T)


def test_realize_examples():
    spec = E.goe()
    one = realize(spec, 0, 0, [3])
    assert one.data.shape == (1, 1)
    assert one.data[0, 0] == entry(spec, EntryKey(0, 0, 3, 3))
    a = realize(spec, 0, 0, [1, 2])
    b = realize(spec, 0, 0, [2, 5])
    assert a.data[1, 1] == b.data[0, 0]
    h = realize(E.gue(), 0, 0, [1, 2, 3]).data
    assert h[0, 1] == np.conj(h[1, 0]) and h[0, 1].imag != 0


def test_realize_rejects_duplicates_and_empty():
    with pytest.raises(ParameterError, match=r"\[4\]"):
        realize(E.goe(), 0, 0, [1, 4, 4])
    with pytest.raises(ParameterError):
        realize(E.goe(), 0, 0, [])


@pytest.mark.parametrize("spec", SPECS)
def test_principal_submatrix_consistency(spec):
    big = np.arange(1, 41)
    small = np.array([3, 7, 8, 20, 33])
    X2 = realize(spec, 5, 2, big).data
    X1 = realize(spec, 5, 2, small).data
    assert np.array_equal(X2[np.ix_(small - 1, small - 1)], X1)


def test_batch_matches_single_replicates():
    B = [4, 1, 8]
    stack = realize_batch(E.gue(), 3, [0, 5, 9], B)
    for r, rep in enumerate([0, 5, 9]):
        assert np.array_equal(stack[r], realize(E.gue(), 3, rep, B).data)


# -- trace powers ----------------------------------------------------------------------


def test_trace_power_examples():
    M = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert trace_power(M, 2) == 2
    assert trace_power(M, 3) == 0
    R = realize(E.goe(), 1, 1, [1, 2, 3, 4])
    assert trace_power(R, 1) == math.fsum(np.diag(R.data))
    with pytest.raises(ParameterError):
        trace_power(M, 0)


@pytest.mark.parametrize("spec", SPECS)
def test_trace_square_equals_sum_of_squared_moduli(spec):
    R = realize(spec, 2, 0, np.arange(1, 61))
    direct = math.fsum((np.abs(R.data) ** 2).ravel())
    assert trace_power(R, 2) == pytest.approx(direct, rel=1e-12)


@pytest.mark.parametrize("spec", SPECS)
def test_trace_power_matches_eigenvalues(spec):
    R = realize(spec, 8, 3, np.arange(1, 31))
    lam = np.linalg.eigvalsh(R.data)
    for k in range(1, 8):
        assert trace_power(R, k) == pytest.approx(np.sum(lam**k), rel=1e-10, abs=1e-9 * 30 ** (k / 2))


@pytest.mark.parametrize("spec", SPECS)
def test_permuted_index_list_is_exact(spec):
    B = np.arange(1, 26)
    perm = np.random.default_rng(1).permutation(B)
    for k in (1, 2, 3, 4, 5):
        assert trace_power(realize(spec, 4, 0, perm), k) == trace_power(realize(spec, 4, 0, B), k)


def test_batch_power_traces_all_powers_together():
    X = realize_batch(E.goe(), 0, range(4), np.arange(1, 21))
    both = batch_power_traces(X, [1, 2, 3, 4, 5, 6])
    for k in range(1, 7):
        alone = batch_power_traces(X, [k])[k]
        assert np.array_equal(both[k], alone)


def test_hermitian_residue_violation_raises():
    A = np.array([[1.0, 2.0 + 1.0j], [2.0 + 1.0j, -1.0]])  # symmetric, not Hermitian
    with pytest.raises(NumericalContractError):
        trace_power(A, 2)
    with pytest.raises(NumericalContractError):
        trace_power(np.diag([1.0 + 1.0j, 2.0]), 1)


# -- Chebyshev traces ------------------------------------------------------------------


def test_chebyshev_examples():
    R = realize(E.goe(), 6, 0, [2, 3, 7])
    assert trace_chebyshev(R, 0, 2.0) == 3
    assert trace_chebyshev(R, 1, 2.0) == pytest.approx(trace_power(R, 1) / 2.0, rel=1e-15)
    assert trace_chebyshev(np.diag([1.0, -1.0]), 2, 1.0) == 2
    with pytest.raises(ParameterError):
        trace_chebyshev(R, 2, 0.0)
    with pytest.raises(ParameterError):
        trace_chebyshev(R, -1, 1.0)


@pytest.mark.parametrize("spec", SPECS)
def test_chebyshev_matches_power_expansion(spec):
    R = realize(spec, 9, 1, np.arange(1, 41))
    a = 2 * math.sqrt(40)
    n = 40
    t2 = (2 / a**2) * trace_power(R, 2) - n
    assert trace_chebyshev(R, 2, a) == pytest.approx(t2, rel=1e-10)
    # T_4(x) = 8x^4 - 8x^2 + 1
    t4 = 8 * trace_power(R, 4) / a**4 - 8 * trace_power(R, 2) / a**2 + n
    assert trace_chebyshev(R, 4, a) == pytest.approx(t4, rel=1e-10)
    # T_3(x) = 4x^3 - 3x
    t3 = 4 * trace_power(R, 3) / a**3 - 3 * trace_power(R, 1) / a
    assert trace_chebyshev(R, 3, a) == pytest.approx(t3, rel=1e-10, abs=1e-10 * n)


@pytest.mark.parametrize("spec", SPECS)
def test_chebyshev_matches_plain_recurrence(spec):
    R = realize(spec, 9, 2, np.arange(1, 31))
    for a in (2 * math.sqrt(30), 3.0):
        for n in range(0, 9):
            ref = recurrence_trace(R.data, n, a)
            assert trace_chebyshev(R, n, a) == pytest.approx(ref, rel=1e-10, abs=1e-10 * 30)


def test_chebyshev_per_item_scale():
    X = realize_batch(E.goe(), 1, range(3), np.arange(1, 11))
    scales = np.array([1.0, 2.0, 3.0])
    out = batch_chebyshev_traces(X, [3], scales)[3]
    for r in range(3):
        assert out[r] == pytest.approx(recurrence_trace(X[r], 3, scales[r]), rel=1e-12, abs=1e-12)


# -- statistics ---------------------------------------------------------------------


def test_centered_statistic_examples():
    assert np.all(centered_statistic([3.0, 3.0, 3.0], 10, 2) == 0)
    t1, t2 = 5.0, 2.0
    out = centered_statistic([t1, t2], 16, 2)
    assert out == pytest.approx([(t1 - t2) / 2 / 16, -(t1 - t2) / 2 / 16])
    with pytest.raises(ParameterError):
        centered_statistic([1.0], 10, 1)


@settings(max_examples=50)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=20), st.integers(1, 500), st.integers(1, 6))
def test_centered_statistic_has_zero_mean(traces, L, k):
    out = centered_statistic(traces, L, k)
    assert abs(out.mean()) <= 1e-9 * (1 + max(abs(t) for t in traces))


def test_height_moment_examples():
    traces = np.array([1.0, 4.0, -2.0])
    L = 25
    out = height_moment_from_traces(traces, L, 0, 1)
    assert out == pytest.approx(math.sqrt(math.pi / 2) * L**-0.5 * (traces - traces.mean()))
    assert np.all(height_moment_from_traces(np.zeros(4), L, 3, 2) == 0)


def test_height_moment_variance_identity():
    # Var M_{i,1,0} = (pi/2) * Var(L^{-1/2} Tr X); exact algebra on any sample.
    rng = np.random.default_rng(0)
    traces = rng.normal(size=1000) * 7
    L = 49
    m = height_moment_from_traces(traces, L, 0, 1)
    plain = centered_statistic(traces, L, 1)
    assert np.var(m) == pytest.approx(math.pi / 2 * np.var(plain), rel=1e-12)
