"""Dense submatrices X(B) from keyed entries and their trace statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensembles import pair_codes, sample_entries
from .errors import NumericalContractError, ParameterError

__all__ = [
    "RealizedSubmatrix",
    "TraceStatistic",
    "realize",
    "realize_batch",
    "trace_power",
    "trace_chebyshev",
    "batch_power_traces",
    "batch_chebyshev_traces",
    "centered_statistic",
    "height_moment_from_traces",
    "HERMITIAN_RESIDUE_RTOL",
]

HERMITIAN_RESIDUE_RTOL = 1e-10


@dataclass
class RealizedSubmatrix:
    indices: np.ndarray
    data: np.ndarray
    seed: int
    replicate: int
    spec: object

    @property
    def size(self):
        return self.indices.size


@dataclass(frozen=True)
class TraceStatistic:
    value: float
    power: int
    label: str
    normalization: float
    centered: bool = True


def _check_indices(B):
    B = np.asarray(B, dtype=np.int64).reshape(-1)
    if B.size == 0:
        raise ParameterError("index set must be nonempty")
    if np.unique(B).size != B.size:
        vals, counts = np.unique(B, return_counts=True)
        raise ParameterError(f"duplicate indices in B: {vals[counts > 1].tolist()}")
    return B


def realize_batch(spec, seed, replicates, B):
    """Stack of ``X(B)`` for several replicates, shape ``(R, |B|, |B|)``.

    Only the upper triangle (in sorted global order) is drawn; the rest is
    filled by (conjugate) symmetry so both halves are bitwise consistent.
    """
    B = _check_indices(B)
    replicates = np.asarray(replicates, dtype=np.uint64).reshape(-1)
    n = B.size
    iu, ju = np.triu_indices(n, k=1)
    diag_vals = sample_entries(spec.diag, seed, replicates, pair_codes(B, B))
    off_vals = sample_entries(spec.offdiag, seed, replicates, pair_codes(B[iu], B[ju]))
    dtype = np.complex128 if spec.offdiag.is_complex else np.float64
    out = np.zeros((replicates.size, n, n), dtype=dtype)
    ar = np.arange(n)
    out[:, ar, ar] = diag_vals
    if spec.offdiag.is_complex:
        # Stored draw belongs to (min, max) of the global indices.
        forward = B[iu] < B[ju]
        upper = np.where(forward, off_vals, np.conj(off_vals))
        out[:, iu, ju] = upper
        out[:, ju, iu] = np.conj(upper)
    else:
        out[:, iu, ju] = off_vals
        out[:, ju, iu] = off_vals
    return out


def realize(spec, seed, replicate, B):
    """Dense ``X(B)`` for one replicate; rows and columns follow the order of ``B``."""
    B = _check_indices(B)
    data = realize_batch(spec, seed, [replicate], B)[0]
    return RealizedSubmatrix(B, data, seed, replicate, spec)


def _as_sorted(M):
    if isinstance(M, RealizedSubmatrix):
        order = np.argsort(M.indices, kind="stable")
        return M.data[np.ix_(order, order)]
    return np.asarray(M)


def _matrix_power(A, m):
    if m == 0:
        eye = np.zeros_like(A)
        idx = np.arange(A.shape[-1])
        eye[..., idx, idx] = 1
        return eye
    P = A
    for _ in range(m - 1):
        P = P @ A
    return P


def _fsum_rows(rows):
    return np.array([math.fsum(r) for r in rows])


def _reduce_trace(terms):
    """Real trace from per-item terms ``(R, n)`` or ``(R, n, n)``.

    The innermost axis is summed pairwise, the remaining ``n`` partial sums
    with compensated summation.  Complex input is checked for a Hermitian
    imaginary residue.
    """
    if terms.ndim == 3:
        scale = np.abs(terms).sum(axis=(1, 2))
        terms = terms.sum(axis=2)
    else:
        scale = np.abs(terms).sum(axis=1)
    if not np.iscomplexobj(terms):
        return _fsum_rows(terms)
    real = _fsum_rows(terms.real)
    imag = _fsum_rows(terms.imag)
    floor = np.finfo(float).tiny
    ratio = np.abs(imag) / np.maximum(scale, floor)
    if np.any(ratio > HERMITIAN_RESIDUE_RTOL):
        worst = int(np.argmax(ratio))
        raise NumericalContractError(
            f"imaginary trace residue {imag[worst]:.3e} exceeds "
            f"{HERMITIAN_RESIDUE_RTOL:g} x {scale[worst]:.3e}; entry symmetry is broken"
        )
    return real


def _pair_trace(P, Q):
    """``Tr(P Q) = sum_ab P[a, b] Q[b, a]`` per batch item."""
    return _reduce_trace(P * np.swapaxes(Q, -1, -2))


def _diag_trace(A):
    idx = np.arange(A.shape[-1])
    return _reduce_trace(A[:, idx, idx])


def batch_power_traces(X, powers):
    """``{k: Tr(X^k)}`` for a stack ``X`` of shape ``(R, n, n)``.

    Powers ``X^j`` are accumulated by dense multiplication; the trace of
    ``X^k`` is read as ``Tr(X^ceil(k/2) X^floor(k/2))``.
    """
    X = np.ascontiguousarray(X)
    powers = sorted(set(int(k) for k in powers))
    if powers and powers[0] < 1:
        raise ParameterError("trace powers must be >= 1")
    if not powers:
        return {}
    top = (powers[-1] + 1) // 2
    cache = {1: X}
    for j in range(2, top + 1):
        cache[j] = cache[j - 1] @ X
    out = {}
    for k in powers:
        if k == 1:
            out[1] = _diag_trace(X)
            continue
        out[k] = _pair_trace(cache[(k + 1) // 2], cache[k // 2])
    return out


def trace_power(M, k):
    """``Tr(M^k)`` for a realized submatrix or a Hermitian array."""
    if k < 1:
        raise ParameterError(f"power must be >= 1, got {k}")
    A = _as_sorted(M)
    return float(batch_power_traces(A[None], [k])[k][0])


def batch_chebyshev_traces(X, degrees, a):
    """``{n: Tr T_n(X / a)}`` for a stack ``X``; ``a`` may vary per batch item.

    ``T_m(Y)`` follows the three-term recurrence up to ``ceil(n/2)``; the trace
    is read through ``T_n = 2 T_ceil T_floor - T_(n mod 2)``.
    """
    X = np.ascontiguousarray(X)
    a = np.broadcast_to(np.asarray(a, dtype=float), (X.shape[0],))
    if np.any(a <= 0):
        raise ParameterError("Chebyshev scale must be > 0")
    degrees = sorted(set(int(n) for n in degrees))
    if degrees and degrees[0] < 0:
        raise ParameterError("Chebyshev degree must be >= 0")
    size = X.shape[-1]
    out = {}
    if not degrees:
        return out
    Y = X / a[:, None, None]
    top = max(1, (degrees[-1] + 1) // 2)
    T = [_matrix_power(Y, 0), Y]
    for m in range(2, top + 1):
        T.append(2.0 * (Y @ T[m - 1]) - T[m - 2])
    for n in degrees:
        if n == 0:
            out[0] = np.full(X.shape[0], float(size))
        elif n == 1:
            out[1] = _diag_trace(Y)
        else:
            pair = 2.0 * _pair_trace(T[(n + 1) // 2], T[n // 2])
            out[n] = pair - (size if n % 2 == 0 else _diag_trace(Y))
    return out


def trace_chebyshev(M, n, a):
    """``Tr T_n(M / a)``."""
    if n < 0:
        raise ParameterError(f"degree must be >= 0, got {n}")
    if not a > 0:
        raise ParameterError(f"scale must be > 0, got {a}")
    A = _as_sorted(M)
    return float(batch_chebyshev_traces(A[None], [n], a)[n][0])


def centered_statistic(traces, L, k):
    """``L^{-k/2} (Tr - mean Tr)`` per replicate; the mean is the sample mean."""
    traces = np.asarray(traces, dtype=float)
    if traces.size < 2:
        raise ParameterError("centering needs at least two replicates")
    return (traces - traces.mean()) * float(L) ** (-k / 2.0)


def height_moment_from_traces(traces, L, k, beta):
    """Height-function moment ``M_{i,y,k}`` from traces of ``X^{k+1}`` on the prefix."""
    traces = np.asarray(traces, dtype=float)
    centered = traces - traces.mean()
    return float(L) ** (-(k + 1) / 2.0) * math.sqrt(beta * math.pi / 2.0) / (k + 1) * centered
