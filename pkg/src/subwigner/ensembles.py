"""Moment-matched entry laws and stateless keyed generation of Wigner entries.

Every entry of the (conceptually infinite) Wigner matrix is a pure function
of ``(seed, replicate, min(i, j), max(i, j))``.  Any submatrix of any size can
therefore be realized independently and overlapping submatrices agree on
their shared entries without storing the matrix.

Key mixing
----------
Uniform bits come from the 64-bit MurmurHash3 finalizer (``fmix64``) applied
in a fixed chain::

    k_seed   = fmix64(seed ^ SEED_SALT)
    k_rep    = fmix64(k_seed + (replicate + 1) * GOLDEN)
    k_stream = fmix64(k_rep ^ (stream + 1) * STREAM_MUL)
    bits     = fmix64(fmix64(k_stream ^ code * CODE_MUL) + CODE_ADD)

where ``code = j (j - 1) / 2 + i`` is the triangular index of the canonical
pair ``i <= j`` (1-based).  The top 53 bits give ``u = (bits >> 11 + 1/2) / 2**53``
in the open unit interval.  Stream 0 drives the value (or the real part /
radius), stream 1 the imaginary part or phase.  These constants are part of
the reproducibility contract and must not change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numba as nb
import numpy as np
from scipy.special import ndtri

from .errors import ParameterError

__all__ = [
    "GaussianReal",
    "ThreePointReal",
    "RademacherScaled",
    "GaussianComplex",
    "UniformPhaseRadial",
    "EntryDistribution",
    "EnsembleSpec",
    "EntryKey",
    "ValidationReport",
    "analytic_moments",
    "validate_ensemble",
    "entry",
    "keyed_uniforms",
    "pair_codes",
    "goe",
    "gue",
    "distribution_from_dict",
    "distribution_to_dict",
]

SEED_SALT = 0x243F6A8885A308D3
GOLDEN = 0x9E3779B97F4A7C15
STREAM_MUL = 0xBF58476D1CE4E5B9
CODE_MUL = 0xD1B54A32D192ED03
CODE_ADD = 0x632BE59BD9B4E019
_MASK64 = (1 << 64) - 1
# Triangular codes must fit in 63 bits.
MAX_INDEX = 2**31


# --------------------------------------------------------------------------
# entry laws


@dataclass(frozen=True)
class GaussianReal:
    variance: float
    is_complex = False

    def check(self):
        if not self.variance > 0:
            raise ParameterError(f"GaussianReal variance must be > 0, got {self.variance}")

    def moments(self):
        v = self.variance
        return 0.0, v, 3.0 * v * v

    def sample(self, u0, u1):
        return math.sqrt(self.variance) * ndtri(u0)


@dataclass(frozen=True)
class ThreePointReal:
    """``+a`` and ``-a`` with probability ``p`` each, ``0`` otherwise."""

    a: float
    p: float
    is_complex = False

    def check(self):
        if not self.a > 0:
            raise ParameterError(f"ThreePointReal atom must be > 0, got {self.a}")
        if not 0.0 <= self.p <= 0.5:
            raise ParameterError(f"ThreePointReal weight must lie in [0, 1/2], got {self.p}")

    def moments(self):
        a2 = self.a * self.a
        return 0.0, 2.0 * self.p * a2, 2.0 * self.p * a2 * a2

    def sample(self, u0, u1):
        a, p = self.a, self.p
        return np.where(u0 < p, a, np.where(u0 < 2.0 * p, -a, 0.0))


@dataclass(frozen=True)
class RademacherScaled:
    scale: float
    is_complex = False

    def check(self):
        if not self.scale > 0:
            raise ParameterError(f"RademacherScaled scale must be > 0, got {self.scale}")

    def moments(self):
        s2 = self.scale * self.scale
        return 0.0, s2, s2 * s2

    def sample(self, u0, u1):
        return np.where(u0 < 0.5, self.scale, -self.scale)


@dataclass(frozen=True)
class GaussianComplex:
    """Independent real and imaginary parts, each ``N(0, variance)``."""

    variance: float
    is_complex = True

    def check(self):
        if not self.variance > 0:
            raise ParameterError(f"GaussianComplex variance must be > 0, got {self.variance}")

    def moments(self):
        # |Z|^2 = v * chi2_2, so E|Z|^2 = 2v and E|Z|^4 = 8v^2.
        v = self.variance
        return 0.0, 2.0 * v, 8.0 * v * v

    def sample(self, u0, u1):
        s = math.sqrt(self.variance)
        return s * ndtri(u0) + 1j * (s * ndtri(u1))


@dataclass(frozen=True)
class UniformPhaseRadial:
    """``a * exp(i theta)`` with probability ``p``, else ``0``; theta uniform."""

    a: float
    p: float
    is_complex = True

    def check(self):
        if not self.a > 0:
            raise ParameterError(f"UniformPhaseRadial radius must be > 0, got {self.a}")
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"UniformPhaseRadial weight must lie in [0, 1], got {self.p}")

    def moments(self):
        a2 = self.a * self.a
        return 0.0, self.p * a2, self.p * a2 * a2

    def sample(self, u0, u1):
        radius = np.where(u0 < self.p, self.a, 0.0)
        return radius * np.exp(2j * np.pi * u1)


EntryDistribution = Union[
    GaussianReal, ThreePointReal, RademacherScaled, GaussianComplex, UniformPhaseRadial
]

_KINDS = {
    cls.__name__: cls
    for cls in (GaussianReal, ThreePointReal, RademacherScaled, GaussianComplex, UniformPhaseRadial)
}


def distribution_from_dict(data):
    data = dict(data)
    kind = data.pop("kind", None)
    if kind not in _KINDS:
        raise ParameterError(f"unknown distribution kind {kind!r}; expected one of {sorted(_KINDS)}")
    try:
        dist = _KINDS[kind](**{k: float(v) for k, v in data.items()})
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {kind}: {exc}") from None
    dist.check()
    return dist


def distribution_to_dict(dist):
    out = {"kind": type(dist).__name__}
    out.update({k: v for k, v in dist.__dict__.items()})
    return out


def analytic_moments(dist):
    """Exact ``(mean, second moment, fourth moment)`` of an entry law.

    For complex laws the moments are of ``|Z|``.
    """
    dist.check()
    return dist.moments()


# --------------------------------------------------------------------------
# ensembles


@dataclass(frozen=True)
class EnsembleSpec:
    beta: int
    offdiag: EntryDistribution
    diag: EntryDistribution

    def to_dict(self):
        return {
            "beta": self.beta,
            "offdiag": distribution_to_dict(self.offdiag),
            "diag": distribution_to_dict(self.diag),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            beta=int(data["beta"]),
            offdiag=distribution_from_dict(data["offdiag"]),
            diag=distribution_from_dict(data["diag"]),
        )


def goe():
    return EnsembleSpec(1, GaussianReal(1.0), GaussianReal(2.0))


def gue():
    return EnsembleSpec(2, GaussianComplex(0.5), GaussianReal(1.0))


@dataclass
class ValidationReport:
    passed: bool
    violations: list = field(default_factory=list)
    moments: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed


# Matching is closed-form; the tolerance only absorbs the rounding of
# irrational parameters such as sqrt(3) written as doubles.
_MOMENT_RTOL = 1e-12


def _close(a, b):
    return abs(a - b) <= _MOMENT_RTOL * max(1.0, abs(b))


def validate_ensemble(spec):
    """Check the beta-dependent moment constraints on both entry laws."""
    violations = []
    if spec.beta not in (1, 2):
        return ValidationReport(False, [f"beta must be 1 or 2, got {spec.beta}"])
    for name, dist in (("offdiag", spec.offdiag), ("diag", spec.diag)):
        try:
            dist.check()
        except ParameterError as exc:
            violations.append(f"{name}.parameters: {exc}")
    if violations:
        return ValidationReport(False, violations)

    off = spec.offdiag.moments()
    dia = spec.diag.moments()
    if spec.beta == 1:
        want_off, want_diag_m2 = (0.0, 1.0, 3.0), 2.0
        if spec.offdiag.is_complex:
            violations.append("offdiag.kind: beta=1 requires a real-valued law")
    else:
        want_off, want_diag_m2 = (0.0, 1.0, 2.0), 1.0
        if not spec.offdiag.is_complex:
            violations.append("offdiag.kind: beta=2 requires a complex-valued law")
    if spec.diag.is_complex:
        violations.append("diag.kind: diagonal law must be real-valued")

    for label, got, want in zip(("mean", "second_moment", "fourth_moment"), off, want_off):
        if not _close(got, want):
            violations.append(f"offdiag.{label}: expected {want}, got {got!r}")
    if not _close(dia[0], 0.0):
        violations.append(f"diag.mean: expected 0, got {dia[0]!r}")
    if not _close(dia[1], want_diag_m2):
        violations.append(f"diag.second_moment: expected {want_diag_m2}, got {dia[1]!r}")
    return ValidationReport(
        not violations, violations, {"offdiag": off, "diag": dia}
    )


# --------------------------------------------------------------------------
# keyed generation


@dataclass(frozen=True)
class EntryKey:
    seed: int
    replicate: int
    i: int
    j: int

    def canonical(self):
        i, j = (self.i, self.j) if self.i <= self.j else (self.j, self.i)
        return EntryKey(self.seed, self.replicate, i, j)


@nb.njit(cache=True, inline="always")
def _fmix64(x):
    x ^= x >> np.uint64(33)
    x *= np.uint64(0xFF51AFD7ED558CCD)
    x ^= x >> np.uint64(33)
    x *= np.uint64(0xC4CEB9FE1A85EC53)
    x ^= x >> np.uint64(33)
    return x


@nb.njit(cache=True)
def _uniform_kernel(seed_key, replicates, codes, stream, out):
    # seed_key is fmix64(seed ^ SEED_SALT), precomputed by the caller.
    stream_tag = (np.uint64(stream) + np.uint64(1)) * np.uint64(STREAM_MUL)
    # 52-bit integer plus one half is exact in a double, so u lies strictly in (0, 1).
    scale = 2.0 ** -52
    for r in range(replicates.shape[0]):
        k_rep = _fmix64(seed_key + (replicates[r] + np.uint64(1)) * np.uint64(GOLDEN))
        k_stream = _fmix64(k_rep ^ stream_tag)
        for c in range(codes.shape[0]):
            x = _fmix64(k_stream ^ (codes[c] * np.uint64(CODE_MUL)))
            x = _fmix64(x + np.uint64(CODE_ADD))
            out[r, c] = (float(x >> np.uint64(12)) + 0.5) * scale


def _fmix64_py(x):
    x ^= x >> 33
    x = (x * 0xFF51AFD7ED558CCD) & _MASK64
    x ^= x >> 33
    x = (x * 0xC4CEB9FE1A85EC53) & _MASK64
    x ^= x >> 33
    return x


def pair_codes(i, j):
    """Triangular code of the canonical pair ``(min, max)``; 1-based indices."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    lo = np.minimum(i, j)
    hi = np.maximum(i, j)
    if lo.size and (lo.min() < 1 or hi.max() >= MAX_INDEX):
        raise ParameterError(f"matrix indices must lie in [1, {MAX_INDEX})")
    return (hi * (hi - 1) // 2 + lo).astype(np.uint64)


def keyed_uniforms(seed, replicates, codes, stream=0):
    """Uniforms in (0, 1) of shape ``(len(replicates), len(codes))``."""
    replicates = np.ascontiguousarray(replicates, dtype=np.uint64).reshape(-1)
    codes = np.ascontiguousarray(codes, dtype=np.uint64).reshape(-1)
    seed_key = np.uint64(_fmix64_py((int(seed) & _MASK64) ^ SEED_SALT))
    out = np.empty((replicates.size, codes.size), dtype=np.float64)
    _uniform_kernel(seed_key, replicates, codes, int(stream), out)
    return out


def sample_entries(dist, seed, replicates, codes):
    """Values of ``dist`` at canonical codes; shape ``(len(replicates), len(codes))``."""
    u0 = keyed_uniforms(seed, replicates, codes, 0)
    u1 = keyed_uniforms(seed, replicates, codes, 1) if dist.is_complex else None
    return dist.sample(u0, u1)


def entry(spec, key):
    """Single keyed matrix entry ``X(i, j)`` for one replicate."""
    if key.i < 1 or key.j < 1:
        raise ParameterError("entry indices must be >= 1")
    canon = key.canonical()
    dist = spec.diag if canon.i == canon.j else spec.offdiag
    code = pair_codes([canon.i], [canon.j])
    value = sample_entries(dist, key.seed, [key.replicate], code)[0, 0]
    if canon.i == canon.j or not dist.is_complex:
        return float(np.real(value))
    value = complex(value)
    return value.conjugate() if key.i > key.j else value
