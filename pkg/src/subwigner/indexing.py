"""Injective index sequences, their prefixes, and limiting overlap profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import NoClosedFormError, ParameterError

__all__ = [
    "Identity",
    "Arithmetic",
    "BlockSwap",
    "Explicit",
    "GoodFamily",
    "prefix",
    "overlap_count",
    "alpha_limit",
    "alpha_estimate",
    "four_sheet_family",
    "sequence_from_dict",
    "sequence_to_dict",
    "register_alpha",
]


@dataclass(frozen=True)
class Identity:
    def values(self, m):
        return np.arange(1, m + 1, dtype=np.int64)

    def at_L(self, L):
        return self


@dataclass(frozen=True)
class Arithmetic:
    """``a_n = stride * n + offset``."""

    stride: int
    offset: int = 0

    def __post_init__(self):
        if self.stride < 1 or self.offset < 0:
            raise ParameterError(f"Arithmetic needs stride >= 1 and offset >= 0, got {self}")

    def values(self, m):
        return self.stride * np.arange(1, m + 1, dtype=np.int64) + self.offset

    def at_L(self, L):
        return self


@dataclass(frozen=True)
class BlockSwap:
    """Swap the first two blocks of length ``L``; identity afterwards."""

    L: int

    def __post_init__(self):
        if self.L < 1:
            raise ParameterError(f"BlockSwap needs L >= 1, got {self.L}")

    def values(self, m):
        n = np.arange(1, m + 1, dtype=np.int64)
        L = self.L
        return np.where(n <= L, n + L, np.where(n <= 2 * L, n - L, n))

    def at_L(self, L):
        return BlockSwap(L)


@dataclass(frozen=True)
class Explicit:
    """A finite list continued by the smallest unused naturals."""

    listed: tuple = field(default_factory=tuple)

    def __post_init__(self):
        listed = tuple(int(v) for v in self.listed)
        object.__setattr__(self, "listed", listed)
        if any(v < 1 for v in listed):
            raise ParameterError("Explicit sequence values must be naturals >= 1")
        if len(set(listed)) != len(listed):
            seen, dups = set(), []
            for v in listed:
                if v in seen:
                    dups.append(v)
                seen.add(v)
            raise ParameterError(f"Explicit sequence is not injective; repeated values {dups}")

    def values(self, m):
        head = list(self.listed[:m])
        missing = m - len(head)
        if missing > 0:
            used = set(self.listed)
            candidate = 1
            while missing:
                if candidate not in used:
                    head.append(candidate)
                    missing -= 1
                candidate += 1
        return np.asarray(head, dtype=np.int64)

    def at_L(self, L):
        return self


_SEQ_KINDS = {cls.__name__: cls for cls in (Identity, Arithmetic, BlockSwap, Explicit)}


def sequence_from_dict(data, L=None):
    data = dict(data)
    kind = data.pop("kind", None)
    if kind not in _SEQ_KINDS:
        raise ParameterError(f"unknown sequence kind {kind!r}; expected one of {sorted(_SEQ_KINDS)}")
    if kind == "BlockSwap" and "L" not in data and L is not None:
        data["L"] = L
    if kind == "Explicit":
        return Explicit(tuple(data.pop("listed", ())))
    try:
        return _SEQ_KINDS[kind](**data)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {kind}: {exc}") from None


def sequence_to_dict(seq):
    out = {"kind": type(seq).__name__}
    for k, v in seq.__dict__.items():
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def prefix(seq, m):
    """``{a_1, ..., a_m}`` in sequence order."""
    if m < 0:
        raise ParameterError(f"prefix length must be >= 0, got {m}")
    return seq.values(int(m))


def overlap_count(seq_a, m_a, seq_b, m_b):
    """``|prefix(seq_a, m_a) & prefix(seq_b, m_b)|``, computed exactly."""
    small, large = prefix(seq_a, m_a), prefix(seq_b, m_b)
    if small.size > large.size:
        small, large = large, small
    lookup = set(large.tolist())
    return sum(1 for v in small.tolist() if v in lookup)


# --------------------------------------------------------------------------
# limiting overlap profiles
#
# In the limit a prefix of relative length x occupies, after dividing values
# by L, a finite union of intervals on which it fills one residue class.
# alpha is the common residue density times the length of the intersection.


def _limit_support(seq, x):
    """``(stride, residue, intervals)`` of the scaled prefix of relative length x."""
    if isinstance(seq, Identity):
        return 1, 0, [(0.0, x)]
    if isinstance(seq, Arithmetic):
        return seq.stride, seq.offset % seq.stride, [(0.0, seq.stride * x)]
    if isinstance(seq, BlockSwap):
        if x <= 1:
            return 1, 0, [(1.0, 1.0 + x)]
        if x <= 2:
            return 1, 0, [(0.0, x - 1.0), (1.0, 2.0)]
        return 1, 0, [(0.0, x)]
    raise NoClosedFormError(f"no closed-form overlap profile for {type(seq).__name__}")


def _interval_overlap(first, second):
    total = 0.0
    for a0, a1 in first:
        for b0, b1 in second:
            total += max(0.0, min(a1, b1) - max(a0, b0))
    return total


def _alpha_intervals(seq_a, x, seq_b, y):
    s1, o1, iv1 = _limit_support(seq_a, x)
    s2, o2, iv2 = _limit_support(seq_b, y)
    g = math.gcd(s1, s2)
    if (o1 - o2) % g:
        return 0.0
    lcm = s1 * s2 // g
    return _interval_overlap(iv1, iv2) / lcm


_ALPHA_RULES = {}


def register_alpha(kind_a, kind_b, rule):
    """Register ``rule(seq_a, x, seq_b, y)`` for the ordered pair of kinds."""
    _ALPHA_RULES[(kind_a, kind_b)] = rule


for _ka in (Identity, Arithmetic, BlockSwap):
    for _kb in (Identity, Arithmetic, BlockSwap):
        register_alpha(_ka, _kb, _alpha_intervals)


def alpha_limit(seq_a, x, seq_b, y):
    """Limit of ``|A_[xL] & B_[yL]| / L`` as ``L -> infinity``."""
    if not (x > 0 and y > 0):
        raise ParameterError(f"alpha needs x, y > 0, got {x}, {y}")
    rule = _ALPHA_RULES.get((type(seq_a), type(seq_b)))
    if rule is None:
        raise NoClosedFormError(
            f"no closed-form overlap profile for ({type(seq_a).__name__}, {type(seq_b).__name__})"
        )
    return rule(seq_a, x, seq_b, y)


def alpha_estimate(seq_a, seq_b, x, y, L_grid):
    """Finite-L ratios ``overlap_count([xL], [yL]) / L`` over an increasing grid."""
    L_grid = [int(L) for L in L_grid]
    if any(b <= a for a, b in zip(L_grid, L_grid[1:])):
        raise ParameterError("L grid must be strictly increasing")
    out = []
    for L in L_grid:
        a, b = seq_a.at_L(L), seq_b.at_L(L)
        out.append(Fraction(overlap_count(a, math.floor(x * L), b, math.floor(y * L)), L))
    return out


@dataclass
class GoodFamily:
    """Finite labelled family of sequences sharing one large parameter ``L``."""

    sequences: dict
    L: int | None = None

    def __post_init__(self):
        if self.L is not None:
            for label, seq in self.sequences.items():
                if isinstance(seq, BlockSwap) and seq.L != self.L:
                    raise ParameterError(
                        f"sequence {label!r}: BlockSwap L={seq.L} does not match family L={self.L}"
                    )

    def __getitem__(self, label):
        try:
            return self.sequences[label]
        except KeyError:
            raise ParameterError(f"unknown sequence label {label!r}") from None

    def labels(self):
        return list(self.sequences)

    def alpha(self, i, x, j, y):
        if i == j:
            return min(x, y)
        return alpha_limit(self[i], x, self[j], y)

    def to_dict(self):
        return {label: sequence_to_dict(seq) for label, seq in self.sequences.items()}

    @classmethod
    def from_dict(cls, data, L=None):
        return cls({label: sequence_from_dict(d, L) for label, d in data.items()}, L)


def four_sheet_family(L):
    """The four-sequence example: ``n``, ``2n``, ``2n+1`` and the block swap."""
    return GoodFamily(
        {
            "1": Identity(),
            "2": Arithmetic(2, 0),
            "3": Arithmetic(2, 1),
            "4": BlockSwap(L),
        },
        L,
    )
