"""Limiting covariances of submatrix trace statistics.

Four routes to the same number are provided:

* ``limit_covariance_series``  -- finite binomial sum over cycle lengths r;
* ``limit_covariance_catalan`` -- tree/cycle counting with Catalan numbers;
* ``limit_covariance_contour`` -- double contour integral over full circles;
* ``limit_covariance_kernel_integral`` -- the GFF kernel integrated over
  half-circles ``|z|^2 = b_p``, ``|w|^2 = b_q``.

The series and Catalan forms are evaluated in exact rational arithmetic when
the inputs are rational (floats are converted exactly).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational

import numpy as np

from .errors import ParameterError

__all__ = [
    "CovarianceParams",
    "catalan",
    "catalan_composition_sum",
    "limit_covariance_series",
    "limit_covariance_catalan",
    "limit_covariance_contour",
    "limit_covariance_kernel_integral",
    "chebyshev_limit_covariance",
    "chebyshev_coefficients",
    "chebyshev_as_monomials",
    "linear_statistic_covariance",
    "gff_kernel",
    "omega",
    "omega_inverse",
    "height_moment_limit_covariance",
    "DEFAULT_NODES",
]

DEFAULT_NODES = 256


def _exact(value):
    if isinstance(value, (Rational, Fraction)):
        return Fraction(value)
    return Fraction(float(value))


@dataclass(frozen=True)
class CovarianceParams:
    k_p: int
    k_q: int
    b_p: float
    b_q: float
    c: float
    beta: int = 1

    def __post_init__(self):
        if int(self.k_p) != self.k_p or int(self.k_q) != self.k_q or self.k_p < 1 or self.k_q < 1:
            raise ParameterError(f"powers must be integers >= 1, got {self.k_p}, {self.k_q}")
        if not (self.b_p > 0 and self.b_q > 0):
            raise ParameterError(f"densities must be > 0, got {self.b_p}, {self.b_q}")
        if not 0 <= self.c <= min(self.b_p, self.b_q):
            raise ParameterError(
                f"overlap c={self.c} must lie in [0, min(b_p, b_q)={min(self.b_p, self.b_q)}]"
            )
        if self.beta not in (1, 2):
            raise ParameterError(f"beta must be 1 or 2, got {self.beta}")

    def swapped(self):
        return CovarianceParams(self.k_q, self.k_p, self.b_q, self.b_p, self.c, self.beta)


# --------------------------------------------------------------------------
# combinatorics


def catalan(n):
    """``C_n``; zero unless ``n`` is a nonnegative integer."""
    if isinstance(n, float):
        if not n.is_integer():
            return 0
        n = int(n)
    elif isinstance(n, Fraction):
        if n.denominator != 1:
            return 0
        n = n.numerator
    if n < 0:
        return 0
    return math.comb(2 * n, n) // (n + 1)


def catalan_composition_sum(S, r):
    """Sum of ``prod C_{s_i}`` over compositions of ``S`` into ``r`` parts.

    Closed form ``binom(2S + r, S) * r / (2S + r)``.
    """
    if S < 0 or r < 1:
        raise ParameterError(f"need S >= 0 and r >= 1, got S={S}, r={r}")
    return math.comb(2 * S + r, S) * r // (2 * S + r)


# --------------------------------------------------------------------------
# covariance forms


def _series_exact(p):
    bp, bq, c = _exact(p.b_p), _exact(p.b_q), _exact(p.c)
    total = Fraction(0)
    for r in range(1, min(p.k_p, p.k_q) + 1):
        if (p.k_p - r) % 2 or (p.k_q - r) % 2:
            continue
        sp, sq = (p.k_p - r) // 2, (p.k_q - r) // 2
        total += 2 * r * math.comb(p.k_p, sp) * math.comb(p.k_q, sq) * c**r * bp**sp * bq**sq
    return total / p.beta


def limit_covariance_series(params, exact=False):
    """Binomial cycle-sum form; ``exact=True`` returns a ``Fraction``."""
    value = _series_exact(params)
    return value if exact else float(value)


def _catalan_exact(p):
    kp, kq = p.k_p, p.k_q
    bp, bq, c = _exact(p.b_p), _exact(p.b_q), _exact(p.c)
    total = Fraction(0)
    # two trees hanging from one shared vertex
    if kp % 2 and kq % 2:
        total += (
            2 * kp * kq * catalan((kp - 1) // 2) * catalan((kq - 1) // 2)
            * c * bp ** ((kp - 1) // 2) * bq ** ((kq - 1) // 2)
        )
    # two trees glued along one edge
    if kp % 2 == 0 and kq % 2 == 0:
        total += (
            kp * kq * catalan(kp // 2) * catalan(kq // 2)
            * c**2 * bp ** (kp // 2 - 1) * bq ** (kq // 2 - 1)
        )
    # two r-cycles with pendant trees, glued along the cycle
    for r in range(3, min(kp, kq) + 1):
        if (kp - r) % 2 or (kq - r) % 2:
            continue
        sp, sq = (kp - r) // 2, (kq - r) // 2
        total += (
            Fraction(2 * kp * kq, r)
            * catalan_composition_sum(sp, r) * catalan_composition_sum(sq, r)
            * c**r * bp**sp * bq**sq
        )
    return total / p.beta


def limit_covariance_catalan(params, exact=False):
    """Three-term Catalan form; ``exact=True`` returns a ``Fraction``."""
    value = _catalan_exact(params)
    return value if exact else float(value)


def limit_covariance_contour(params, n_nodes=DEFAULT_NODES, radii=None):
    """Double contour integral by the periodic trapezoid rule.

    ``radii = (r_z, r_w)`` defaults to ``(sqrt(b_p), 2 sqrt(b_q))``; the pole
    ``w = (c / b_p) z`` must lie strictly inside ``|w| = r_w``.
    """
    p = params
    if p.c == 0:
        return 0.0
    bp, bq, c = float(p.b_p), float(p.b_q), float(p.c)
    r_z, r_w = radii if radii is not None else (math.sqrt(bp), 2.0 * math.sqrt(bq))
    ratio = c / bp
    if not ratio * r_z < r_w:
        raise ParameterError(
            f"pole on or outside the w contour: (c/b_p) r_z = {ratio * r_z} >= r_w = {r_w}"
        )
    angles = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    z = r_z * np.exp(1j * angles)[:, None]
    w = r_w * np.exp(1j * angles)[None, :]
    # (2 pi i)^-2 dz dw = z w dtheta dphi / (4 pi^2); the trapezoid weight
    # (2 pi / n)^2 cancels the 4 pi^2.
    integrand = (z + bp / z) ** p.k_p * (w + bq / w) ** p.k_q * ratio * z * w / (ratio * z - w) ** 2
    return float((2.0 / p.beta) * integrand.mean().real)


@lru_cache(maxsize=64)
def _kernel_quadrature(b_p, b_q, c, n_nodes):
    """Nodes ``x(z), x(w)`` and combined weights ``K * dx dx`` on the half-circles."""
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    theta = 0.5 * np.pi * (nodes + 1.0)
    w_theta = 0.5 * np.pi * weights
    sp, sq = math.sqrt(b_p), math.sqrt(b_q)
    z = sp * np.exp(1j * theta)
    x_z = 2.0 * sp * np.cos(theta)
    dx_z = 2.0 * sp * np.sin(theta) * w_theta

    singular = abs(c - sp * sq) <= 1e-12 * max(c, 1.0)
    if not singular:
        w = sq * np.exp(1j * theta)
        kern = _log_ratio(c, z[:, None], w[None, :])
        x_w = np.broadcast_to(2.0 * sq * np.cos(theta), kern.shape)
        dx_w = np.broadcast_to(2.0 * sq * np.sin(theta) * w_theta, kern.shape)
        return x_z, dx_z, x_w, kern * dx_w

    # |z| = |w| = sqrt(c): log singularity on phi = theta.  Split the inner
    # integral at theta and grade nodes towards it with phi - theta ~ t^3.
    t, wt = np.polynomial.legendre.leggauss(n_nodes)
    t = 0.5 * (t + 1.0)
    wt = 0.5 * wt
    grade = t**3
    dgrade = 3.0 * t**2 * wt
    left = theta[:, None] * (1.0 - grade[None, :])
    right = theta[:, None] + (np.pi - theta[:, None]) * grade[None, :]
    phi = np.concatenate([left, right], axis=1)
    wphi = np.concatenate(
        [theta[:, None] * dgrade[None, :], (np.pi - theta[:, None]) * dgrade[None, :]], axis=1
    )
    w = sq * np.exp(1j * phi)
    kern = _log_ratio(c, z[:, None], w)
    x_w = 2.0 * sq * np.cos(phi)
    dx_w = 2.0 * sq * np.sin(phi) * wphi
    return x_z, dx_z, x_w, kern * dx_w


def _log_ratio(alpha, z, w):
    """``(2 pi)^-1 ln |(alpha - z w) / (alpha - z conj(w))|``, vectorized."""
    return (np.log(np.abs(alpha - z * w)) - np.log(np.abs(alpha - z * np.conj(w)))) / (2.0 * np.pi)


def limit_covariance_kernel_integral(params, n_nodes=DEFAULT_NODES):
    """Kernel form: the GFF cross-kernel integrated against ``x^{k-1} dx``.

    Gauss-Legendre in both arc angles; the arcs are ``z = sqrt(b_p) e^{i theta}``
    and ``w = sqrt(b_q) e^{i phi}`` with ``x = 2 Re``.
    """
    p = params
    if p.c == 0:
        return 0.0
    x_z, dx_z, x_w, kdx_w = _kernel_quadrature(float(p.b_p), float(p.b_q), float(p.c), int(n_nodes))
    inner = (x_w ** (p.k_q - 1) * kdx_w).sum(axis=1)
    total = float(np.dot(x_z ** (p.k_p - 1) * dx_z, inner))
    return 2.0 * p.k_p * p.k_q / (p.beta * math.pi) * total


# --------------------------------------------------------------------------
# Chebyshev statistics


def chebyshev_limit_covariance(k_p, k_q, b_p, b_q, c, beta=1):
    """Limit of ``Cov(Tr T_kp(X_p / 2 sqrt(b_p L)), Tr T_kq(X_q / 2 sqrt(b_q L)))``."""
    if k_p < 1 or k_q < 1:
        raise ParameterError(f"Chebyshev degrees must be >= 1, got {k_p}, {k_q}")
    if k_p != k_q:
        return 0.0
    return k_p / (2.0 * beta) * (c / math.sqrt(b_p * b_q)) ** k_p


@lru_cache(maxsize=None)
def chebyshev_coefficients(n):
    """Integer monomial coefficients of ``T_n``, lowest degree first."""
    prev, cur = (1,), (0, 1)
    if n == 0:
        return prev
    for _ in range(n - 1):
        nxt = [0] * (len(cur) + 1)
        for d, a in enumerate(cur):
            nxt[d + 1] += 2 * a
        for d, a in enumerate(prev):
            nxt[d] -= a
        prev, cur = cur, tuple(nxt)
    return cur


def chebyshev_as_monomials(n, b):
    """``Tr T_n(X / (2 sqrt(b L)))`` as ``{m: coeff}`` over ``L^{-m/2} Tr X^m``.

    The constant term is dropped: it does not fluctuate.
    """
    scale = 1.0 / (2.0 * math.sqrt(b))
    return {m: a * scale**m for m, a in enumerate(chebyshev_coefficients(n)) if a and m > 0}


def linear_statistic_covariance(coeffs_p, coeffs_q, b_p, b_q, c, beta, form="series", n_nodes=DEFAULT_NODES):
    """Limiting covariance of two linear combinations of normalized power traces.

    ``coeffs`` map a power ``m >= 1`` to its coefficient.  ``form`` picks the
    evaluator: ``series``, ``catalan``, ``contour`` or ``kernel``.
    """
    evaluators = {
        "series": limit_covariance_series,
        "catalan": limit_covariance_catalan,
        "contour": lambda prm: limit_covariance_contour(prm, n_nodes),
        "kernel": lambda prm: limit_covariance_kernel_integral(prm, n_nodes),
    }
    evaluate = evaluators[form]
    total = 0.0
    for m, a in coeffs_p.items():
        for n, b in coeffs_q.items():
            if (m + n) % 2:
                continue
            total += a * b * evaluate(CovarianceParams(m, n, b_p, b_q, c, beta))
    return total


# --------------------------------------------------------------------------
# kernel and complex structure


def gff_kernel(i, z, j, w, alpha):
    """Covariance kernel of the correlated GFF family between sheets i and j.

    ``alpha(i, x, j, y)`` is the overlap profile.  Returns ``math.inf`` on the
    diagonal of a sheet.
    """
    z, w = complex(z), complex(w)
    if not (z.imag > 0 and w.imag > 0):
        raise ParameterError(f"kernel points must lie in the open upper half-plane, got {z}, {w}")
    if i == j:
        if z == w:
            return math.inf
        return -math.log(abs(z - w) / abs(z - w.conjugate())) / (2.0 * math.pi)
    a = alpha(i, abs(z) ** 2, j, abs(w) ** 2)
    if a == 0:
        return 0.0
    num = abs(a - z * w)
    den = abs(a - z * w.conjugate())
    if den == 0:
        return math.inf
    if num == 0:
        return -math.inf
    return math.log(num / den) / (2.0 * math.pi)


def omega(x, y):
    """Map the semicircle domain ``|x| <= 2 sqrt(y)`` onto the closed upper half-plane."""
    if not y > 0:
        raise ParameterError(f"omega needs y > 0, got {y}")
    h = y - (x / 2.0) ** 2
    if h < 0:
        if h < -1e-14 * y:
            raise ParameterError(f"({x}, {y}) lies outside |x| <= 2 sqrt(y)")
        h = 0.0
    return complex(x / 2.0, math.sqrt(h))


def omega_inverse(z):
    z = complex(z)
    if z.imag < 0:
        raise ParameterError(f"omega_inverse needs Im z >= 0, got {z}")
    return 2.0 * z.real, abs(z) ** 2


def height_moment_limit_covariance(i, y, k, j, y2, k2, family, beta=1):
    """Limit covariance of the height-function moments ``M_{i,y,k}`` and ``M_{j,y2,k2}``."""
    if not (y > 0 and y2 > 0):
        raise ParameterError(f"levels must be > 0, got {y}, {y2}")
    c = family.alpha(i, y, j, y2)
    cov = limit_covariance_series(CovarianceParams(k + 1, k2 + 1, y, y2, c, beta))
    return (beta * math.pi / 2.0) / ((k + 1) * (k2 + 1)) * cov
