"""Finite-dimensional marginals of the correlated Gaussian Free Field family.

A grid is a list of ``(sheet, z)`` points with ``Im z > 0``.  Off-diagonal
covariances are the pointwise kernel values.  The pointwise diagonal is
infinite, so each point is read as the circle average of radius ``eps`` of
its field, whose variance is ``(2 pi)^-1 ln(2 Im z / eps)``; with ``eps`` at
most half the distance to any other location of the grid (and below
``Im z``) the off-diagonal entries of one sheet are unchanged by the averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .theory import gff_kernel

__all__ = [
    "SheetGrid",
    "FieldCovariance",
    "PSDReport",
    "build_covariance",
    "psd_check",
    "pivoted_ldl",
    "sample_field",
    "random_grid",
]


@dataclass
class SheetGrid:
    sheets: list
    points: np.ndarray  # complex
    family: object

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex).reshape(-1)
        self.sheets = list(self.sheets)
        if len(self.sheets) != self.points.size:
            raise ParameterError("one sheet label per point is required")
        bad = np.flatnonzero(~(self.points.imag > 0))
        if bad.size:
            raise ParameterError(f"points must have Im z > 0; offending indices {bad.tolist()}")
        seen = {}
        dups = []
        for a, key in enumerate(zip(self.sheets, self.points.tolist())):
            if key in seen:
                dups.append((seen[key], a))
            seen.setdefault(key, a)
        if dups:
            raise ParameterError(f"duplicate grid points (index pairs) {dups}")

    def __len__(self):
        return self.points.size


@dataclass
class PSDReport:
    passed: bool
    min_pivot: float
    max_diagonal: float
    margin: float
    tolerance: float
    clipped: int = 0


@dataclass
class FieldCovariance:
    matrix: np.ndarray
    grid: SheetGrid
    radii: np.ndarray
    psd_report: PSDReport | None = None
    _factor: tuple | None = field(default=None, repr=False)


def _regularization_radii(z):
    # Half the distance to the nearest other location (any sheet), capped at
    # Im z / 2, so circles around distinct locations never meet.
    radii = 0.5 * z.imag
    if z.size > 1:
        dist = np.abs(z[:, None] - z[None, :])
        dist[dist == 0] = np.inf
        radii = np.minimum(radii, 0.5 * dist.min(axis=1))
    return radii


def _concentric_average(i, j, z, r_a, r_b, alpha, nodes=None):
    """Kernel averaged over circles of radii ``r_a``, ``r_b`` around the same ``z``."""
    if nodes is None:
        # sheets that coincide near z leave a log singularity; refine there
        y = abs(z) ** 2
        nodes = 512 if alpha(i, y, j, y) >= y else 64
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    # half-step offset keeps the nodes off a possible coincidence singularity
    za = z + r_a * np.exp(1j * theta)
    zb = z + r_b * np.exp(1j * (theta + np.pi / nodes))
    total = math.fsum(gff_kernel(i, p, j, q, alpha) for p in za for q in zb)
    return total / nodes**2


def build_covariance(grid, radii=None):
    """Kernel matrix on ``grid`` with circle-average regularized diagonal.

    ``radii`` (scalar or one per point) fixes the averaging radii; by default
    each is half the distance to the nearest other location, capped at
    ``Im z / 2``.  Pass explicit radii to compare grids of different sizes.
    Points of different sheets at one location get the circle-averaged
    kernel, the point value being inconsistent with averaged variances.
    """
    n = len(grid)
    z = grid.points
    if radii is None:
        radii = _regularization_radii(z)
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (n,)).copy()
    if np.any(radii <= 0) or np.any(radii >= z.imag):
        raise ParameterError("averaging radii must lie in (0, Im z)")
    C = np.empty((n, n))
    alpha = grid.family.alpha
    sheets = grid.sheets
    for a in range(n):
        C[a, a] = math.log(2.0 * z[a].imag / radii[a]) / (2.0 * math.pi)
        for b in range(a + 1, n):
            if z[a] == z[b]:
                value = _concentric_average(sheets[a], sheets[b], z[a], radii[a], radii[b], alpha)
            else:
                value = gff_kernel(sheets[a], z[a], sheets[b], z[b], alpha)
            C[a, b] = C[b, a] = value
    return FieldCovariance(C, grid, radii)


def pivoted_ldl(A, tol=1e-8):
    """Symmetric ``P A P^T = L D L^T`` with largest-remaining-diagonal pivoting.

    Returns ``(perm, L, d, min_pivot)``.  Once the largest remaining diagonal
    drops below ``tol * max|diag|`` the rest is treated as a zero block; the
    reported ``min_pivot`` then also accounts for any remaining off-diagonal
    mass (a 2x2 block ``[[0, a], [a, 0]]`` has eigenvalue ``-|a|``).
    """
    S = np.array(A, dtype=float, copy=True)
    n = S.shape[0]
    perm = np.arange(n)
    Lf = np.eye(n)
    d = np.zeros(n)
    scale = float(np.max(np.abs(np.diag(S)))) if n else 0.0
    floor = tol * scale
    min_pivot = math.inf
    for k in range(n):
        j = k + int(np.argmax(np.diag(S)[k:]))
        if j != k:
            S[[k, j], :] = S[[j, k], :]
            S[:, [k, j]] = S[:, [j, k]]
            Lf[[k, j], :k] = Lf[[j, k], :k]
            perm[[k, j]] = perm[[j, k]]
        pivot = S[k, k]
        if pivot <= floor:
            rest = S[k:, k:]
            off = rest - np.diag(np.diag(rest))
            worst = min(float(np.diag(rest).min()), -float(np.abs(off).max()) if off.size else 0.0)
            min_pivot = min(min_pivot, worst)
            d[k:] = np.diag(rest)
            break
        d[k] = pivot
        min_pivot = min(min_pivot, pivot)
        col = S[k + 1:, k] / pivot
        Lf[k + 1:, k] = col
        S[k + 1:, k + 1:] -= np.outer(col, S[k, k + 1:])
    if n == 0:
        min_pivot = 0.0
    return perm, Lf, d, min_pivot


def psd_check(cov, tol=1e-8):
    """Pass iff the most negative pivot is ``>= -tol * max diagonal``."""
    A = cov.matrix if isinstance(cov, FieldCovariance) else np.asarray(cov, dtype=float)
    perm, Lf, d, min_pivot = pivoted_ldl(A, tol)
    max_diag = float(np.max(np.diag(A))) if A.size else 0.0
    margin = min_pivot + tol * max_diag
    clipped = int(np.sum(d < 0))
    report = PSDReport(bool(margin >= 0), float(min_pivot), max_diag, float(margin), tol, clipped)
    if isinstance(cov, FieldCovariance):
        cov.psd_report = report
        cov._factor = (perm, Lf, np.clip(d, 0.0, None))
    return report


def sample_field(cov, n_samples, seed):
    """``n_samples`` zero-mean Gaussian vectors with covariance ``cov.matrix``.

    Uses the clipped pivoted factor; rows are samples.
    """
    if cov.psd_report is None or cov._factor is None:
        raise RuntimeError("sample_field requires a passing psd_check on this covariance first")
    if not cov.psd_report.passed:
        raise RuntimeError(
            f"covariance failed psd_check (min pivot {cov.psd_report.min_pivot:.3e}); refusing to sample"
        )
    n = cov.matrix.shape[0]
    if n_samples == 0:
        return np.empty((0, n))
    perm, Lf, d = cov._factor
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n_samples, n))
    permuted = (g * np.sqrt(d)[None, :]) @ Lf.T
    out = np.empty_like(permuted)
    out[:, perm] = permuted
    return out


def random_grid(family, sheets, n_points, rng, radius=(0.3, 2.0)):
    """Random grid: points with modulus in ``radius`` and argument in ``(0.1, pi - 0.1)``."""
    labels = [sheets[int(s)] for s in rng.integers(0, len(sheets), n_points)]
    r = rng.uniform(*radius, n_points)
    theta = rng.uniform(0.1, math.pi - 0.1, n_points)
    return SheetGrid(labels, r * np.exp(1j * theta), family)
