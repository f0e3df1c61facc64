"""Replicated trace-statistic experiments and their comparison with theory.

Replicates are generated in fixed-size chunks; each replicate depends only on
``(spec, seed, replicate)`` so the chunk-to-worker assignment, and hence the
thread count, never changes the numbers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import theory
from .ensembles import validate_ensemble
from .errors import ConfigError, LabelMismatchError, ParameterError
from .indexing import prefix
from .matrixops import batch_chebyshev_traces, batch_power_traces, realize_batch

__all__ = [
    "StatisticRequest",
    "ExperimentSpec",
    "RawResult",
    "StatSummary",
    "run",
    "summarize",
    "jackknife_covariance_se",
    "theory_table",
    "compare",
    "THEORY_COLUMNS",
    "CHUNK",
    "default_workers",
]

CHUNK = 32
KINDS = ("trace", "chebyshev")
THEORY_COLUMNS = [
    "p", "q", "k_p", "k_q", "b_p", "b_q", "c_pq", "beta",
    "cov_series", "cov_catalan", "cov_contour", "cov_kernel", "cheb_cov",
]


def default_workers():
    cap = os.environ.get("SUBWIGNER_MAX_WORKERS")
    n = os.cpu_count() or 1
    return max(1, min(n, int(cap))) if cap else n


@dataclass(frozen=True)
class StatisticRequest:
    """One coordinate of the trace vector.

    The index set is either a prefix of a family sequence (``sequence`` with
    ``b`` giving length ``floor(b L)`` or ``size`` giving it directly) or an
    explicit ``indices`` list.
    """

    label: str
    power: int
    kind: str = "trace"
    sequence: str | None = None
    b: float | None = None
    size: int | None = None
    indices: tuple | None = None


@dataclass
class ExperimentSpec:
    ensemble: object
    family: object
    statistics: list
    L: int
    replicates: int
    seed: int

    def validate(self):
        report = validate_ensemble(self.ensemble)
        if not report:
            raise ConfigError("ensemble fails moment constraints: " + "; ".join(report.violations))
        if self.L < 1:
            raise ConfigError(f"L must be >= 1, got {self.L}")
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        labels = [s.label for s in self.statistics]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate statistic labels in {labels}")
        for s in self.statistics:
            if s.kind not in KINDS:
                raise ConfigError(f"statistic {s.label!r}: kind must be one of {KINDS}")
            if s.power < 1:
                raise ConfigError(f"statistic {s.label!r}: power must be >= 1")
            if s.indices is None:
                if s.sequence is None or (s.b is None) == (s.size is None):
                    raise ConfigError(
                        f"statistic {s.label!r}: give indices, or a sequence with exactly one of b / size"
                    )
            elif s.sequence is not None or s.b is not None or s.size is not None:
                raise ConfigError(f"statistic {s.label!r}: explicit indices exclude sequence/b/size")
        try:
            self.index_sets()
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def index_sets(self):
        """Sorted index array of every statistic, keyed by label."""
        out = {}
        for s in self.statistics:
            if s.indices is not None:
                B = np.asarray(s.indices, dtype=np.int64)
            else:
                seq = self.family[s.sequence].at_L(self.L)
                m = s.size if s.size is not None else math.floor(s.b * self.L)
                B = prefix(seq, m)
            if B.size == 0:
                raise ParameterError(f"statistic {s.label!r} has an empty index set")
            if np.unique(B).size != B.size:
                raise ParameterError(f"statistic {s.label!r} has repeated indices")
            if B.min() < 1:
                raise ParameterError(f"statistic {s.label!r} has indices < 1")
            out[s.label] = np.sort(B)
        return out

    def ratios(self):
        """Exact finite-L densities ``|B_p|/L`` and overlaps ``|B_p & B_q|/L``."""
        sets = self.index_sets()
        labels = [s.label for s in self.statistics]
        b = {p: Fraction(sets[p].size, self.L) for p in labels}
        c = {}
        for a, p in enumerate(labels):
            for q in labels[a:]:
                common = np.intersect1d(sets[p], sets[q], assume_unique=True).size
                c[(p, q)] = c[(q, p)] = Fraction(common, self.L)
        return b, c


@dataclass
class RawResult:
    labels: list
    kinds: list
    powers: list
    sizes: list
    L: int
    seed: int
    beta: int
    traces: np.ndarray  # (replicates, statistics)


def _chunk_traces(spec, plan, union, replicates):
    X_union = realize_batch(spec.ensemble, spec.seed, replicates, union)
    out = np.empty((len(replicates), len(spec.statistics)))
    for positions, requests in plan:
        X = np.ascontiguousarray(X_union[:, positions[:, None], positions[None, :]])
        powers = [s.power for _, s in requests if s.kind == "trace"]
        degrees = [s.power for _, s in requests if s.kind == "chebyshev"]
        plain = batch_power_traces(X, powers) if powers else {}
        cheb = batch_chebyshev_traces(X, degrees, 2.0 * math.sqrt(len(positions))) if degrees else {}
        for col, s in requests:
            out[:, col] = (plain if s.kind == "trace" else cheb)[s.power]
    return out


def run(spec, threads=1):
    """Raw traces ``Tr X(B_p)^k`` (or ``Tr T_k(X(B_p)/2 sqrt|B_p|)``) per replicate."""
    spec.validate()
    sets = spec.index_sets()
    if not sets:
        return RawResult([], [], [], [], spec.L, spec.seed, spec.ensemble.beta, np.empty((spec.replicates, 0)))
    union = np.unique(np.concatenate(list(sets.values())))
    # statistics on the same index set share one submatrix and its powers
    groups = {}
    for col, s in enumerate(spec.statistics):
        groups.setdefault(tuple(sets[s.label].tolist()), []).append((col, s))
    plan = [
        (np.searchsorted(union, np.asarray(key)), requests) for key, requests in groups.items()
    ]
    reps = np.arange(spec.replicates, dtype=np.uint64)
    chunks = [reps[i:i + CHUNK] for i in range(0, reps.size, CHUNK)]
    threads = max(1, int(threads))
    if threads == 1:
        parts = [_chunk_traces(spec, plan, union, c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _chunk_traces(spec, plan, union, c), chunks))
    traces = np.concatenate(parts, axis=0) if parts else np.empty((0, len(spec.statistics)))
    return RawResult(
        labels=[s.label for s in spec.statistics],
        kinds=[s.kind for s in spec.statistics],
        powers=[s.power for s in spec.statistics],
        sizes=[int(sets[s.label].size) for s in spec.statistics],
        L=spec.L,
        seed=spec.seed,
        beta=spec.ensemble.beta,
        traces=traces,
    )


# --------------------------------------------------------------------------
# summaries


def jackknife_covariance_se(values):
    """Delete-one jackknife standard errors of the unbiased covariance matrix.

    ``values`` has shape ``(M, P)``; the leave-one-out covariances are formed
    in closed form from running sums, so the cost is ``O(M P^2)``.
    """
    d = np.asarray(values, dtype=float)
    M = d.shape[0]
    if M < 3:
        return np.full((d.shape[1], d.shape[1]), np.nan)
    d = d - d.mean(axis=0)
    total = d.sum(axis=0)
    cross = d.T @ d
    n = M - 1
    loo_mean = (total[None, :] - d) / n
    loo = (cross[None] - d[:, :, None] * d[:, None, :] - n * loo_mean[:, :, None] * loo_mean[:, None, :]) / (n - 1)
    spread = loo - loo.mean(axis=0)
    return np.sqrt((M - 1) / M * (spread**2).sum(axis=0))


@dataclass
class StatSummary:
    labels: list
    kinds: list
    powers: list
    sizes: list
    L: int
    M: int
    seed: int
    beta: int
    mean: list
    variance: list
    skewness: list
    excess_kurtosis: list
    covariance: list
    covariance_se: list
    degenerate: list = field(default_factory=list)

    def index(self, label):
        return self.labels.index(label)

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})


def normalized(raw):
    """Statistics as they enter the limit: ``L^{-k/2} Tr X^k`` or ``Tr T_k`` as is."""
    scale = np.array(
        [raw.L ** (-k / 2.0) if kind == "trace" else 1.0 for kind, k in zip(raw.kinds, raw.powers)]
    )
    return raw.traces * scale[None, :]


def summarize(raw):
    values = normalized(raw)
    M = values.shape[0]
    if M < 2:
        raise ParameterError("summaries need at least two replicates")
    mean = values.mean(axis=0)
    d = values - mean
    cov = d.T @ d / (M - 1)
    m2 = (d**2).mean(axis=0)
    m3 = (d**3).mean(axis=0)
    m4 = (d**4).mean(axis=0)
    degenerate = [bool(v <= 0.0) for v in m2]
    with np.errstate(invalid="ignore", divide="ignore"):
        skew = np.where(m2 > 0, m3 / m2**1.5, np.nan)
        kurt = np.where(m2 > 0, m4 / m2**2 - 3.0, np.nan)
    se = jackknife_covariance_se(values)

    def clean(arr):
        return [None if not np.isfinite(v) else float(v) for v in np.ravel(arr)]

    P = len(raw.labels)
    return StatSummary(
        labels=list(raw.labels),
        kinds=list(raw.kinds),
        powers=list(raw.powers),
        sizes=list(raw.sizes),
        L=raw.L,
        M=M,
        seed=raw.seed,
        beta=raw.beta,
        mean=clean(mean),
        variance=clean(np.diag(cov)),
        skewness=clean(skew),
        excess_kurtosis=clean(kurt),
        covariance=[clean(cov[p]) for p in range(P)],
        covariance_se=[clean(se[p]) for p in range(P)],
        degenerate=degenerate,
    )


# --------------------------------------------------------------------------
# theory and comparison


def _coefficients(request, b):
    if request.kind == "trace":
        return {request.power: 1.0}
    return theory.chebyshev_as_monomials(request.power, b)


def theory_table(spec, n_nodes=theory.DEFAULT_NODES):
    """Limiting covariance of every statistic pair at the exact finite-L ratios."""
    spec.validate()
    b, c = spec.ratios()
    beta = spec.ensemble.beta
    stats = spec.statistics
    rows = []
    for a, sp in enumerate(stats):
        for sq in stats[a:]:
            bp, bq, cpq = b[sp.label], b[sq.label], c[(sp.label, sq.label)]
            row = {
                "p": sp.label, "q": sq.label, "k_p": sp.power, "k_q": sq.power,
                "b_p": float(bp), "b_q": float(bq), "c_pq": float(cpq), "beta": beta,
            }
            if sp.kind == sq.kind == "trace":
                params = theory.CovarianceParams(sp.power, sq.power, bp, bq, cpq, beta)
                row["cov_series"] = theory.limit_covariance_series(params)
                row["cov_catalan"] = theory.limit_covariance_catalan(params)
                row["cov_contour"] = theory.limit_covariance_contour(params, n_nodes)
                row["cov_kernel"] = theory.limit_covariance_kernel_integral(params, n_nodes)
            else:
                cp, cq = _coefficients(sp, float(bp)), _coefficients(sq, float(bq))
                for form in ("series", "catalan", "contour", "kernel"):
                    row[f"cov_{form}"] = theory.linear_statistic_covariance(
                        cp, cq, bp, bq, cpq, beta, form, n_nodes
                    )
            row["cheb_cov"] = theory.chebyshev_limit_covariance(
                sp.power, sq.power, float(bp), float(bq), float(cpq), beta
            )
            rows.append(row)
    return rows


@dataclass
class ComparisonRow:
    p: str
    q: str
    quantity: str
    empirical: float
    target: float
    se: float
    z: float
    flagged: bool


def _z(empirical, target, se):
    diff = empirical - target
    if se and se > 0:
        return diff / se
    return 0.0 if diff == 0 else math.copysign(math.inf, diff)


def compare(summary, theory_rows, threshold=5.0, column="cov_series"):
    """z-scores of empirical covariances against a theory column.

    Also reports skewness and excess kurtosis against the Gaussian null with
    standard errors ``sqrt(6/M)`` and ``sqrt(24/M)``.
    """
    labels = set(summary.labels)
    pairs = {}
    for row in theory_rows:
        pairs[(row["p"], row["q"])] = row
    missing = sorted({lab for key in pairs for lab in key} - labels)
    needed = {
        (p, q)
        for a, p in enumerate(summary.labels)
        for q in summary.labels[a:]
    }
    absent = sorted(
        f"{p}/{q}" for p, q in needed if (p, q) not in pairs and (q, p) not in pairs
    )
    if missing or absent:
        raise LabelMismatchError(missing + absent)

    out = []
    for (p, q), row in pairs.items():
        i, j = summary.index(p), summary.index(q)
        emp = summary.covariance[i][j]
        se = summary.covariance_se[i][j]
        target = float(row[column])
        # A non-finite empirical value is always a breach.
        z = math.inf if emp is None else _z(emp, target, se)
        out.append(ComparisonRow(p, q, "covariance", emp, target, se, z, abs(z) > threshold))
    M = summary.M
    for i, label in enumerate(summary.labels):
        for name, values, se in (
            ("skewness", summary.skewness, math.sqrt(6.0 / M)),
            ("excess_kurtosis", summary.excess_kurtosis, math.sqrt(24.0 / M)),
        ):
            v = values[i]
            if v is None:
                continue
            z = v / se
            out.append(ComparisonRow(label, label, name, v, 0.0, se, z, abs(z) > threshold))
    return out
