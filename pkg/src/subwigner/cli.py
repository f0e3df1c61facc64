"""Command-line entry point: ``subwigner {theory,simulate,compare,kernel,gff}``.

Exit codes: 0 success, 1 validation error, 2 compare threshold breach,
3 numerical-contract violation.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import math
import sys

import numpy as np
import pydantic

from . import __version__
from .config import SimReportModel, load_config, load_grid
from .errors import (
    ConfigError,
    LabelMismatchError,
    NoClosedFormError,
    NumericalContractError,
    ParameterError,
)
from .gff import SheetGrid, build_covariance, psd_check, sample_field
from .montecarlo import (
    THEORY_COLUMNS,
    StatSummary,
    compare,
    default_workers,
    run,
    summarize,
    theory_table,
)
from .theory import gff_kernel

log = logging.getLogger("subwigner")

EXIT_OK, EXIT_INVALID, EXIT_BREACH, EXIT_NUMERICAL = 0, 1, 2, 3


# -- formatting -----------------------------------------------------------------


def fmt(value):
    """17 significant digits for floats so outputs are auditable bit for bit."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.17g}"
    return str(value)


def to_json(obj, indent=0):
    """Deterministic JSON with 17-significant-digit floats; non-finite floats become null."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return f"{obj:.17g}" if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(to_json(v) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_csv(rows, columns, header_comments=()):
    buf = io.StringIO()
    for line in header_comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def read_csv(text):
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _read(path):
    with open(path) as fh:
        return fh.read()


# -- subcommands ------------------------------------------------------------------


def _config(args):
    cfg = load_config(_read(args.config))
    if getattr(args, "seed", None) is not None:
        cfg.run.seed = args.seed
    if getattr(args, "replicates", None) is not None:
        cfg.run.replicates = args.replicates
    if getattr(args, "threads", None) is not None:
        cfg.run.threads = args.threads
    if getattr(args, "quad_nodes", None) is not None:
        cfg.quadrature.nodes = args.quad_nodes
    if getattr(args, "tolerance", None) is not None:
        cfg.quadrature.tolerance = args.tolerance
    return cfg


def cmd_theory(args):
    cfg = _config(args)
    spec = cfg.build_experiment()
    rows = theory_table(spec, cfg.quadrature.nodes)
    _emit(write_csv(rows, THEORY_COLUMNS), args.out)
    return EXIT_OK


def simulation_report(cfg, threads=None, timestamp=True):
    """Run the configured experiment and build the JSON report dict."""
    spec = cfg.build_experiment()
    threads = threads or cfg.run.threads
    raw = run(spec, threads=threads)
    summary = summarize(raw) if raw.traces.shape[0] >= 2 else None
    meta = {
        "version": __version__,
        "spec_hash": cfg.content_hash(),
        "seed": cfg.run.seed,
        "replicates": cfg.run.replicates,
        "L": cfg.run.L,
    }
    if timestamp:
        meta["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return raw, {"metadata": meta, "summary": summary.to_dict() if summary else None}


def raw_csv(raw):
    rows = []
    for r in range(raw.traces.shape[0]):
        for col, label in enumerate(raw.labels):
            rows.append({"replicate": r, "p": label, "k": raw.powers[col], "trace": raw.traces[r, col]})
    return write_csv(rows, ["replicate", "p", "k", "trace"])


def cmd_simulate(args):
    cfg = _config(args)
    threads = min(cfg.run.threads, default_workers()) if args.threads is None else args.threads
    raw, report = simulation_report(cfg, threads, timestamp=not args.no_timestamp)
    if args.dump_raw:
        _emit(raw_csv(raw), args.dump_raw)
    if report["summary"] is None:
        report.pop("summary")
        log.warning("fewer than two replicates: summary omitted")
        _emit(to_json(report) + "\n", args.out)
        return EXIT_OK
    _emit(to_json(report) + "\n", args.out)
    return EXIT_OK


COMPARE_COLUMNS = ["p", "q", "quantity", "empirical", "target", "se", "z", "flagged"]


def cmd_compare(args):
    theory_rows = read_csv(_read(args.theory))
    missing_cols = [c for c in THEORY_COLUMNS if theory_rows and c not in theory_rows[0]]
    if missing_cols:
        raise ConfigError(f"theory CSV lacks columns {missing_cols}")
    report = SimReportModel.model_validate_json(_read(args.sim))
    summary = StatSummary.from_dict(report.summary.model_dump())
    rows = compare(summary, theory_rows, threshold=args.threshold, column=args.column)
    table = [r.__dict__ for r in rows]
    _emit(write_csv(table, COMPARE_COLUMNS), args.out)
    breaches = [r for r in rows if r.flagged]
    for r in breaches:
        log.error("|z| > %s for %s/%s %s: z = %.3f", args.threshold, r.p, r.q, r.quantity, r.z)
    return EXIT_BREACH if breaches else EXIT_OK


def _grid(args, cfg):
    grid = load_grid(_read(args.grid))
    family = cfg.build_family()
    for a, pt in enumerate(grid.points):
        if pt.sheet not in family.sequences:
            raise ConfigError(f"grid point {a} references unknown sheet {pt.sheet!r}")
    return SheetGrid(
        [p.sheet for p in grid.points], [complex(p.re, p.im) for p in grid.points], family
    )


KERNEL_COLUMNS = ["a", "b", "sheet_a", "re_a", "im_a", "sheet_b", "re_b", "im_b", "kernel"]


def cmd_kernel(args):
    cfg = _config(args)
    grid = _grid(args, cfg)
    rows = []
    z = grid.points
    for a in range(len(grid)):
        for b in range(a, len(grid)):
            rows.append({
                "a": a, "b": b,
                "sheet_a": grid.sheets[a], "re_a": z[a].real, "im_a": z[a].imag,
                "sheet_b": grid.sheets[b], "re_b": z[b].real, "im_b": z[b].imag,
                "kernel": gff_kernel(grid.sheets[a], z[a], grid.sheets[b], z[b], grid.family.alpha),
            })
    _emit(write_csv(rows, KERNEL_COLUMNS), args.out)
    return EXIT_OK


def cmd_gff(args):
    cfg = _config(args)
    grid = _grid(args, cfg)
    cov = build_covariance(grid)
    report = psd_check(cov, cfg.quadrature.tolerance)
    header = [
        f"psd passed={fmt(report.passed)} min_pivot={fmt(report.min_pivot)} "
        f"max_diagonal={fmt(report.max_diagonal)} margin={fmt(report.margin)} "
        f"tolerance={fmt(report.tolerance)} clipped={report.clipped}",
    ]
    n = len(grid)
    columns = [f"x{b}" for b in range(n)]
    rows = [{f"x{b}": cov.matrix[a, b] for b in range(n)} for a in range(n)]
    _emit(write_csv(rows, columns, header), args.out)
    if not report.passed:
        log.error("covariance failed psd_check: min pivot %.3e", report.min_pivot)
        return EXIT_NUMERICAL
    if args.samples:
        seed = cfg.run.seed if args.seed is None else args.seed
        draws = sample_field(cov, args.samples, seed)
        sample_rows = [{f"x{b}": draws[s, b] for b in range(n)} for s in range(draws.shape[0])]
        _emit(write_csv(sample_rows, columns), args.samples_out)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="subwigner", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True, threads=True):
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default="-", help="output file (default: stdout)")
        if seed:
            p.add_argument("--seed", type=int, default=None)
        if threads:
            p.add_argument("--threads", type=int, default=None)
        p.add_argument("--quad-nodes", type=int, default=None)
        p.add_argument("--tolerance", type=float, default=None)

    p = sub.add_parser("theory", help="limiting covariance table (CSV)")
    common(p, seed=False, threads=False)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("simulate", help="Monte Carlo run (JSON report)")
    common(p)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--dump-raw", default=None, help="CSV of raw per-replicate traces")
    p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp field")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="z-scores of a simulation against a theory table")
    p.add_argument("--theory", required=True)
    p.add_argument("--sim", required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--threshold", type=float, default=5.0)
    p.add_argument("--column", default="cov_series", choices=THEORY_COLUMNS[8:])
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("kernel", help="GFF kernel values on a grid (CSV)")
    common(p, seed=False, threads=False)
    p.add_argument("--grid", "--points", dest="grid", required=True, help="JSON list of {sheet, re, im}")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("gff", help="GFF covariance and samples on a grid (CSV)")
    common(p, threads=False)
    p.add_argument("--grid", required=True, help="JSON list of {sheet, re, im}")
    p.add_argument("-n", "--samples", type=int, default=0)
    p.add_argument("--samples-out", default=None, help="CSV of sampled vectors (default: stdout)")
    p.set_defaults(func=cmd_gff)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except pydantic.ValidationError as exc:
        print(f"invalid input:\n{exc}", file=sys.stderr)
        return EXIT_INVALID
    except LabelMismatchError as exc:
        print(f"label mismatch: unmatched {', '.join(exc.missing)}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, ParameterError, NoClosedFormError, json.JSONDecodeError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalContractError as exc:
        print(f"numerical contract violated: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
