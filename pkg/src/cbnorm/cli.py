"""``cbnorm`` command line: calibrate, estimate, bench, gen.

Exit codes: 0 ok, 2 usage/validation, 3 missing capability (no adjoint),
4 degenerate draw, 5 output collision.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .bench import ConfigError, OutputCollisionError, run_campaign
from .calibration import CalibrationCache, CalibrationTable
from .estimators import DegenerateDrawError, EstimatorKind, estimate
from .matrix_io import MatrixFileError, infer_format, load_matrix, save_matrix
from .operators import (
    CapabilityError,
    DenseOperator,
    FrechetExpmOperator,
    SpectrumSpec,
    dense_svd,
    gen_synthetic,
    hilbert_operator,
)
from .rng import RandomSource

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CAPABILITY = 3
EXIT_DEGENERATE = 4
EXIT_COLLISION = 5

DEFAULT_DELTAS = (0.1, 0.05, 0.01, 0.001)
DEFAULT_KINDS = ("counterbalance", "vanilla3", "dixon")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _delta(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (0.0 < value < 1.0):
        raise argparse.ArgumentTypeError(f"delta must lie in (0, 1), got {text}")
    return value


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _shape(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    try:
        rows, cols = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"shape must look like 100x100, got {text!r}") from None
    if rows < 1 or cols < 1:
        raise argparse.ArgumentTypeError("shape must be positive")
    return rows, cols


def _kind(text: str) -> EstimatorKind:
    try:
        return EstimatorKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cbnorm", description="Randomized upper bounds on the spectral norm.")
    p.add_argument("--version", action="version", version=f"cbnorm {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    c = sub.add_parser("calibrate", help="theta for target underestimation probabilities")
    c.add_argument("--delta", type=_delta, action="append", help="repeatable; default 0.1, 0.05, 0.01, 0.001")
    c.add_argument("--kind", type=_kind, action="append", help="repeatable; default counterbalance, vanilla3, dixon")
    c.add_argument("--json", action="store_true", help="machine-readable output")
    c.add_argument("--cache-dir", help="calibration cache directory")

    e = sub.add_parser("estimate", help="one randomized upper bound")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--hilbert", type=int, metavar="N", help="N x N Hilbert matrix 1/(i+j-1)")
    src.add_argument("--file", help="matrix file (.csv or .spbd)")
    src.add_argument("--frechet", type=int, metavar="N", help="Frechet derivative of exp on an N x N grid")
    src.add_argument("--sv", type=_float_list, help="synthetic matrix with these singular values")
    e.add_argument("--shape", type=_shape, help="ROWSxCOLS for --sv")
    e.add_argument("--gen-seed", type=int, default=0, help="seed for the synthetic factors")
    e.add_argument("--kind", type=_kind, default=EstimatorKind.counterbalance())
    e.add_argument("--k", type=int, help="number of vectors for vanilla")
    how = e.add_mutually_exclusive_group()
    how.add_argument("--delta", type=_delta)
    how.add_argument("--theta", type=float)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--stream", type=int, default=0)
    e.add_argument("--no-adjoint", action="store_true", help="treat the matrix as apply-only")
    e.add_argument("--json", action="store_true")
    e.add_argument("--cache-dir")

    b = sub.add_parser("bench", help="run a benchmark campaign from a JSON config")
    b.add_argument("config", help="config file, or 'paper_tables' for the shipped one")
    b.add_argument("-o", "--output", required=True, help="output directory")
    b.add_argument("--full", action="store_true", help="use the config's full trial count (10^6)")
    b.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    b.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    b.add_argument("--cache-dir")

    g = sub.add_parser("gen", help="write a synthetic matrix and its ground truth")
    g.add_argument("--sv", type=_float_list, required=True)
    g.add_argument("--shape", type=_shape, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--force", action="store_true")
    return p


def _cache(args) -> CalibrationCache:
    return CalibrationCache(args.cache_dir) if getattr(args, "cache_dir", None) else CalibrationCache()


def cmd_calibrate(args, out) -> int:
    deltas = args.delta or list(DEFAULT_DELTAS)
    kinds = args.kind or [EstimatorKind.parse(k) for k in DEFAULT_KINDS]
    cache = _cache(args)
    table = CalibrationTable()
    for kind in kinds:
        for delta in deltas:
            table.add(cache.theta_for_delta(kind, delta))
    if args.json:
        out.write(table.to_json(indent=2) + "\n")
    else:
        out.write(f"{'kind':<16}{'delta':>10}{'theta':>12}  method\n")
        for e in table:
            out.write(f"{e.kind:<16}{e.delta:>10g}{e.theta:>12.4f}  {e.method}\n")
    return EXIT_OK


def _estimate_source(args):
    if args.sv is not None:
        if args.shape is None:
            raise UsageError("--sv needs --shape")
        op, _ = gen_synthetic(SpectrumSpec(tuple(args.sv), *args.shape), args.gen_seed)
        return op, "synthetic"
    if args.shape is not None:
        raise UsageError("--shape only applies to --sv")
    if args.hilbert is not None:
        return hilbert_operator(args.hilbert), f"hilbert{args.hilbert}"
    if args.frechet is not None:
        return FrechetExpmOperator(args.frechet), f"frechet{args.frechet}"
    return DenseOperator(load_matrix(args.file)), str(args.file)


def cmd_estimate(args, out) -> int:
    kind = args.kind
    if args.k is not None:
        if kind.name != "vanilla":
            raise UsageError("--k only applies to vanilla")
        kind = EstimatorKind.vanilla(args.k)
    op, source = _estimate_source(args)
    if args.no_adjoint:
        op.adjoint_available = False
    delta = None
    if args.theta is not None:
        if not math.isfinite(args.theta) or args.theta <= 0 or (kind.name == "counterbalance" and args.theta < 1):
            raise UsageError(f"invalid --theta {args.theta}")
        theta, method = args.theta, "override"
    else:
        delta = args.delta if args.delta is not None else 0.05
        entry = _cache(args).theta_for_delta(kind, delta)
        theta, method = entry.theta, entry.method
    report = estimate(op, kind, theta, RandomSource(args.seed, args.stream))
    doc = report.to_dict()
    doc.update({"delta": delta, "theta_method": method, "source": source})
    if args.json:
        out.write(json.dumps(doc, indent=2) + "\n")
    else:
        width = max(len(k) for k in doc)
        for key, value in doc.items():
            out.write(f"{key:<{width}}  {value}\n")
    return EXIT_OK


def _load_config(name: str) -> dict:
    path = Path(name)
    if not path.exists() and not path.suffix:
        shipped = resources.files("cbnorm") / "configs" / f"{name}.json"
        if shipped.is_file():
            return json.loads(shipped.read_text())
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise UsageError(f"config file not found: {name}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {name} is not valid JSON: {exc}") from None


def cmd_bench(args, out) -> int:
    config = _load_config(args.config)
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    summaries = run_campaign(config, args.output, workers=args.workers, full=args.full, force=args.force, cache=_cache(args))
    out.write(f"{'matrix':<12}{'kind':<16}{'theta':>9}{'N':>9}{'delta_real':>12}{'mae/|A|':>10}\n")
    for s in summaries:
        out.write(f"{s.matrix_id:<12}{s.kind:<16}{s.theta:>9.4f}{s.n_trials:>9d}{s.delta_real:>12.5f}{s.mae_rel:>10.4f}\n")
    out.write(f"results written to {args.output}\n")
    return EXIT_OK


def cmd_gen(args, out) -> int:
    spec = SpectrumSpec(tuple(args.sv), *args.shape)
    path = Path(args.output)
    sidecar = path.with_name(path.name + ".json")
    if not args.force and (path.exists() or sidecar.exists()):
        raise OutputCollisionError(f"{path} exists (use --force)")
    infer_format(path)
    op, _ = gen_synthetic(spec, args.seed)
    save_matrix(op.matrix, path)
    truth = dense_svd(op)
    doc = {
        "shape": list(args.shape),
        "seed": args.seed,
        "requested_singular_values": list(spec.singular_values),
        "ground_truth": truth.to_dict(include_singular_values=False),
        "singular_values": [v for v in truth.singular_values[: len(spec.singular_values)]],
    }
    sidecar.write_text(json.dumps(doc, indent=2) + "\n")
    out.write(f"wrote {path} ({args.shape[0]}x{args.shape[1]}), effective rank {truth.effective_rank:.4f}\n")
    return EXIT_OK


_COMMANDS = {"calibrate": cmd_calibrate, "estimate": cmd_estimate, "bench": cmd_bench, "gen": cmd_gen}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"cbnorm: error: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.command](args, out)
    except OutputCollisionError as exc:
        sys.stderr.write(f"cbnorm: {exc}\n")
        return EXIT_COLLISION
    except OSError as exc:
        sys.stderr.write(f"cbnorm: error: {exc}\n")
        return EXIT_USAGE
    except (UsageError, ConfigError, MatrixFileError, ValueError) as exc:
        sys.stderr.write(f"cbnorm: error: {exc}\n")
        return EXIT_USAGE
    except CapabilityError as exc:
        sys.stderr.write(f"cbnorm: {exc}\n")
        return EXIT_CAPABILITY
    except DegenerateDrawError as exc:
        sys.stderr.write(f"cbnorm: {exc}\n")
        return EXIT_DEGENERATE


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
