"""Monte-Carlo benchmark harness: trial batches, summaries, convergence curves, exports.

Trial ``i`` of a batch draws its test vectors from ``RandomSource(base_seed, i)``,
so a batch is a pure function of (operator, kind, theta, N, base_seed).
Work is split into chunks whose size depends only on the operator, never on
the worker count, which keeps results byte-identical for any ``workers``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import CalibrationCache
from .estimators import DegenerateDrawError, EstimatorKind, sample_base_values
from .operators import (
    DenseOperator,
    FrechetExpmOperator,
    GroundTruth,
    LinearOperator,
    SpectrumSpec,
    dense_svd,
    gen_synthetic,
    hilbert_operator,
)

__all__ = [
    "TrialBatch",
    "BenchSummary",
    "ConvergencePoint",
    "ConfigError",
    "OutputCollisionError",
    "DegenerateHistogramWarning",
    "QUANTILE_LEVELS",
    "CSV_COLUMNS",
    "run_batch",
    "summarize",
    "convergence_curve",
    "export_results",
    "load_results",
    "histogram_data",
    "build_zoo_matrix",
    "ZOO",
    "run_campaign",
]

log = logging.getLogger(__name__)

QUANTILE_LEVELS = (0.01, 0.05, 0.5, 0.95, 0.99)
_Q_NAMES = ("q01", "q05", "q50", "q95", "q99")
CSV_COLUMNS = (
    "matrix_id", "kind", "theta", "n_trials", "delta_real", "mae", "mean", "std",
    *_Q_NAMES, "mae_rel",
)
# floats per chunk of test vectors; chunking is part of the deterministic contract
_CHUNK_FLOATS = 1 << 21
_REDRAW_ATTEMPTS = 4
_REDRAW_SHIFT = 48
_DEGENERATE_LIMIT = 1e-3


class ConfigError(ValueError):
    pass


class OutputCollisionError(FileExistsError):
    pass


class DegenerateHistogramWarning(UserWarning):
    pass


@dataclass
class TrialBatch:
    kind: EstimatorKind
    theta: float
    matrix_id: str
    values: np.ndarray
    truth: GroundTruth
    base_seed: int
    redrawn_streams: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("a batch needs a nonempty 1-D array of values")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("batch values must be finite and nonnegative")

    @property
    def n_trials(self) -> int:
        return int(self.values.size)


def _chunk_size(op: LinearOperator, kind: EstimatorKind) -> int:
    per_trial = kind.vectors_per_trial * max(op.cols, op.rows)
    return max(1, _CHUNK_FLOATS // per_trial)


def _chunk_task(args):
    op, kind, seed, start, stop = args
    return sample_base_values(op, kind, seed, np.arange(start, stop, dtype=np.int64))


def _map_chunks(op, kind, seed, n, workers):
    size = _chunk_size(op, kind)
    tasks = [(op, kind, seed, lo, min(lo + size, n)) for lo in range(0, n, size)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_task, tasks))
    else:
        parts = [_chunk_task(t) for t in tasks]
    return np.concatenate(parts)


def _base_values(op, kind, seed, n, workers):
    """Base values for streams ``0..n-1`` with degenerate draws redrawn.

    A degenerate draw at stream ``i`` is replaced by stream
    ``(attempt << 48) | i``; each replacement is logged and recorded.
    """
    values = _map_chunks(op, kind, seed, n, workers)
    bad = np.flatnonzero(np.isnan(values))
    redrawn = []
    if bad.size > _DEGENERATE_LIMIT * n:
        raise DegenerateDrawError(seed, bad.tolist())
    for attempt in range(1, _REDRAW_ATTEMPTS + 1):
        if bad.size == 0:
            break
        streams = (attempt << _REDRAW_SHIFT) | bad
        fresh = sample_base_values(op, kind, seed, streams)
        for i, s in zip(bad, streams):
            log.warning("degenerate draw: seed %d stream %d redrawn as stream %d", seed, i, s)
            redrawn.append((int(i), int(s)))
        values[bad] = fresh
        bad = bad[np.isnan(fresh)]
    if bad.size:
        raise DegenerateDrawError(seed, bad.tolist())
    return values, redrawn


def run_batch(
    op: LinearOperator,
    truth: GroundTruth,
    kind: EstimatorKind,
    theta: float,
    n_trials: int,
    base_seed: int,
    workers: int = 1,
    matrix_id: str = "matrix",
) -> TrialBatch:
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    if not (math.isfinite(theta) and theta > 0):
        raise ValueError(f"theta must be positive, got {theta}")
    base, redrawn = _base_values(op, kind, base_seed, n_trials, workers)
    return TrialBatch(kind, float(theta), matrix_id, theta * base, truth, base_seed, redrawn)


@dataclass(frozen=True)
class BenchSummary:
    matrix_id: str
    kind: str
    theta: float
    n_trials: int
    delta_real: float
    mae: float
    mean: float
    std: float
    quantiles: dict
    mae_rel: float

    def to_row(self) -> dict:
        row = {
            "matrix_id": self.matrix_id,
            "kind": self.kind,
            "theta": self.theta,
            "n_trials": self.n_trials,
            "delta_real": self.delta_real,
            "mae": self.mae,
            "mean": self.mean,
            "std": self.std,
        }
        for name, level in zip(_Q_NAMES, QUANTILE_LEVELS):
            row[name] = self.quantiles[level]
        row["mae_rel"] = self.mae_rel
        return row

    @classmethod
    def from_row(cls, row: dict) -> "BenchSummary":
        return cls(
            matrix_id=str(row["matrix_id"]),
            kind=str(row["kind"]),
            theta=float(row["theta"]),
            n_trials=int(row["n_trials"]),
            delta_real=float(row["delta_real"]),
            mae=float(row["mae"]),
            mean=float(row["mean"]),
            std=float(row["std"]),
            quantiles={lv: float(row[n]) for n, lv in zip(_Q_NAMES, QUANTILE_LEVELS)},
            mae_rel=float(row["mae_rel"]),
        )


def summarize(batch: TrialBatch) -> BenchSummary:
    v = batch.values
    norm = batch.truth.spectral_norm
    mae = float(np.mean(np.abs(v - norm)))
    qs = np.quantile(v, QUANTILE_LEVELS)
    return BenchSummary(
        matrix_id=batch.matrix_id,
        kind=batch.kind.label,
        theta=batch.theta,
        n_trials=batch.n_trials,
        delta_real=float(np.count_nonzero(v <= norm)) / v.size,
        mae=mae,
        mean=float(np.mean(v)),
        std=float(np.std(v)),
        quantiles={lv: float(q) for lv, q in zip(QUANTILE_LEVELS, qs)},
        mae_rel=mae / norm,
    )


@dataclass(frozen=True)
class ConvergencePoint:
    budget: int
    kind: str
    mean: float
    std: float
    theta_used: float
    replicates: int

    def to_dict(self) -> dict:
        return {
            "budget": self.budget,
            "kind": self.kind,
            "mean": self.mean,
            "std": self.std,
            "theta_used": self.theta_used,
            "replicates": self.replicates,
        }


def replicate_theta(kind: EstimatorKind, delta: float, replicates: int, cache: CalibrationCache | None = None) -> float:
    """Theta whose bound equals ``delta ** (1/r)``: the max of ``r`` independent
    replicates then underestimates with probability at most ``delta``."""
    target = delta ** (1.0 / replicates)
    if kind.name == "dixon":
        return (2.0 / (math.pi * target)) ** (1.0 / 3.0)
    if kind.name == "counterbalance":
        cache = cache or CalibrationCache()
        return cache.theta_for_delta(kind, target).theta
    raise ValueError("replicate calibration applies to Dixon and Counterbalance")


def convergence_curve(
    op: LinearOperator,
    truth: GroundTruth,
    kind: EstimatorKind,
    budgets,
    delta: float,
    n_trials: int,
    base_seed: int,
    workers: int = 1,
    cache: CalibrationCache | None = None,
    theta_overrides: dict | None = None,
) -> list[ConvergencePoint]:
    """Mean and std of the estimator at each matvec budget.

    Vanilla at budget ``m`` uses ``k = m`` vectors. Dixon and Counterbalance
    take the max of ``r = m/3`` replicates; trial ``i`` replicate ``j`` uses
    stream ``i*r + j``. ``theta_overrides`` maps budget to theta.
    """
    budgets = list(budgets)
    if not budgets:
        raise ValueError("budgets must be nonempty")
    for m in budgets:
        if m < 3 or m % 3:
            raise ValueError(f"matvec budget must be a positive multiple of 3, got {m}")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    theta_overrides = theta_overrides or {}
    points = []
    for m in budgets:
        if kind.name == "vanilla":
            inner = EstimatorKind.vanilla(m)
            r = 1
            theta = math.sqrt(2.0 / math.pi) * delta ** (-1.0 / m)
        else:
            inner = kind
            r = m // 3
            theta = replicate_theta(kind, delta, r, cache)
        theta = float(theta_overrides.get(m, theta))
        base, _ = _base_values(op, inner, base_seed, n_trials * r, workers)
        values = theta * base.reshape(n_trials, r).max(axis=1)
        points.append(ConvergencePoint(m, kind.label, float(values.mean()), float(values.std()), theta, r))
    return points


def export_results(summaries, path, format: str | None = None) -> None:
    """Write summaries as CSV (fixed column order) or JSON (list of rows)."""
    path = Path(path)
    fmt = format or path.suffix.lstrip(".").lower()
    rows = [s.to_row() for s in summaries]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror}") from exc


def load_results(path) -> list[BenchSummary]:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with path.open(newline="") as fh:
            return [BenchSummary.from_row(row) for row in csv.DictReader(fh)]
    return [BenchSummary.from_row(row) for row in json.loads(path.read_text())]


def histogram_data(batch: TrialBatch, bins: int) -> list[tuple[float, int]]:
    """Equal-width bins over ``[min, max]`` as ``(center, count)`` pairs.

    A constant batch has no width to split; it comes back as one bin holding
    every value, with a :class:`DegenerateHistogramWarning`.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    v = batch.values
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        warnings.warn(f"constant batch ({lo!r}); single-bin histogram", DegenerateHistogramWarning, stacklevel=2)
        return [(lo, int(v.size))]
    counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    return [(float(c), int(n)) for c, n in zip(centers, counts)]


# --- matrix zoo and config-driven campaigns ---------------------------------

ZOO = {
    "hilbert": {"type": "hilbert", "n": 100},
    "rank2": {"type": "synthetic", "sv": [1.0, 0.3], "shape": [100, 100], "seed": 1},
    "dominant01": {"type": "synthetic", "sv": [1.0] + [0.1] * 10, "shape": [100, 100], "seed": 2},
    "dominant05": {"type": "synthetic", "sv": [1.0] + [0.5] * 10, "shape": [100, 100], "seed": 3},
    "frechet": {"type": "frechet", "n": 10, "scale": -0.01},
}


def _matrix_entry(entry) -> tuple[str, dict]:
    if isinstance(entry, str):
        if entry not in ZOO:
            raise ConfigError(f"unknown matrix_id {entry!r}; known: {', '.join(sorted(ZOO))}")
        return entry, dict(ZOO[entry])
    if not isinstance(entry, dict) or "id" not in entry:
        raise ConfigError(f"matrix entry must be a zoo id or an object with an 'id': {entry!r}")
    matrix_id = entry["id"]
    spec = {k: v for k, v in entry.items() if k != "id"}
    if "type" not in spec:
        if matrix_id not in ZOO:
            raise ConfigError(f"unknown matrix_id {matrix_id!r} and no 'type' given")
        spec = {**ZOO[matrix_id], **spec}
    return matrix_id, spec


def build_zoo_matrix(matrix_id: str, spec: dict | None = None) -> tuple[LinearOperator, GroundTruth]:
    """Operator and ground truth for a zoo id or an explicit spec.

    Spec types: ``hilbert`` (n, convention), ``synthetic`` (sv, shape, seed),
    ``frechet`` (n, scale), ``file`` (path, format).
    """
    if spec is None:
        matrix_id, spec = _matrix_entry(matrix_id)
    kind = spec.get("type")
    try:
        if kind == "hilbert":
            op = hilbert_operator(int(spec["n"]), spec.get("convention", "classical"))
            return op, dense_svd(op)
        if kind == "synthetic":
            rows, cols = spec["shape"]
            return gen_synthetic(SpectrumSpec(tuple(spec["sv"]), int(rows), int(cols)), int(spec.get("seed", 0)))
        if kind == "frechet":
            op = FrechetExpmOperator(int(spec.get("n", 10)), float(spec.get("scale", -0.01)))
            return op, op.ground_truth()
        if kind == "file":
            from .matrix_io import load_matrix

            op = DenseOperator(load_matrix(spec["path"], spec.get("format")))
            return op, dense_svd(op)
    except KeyError as exc:
        raise ConfigError(f"matrix {matrix_id!r}: missing field {exc.args[0]!r}") from None
    raise ConfigError(f"matrix {matrix_id!r}: unknown type {kind!r}")


def _resolve_theta(kind: EstimatorKind, delta: float, overrides: dict, cache: CalibrationCache) -> tuple[float, str]:
    if kind.label in overrides:
        theta = float(overrides[kind.label])
        if theta < 1 and kind.name == "counterbalance":
            raise ConfigError("counterbalance theta override must be >= 1")
        return theta, "override"
    entry = cache.theta_for_delta(kind, delta)
    return entry.theta, entry.method


def _validate_config(config: dict) -> None:
    for key in ("matrices", "estimators", "delta", "seed"):
        if key not in config:
            raise ConfigError(f"config is missing {key!r}")
    delta = config["delta"]
    if not (isinstance(delta, (int, float)) and 0 < delta < 1):
        raise ConfigError(f"delta must lie in (0, 1), got {delta!r}")


def run_campaign(
    config: dict,
    out_dir,
    workers: int = 1,
    full: bool = False,
    force: bool = False,
    cache: CalibrationCache | None = None,
) -> list[BenchSummary]:
    """Run every (matrix, estimator) batch of a config and write the artifacts.

    Files: ``summaries.csv``, ``summaries.json``, ``histograms.json``,
    ``convergence.json`` (when configured) and ``manifest.json`` with the
    full config, seeds and theta provenance. Outputs do not depend on
    ``workers``.
    """
    _validate_config(config)
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise OutputCollisionError(f"output directory {out_dir} is not empty (use --force to overwrite)")
    cache = cache or CalibrationCache()
    delta = float(config["delta"])
    seed = int(config["seed"])
    overrides = dict(config.get("theta_overrides", {}))
    default_n = int(config.get("full_n_trials", 1_000_000) if full else config.get("n_trials", 100_000))
    kinds = [EstimatorKind.parse(k) for k in config["estimators"]]
    bins = int(config.get("histogram_bins", 50))

    matrices = [_matrix_entry(e) for e in config["matrices"]]
    built = {mid: (spec, build_zoo_matrix(mid, spec)) for mid, spec in matrices}

    thetas = {}
    for kind in kinds:
        thetas[kind.label] = _resolve_theta(kind, delta, overrides, cache)

    summaries, histograms, provenance = [], [], []
    for mid, (spec, (op, truth)) in built.items():
        n = int(spec.get("n_trials", default_n)) if not full else int(spec.get("full_n_trials", default_n))
        for kind in kinds:
            theta, method = thetas[kind.label]
            log.info("batch %s/%s theta=%.6g N=%d", mid, kind.label, theta, n)
            batch = run_batch(op, truth, kind, theta, n, seed, workers, mid)
            summaries.append(summarize(batch))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateHistogramWarning)
                hist = histogram_data(batch, bins)
            histograms.append({"matrix_id": mid, "kind": kind.label, "bins": [list(b) for b in hist]})
            provenance.append({
                "matrix_id": mid, "kind": kind.label, "theta": theta, "theta_method": method,
                "base_seed": seed, "n_trials": n, "redrawn_streams": batch.redrawn_streams,
            })

    convergence = []
    conv_cfg = config.get("convergence")
    if conv_cfg:
        conv_n = int(conv_cfg.get("n_trials", 10_000))
        budgets = conv_cfg.get("budgets", [3, 6, 9, 12])
        for entry in conv_cfg.get("matrices", []):
            mid, spec = _matrix_entry(entry)
            op, truth = built[mid][1] if mid in built else build_zoo_matrix(mid, spec)
            for kind in kinds:
                pts = convergence_curve(op, truth, kind, budgets, delta, conv_n, seed, workers, cache)
                convergence.append({"matrix_id": mid, "points": [p.to_dict() for p in pts]})

    out_dir.mkdir(parents=True, exist_ok=True)
    export_results(summaries, out_dir / "summaries.csv", "csv")
    export_results(summaries, out_dir / "summaries.json", "json")
    (out_dir / "histograms.json").write_text(json.dumps(histograms, indent=1) + "\n")
    if conv_cfg:
        doc = {
            "theta_rule": "Vanilla(k=m); Dixon/Counterbalance: max of r=m/3 replicates with bound(theta) = delta**(1/r)",
            "curves": convergence,
        }
        (out_dir / "convergence.json").write_text(json.dumps(doc, indent=1) + "\n")
    manifest = {"config": config, "full": full, "delta": delta, "seed": seed, "batches": provenance}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return summaries
