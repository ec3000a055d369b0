"""Benchmark orchestration and trajectory metrics.

Metrics
-------
- is_converged: a run converged when ANY recorded iterate comes within
  relative tolerance rho of the exact optimum (|f - f*| <= rho * |f*|).
  The starting point does not count; iterations do.
- run_lipschitz: per-run local Lipschitz estimate, the max over consecutive
  trajectory points (starting point included) of |f_next - f_prev| divided
  by the Euclidean parameter distance; pairs closer than 1e-12 in parameter
  space are skipped.
- lipschitz_estimate: filters a run set to those converged at ``stop_rho``
  (1% by default), requires at least half the runs to survive (raising
  InsufficientDataError otherwise, with counts in the message), then
  summarizes per-run estimates by average / population std / median / IQR.
  Quartiles interpolate linearly between order statistics (numpy's default
  rule).  ``pooled=True`` switches to summarizing the pooled population of
  per-step ratios across the filtered runs instead of per-run maxima.
- centroid_gap: absolute difference between the means of two value clouds.

Protocol
--------
run_benchmark executes, for every (problem, method, restart) triple, two
runs from the same seeded uniform starting angles in [-pi, pi]^{2p}:
one capped-iterations-only leg and one leg that additionally stops at the
3% relative tolerance.  Restart seeds derive from content labels (problem
key, method, restart index), never from scheduling, so any worker count
produces the same records; aggregation is a sorted deterministic fold.
Iteration caps come from each method family's published default unless
overridden.  The Lipschitz block of a report is computed from the capped
runs truncated to the first ``lp_cap`` iterations (trajectories are
deterministic given the seed, so the truncation equals a shorter run).

Reports
-------
BenchmarkReport holds per-method aggregates; every number is recomputable
from the persisted run records alone (aggregate_method is a pure function
of them).  Wallclock-derived fields are machine-dependent: serializers take
include_timing=False to omit them, which is the canonical form compared
across worker counts.  Every persisted file starts with a schema-version
field.  Failed runs stay in the record set (their failure is visible) but
drop out of the documented per-field filters.

File formats: run records as JSON lines after one JSON header line;
reports as a single JSON document; flat tables as TSV whose first line is
``# schema_version=N`` and second line the column header.  Landscape grids
are plain numeric text with ``key value`` header lines.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np

from .optimizers import RunRecord, StopRule, method_spec, run, validate_hyper
from .problems import WeightedGraph, brute_force, from_text, nearest_optimal_distance, to_text
from .seeding import derive_seed, stream
from .simulator import Evaluator

BENCH_SCHEMA_VERSION = 1

MIN_STEP_NORM = 1e-12
RHO_DEFAULT = 0.03
LP_RHO_DEFAULT = 0.01
LP_CAP_DEFAULT = 20


class InsufficientDataError(RuntimeError):
    """Raised when a metric's run filter leaves too little data."""


# ----------------------------------------------------------------------
# convergence and Lipschitz metrics


def is_converged(record: RunRecord, truth, rho: float = RHO_DEFAULT, cap: int | None = None) -> bool:
    """True iff some recorded iterate is within rho * |f*| of the optimum."""
    if not rho > 0:
        raise ValueError("rho must be > 0")
    f_star = float(truth.optimal_value)
    fs = record.fs if cap is None else record.fs[:cap]
    tol = rho * abs(f_star)
    return any(abs(f - f_star) <= tol for f in fs)


def iterations_to_tolerance(
    record: RunRecord, truth, rho: float = RHO_DEFAULT, cap: int | None = None
) -> int | None:
    """1-based index of the first iterate within tolerance, or None."""
    f_star = float(truth.optimal_value)
    tol = rho * abs(f_star)
    fs = record.fs if cap is None else record.fs[:cap]
    for k, f in enumerate(fs):
        if abs(f - f_star) <= tol:
            return k + 1
    return None


def _trajectory(record: RunRecord, cap: int | None):
    thetas = [record.theta0] + list(record.thetas if cap is None else record.thetas[:cap])
    fs = [record.f0] + list(record.fs if cap is None else record.fs[:cap])
    return thetas, fs


def step_ratios(record: RunRecord, cap: int | None = None) -> list[float]:
    """|Delta f| / ||Delta theta|| over consecutive trajectory points."""
    thetas, fs = _trajectory(record, cap)
    out = []
    for k in range(len(fs) - 1):
        dth = float(np.linalg.norm(np.asarray(thetas[k + 1]) - np.asarray(thetas[k])))
        if dth < MIN_STEP_NORM:
            continue
        out.append(abs(fs[k + 1] - fs[k]) / dth)
    return out


def run_lipschitz(record: RunRecord, cap: int | None = None) -> float | None:
    """Per-run local Lipschitz estimate; None when no pair qualifies."""
    ratios = step_ratios(record, cap)
    return max(ratios) if ratios else None


@dataclass(frozen=True)
class LipschitzStats:
    average: float
    std: float
    median: float
    iqr: float
    n_used: int
    n_total: int

    def __post_init__(self) -> None:
        for name in ("average", "std", "median", "iqr"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0")

    @classmethod
    def from_samples(cls, samples, n_total: int) -> "LipschitzStats":
        # Sorting first makes every statistic exactly permutation-invariant
        # (floating-point reductions are order-sensitive otherwise).
        arr = np.sort(np.asarray(list(samples), dtype=float))
        if arr.size == 0:
            raise ValueError("no samples")
        q25, q75 = np.quantile(arr, [0.25, 0.75])
        return cls(
            average=float(np.mean(arr)),
            std=float(np.std(arr)),
            median=float(np.median(arr)),
            iqr=float(q75 - q25),
            n_used=int(arr.size),
            n_total=int(n_total),
        )

    def to_dict(self) -> dict:
        return {
            "average": self.average,
            "std": self.std,
            "median": self.median,
            "iqr": self.iqr,
            "n_used": self.n_used,
            "n_total": self.n_total,
        }


def lipschitz_estimate(
    records,
    truth,
    stop_rho: float = LP_RHO_DEFAULT,
    cap: int | None = None,
    pooled: bool = False,
) -> LipschitzStats:
    """Trajectory-slope statistics over a run set sharing one problem.

    Runs not converged at ``stop_rho`` (within the first ``cap`` iterations
    when given) are excluded; fewer than half surviving raises
    InsufficientDataError.
    """
    records = list(records)
    if not records:
        raise InsufficientDataError("no runs supplied")
    kept = [r for r in records if not r.failed and is_converged(r, truth, stop_rho, cap)]
    if 2 * len(kept) < len(records):
        raise InsufficientDataError(
            f"only {len(kept)}/{len(records)} runs converged at "
            f"{stop_rho:.0%}; need at least half"
        )
    if pooled:
        samples: list[float] = []
        for r in kept:
            samples.extend(step_ratios(r, cap))
    else:
        samples = [lhat for r in kept if (lhat := run_lipschitz(r, cap)) is not None]
    if not samples:
        raise InsufficientDataError("no usable trajectory steps in the filtered runs")
    return LipschitzStats.from_samples(samples, n_total=len(records))


def centroid_gap(cloud_a, cloud_b) -> float:
    """Absolute difference of the two clouds' means."""
    a = np.asarray(list(cloud_a), dtype=float)
    b = np.asarray(list(cloud_b), dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("clouds must be non-empty")
    return abs(float(np.mean(b)) - float(np.mean(a)))


# ----------------------------------------------------------------------
# landscape scans


def scan_directions(n_params: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Two seeded random unit directions (independent, not orthogonalized)."""
    rng = stream(seed, "scan", "directions")
    d1 = rng.standard_normal(n_params)
    d2 = rng.standard_normal(n_params)
    return d1 / np.linalg.norm(d1), d2 / np.linalg.norm(d2)


def landscape_scan(
    graph: WeightedGraph,
    center,
    d1,
    d2,
    grid: int = 300,
    span: float = 1.0,
    n_layers: int = 1,
) -> np.ndarray:
    """Objective values on a 2-D slice through ``center``.

    Entry [i, j] holds f(center + a_i * d1 + b_j * d2) with a and b running
    over ``grid`` evenly spaced points in [-span, span] (numpy linspace, so
    grid=1 degenerates to the lower corner a = b = -span).  Rows follow d1,
    columns d2; exact expectations, no sampling.
    """
    if grid < 1:
        raise ValueError("grid must be >= 1")
    center = np.asarray(center, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    ev = Evaluator.for_graph(graph, n_layers=n_layers)
    coords = np.linspace(-span, span, grid)
    out = np.empty((grid, grid))
    for i, a in enumerate(coords):
        base = center + a * d1
        for j, b in enumerate(coords):
            out[i, j] = ev.expectation(base + b * d2)
    return out


def save_grid(path, grid: np.ndarray, meta: dict | None = None) -> None:
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    with open(path, "w") as fh:
        fh.write(f"schema_version {BENCH_SCHEMA_VERSION}\n")
        fh.write(f"rows {grid.shape[0]}\n")
        fh.write(f"cols {grid.shape[1]}\n")
        for key in sorted(meta or {}):
            fh.write(f"{key} {meta[key]}\n")
        fh.write("data\n")
        for row in grid:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_grid(path) -> tuple[np.ndarray, dict]:
    meta: dict = {}
    rows: list[list[float]] = []
    in_data = False
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if in_data:
                rows.append([float(v) for v in line.split()])
            elif line == "data":
                in_data = True
            else:
                key, _, val = line.partition(" ")
                meta[key] = val
    return np.array(rows, dtype=float), meta


# ----------------------------------------------------------------------
# benchmark protocol


@dataclass(frozen=True)
class BenchProtocol:
    """Everything defining one benchmark sweep besides problems/methods."""

    restarts: int = 20
    shots: int | None = 512
    sample_shots: int = 512
    rho: float = RHO_DEFAULT
    lp_rho: float = LP_RHO_DEFAULT
    lp_cap: int = LP_CAP_DEFAULT
    n_layers: int = 1
    max_iterations: int | None = None  # None -> per-family default

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not 0 < self.rho:
            raise ValueError("rho must be > 0")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")

    def cap_for(self, method: str) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return method_spec(method).default_max_iterations


def problem_key(graph: WeightedGraph, index: int) -> str:
    """Stable content label for seed derivation (falls back to position)."""
    if graph.seed is not None:
        return f"n{graph.n_vertices}s{graph.seed}"
    return f"n{graph.n_vertices}i{index}"


def _restart_theta0(master: int, key: str, method: str, restart: int, n_params: int) -> np.ndarray:
    rng = stream(master, "bench", key, method, restart, "theta0")
    return rng.uniform(-np.pi, np.pi, n_params)


def bench_single(
    graph: WeightedGraph,
    method: str,
    restart: int,
    master_seed: int,
    protocol: BenchProtocol,
    key: str,
    truth=None,
    hyper: dict | None = None,
) -> tuple[RunRecord, RunRecord]:
    """One restart's two protocol legs (cap-only, tolerance-stop)."""
    truth = truth if truth is not None else brute_force(graph)
    cap = protocol.cap_for(method)
    theta0 = _restart_theta0(master_seed, key, method, restart, 2 * protocol.n_layers)
    run_seed = derive_seed(master_seed, "bench", key, method, restart)
    ev_seed = derive_seed(master_seed, "bench", key, method, restart, "shots")
    legs = []
    for stop in (
        StopRule(max_iterations=cap),
        StopRule(max_iterations=cap, tolerance_mode="relative", rho=protocol.rho, reference=truth),
    ):
        ev = Evaluator.for_graph(
            graph, n_layers=protocol.n_layers, shots=protocol.shots, seed=ev_seed
        )
        legs.append(
            run(
                method,
                ev,
                theta0,
                hyper=hyper,
                stop=stop,
                seed=run_seed,
                sample_shots=protocol.sample_shots,
            )
        )
    return legs[0], legs[1]


def _worker(task) -> tuple[tuple[int, str, int], tuple[dict, dict]]:
    (graph_text, prob_idx, key, method, restart, master_seed, protocol, hyper) = task
    graph = from_text(graph_text)
    cap_rec, tol_rec = bench_single(
        graph, method, restart, master_seed, protocol, key, hyper=hyper
    )
    return (prob_idx, method, restart), (cap_rec.to_dict(), tol_rec.to_dict())


# ----------------------------------------------------------------------
# aggregation


def _mean(values) -> float | None:
    # fsum over sorted values: exact, so run order can never change a report
    vals = sorted(v for v in values if v is not None and np.isfinite(v))
    return math.fsum(vals) / len(vals) if vals else None


@dataclass
class MethodAggregate:
    """Per-method summary; documented filter stated per field."""

    method: str
    n_restarts: int
    n_failed: int
    # all capped runs (failures excluded):
    convergence_ratio: float
    mean_final_f: float | None
    mean_best_f: float | None
    mean_qcalls: float | None
    mean_qcalls_per_iteration: float | None
    mean_hamming: float | None
    # tolerance-stop legs, converged runs only:
    mean_iterations_to_convergence: float | None
    mean_qcalls_to_convergence: float | None
    # capped runs truncated to the lp protocol, 1% filter:
    lipschitz: LipschitzStats | None
    lipschitz_note: str | None
    # timing (machine-dependent, canonical form omits):
    mean_walltime: float | None = None
    mean_time_per_iteration_to_convergence: float | None = None

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "method": self.method,
            "n_restarts": self.n_restarts,
            "n_failed": self.n_failed,
            "convergence_ratio": self.convergence_ratio,
            "mean_final_f": self.mean_final_f,
            "mean_best_f": self.mean_best_f,
            "mean_qcalls": self.mean_qcalls,
            "mean_qcalls_per_iteration": self.mean_qcalls_per_iteration,
            "mean_hamming": self.mean_hamming,
            "mean_iterations_to_convergence": self.mean_iterations_to_convergence,
            "mean_qcalls_to_convergence": self.mean_qcalls_to_convergence,
            "lipschitz": None if self.lipschitz is None else self.lipschitz.to_dict(),
            "lipschitz_note": self.lipschitz_note,
        }
        if include_timing:
            out["mean_walltime"] = self.mean_walltime
            out["mean_time_per_iteration_to_convergence"] = (
                self.mean_time_per_iteration_to_convergence
            )
        return out


def aggregate_method(
    method: str,
    cap_records: list[RunRecord],
    tol_records: list[RunRecord],
    truth,
    protocol: BenchProtocol,
) -> MethodAggregate:
    """Pure fold of one method's records into its report row."""
    n = len(cap_records)
    ok_cap = [r for r in cap_records if not r.failed]
    ok_tol = [r for r in tol_records if not r.failed]
    converged_tol = [r for r in ok_tol if r.converged]
    ratio = sum(is_converged(r, truth, protocol.rho) for r in ok_cap) / n if n else 0.0

    hammings = [
        nearest_optimal_distance(r.modal_bitstring, truth)
        for r in ok_cap
        if r.modal_bitstring is not None
    ]
    try:
        lp = lipschitz_estimate(ok_cap, truth, protocol.lp_rho, cap=protocol.lp_cap)
        lp_note = None
    except InsufficientDataError as exc:
        lp = None
        lp_note = str(exc)

    return MethodAggregate(
        method=method,
        n_restarts=n,
        n_failed=n - len(ok_cap),
        convergence_ratio=ratio,
        mean_final_f=_mean([(r.fs[-1] if r.fs else r.f0) for r in ok_cap]),
        mean_best_f=_mean([r.best_f for r in ok_cap]),
        mean_qcalls=_mean([r.total_qcalls for r in ok_cap]),
        mean_qcalls_per_iteration=_mean(
            [r.total_qcalls / r.iterations for r in ok_cap if r.iterations > 0]
        ),
        mean_hamming=_mean(hammings) if hammings else None,
        mean_iterations_to_convergence=_mean(
            [r.iterations_to_convergence for r in converged_tol]
        ),
        mean_qcalls_to_convergence=_mean([r.total_qcalls for r in converged_tol]),
        lipschitz=lp,
        lipschitz_note=lp_note,
        mean_walltime=_mean([r.walltime for r in ok_cap]),
        mean_time_per_iteration_to_convergence=_mean(
            [
                r.walltime / r.iterations_to_convergence
                for r in converged_tol
                if r.iterations_to_convergence
            ]
        ),
    )


@dataclass
class BenchmarkReport:
    problem: str
    n_vertices: int
    optimal_value: float
    protocol: BenchProtocol
    seed: int
    aggregates: dict[str, MethodAggregate]
    records: dict[str, tuple[list[RunRecord], list[RunRecord]]] = field(repr=False, default_factory=dict)

    def to_dict(self, include_timing: bool = True) -> dict:
        return {
            "schema_version": BENCH_SCHEMA_VERSION,
            "problem": self.problem,
            "n_vertices": self.n_vertices,
            "optimal_value": self.optimal_value,
            "protocol": {
                "restarts": self.protocol.restarts,
                "shots": self.protocol.shots,
                "sample_shots": self.protocol.sample_shots,
                "rho": self.protocol.rho,
                "lp_rho": self.protocol.lp_rho,
                "lp_cap": self.protocol.lp_cap,
                "n_layers": self.protocol.n_layers,
                "max_iterations": self.protocol.max_iterations,
            },
            "seed": self.seed,
            "methods": {
                m: self.aggregates[m].to_dict(include_timing) for m in sorted(self.aggregates)
            },
        }


def run_benchmark(
    problems,
    methods,
    protocol: BenchProtocol = BenchProtocol(),
    seed: int = 0,
    workers: int = 1,
    hyper_overrides: dict[str, dict] | None = None,
    reuse: dict | None = None,
) -> list[BenchmarkReport]:
    """Full sweep: every (problem, method, restart), both protocol legs.

    ``workers`` > 1 fans restarts out across processes; results fold in
    sorted task order so the worker count never changes any output.
    ``hyper_overrides`` maps method id -> partial hyper dict (validated
    here, before any run starts). ``reuse`` maps (problem key, method,
    restart) -> (cap record, tol record) from an earlier run of the SAME
    sweep; those restarts are folded without recomputation, which is sound
    because every run is deterministic in its config and seed.
    """
    problems = list(problems)
    methods = list(methods)
    overrides = hyper_overrides or {}
    reuse = reuse or {}
    for m in methods:
        method_spec(m)  # unknown method fails fast
        if m in overrides:
            validate_hyper(m, overrides[m])
    tasks = []
    results: dict[tuple[int, str, int], tuple[dict, dict]] = {}
    for idx, graph in enumerate(problems):
        key = problem_key(graph, idx)
        text = to_text(graph)
        for method in methods:
            for restart in range(protocol.restarts):
                done = reuse.get((key, method, restart))
                if done is not None:
                    results[(idx, method, restart)] = (done[0].to_dict(), done[1].to_dict())
                    continue
                tasks.append(
                    (text, idx, key, method, restart, seed, protocol, overrides.get(method))
                )

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_worker, t) for t in tasks]
            for fut in as_completed(futures):
                key_, payload = fut.result()
                results[key_] = payload
    else:
        for t in tasks:
            key_, payload = _worker(t)
            results[key_] = payload

    reports = []
    for idx, graph in enumerate(problems):
        truth = brute_force(graph)
        key = problem_key(graph, idx)
        aggregates = {}
        records = {}
        for method in methods:
            cap_recs = []
            tol_recs = []
            for restart in range(protocol.restarts):
                cap_d, tol_d = results[(idx, method, restart)]
                cap_recs.append(RunRecord.from_dict(cap_d))
                tol_recs.append(RunRecord.from_dict(tol_d))
            aggregates[method] = aggregate_method(method, cap_recs, tol_recs, truth, protocol)
            records[method] = (cap_recs, tol_recs)
        reports.append(
            BenchmarkReport(
                problem=key,
                n_vertices=graph.n_vertices,
                optimal_value=float(truth.optimal_value),
                protocol=protocol,
                seed=seed,
                aggregates=aggregates,
                records=records,
            )
        )
    return reports


# ----------------------------------------------------------------------
# persistence

RUNS_COLUMNS = (
    "problem",
    "method",
    "leg",
    "restart",
    "seed",
    "failed",
    "converged",
    "iterations",
    "iterations_to_convergence",
    "f0",
    "final_f",
    "best_f",
    "total_qcalls",
    "lipschitz",
    "modal_bitstring",
    "walltime",
)

AGGREGATE_COLUMNS = (
    "problem",
    "method",
    "n_restarts",
    "n_failed",
    "convergence_ratio",
    "mean_final_f",
    "mean_best_f",
    "mean_qcalls",
    "mean_qcalls_per_iteration",
    "mean_hamming",
    "mean_iterations_to_convergence",
    "mean_qcalls_to_convergence",
    "lipschitz_average",
    "lipschitz_std",
    "lipschitz_median",
    "lipschitz_iqr",
    "mean_walltime",
    "mean_time_per_iteration_to_convergence",
)


def save_runs_jsonl(path, reports: list[BenchmarkReport], include_timing: bool = True) -> None:
    """All run records, one JSON line each, after a JSON header line."""
    with open(path, "w") as fh:
        fh.write(json.dumps({"schema_version": BENCH_SCHEMA_VERSION, "kind": "runs"}) + "\n")
        for report in reports:
            for method in sorted(report.records):
                cap_recs, tol_recs = report.records[method]
                for leg, recs in (("cap", cap_recs), ("tol", tol_recs)):
                    for restart, rec in enumerate(recs):
                        row = {
                            "problem": report.problem,
                            "leg": leg,
                            "restart": restart,
                            "record": rec.to_dict(include_timing=include_timing),
                        }
                        fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_runs_jsonl(path) -> list[dict]:
    """Rows as dicts with 'record' parsed back into RunRecord."""
    out = []
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("schema_version") != BENCH_SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {header.get('schema_version')}")
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            row["record"] = RunRecord.from_dict(row["record"])
            out.append(row)
    return out


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def runs_table(reports: list[BenchmarkReport], include_timing: bool = True) -> str:
    """One TSV row per run; column order is RUNS_COLUMNS."""
    cols = [c for c in RUNS_COLUMNS if include_timing or c != "walltime"]
    lines = [f"# schema_version={BENCH_SCHEMA_VERSION}", "\t".join(cols)]
    for report in reports:
        for method in sorted(report.records):
            cap_recs, tol_recs = report.records[method]
            for leg, recs in (("cap", cap_recs), ("tol", tol_recs)):
                for restart, rec in enumerate(recs):
                    row = {
                        "problem": report.problem,
                        "method": method,
                        "leg": leg,
                        "restart": restart,
                        "seed": rec.seed,
                        "failed": rec.failed,
                        "converged": rec.converged,
                        "iterations": rec.iterations,
                        "iterations_to_convergence": rec.iterations_to_convergence,
                        "f0": rec.f0,
                        "final_f": rec.fs[-1] if rec.fs else rec.f0,
                        "best_f": rec.best_f,
                        "total_qcalls": rec.total_qcalls,
                        "lipschitz": run_lipschitz(rec),
                        "modal_bitstring": rec.modal_bitstring,
                        "walltime": rec.walltime,
                    }
                    lines.append("\t".join(_fmt(row[c]) for c in cols))
    return "\n".join(lines) + "\n"


def aggregates_table(reports: list[BenchmarkReport], include_timing: bool = True) -> str:
    """One TSV row per (problem, method) aggregate; order AGGREGATE_COLUMNS."""
    timing_cols = {"mean_walltime", "mean_time_per_iteration_to_convergence"}
    cols = [c for c in AGGREGATE_COLUMNS if include_timing or c not in timing_cols]
    lines = [f"# schema_version={BENCH_SCHEMA_VERSION}", "\t".join(cols)]
    for report in reports:
        for method in sorted(report.aggregates):
            agg = report.aggregates[method]
            d = agg.to_dict(include_timing=True)
            d["problem"] = report.problem
            lp = agg.lipschitz
            d["lipschitz_average"] = lp.average if lp else None
            d["lipschitz_std"] = lp.std if lp else None
            d["lipschitz_median"] = lp.median if lp else None
            d["lipschitz_iqr"] = lp.iqr if lp else None
            lines.append("\t".join(_fmt(d[c]) for c in cols))
    return "\n".join(lines) + "\n"


def save_report_json(path, reports: list[BenchmarkReport], include_timing: bool = True) -> None:
    payload = {
        "schema_version": BENCH_SCHEMA_VERSION,
        "reports": [r.to_dict(include_timing=include_timing) for r in reports],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
