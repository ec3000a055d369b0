"""Command-line front end: fixtures, single runs, benchmark sweeps, tuning,
landscape scans.

    qopt-bench generate --n 3 --seed 32 --out g3.txt
    qopt-bench run --problem g3.txt --method sp_bfgs --seed 7 --out runs/r1
    qopt-bench bench --config exp.ini --out runs/sweep --workers 4
    qopt-bench tune --problem g3.txt --method sp_bfgs --budget 30 --out runs/t1
    qopt-bench scan --problem g3.txt --grid 64 --out runs/scan1

Every command is deterministic given its flags/config plus master seed (in
exact shot mode), never mutates an input file, and writes its outputs, the
fully resolved configuration (effective.ini) and a manifest into one output
directory.  Master seeds are split per (problem, method, restart) by hashed
labels, so adding a method or problem never shifts any other run's stream.

Exit codes:

    0  success
    2  configuration error (bad flags, bad config file, schema violation)
    3  numeric failure (a run failed or produced non-finite values)
    4  insufficient data (a required metric's run filter kept too few runs)

Bench config file (INI; unknown sections or keys are rejected)::

    [problem]
    n = 3 5              # generate these sizes (or: path = a.txt b.txt)
    seed = 32
    density = 1.0
    weight_low = 10
    weight_high = 100

    [run]
    methods = bfgs sp_bfgs dfp   # or: all
    seed = 7
    workers = 0          # 0 -> all available cores
    out = runs/sweep     # --out flag overrides

    [ansatz]
    layers = 1
    shots = exact        # or a positive shot count
    sample_shots = 512

    [protocol]
    restarts = 20
    rho = 0.03
    lp_rho = 0.01
    lp_cap = 20
    # max_iterations = 60   # omit for per-family defaults

    [hyper.sp_bfgs]      # optional per-method overrides
    n0 = 20
"""

import argparse
import configparser
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bench import (
    BenchProtocol,
    InsufficientDataError,
    aggregates_table,
    landscape_scan,
    problem_key,
    run_benchmark,
    runs_table,
    save_grid,
    save_report_json,
    save_runs_jsonl,
    scan_directions,
)
from .optimizers import (
    METHOD_IDS,
    RunRecord,
    StopRule,
    method_spec,
    run,
    validate_hyper,
)
from .problems import WeightedGraph, brute_force, generate_problem, load, save
from .seeding import derive_seed, stream
from .simulator import Evaluator
from .tuner import tune_method

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_NO_DATA = 4

SCHEMA_VERSION = 1


class ConfigError(Exception):
    """Anything wrong with flags or config files; exits with EXIT_CONFIG."""


# ----------------------------------------------------------------------
# small IO helpers


def _ensure_outdir(path_str: str) -> Path:
    path = Path(path_str)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ini_str(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_ini(path, sections: dict) -> None:
    cp = configparser.ConfigParser(interpolation=None)
    for name, body in sections.items():
        cp[name] = {k: _ini_str(v) for k, v in body.items() if v is not None}
    with open(path, "w") as fh:
        cp.write(fh)


def _write_manifest(outdir: Path, command: str, config: dict, outputs: list[str]) -> None:
    # No timestamps: an identical rerun must leave identical bytes behind.
    _write_json(
        outdir / "manifest.json",
        {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "config": config,
            "outputs": sorted(set(outputs) | {"effective.ini", "manifest.json"}),
        },
    )


def _read_ini(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cp


def _check_keys(section: str, present, allowed: set) -> None:
    extra = sorted(set(present) - allowed)
    if extra:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(extra)}")


def _typed(section: str, key: str, raw: str, cast, what: str):
    try:
        return cast(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"[{section}] {key} = {raw!r}: expected {what}") from None


def _parse_shots(raw) -> int | None:
    """'exact' -> None (statevector expectations), else a positive count."""
    if raw is None or raw == "exact":
        return None
    try:
        shots = int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"shots must be 'exact' or a positive integer, got {raw!r}") from None
    if shots < 1:
        raise ConfigError(f"shots must be >= 1, got {shots}")
    return shots


def _load_problem(path) -> WeightedGraph:
    try:
        return load(path)
    except OSError as exc:
        raise ConfigError(f"cannot read problem file {path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"bad problem file {path}: {exc}") from None


def _check_method(method: str) -> str:
    if method not in METHOD_IDS:
        raise ConfigError(f"unknown method {method!r}; valid: {', '.join(METHOD_IDS)}")
    return method


def _load_hyper_file(path, method: str) -> dict:
    """INI with a single [hyper] section; values must satisfy the schema."""
    cp = _read_ini(path)
    if cp.sections() != ["hyper"]:
        raise ConfigError(f"{path}: expected exactly one [hyper] section")
    hyper = {}
    for key, raw in cp["hyper"].items():
        hyper[key] = _typed("hyper", key, raw, float, "a number")
    try:
        validate_hyper(method, hyper)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return hyper


def _parse_floats(raw: str, what: str) -> list[float]:
    try:
        return [float(tok) for tok in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {raw!r}") from None


# ----------------------------------------------------------------------
# bench experiment config


_PROBLEM_KEYS = {"path", "n", "seed", "density", "weight_low", "weight_high", "degree"}
_RUN_KEYS = {"methods", "seed", "workers", "out"}
_ANSATZ_KEYS = {"layers", "shots", "sample_shots"}
_PROTOCOL_KEYS = {"restarts", "rho", "lp_rho", "lp_cap", "max_iterations"}


@dataclass
class ExperimentConfig:
    """One fully resolved bench sweep; validated before any computation."""

    graphs: list[WeightedGraph]
    methods: list[str]
    protocol: BenchProtocol
    seed: int
    workers: int
    out: str | None
    hyper_overrides: dict[str, dict]
    resolved: dict  # section -> {key: value}; echoed to effective.ini


def parse_bench_config(
    path,
    out_flag: str | None = None,
    workers_flag: int | None = None,
    seed_flag: int | None = None,
) -> ExperimentConfig:
    cp = _read_ini(path)
    for sec in cp.sections():
        if sec in ("problem", "run", "ansatz", "protocol") or sec.startswith("hyper."):
            continue
        raise ConfigError(f"unknown section [{sec}]")
    for required in ("problem", "run"):
        if required not in cp:
            raise ConfigError(f"missing [{required}] section")

    # [problem]
    p = cp["problem"]
    _check_keys("problem", p, _PROBLEM_KEYS)
    if "path" in p and "n" in p:
        raise ConfigError("[problem] give either path or n, not both")
    if "path" in p:
        paths = p["path"].split()
        if not paths:
            raise ConfigError("[problem] path is empty")
        graphs = [_load_problem(q) for q in paths]
        problem_echo: dict = {"path": " ".join(paths)}
    elif "n" in p:
        sizes = [_typed("problem", "n", tok, int, "integers") for tok in p["n"].split()]
        if not sizes:
            raise ConfigError("[problem] n is empty")
        gseed = _typed("problem", "seed", p.get("seed", "0"), int, "an integer")
        density = _typed("problem", "density", p.get("density", "0.5"), float, "a number")
        lo = _typed("problem", "weight_low", p.get("weight_low", "0.1"), float, "a number")
        hi = _typed("problem", "weight_high", p.get("weight_high", "1.0"), float, "a number")
        degree = (
            _typed("problem", "degree", p["degree"], int, "an integer") if "degree" in p else None
        )
        try:
            graphs = [
                generate_problem(n, seed=gseed, density=density, weight_range=(lo, hi), degree=degree)
                for n in sizes
            ]
        except (ValueError, RuntimeError) as exc:
            raise ConfigError(f"[problem] {exc}") from None
        problem_echo = {
            "n": " ".join(str(n) for n in sizes),
            "seed": gseed,
            "density": density,
            "weight_low": lo,
            "weight_high": hi,
        }
        if degree is not None:
            problem_echo["degree"] = degree
    else:
        raise ConfigError("[problem] needs either path or n")

    # [run]
    r = cp["run"]
    _check_keys("run", r, _RUN_KEYS)
    if "methods" not in r:
        raise ConfigError("[run] methods is required")
    tokens = r["methods"].replace(",", " ").split()
    if tokens == ["all"]:
        methods = list(METHOD_IDS)
    else:
        methods = [_check_method(tok.replace("-", "_")) for tok in tokens]
    if len(set(methods)) != len(methods):
        raise ConfigError("[run] methods contains duplicates")
    seed = seed_flag if seed_flag is not None else _typed("run", "seed", r.get("seed", "0"), int, "an integer")
    workers = (
        workers_flag
        if workers_flag is not None
        else _typed("run", "workers", r.get("workers", "0"), int, "an integer")
    )
    if workers < 0:
        raise ConfigError("[run] workers must be >= 0 (0 = all cores)")
    out = out_flag if out_flag is not None else r.get("out")

    # [ansatz]
    a = cp["ansatz"] if "ansatz" in cp else {}
    _check_keys("ansatz", a, _ANSATZ_KEYS)
    layers = _typed("ansatz", "layers", a.get("layers", "1"), int, "an integer")
    shots = _parse_shots(a.get("shots", "exact"))
    sample_shots = _typed("ansatz", "sample_shots", a.get("sample_shots", "512"), int, "an integer")

    # [protocol]
    q = cp["protocol"] if "protocol" in cp else {}
    _check_keys("protocol", q, _PROTOCOL_KEYS)
    try:
        protocol = BenchProtocol(
            restarts=_typed("protocol", "restarts", q.get("restarts", "20"), int, "an integer"),
            shots=shots,
            sample_shots=sample_shots,
            rho=_typed("protocol", "rho", q.get("rho", "0.03"), float, "a number"),
            lp_rho=_typed("protocol", "lp_rho", q.get("lp_rho", "0.01"), float, "a number"),
            lp_cap=_typed("protocol", "lp_cap", q.get("lp_cap", "20"), int, "an integer"),
            n_layers=layers,
            max_iterations=(
                _typed("protocol", "max_iterations", q["max_iterations"], int, "an integer")
                if "max_iterations" in q
                else None
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"[protocol] {exc}") from None

    # [hyper.<method>]
    hyper_overrides: dict[str, dict] = {}
    for sec in cp.sections():
        if not sec.startswith("hyper."):
            continue
        m = _check_method(sec[len("hyper.") :])
        override = {k: _typed(sec, k, v, float, "a number") for k, v in cp[sec].items()}
        try:
            validate_hyper(m, override)
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {exc}") from None
        hyper_overrides[m] = override

    resolved = {
        "problem": problem_echo,
        "run": {"methods": " ".join(methods), "seed": seed, "workers": workers, "out": out},
        "ansatz": {
            "layers": layers,
            "shots": "exact" if shots is None else shots,
            "sample_shots": sample_shots,
        },
        "protocol": {
            "restarts": protocol.restarts,
            "rho": protocol.rho,
            "lp_rho": protocol.lp_rho,
            "lp_cap": protocol.lp_cap,
            "max_iterations": protocol.max_iterations,
        },
    }
    for m in sorted(hyper_overrides):
        resolved[f"hyper.{m}"] = dict(sorted(hyper_overrides[m].items()))

    return ExperimentConfig(
        graphs=graphs,
        methods=methods,
        protocol=protocol,
        seed=seed,
        workers=workers,
        out=out,
        hyper_overrides=hyper_overrides,
        resolved=resolved,
    )


def _comparable(config: dict) -> dict:
    """Config minus fields that may legitimately differ across a resume."""
    out = {sec: dict(body) for sec, body in config.items()}
    out.get("run", {}).pop("workers", None)
    out.get("run", {}).pop("out", None)
    return out


def _load_reuse(outdir: Path, cfg: ExperimentConfig) -> dict:
    """(problem key, method, restart) -> (cap, tol) pairs from a partial sweep.

    Tolerates a truncated final line (interrupted previous run); anything
    parsed must belong to the same experiment, checked against the manifest.
    """
    runs_path = outdir / "runs.jsonl"
    if not runs_path.exists():
        return {}
    manifest_path = outdir / "manifest.json"
    if manifest_path.exists():
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        if _comparable(manifest.get("config", {})) != _comparable(
            json.loads(json.dumps(cfg.resolved))
        ):
            raise ConfigError(
                f"{outdir} holds a different experiment; refusing to resume into it"
            )
    valid_keys = {problem_key(g, i) for i, g in enumerate(cfg.graphs)}
    pairs: dict[tuple, dict] = {}
    with open(runs_path) as fh:
        header = fh.readline()
        try:
            head = json.loads(header)
        except json.JSONDecodeError:
            return {}
        if head.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"{runs_path}: unsupported schema version")
        for line in fh:
            try:
                row = json.loads(line)
                rec = RunRecord.from_dict(row["record"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                break  # truncated tail from an interrupted write
            if row["problem"] not in valid_keys or rec.method not in cfg.methods:
                continue
            if not 0 <= row["restart"] < cfg.protocol.restarts:
                continue
            pairs.setdefault((row["problem"], rec.method, row["restart"]), {})[row["leg"]] = rec
    return {k: (legs["cap"], legs["tol"]) for k, legs in pairs.items() if len(legs) == 2}


# ----------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    try:
        graph = generate_problem(
            args.n,
            seed=args.seed,
            density=args.density,
            weight_range=(args.weight_low, args.weight_high),
            degree=args.degree,
        )
    except (ValueError, RuntimeError) as exc:
        raise ConfigError(str(exc)) from None
    save(graph, args.out)
    print(f"wrote {args.out}: n={graph.n_vertices} m={graph.n_edges} seed={args.seed}")
    return EXIT_OK


def cmd_run(args) -> int:
    graph = _load_problem(args.problem)
    method = _check_method(args.method)
    hyper = _load_hyper_file(args.hyper, method) if args.hyper else None
    shots = _parse_shots(args.shots)
    cap = args.max_iter if args.max_iter is not None else method_spec(method).default_max_iterations
    if args.stop == "rel":
        stop = StopRule(
            max_iterations=cap,
            tolerance_mode="relative",
            rho=args.rho,
            reference=brute_force(graph),
        )
    else:
        stop = StopRule(max_iterations=cap)
    n_params = 2 * args.layers
    if args.theta0 is not None:
        theta0 = np.asarray(_parse_floats(args.theta0, "--theta0"), dtype=float)
        if theta0.shape != (n_params,):
            raise ConfigError(f"--theta0 needs {n_params} values, got {theta0.size}")
    else:
        theta0 = stream(args.seed, "cli", "run", "theta0").uniform(-np.pi, np.pi, n_params)
    ev = Evaluator.for_graph(
        graph, n_layers=args.layers, shots=shots, seed=derive_seed(args.seed, "cli", "run", "shots")
    )
    rec = run(
        method,
        ev,
        theta0,
        hyper=hyper,
        stop=stop,
        seed=args.seed,
        sample_shots=args.sample_shots,
    )

    outdir = _ensure_outdir(args.out)
    effective = {
        "run": {
            "problem": args.problem,
            "method": method,
            "seed": args.seed,
            "shots": "exact" if shots is None else shots,
            "sample_shots": args.sample_shots,
            "layers": args.layers,
            "max_iterations": cap,
            "stop": args.stop,
            "rho": args.rho if args.stop == "rel" else None,
            "theta0": " ".join(repr(float(v)) for v in theta0),
        }
    }
    if hyper:
        effective["hyper"] = dict(sorted(hyper.items()))
    _write_ini(outdir / "effective.ini", effective)
    _write_json(
        outdir / "record.json",
        {"schema_version": SCHEMA_VERSION, "record": rec.to_dict(include_timing=False)},
    )
    _write_manifest(outdir, "run", effective, ["record.json"])

    key = problem_key(graph, 0)
    print(f"method {method}  problem {key}  seed {args.seed}")
    print(
        f"iterations {rec.iterations}  qcalls {rec.total_qcalls}  "
        f"stop {rec.stop_reason}  converged {str(rec.converged).lower()}"
    )
    print(f"f0 {rec.f0!r}  final {(rec.fs[-1] if rec.fs else rec.f0)!r}  best {rec.best_f!r}")
    if rec.modal_bitstring is not None:
        print(f"modal bitstring {rec.modal_bitstring:0{graph.n_vertices}b}")
    print(f"outputs in {outdir}")
    if rec.failed:
        print(f"numeric failure: {rec.failure_reason}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = parse_bench_config(
        args.config, out_flag=args.out, workers_flag=args.workers, seed_flag=args.seed
    )
    if not cfg.methods:
        print("warning: empty method list, nothing to run", file=sys.stderr)
        return EXIT_OK
    if cfg.out is None:
        raise ConfigError("output directory required (--out flag or [run] out)")
    outdir = _ensure_outdir(cfg.out)
    reuse = _load_reuse(outdir, cfg) if args.resume else {}
    workers = cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)
    reports = run_benchmark(
        cfg.graphs,
        cfg.methods,
        cfg.protocol,
        seed=cfg.seed,
        workers=workers,
        hyper_overrides=cfg.hyper_overrides,
        reuse=reuse,
    )

    save_report_json(outdir / "report.json", reports, include_timing=False)
    save_runs_jsonl(outdir / "runs.jsonl", reports, include_timing=True)
    (outdir / "runs.tsv").write_text(runs_table(reports))
    (outdir / "aggregates.tsv").write_text(aggregates_table(reports))
    _write_ini(outdir / "effective.ini", cfg.resolved)
    _write_manifest(
        outdir,
        "bench",
        cfg.resolved,
        ["report.json", "runs.jsonl", "runs.tsv", "aggregates.tsv"],
    )

    if reuse:
        print(f"resumed: reused {len(reuse)} completed restart(s)")
    for report in reports:
        print(f"problem {report.problem}  optimal {report.optimal_value!r}")
        for m in sorted(report.aggregates):
            agg = report.aggregates[m]
            lp = "-" if agg.lipschitz is None else f"{agg.lipschitz.average:.6g}"
            print(
                f"  {m:<10} ratio {agg.convergence_ratio:.3f}  "
                f"mean_final {agg.mean_final_f!r}  mean_qcalls {agg.mean_qcalls}  "
                f"lipschitz_avg {lp}  failed {agg.n_failed}"
            )
    print(f"outputs in {outdir}")

    if args.require_lipschitz:
        missing = [
            f"{report.problem}/{m}"
            for report in reports
            for m in sorted(report.aggregates)
            if report.aggregates[m].lipschitz is None
        ]
        if missing:
            raise InsufficientDataError(
                "no Lipschitz statistics for: " + ", ".join(missing)
            )
    return EXIT_OK


def cmd_tune(args) -> int:
    graph = _load_problem(args.problem)
    method = _check_method(args.method)
    dims = args.dims.replace(",", " ").split() if args.dims else None
    shots = _parse_shots(args.shots)
    outdir = _ensure_outdir(args.out)
    try:
        result = tune_method(
            method,
            graph,
            args.budget,
            seed=args.seed,
            dim_names=dims,
            restarts=args.restarts,
            max_iterations=args.max_iter,
            shots=shots,
            n_layers=args.layers,
            log_path=str(outdir / "trials.jsonl"),
            resume=args.resume,
            log_timing=False,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    spec = method_spec(method)
    best = result.log.best()
    key = problem_key(graph, 0)
    _write_ini(
        outdir / "best.ini",
        {
            "best": dict(sorted(result.best_hyper.items())),
            "objective": {
                "method": method,
                "problem": key,
                "best_mean_final_f": result.best_y,
                "sweep": best.iteration,
                "acquisition": best.acquisition,
                "budget": args.budget,
                "restarts": args.restarts,
                "seed": args.seed,
            },
            "defaults": {d.name: d.default for d in spec.dims},
            "bounds": {
                d.name: f"{d.low!r} {d.high!r} {d.scale} "
                f"{'tunable' if d.tunable else 'fixed'}"
                for d in spec.dims
            },
        },
    )
    effective = {
        "tune": {
            "problem": args.problem,
            "method": method,
            "budget": args.budget,
            "seed": args.seed,
            "dims": " ".join(dims) if dims else " ".join(d.name for d in spec.tunable_dims),
            "restarts": args.restarts,
            "max_iterations": args.max_iter,
            "shots": "exact" if shots is None else shots,
            "layers": args.layers,
        }
    }
    _write_ini(outdir / "effective.ini", effective)
    _write_manifest(outdir, "tune", effective, ["trials.jsonl", "best.ini"])

    print(f"best objective {result.best_y!r} at sweep {best.iteration} ({best.acquisition})")
    for k in sorted(result.best_hyper):
        print(f"  {k} = {result.best_hyper[k]!r}")
    print(f"outputs in {outdir}")
    return EXIT_OK


def cmd_scan(args) -> int:
    graph = _load_problem(args.problem)
    n_params = 2 * args.layers
    if args.center is not None:
        center = np.asarray(_parse_floats(args.center, "--center"), dtype=float)
        if center.shape != (n_params,):
            raise ConfigError(f"--center needs {n_params} values, got {center.size}")
    else:
        center = np.zeros(n_params)
    if args.grid < 1:
        raise ConfigError("--grid must be >= 1")
    d1, d2 = scan_directions(n_params, args.dir_seed)
    grid = landscape_scan(
        graph, center, d1, d2, grid=args.grid, span=args.span, n_layers=args.layers
    )

    outdir = _ensure_outdir(args.out)
    key = problem_key(graph, 0)
    meta = {
        "problem": key,
        "center": ",".join(repr(float(v)) for v in center),
        "dir_seed": str(args.dir_seed),
        "span": repr(args.span),
        "layers": str(args.layers),
    }
    save_grid(outdir / "grid.txt", grid, meta)
    effective = {
        "scan": {
            "problem": args.problem,
            "center": meta["center"],
            "dir_seed": args.dir_seed,
            "grid": args.grid,
            "span": args.span,
            "layers": args.layers,
        }
    }
    _write_ini(outdir / "effective.ini", effective)
    _write_manifest(outdir, "scan", effective, ["grid.txt"])
    print(
        f"scan {args.grid}x{args.grid} around {key}: "
        f"min {float(grid.min())!r}  max {float(grid.max())!r}"
    )
    print(f"outputs in {outdir}")
    return EXIT_OK


# ----------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qopt-bench",
        description="Optimizer benchmark harness for shallow QAOA MaxCut.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random connected MaxCut fixture")
    g.add_argument("--n", type=int, required=True, help="vertex count (2..24)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--density", type=float, default=0.5)
    g.add_argument("--weight-low", type=float, default=0.1)
    g.add_argument("--weight-high", type=float, default=1.0)
    g.add_argument("--degree", type=int, default=None, help="regular degree (overrides density)")
    g.add_argument("--out", required=True, help="fixture file to write")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="one optimization run")
    r.add_argument("--problem", required=True, help="fixture file")
    r.add_argument("--method", required=True, help=f"one of: {', '.join(METHOD_IDS)}")
    r.add_argument("--hyper", default=None, help="INI file with a [hyper] section")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--shots", default="exact", help="'exact' or a positive count")
    r.add_argument("--sample-shots", type=int, default=512)
    r.add_argument("--layers", type=int, default=1)
    r.add_argument("--max-iter", type=int, default=None)
    r.add_argument("--stop", choices=("cap", "rel"), default="cap")
    r.add_argument("--rho", type=float, default=0.03, help="relative stop tolerance")
    r.add_argument("--theta0", default=None, help="comma-separated start angles")
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="full benchmark sweep from a config file")
    b.add_argument("--config", required=True, help="experiment INI file")
    b.add_argument("--out", default=None, help="output directory (overrides [run] out)")
    b.add_argument("--workers", type=int, default=None, help="0 = all cores")
    b.add_argument("--seed", type=int, default=None, help="override [run] seed")
    b.add_argument("--resume", action="store_true", help="reuse completed restarts in --out")
    b.add_argument(
        "--require-lipschitz",
        action="store_true",
        help="exit 4 if any method's Lipschitz filter kept under half its runs",
    )
    b.set_defaults(func=cmd_bench)

    t = sub.add_parser("tune", help="Bayesian hyperparameter search for one method")
    t.add_argument("--problem", required=True)
    t.add_argument("--method", required=True)
    t.add_argument("--budget", type=int, required=True, help="total sweeps (>= 10)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--dims", default=None, help="subset of tunable dims, comma-separated")
    t.add_argument("--restarts", type=int, default=20)
    t.add_argument("--max-iter", type=int, default=None)
    t.add_argument("--shots", default="exact")
    t.add_argument("--layers", type=int, default=1)
    t.add_argument("--out", required=True)
    t.add_argument("--resume", action="store_true", help="continue an interrupted search")
    t.set_defaults(func=cmd_tune)

    s = sub.add_parser("scan", help="2-D objective landscape grid")
    s.add_argument("--problem", required=True)
    s.add_argument("--center", default=None, help="comma-separated angles (default zeros)")
    s.add_argument("--dir-seed", type=int, default=0)
    s.add_argument("--grid", type=int, default=300)
    s.add_argument("--span", type=float, default=1.0)
    s.add_argument("--layers", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scan)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help; pass both through
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientDataError as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_NO_DATA
    except np.linalg.LinAlgError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (KeyError, ValueError) as exc:
        msg = exc.args[0] if exc.args else exc
        print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
