"""Uniform optimization loop producing RunRecords.

Record semantics
----------------
History rows are post-iteration snapshots: row k holds the iterate produced
by iteration k+1 of the loop, its objective value, the norm of the gradient
that iteration CONSUMED (evaluated at the pre-step point; NaN for the
stochastic family, which never forms a gradient), cumulative oracle calls,
and elapsed wallclock seconds.  The starting point theta0 and f(theta0) are
stored separately, so ``len(fs) == iterations``.

Cost accounting
---------------
The runner evaluates the objective once at theta0 and once after every
iteration for the record (that bookkeeping evaluation is free for the
line-search family, which reuses the accepted candidate's value).  All
costs flow through the oracle's own call counter, never estimated:

    line-search family   gradient at start; per iteration: line-search
                         evaluations + gradient at the accepted point
                         (reused from the search when it computed one)
    natural family       per iteration: gradient + metric (per the method's
                         schedule) + 1 bookkeeping evaluation
    stochastic family    per iteration: the step's documented calls
                         + 1 bookkeeping evaluation

Stopping
--------
max_iterations always bounds the loop.  gradient_floor stops gradient-based
methods before a step when ||g|| < floor (or exactly 0, a stationary
point).  With tolerance_mode="relative" the loop stops once a recorded
objective satisfies |f - f*| <= rho * |f*|; the record is then flagged
converged with iterations_to_convergence set.

Failures (non-finite objective, gradient, or iterate; singular solves) mark
the record failed with a reason and never raise out of run().
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..seeding import stream
from .linesearch import LineSearchConfig, line_search
from .natural import (
    NaturalState,
    mqng_step,
    qbang_step,
    qbroyden_step,
    qng_step,
)
from .quasinewton import (
    SecantPenaltyConfig,
    ncg_direction,
    update_bfgs,
    update_dfp,
    update_sp_bfgs,
    update_sr1,
)
from .schemas import (
    FAMILY_NATURAL,
    FAMILY_QUASI_NEWTON,
    FAMILY_STOCHASTIC,
    method_spec,
    validate_hyper,
)
from .stochastic import (
    CurvatureAverage,
    QNSPSAConfig,
    RCDConfig,
    SPSAConfig,
    qnspsa_step,
    rcd_step,
    spsa2_step,
    spsa_step,
)

SCHEMA_VERSION = 1

STOP_MAX_ITERATIONS = "max_iterations"
STOP_GRADIENT_FLOOR = "gradient_floor"
STOP_TOLERANCE = "tolerance"
STOP_FAILED = "failed"

_QN_UPDATES = {
    "bfgs": update_bfgs,
    "dfp": update_dfp,
    "sr1": update_sr1,
}

_QNG_APPROX = {"qng_block": "block_diagonal", "qng_diag": "diagonal"}

DEFAULT_MAX_BACKTRACKS = 20


@dataclass(frozen=True)
class StopRule:
    """Stopping policy for run().

    tolerance_mode "relative" needs a reference with an ``optimal_value``
    attribute (f* is never 0 for the problems here, but a zero reference is
    guarded anyway: the test degenerates to exact equality).
    """

    max_iterations: int
    tolerance_mode: str = "none"  # "none" | "relative"
    rho: float = 0.03
    reference: Any = None
    gradient_floor: float = 0.0

    def __post_init__(self) -> None:
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 0:
            raise ValueError("max_iterations must be a non-negative integer")
        if self.tolerance_mode not in ("none", "relative"):
            raise ValueError(f"unknown tolerance_mode {self.tolerance_mode!r}")
        if self.tolerance_mode == "relative":
            if self.reference is None or not hasattr(self.reference, "optimal_value"):
                raise ValueError("relative tolerance needs a reference with optimal_value")
            if not self.rho > 0:
                raise ValueError("rho must be > 0")
        if not (np.isfinite(self.gradient_floor) and self.gradient_floor >= 0):
            raise ValueError("gradient_floor must be finite and >= 0")

    def hit(self, f: float) -> bool:
        if self.tolerance_mode != "relative":
            return False
        f_star = float(self.reference.optimal_value)
        return abs(f - f_star) <= self.rho * abs(f_star)


@dataclass
class RunRecord:
    """Everything one optimization run produced.

    wallclock entries and walltime are machine-dependent; canonical
    serialization (to_dict(include_timing=False)) omits them so replayed
    runs compare byte-for-byte.
    """

    method: str
    hyper: dict[str, float]
    seed: int
    theta0: np.ndarray
    f0: float
    thetas: list[np.ndarray] = field(default_factory=list)
    fs: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    qcalls: list[int] = field(default_factory=list)
    wallclock: list[float] = field(default_factory=list)
    converged: bool = False
    iterations_to_convergence: int | None = None
    stop_reason: str = STOP_MAX_ITERATIONS
    failed: bool = False
    failure_reason: str | None = None
    skips: int = 0
    resets: int = 0
    ls_exhausted: int = 0
    total_qcalls: int = 0
    walltime: float = 0.0
    final_counts: dict[int, int] | None = None
    modal_bitstring: int | None = None

    @property
    def iterations(self) -> int:
        return len(self.fs)

    @property
    def final_theta(self) -> np.ndarray:
        return self.thetas[-1] if self.thetas else self.theta0

    @property
    def best_f(self) -> float:
        finite = [f for f in [self.f0, *self.fs] if np.isfinite(f)]
        return min(finite) if finite else float("nan")

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "method": self.method,
            "hyper": {k: self.hyper[k] for k in sorted(self.hyper)},
            "seed": self.seed,
            "theta0": [float(x) for x in self.theta0],
            "f0": self.f0,
            "thetas": [[float(x) for x in th] for th in self.thetas],
            "fs": [float(f) for f in self.fs],
            "grad_norms": [None if not np.isfinite(g) else float(g) for g in self.grad_norms],
            "qcalls": [int(q) for q in self.qcalls],
            "converged": self.converged,
            "iterations_to_convergence": self.iterations_to_convergence,
            "stop_reason": self.stop_reason,
            "failed": self.failed,
            "failure_reason": self.failure_reason,
            "skips": self.skips,
            "resets": self.resets,
            "ls_exhausted": self.ls_exhausted,
            "total_qcalls": self.total_qcalls,
            "final_counts": None
            if self.final_counts is None
            else {str(k): int(v) for k, v in sorted(self.final_counts.items())},
            "modal_bitstring": self.modal_bitstring,
        }
        if include_timing:
            out["wallclock"] = [float(t) for t in self.wallclock]
            out["walltime"] = float(self.walltime)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        rec = cls(
            method=data["method"],
            hyper=dict(data["hyper"]),
            seed=int(data["seed"]),
            theta0=np.asarray(data["theta0"], dtype=float),
            f0=float(data["f0"]),
            thetas=[np.asarray(th, dtype=float) for th in data["thetas"]],
            fs=[float(f) for f in data["fs"]],
            grad_norms=[float("nan") if g is None else float(g) for g in data["grad_norms"]],
            qcalls=[int(q) for q in data["qcalls"]],
            wallclock=[float(t) for t in data.get("wallclock", [])],
            converged=bool(data["converged"]),
            iterations_to_convergence=data["iterations_to_convergence"],
            stop_reason=data["stop_reason"],
            failed=bool(data["failed"]),
            failure_reason=data["failure_reason"],
            skips=int(data["skips"]),
            resets=int(data["resets"]),
            ls_exhausted=int(data["ls_exhausted"]),
            total_qcalls=int(data["total_qcalls"]),
            walltime=float(data.get("walltime", 0.0)),
            modal_bitstring=data["modal_bitstring"],
        )
        if data["final_counts"] is not None:
            rec.final_counts = {int(k): int(v) for k, v in data["final_counts"].items()}
        return rec


class _Recorder:
    """Shared bookkeeping for the per-family loops."""

    def __init__(self, record: RunRecord, ev, stop: StopRule, t0: float, q0: int):
        self.record = record
        self.ev = ev
        self.stop = stop
        self.t0 = t0
        self.q0 = q0

    def append(self, theta: np.ndarray, f: float, grad_norm: float) -> bool:
        """Record one completed iteration; True when the run should stop."""
        rec = self.record
        rec.thetas.append(np.array(theta, dtype=float))
        rec.fs.append(float(f))
        rec.grad_norms.append(float(grad_norm))
        rec.qcalls.append(int(self.ev.qcalls - self.q0))
        rec.wallclock.append(time.perf_counter() - self.t0)
        if self.stop.hit(f):
            rec.converged = True
            rec.iterations_to_convergence = len(rec.fs)
            rec.stop_reason = STOP_TOLERANCE
            return True
        return False

    def fail(self, reason: str) -> None:
        self.record.failed = True
        self.record.failure_reason = reason
        self.record.stop_reason = STOP_FAILED


def _finite(arr) -> bool:
    return bool(np.all(np.isfinite(arr)))


def _grad_floor_hit(gnorm: float, floor: float) -> bool:
    # An exactly stationary point stops regardless of the floor setting.
    return gnorm == 0.0 or gnorm < floor


def _run_line_search_family(method, ev, theta, f0, hyper, stop, rec: _Recorder, mode):
    n = len(theta)
    ls_cfg = LineSearchConfig(
        alpha0=hyper["alpha"],
        beta_reduce=hyper["beta"],
        c1=hyper["c1"],
        c2=hyper["c2"],
        max_backtracks=DEFAULT_MAX_BACKTRACKS,
        mode=mode,
    )
    pen = SecantPenaltyConfig(hyper["n0"], hyper["ns"]) if method == "sp_bfgs" else None
    b = np.eye(n)
    g_cur = None  # computed lazily so max_iterations=0 costs nothing extra
    f_cur = f0
    g_prev = None
    p_prev = None
    steps_since_reset = 0
    for _ in range(stop.max_iterations):
        if g_cur is None:
            g_cur = np.asarray(ev.gradient(theta), dtype=float)
        if not _finite(g_cur):
            rec.fail("non-finite gradient")
            return
        gnorm = float(np.linalg.norm(g_cur))
        if _grad_floor_hit(gnorm, stop.gradient_floor):
            rec.record.stop_reason = STOP_GRADIENT_FLOOR
            return
        if method == "ncg":
            p, did_reset = ncg_direction(
                g_cur, g_prev, p_prev, hyper["scale"], steps_since_reset, n
            )
            if did_reset:
                rec.record.resets += 1
                steps_since_reset = 0
        else:
            p = -(b @ g_cur)
            if not _finite(p) or float(p @ g_cur) >= 0.0:
                # Curvature matrix stopped giving descent or blew up
                # (possible for the rank-1 update); restart from steepest
                # descent.  NaN fails the >= test, so check finiteness too.
                b = np.eye(n)
                p = -g_cur
                rec.record.resets += 1
        ls = line_search(ev, theta, f_cur, g_cur, p, ls_cfg)
        if ls.failed:
            rec.fail("non-finite objective or gradient in line search")
            return
        if ls.exhausted:
            rec.record.ls_exhausted += 1
        theta_new = theta + ls.alpha * p
        if not _finite(theta_new):
            rec.fail("non-finite iterate")
            return
        g_new = ls.g_new if ls.g_new is not None else np.asarray(ev.gradient(theta_new), dtype=float)
        s = theta_new - theta
        y = g_new - g_cur
        if method == "ncg":
            g_prev, p_prev = g_cur, p
            steps_since_reset += 1
        elif method == "sp_bfgs":
            updated = update_sp_bfgs(b, s, y, pen)
            if updated is None:
                rec.record.skips += 1
            else:
                b = updated
        else:
            updated = _QN_UPDATES[method](b, s, y)
            if updated is None:
                rec.record.skips += 1
            else:
                b = updated
        stop_now = rec.append(theta_new, ls.f_new, gnorm)
        theta, f_cur, g_cur = theta_new, ls.f_new, g_new
        if stop_now:
            return


def _run_natural_family(method, ev, theta, hyper, stop, rec: _Recorder):
    state = NaturalState()
    lam = hyper["lam"]
    for _ in range(stop.max_iterations):
        g = np.asarray(ev.gradient(theta), dtype=float)
        if not _finite(g):
            rec.fail("non-finite gradient")
            return
        gnorm = float(np.linalg.norm(g))
        if _grad_floor_hit(gnorm, stop.gradient_floor):
            rec.record.stop_reason = STOP_GRADIENT_FLOOR
            return
        try:
            if method in _QNG_APPROX:
                theta_new = qng_step(
                    ev, theta, hyper["alpha"], approx=_QNG_APPROX[method],
                    lam=lam, momentum=hyper["momentum"], state=state, grad=g,
                )
            elif method == "qbroyden":
                theta_new = qbroyden_step(
                    ev, theta, state, hyper["alpha"], hyper["eps"], lam=lam, grad=g
                )
            elif method == "qbang":
                theta_new = qbang_step(
                    ev, theta, state, hyper["alpha"], hyper["eps"],
                    hyper["beta1"], hyper["beta2"], lam=lam, delta=hyper["delta"], grad=g,
                )
            else:  # mqng
                theta_new = mqng_step(
                    ev, theta, state, hyper["alpha"], hyper["eps"],
                    hyper["beta1"], hyper["beta2"], lam=lam, delta=hyper["delta"], grad=g,
                )
        except np.linalg.LinAlgError as exc:
            rec.fail(f"metric solve failed: {exc}")
            return
        if not _finite(theta_new):
            rec.fail("non-finite iterate")
            return
        f_new = float(ev.expectation(theta_new))
        if not np.isfinite(f_new):
            rec.fail("non-finite objective")
            return
        rec.record.skips = state.skips
        if rec.append(theta_new, f_new, gnorm):
            return
        theta = theta_new


def _run_stochastic_family(method, ev, theta, hyper, stop, rec: _Recorder, rng):
    if method in ("spsa", "spsa2"):
        cfg = SPSAConfig(
            a_init=hyper["a_init"],
            c_init=hyper["c_init"],
            big_a=hyper["big_a"],
            alpha_decay=hyper["alpha_decay"],
            gamma_decay=hyper["gamma_decay"],
            **(
                {"ah_init": hyper["ah_init"], "ch_init": hyper["ch_init"], "h_floor": hyper["h_floor"]}
                if method == "spsa2"
                else {}
            ),
        )
    elif method == "qnspsa":
        cfg = QNSPSAConfig(
            alpha=hyper["alpha"], eps_decay=hyper["eps_decay"],
            c=hyper["c"], g_floor=hyper["g_floor"],
        )
    else:  # rcd
        cfg = RCDConfig(alpha=hyper["alpha"], gamma_decay=hyper["gamma_decay"])
    curv = CurvatureAverage()
    for k in range(stop.max_iterations):
        try:
            if method == "spsa":
                theta_new = spsa_step(ev, theta, k, cfg, rng)
            elif method == "spsa2":
                theta_new = spsa2_step(ev, theta, k, cfg, rng, curv)
            elif method == "qnspsa":
                theta_new = qnspsa_step(ev, theta, k, cfg, rng, curv)
            else:
                theta_new = rcd_step(ev, theta, k, cfg, rng)
        except np.linalg.LinAlgError as exc:
            rec.fail(f"curvature solve failed: {exc}")
            return
        if not _finite(theta_new):
            rec.fail("non-finite iterate")
            return
        f_new = float(ev.expectation(theta_new))
        if not np.isfinite(f_new):
            rec.fail("non-finite objective")
            return
        if rec.append(theta_new, f_new, float("nan")):
            return
        theta = theta_new


def run(
    method: str,
    ev,
    theta0,
    hyper: dict | None = None,
    stop: StopRule | None = None,
    seed: int = 0,
    line_mode: str | None = None,
    sample_shots: int | None = None,
) -> RunRecord:
    """Run one optimizer on one oracle from one starting point.

    ``line_mode`` overrides the line-search acceptance mode; by default the
    secant-penalized method uses "either" (its reference loop accepts on a
    single condition) and the other line-search methods use "both".
    ``sample_shots`` draws a final seeded bitstring sample from the oracle
    (one extra call) and stores its counts and modal outcome.
    """
    spec = method_spec(method)
    full_hyper = validate_hyper(method, hyper)
    theta = np.array(theta0, dtype=float)
    if theta.ndim != 1 or len(theta) == 0 or not _finite(theta):
        raise ValueError("theta0 must be a finite 1-D vector")
    if stop is None:
        stop = StopRule(max_iterations=spec.default_max_iterations)
    rng = stream(seed, "run", method)
    t0 = time.perf_counter()
    q0 = int(ev.qcalls)
    f0 = float(ev.expectation(theta))
    record = RunRecord(
        method=method, hyper=full_hyper, seed=int(seed), theta0=theta.copy(), f0=f0
    )
    rec = _Recorder(record, ev, stop, t0, q0)
    if not np.isfinite(f0):
        rec.fail("non-finite objective at theta0")
    elif spec.family == FAMILY_QUASI_NEWTON:
        mode = line_mode or ("either" if method == "sp_bfgs" else "both")
        _run_line_search_family(method, ev, theta, f0, full_hyper, stop, rec, mode)
    elif spec.family == FAMILY_NATURAL:
        _run_natural_family(method, ev, theta, full_hyper, stop, rec)
    elif spec.family == FAMILY_STOCHASTIC:
        _run_stochastic_family(method, ev, theta, full_hyper, stop, rec, rng)
    else:  # pragma: no cover - registry families are closed
        raise AssertionError(f"unhandled family {spec.family}")
    if sample_shots is not None and not record.failed and hasattr(ev, "sample_bitstrings"):
        samples = ev.sample_bitstrings(record.final_theta, sample_shots)
        values, counts = np.unique(np.asarray(samples, dtype=np.int64), return_counts=True)
        record.final_counts = {int(v): int(c) for v, c in zip(values, counts)}
        # Ties resolve to the smallest basis index (np.argmax takes the first).
        record.modal_bitstring = int(values[np.argmax(counts)])
    record.total_qcalls = int(ev.qcalls - q0)
    record.walltime = time.perf_counter() - t0
    return record
