"""Gaussian-process hyperparameter search with a hedged acquisition portfolio.

The surrogate is a hand-rolled GP regression model: constant prior mean,
Matern covariance (smoothness 1/2, 3/2 or 5/2; 5/2 default) with one
length-scale per dimension, plus observation noise.  All modeling happens
in the unit cube: every search dimension is mapped to [0,1] (log-scaled
dimensions in log space) before any kernel evaluation.

Kernel hyperparameters are refit each sweep by maximizing the log marginal
likelihood with seeded multi-start L-BFGS-B over log-parameters.  Cholesky
factorizations escalate through a fixed jitter ladder before giving up
(raising numpy's LinAlgError), and every negative predictive variance is
clamped to zero and counted on the model (``n_var_clamped``).

Suggestions come from a portfolio of three acquisition rules evaluated on
a seeded candidate set (``N_CANDIDATES_UNIFORM`` uniform points plus
``N_CANDIDATES_LOCAL`` Gaussian perturbations of the incumbent, sigma
``LOCAL_SIGMA``):

- lower confidence bound          mu - KAPPA_LCB * sigma
- negative expected improvement   -(EI with margin XI)
- negative probability of improv. -(PI with margin XI)

Each rule proposes its own argmin; a hedge chooses which proposal to run,
sampling with probabilities softmax(gains).  After the next refit, every
rule's gain is decreased by the new posterior mean at the point it had
proposed, so rules whose proposals look good (low predicted objective)
gain weight.  Weights therefore always form a probability simplex.

The tune() loop spends ``n_init`` sweeps on seeded uniform points before
any model-based suggestion.  Objective failures (exceptions or non-finite
values) are observed as a penalty of worst-seen-plus-margin rather than
crashing the loop.  Every sweep appends one entry to a TrialLog, which can
be written as JSON lines and replayed to resume an interrupted search with
identical state.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from .optimizers.schemas import method_spec
from .seeding import stream

N_INIT = 10
N_CANDIDATES_UNIFORM = 512
N_CANDIDATES_LOCAL = 64
LOCAL_SIGMA = 0.05
KAPPA_LCB = 1.96
XI = 0.01
NU_CHOICES = (0.5, 1.5, 2.5)
JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2)

ACQ_NAMES = ("lcb", "neg_ei", "neg_pi")

# Bounds for the marginal-likelihood fit, in log space, after the targets
# are standardized to zero mean and unit variance.
_LOG_LS_BOUNDS = (math.log(1e-2), math.log(1e2))
_LOG_SIGNAL_BOUNDS = (math.log(1e-3), math.log(1e3))
_LOG_NOISE_BOUNDS = (math.log(1e-8), math.log(1.0))


# ----------------------------------------------------------------------
# search space


@dataclass(frozen=True)
class SpaceDim:
    """One tunable dimension with native bounds and scaling."""

    name: str
    low: float
    high: float
    scale: str = "linear"  # "linear" | "log"

    def __post_init__(self) -> None:
        if not (np.isfinite(self.low) and np.isfinite(self.high)):
            raise ValueError(f"{self.name}: bounds must be finite")
        if not self.low < self.high:
            raise ValueError(f"{self.name}: low must be < high")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"{self.name}: unknown scale {self.scale!r}")
        if self.scale == "log" and self.low <= 0:
            raise ValueError(f"{self.name}: log scale needs positive bounds")

    def to_unit(self, value: float) -> float:
        if self.scale == "log":
            return (math.log(value) - math.log(self.low)) / (
                math.log(self.high) - math.log(self.low)
            )
        return (value - self.low) / (self.high - self.low)

    def from_unit(self, u: float) -> float:
        u = min(1.0, max(0.0, float(u)))
        if self.scale == "log":
            return math.exp(math.log(self.low) + u * (math.log(self.high) - math.log(self.low)))
        return self.low + u * (self.high - self.low)


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple[SpaceDim, ...]

    def __post_init__(self) -> None:
        if not self.dims:
            raise ValueError("search space needs at least one dimension")
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("duplicate dimension names")

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dims)

    @classmethod
    def for_method(cls, method: str, names: list[str] | None = None) -> "SearchSpace":
        """Space over a method's tunable hyperparameters (or a named subset)."""
        spec = method_spec(method)
        tunable = {d.name: d for d in spec.tunable_dims}
        if names is None:
            names = list(tunable)
        missing = [n for n in names if n not in tunable]
        if missing:
            raise ValueError(f"{method} has no tunable dims {missing}")
        return cls(
            tuple(
                SpaceDim(n, tunable[n].low, tunable[n].high, tunable[n].scale) for n in names
            )
        )

    def to_unit(self, values: dict) -> np.ndarray:
        return np.array([dim.to_unit(values[dim.name]) for dim in self.dims])

    def from_unit(self, u) -> dict:
        u = np.asarray(u, dtype=float)
        return {dim.name: dim.from_unit(u[j]) for j, dim in enumerate(self.dims)}


# ----------------------------------------------------------------------
# kernel and GP


@dataclass(frozen=True)
class MaternKernel:
    """Stationary Matern covariance with per-dimension length-scales."""

    nu: float
    length_scales: np.ndarray
    signal_var: float = 1.0

    def __post_init__(self) -> None:
        if self.nu not in NU_CHOICES:
            raise ValueError(f"nu must be one of {NU_CHOICES}")
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        if np.any(ls <= 0) or not np.all(np.isfinite(ls)):
            raise ValueError("length scales must be positive and finite")
        if not (np.isfinite(self.signal_var) and self.signal_var > 0):
            raise ValueError("signal variance must be positive and finite")
        object.__setattr__(self, "length_scales", ls)

    def _scaled_dist(self, x_a: np.ndarray, x_b: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(x_a) / self.length_scales
        b = np.atleast_2d(x_b) / self.length_scales
        d2 = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * (a @ b.T)
        return np.sqrt(np.maximum(d2, 0.0))

    def __call__(self, x_a, x_b=None) -> np.ndarray:
        if x_b is None:
            x_b = x_a
        r = self._scaled_dist(np.asarray(x_a, dtype=float), np.asarray(x_b, dtype=float))
        if self.nu == 0.5:
            base = np.exp(-r)
        elif self.nu == 1.5:
            t = math.sqrt(3.0) * r
            base = (1.0 + t) * np.exp(-t)
        else:  # 5/2
            t = math.sqrt(5.0) * r
            base = (1.0 + t + t * t / 3.0) * np.exp(-t)
        return self.signal_var * base

    def diag(self, x) -> np.ndarray:
        n = len(np.atleast_2d(np.asarray(x, dtype=float)))
        return np.full(n, self.signal_var)


def _chol_with_jitter(mat: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky factor, escalating through JITTER_LADDER before raising."""
    err: Exception | None = None
    for jitter in JITTER_LADDER:
        try:
            return np.linalg.cholesky(mat + jitter * np.eye(len(mat))), jitter
        except np.linalg.LinAlgError as exc:
            err = exc
    raise np.linalg.LinAlgError(
        f"kernel matrix not positive definite even with jitter {JITTER_LADDER[-1]}: {err}"
    )


@dataclass
class GPModel:
    """GP regression surrogate over the unit cube.

    Construct directly with fixed kernel parameters, or use fit() to learn
    them from data by marginal likelihood.
    """

    kernel: MaternKernel
    noise: float = 1e-10
    mean: float = 0.0
    x_obs: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    y_obs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_var_clamped: int = 0
    jitter_used: float = 0.0

    def __post_init__(self) -> None:
        self.x_obs = np.atleast_2d(np.asarray(self.x_obs, dtype=float))
        self.y_obs = np.asarray(self.y_obs, dtype=float)
        if self.noise < 0 or not np.isfinite(self.noise):
            raise ValueError("noise variance must be finite and >= 0")
        self._factorize()

    @property
    def n_obs(self) -> int:
        return len(self.y_obs)

    def _factorize(self) -> None:
        if self.n_obs == 0:
            self._chol = None
            self._alpha = None
            return
        big_k = self.kernel(self.x_obs) + self.noise * np.eye(self.n_obs)
        self._chol, self.jitter_used = _chol_with_jitter(big_k)
        self._alpha = cho_solve((self._chol, True), self.y_obs - self.mean)

    def posterior(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance at query points (variance >= 0)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        prior_var = self.kernel.diag(x)
        if self.n_obs == 0:
            return np.full(len(x), self.mean), prior_var
        k_cross = self.kernel(x, self.x_obs)
        mu = self.mean + k_cross @ self._alpha
        v = solve_triangular(self._chol, k_cross.T, lower=True)
        var = prior_var - np.sum(v * v, axis=0)
        neg = var < 0.0
        if np.any(neg):
            self.n_var_clamped += int(np.count_nonzero(neg))
            var = np.where(neg, 0.0, var)
        return mu, var

    def log_marginal_likelihood(self) -> float:
        if self.n_obs == 0:
            return 0.0
        resid = self.y_obs - self.mean
        return float(
            -0.5 * resid @ self._alpha
            - np.sum(np.log(np.diag(self._chol)))
            - 0.5 * self.n_obs * math.log(2.0 * math.pi)
        )

    @classmethod
    def fit(
        cls,
        x_obs,
        y_obs,
        nu: float = 2.5,
        seed: int = 0,
        n_starts: int = 4,
        warm_start: "GPModel | None" = None,
    ) -> "GPModel":
        """Learn length-scales, signal and noise variance by max marginal
        likelihood (multi-start L-BFGS-B over log-parameters).

        Targets are standardized internally; the returned model is expressed
        in the original units so posterior() needs no unscaling.
        """
        x_obs = np.atleast_2d(np.asarray(x_obs, dtype=float))
        y_obs = np.asarray(y_obs, dtype=float)
        n, d = x_obs.shape
        if n == 0:
            raise ValueError("fit needs at least one observation")
        y_mean = float(np.mean(y_obs))
        y_std = float(np.std(y_obs))
        if y_std == 0.0 or not np.isfinite(y_std):
            y_std = 1.0
        z = (y_obs - y_mean) / y_std

        lo = np.array([_LOG_LS_BOUNDS[0]] * d + [_LOG_SIGNAL_BOUNDS[0], _LOG_NOISE_BOUNDS[0]])
        hi = np.array([_LOG_LS_BOUNDS[1]] * d + [_LOG_SIGNAL_BOUNDS[1], _LOG_NOISE_BOUNDS[1]])

        def neg_mll(params: np.ndarray) -> float:
            ls = np.exp(params[:d])
            sig = math.exp(params[d])
            noise = math.exp(params[d + 1])
            kern = MaternKernel(nu, ls, sig)
            try:
                model = cls(kern, noise=noise, x_obs=x_obs, y_obs=z)
            except np.linalg.LinAlgError:
                return 1e12
            val = model.log_marginal_likelihood()
            return -val if np.isfinite(val) else 1e12

        rng = stream(seed, "gp_fit")
        starts = [np.concatenate([np.zeros(d), [0.0, math.log(1e-6)]])]
        if warm_start is not None and warm_start.kernel.nu == nu:
            prev_sig = warm_start.kernel.signal_var / (y_std * y_std)
            prev_noise = warm_start.noise / (y_std * y_std)
            starts.append(
                np.concatenate(
                    [
                        np.log(warm_start.kernel.length_scales),
                        [math.log(max(prev_sig, 1e-12)), math.log(max(prev_noise, 1e-12))],
                    ]
                )
            )
        while len(starts) < n_starts:
            starts.append(lo + (hi - lo) * rng.random(d + 2))

        best_params = None
        best_val = math.inf
        for s0 in starts:
            res = minimize(
                neg_mll,
                np.clip(s0, lo, hi),
                method="L-BFGS-B",
                bounds=list(zip(lo, hi)),
            )
            if res.fun < best_val:
                best_val = res.fun
                best_params = res.x
        ls = np.exp(best_params[:d])
        sig_z = math.exp(best_params[d])
        noise_z = math.exp(best_params[d + 1])
        return cls(
            MaternKernel(nu, ls, sig_z * y_std * y_std),
            noise=noise_z * y_std * y_std,
            mean=y_mean,
            x_obs=x_obs,
            y_obs=y_obs,
        )


# ----------------------------------------------------------------------
# acquisition portfolio


def _norm_pdf(z: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _norm_cdf(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.vectorize(math.erf)(z / math.sqrt(2.0)))


def acquisition_values(
    name: str,
    mu: np.ndarray,
    sigma: np.ndarray,
    f_best: float,
    kappa: float = KAPPA_LCB,
    xi: float = XI,
) -> np.ndarray:
    """Acquisition score arrays; lower is better for every rule."""
    if name == "lcb":
        return mu - kappa * sigma
    gap = f_best - mu - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, gap / np.where(sigma > 0, sigma, 1.0), 0.0)
    if name == "neg_ei":
        ei = np.where(sigma > 0, gap * _norm_cdf(z) + sigma * _norm_pdf(z), np.maximum(gap, 0.0))
        return -ei
    if name == "neg_pi":
        pi = np.where(sigma > 0, _norm_cdf(z), (gap > 0).astype(float))
        return -pi
    raise ValueError(f"unknown acquisition {name!r}")


@dataclass
class HedgePortfolio:
    """Hedge over the three acquisition rules.

    gains[i] accumulates minus the posterior mean at rule i's past
    proposals; selection probabilities are a softmax over gains, so they
    stay a simplex by construction.
    """

    eta: float = 1.0
    gains: np.ndarray = field(default_factory=lambda: np.zeros(len(ACQ_NAMES)))

    def weights(self) -> np.ndarray:
        scaled = self.eta * (self.gains - np.max(self.gains))
        w = np.exp(scaled)
        return w / np.sum(w)

    def select(self, rng: np.random.Generator) -> int:
        return int(rng.choice(len(ACQ_NAMES), p=self.weights()))

    def update(self, predicted_mus) -> None:
        self.gains = self.gains - np.asarray(predicted_mus, dtype=float)


def propose(
    gp: GPModel,
    candidates: np.ndarray,
    f_best: float,
    hedge: HedgePortfolio,
    rng: np.random.Generator,
) -> tuple[np.ndarray, str, np.ndarray]:
    """Pick the next point from a candidate set via the hedged portfolio.

    Returns (chosen x, acquisition name, all three proposals) so the
    caller can later update the hedge with fresh posterior means at the
    proposals.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    mu, var = gp.posterior(candidates)
    sigma = np.sqrt(var)
    proposals = np.empty((len(ACQ_NAMES), candidates.shape[1]))
    for i, name in enumerate(ACQ_NAMES):
        vals = acquisition_values(name, mu, sigma, f_best)
        proposals[i] = candidates[int(np.argmin(vals))]
    idx = hedge.select(rng)
    return proposals[idx].copy(), ACQ_NAMES[idx], proposals


def candidate_pool(
    d: int, rng: np.random.Generator, incumbent: np.ndarray | None
) -> np.ndarray:
    cands = rng.random((N_CANDIDATES_UNIFORM, d))
    if incumbent is not None:
        local = incumbent + LOCAL_SIGMA * rng.standard_normal((N_CANDIDATES_LOCAL, d))
        cands = np.vstack([cands, np.clip(local, 0.0, 1.0)])
    return cands


# ----------------------------------------------------------------------
# trial log


@dataclass(frozen=True)
class Trial:
    iteration: int
    x_unit: tuple[float, ...]
    hyper: dict
    y: float
    acquisition: str
    timestamp: float

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "iteration": self.iteration,
            "x_unit": list(self.x_unit),
            "hyper": {k: self.hyper[k] for k in sorted(self.hyper)},
            "y": self.y,
            "acquisition": self.acquisition,
        }
        if include_timing:
            out["timestamp"] = self.timestamp
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Trial":
        return cls(
            iteration=int(data["iteration"]),
            x_unit=tuple(float(v) for v in data["x_unit"]),
            hyper=dict(data["hyper"]),
            y=float(data["y"]),
            acquisition=str(data["acquisition"]),
            timestamp=float(data.get("timestamp", 0.0)),
        )


class TrialLog:
    """Append-only record of every sweep, serializable as JSON lines."""

    def __init__(self, entries: list[Trial] | None = None):
        self.entries: list[Trial] = list(entries or [])

    def append(self, trial: Trial) -> None:
        if self.entries and trial.iteration != self.entries[-1].iteration + 1:
            raise ValueError("iteration indices must be consecutive")
        if not self.entries and trial.iteration != 0:
            raise ValueError("first iteration must be 0")
        self.entries.append(trial)

    def __len__(self) -> int:
        return len(self.entries)

    def observations(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.array([t.x_unit for t in self.entries], dtype=float)
        y = np.array([t.y for t in self.entries], dtype=float)
        return x, y

    def best(self) -> Trial:
        return min(self.entries, key=lambda t: t.y)

    def save(self, path, include_timing: bool = True) -> None:
        with open(path, "w") as fh:
            for t in self.entries:
                fh.write(json.dumps(t.to_dict(include_timing), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "TrialLog":
        log = cls()
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    log.append(Trial.from_dict(json.loads(line)))
        return log


# ----------------------------------------------------------------------
# tune loop


@dataclass
class TuneResult:
    best_hyper: dict
    best_y: float
    log: TrialLog
    model: GPModel | None


def _penalty(y_seen: list[float]) -> float:
    """Value recorded for a failed objective: worst seen plus a margin."""
    finite = [y for y in y_seen if np.isfinite(y)]
    if not finite:
        return 1e6
    spread = max(finite) - min(finite)
    return max(finite) + max(1.0, 0.1 * spread)


def tune(
    space: SearchSpace,
    objective,
    budget: int,
    seed: int = 0,
    n_init: int = N_INIT,
    nu: float = 2.5,
    log_path=None,
    resume: bool = False,
    log_timing: bool = True,
) -> TuneResult:
    """Minimize objective(hyper dict) over the space in ``budget`` sweeps.

    The first ``n_init`` sweeps sample uniform seeded points; later sweeps
    refit the GP and take the hedged portfolio's suggestion.  With
    ``log_path`` every sweep is appended to a JSONL file; ``resume=True``
    reloads an existing file and continues after its last entry (the RNG
    streams are keyed by sweep index, so a resumed search matches an
    uninterrupted one exactly).  ``log_timing=False`` drops wallclock
    timestamps from the streamed file so replays are byte-identical.
    """
    if budget < n_init:
        raise ValueError("budget must be at least n_init")
    log = TrialLog()
    if resume and log_path is not None:
        try:
            log = TrialLog.load(log_path)
        except FileNotFoundError:
            pass
    if len(log) > budget:
        raise ValueError("existing log longer than budget")

    hedge = HedgePortfolio()
    model: GPModel | None = None
    pending_proposals: np.ndarray | None = None
    # Replay hedge state from the log so a resumed search is identical:
    # re-derive each model-based sweep's proposals from the logged data.
    for k in range(len(log)):
        if k >= n_init:
            x_hist, y_hist = log.observations()
            model = GPModel.fit(
                x_hist[:k], y_hist[:k], nu=nu, seed=_fit_seed(seed, k), warm_start=model
            )
            if pending_proposals is not None:
                mu, _ = model.posterior(pending_proposals)
                hedge.update(mu)
            rng_k = stream(seed, "tune", "sweep", k)
            incumbent = x_hist[:k][np.argmin(y_hist[:k])]
            cands = candidate_pool(space.d, rng_k, incumbent)
            _, _, pending_proposals = propose(
                model, cands, float(np.min(y_hist[:k])), hedge, rng_k
            )

    mode = "a" if (resume and log_path is not None and len(log) > 0) else "w"
    fh = open(log_path, mode) if log_path is not None else None
    try:
        for k in range(len(log), budget):
            rng_k = stream(seed, "tune", "sweep", k)
            if k < n_init:
                x = rng_k.random(space.d)
                acq = "random"
            else:
                x_hist, y_hist = log.observations()
                model = GPModel.fit(
                    x_hist, y_hist, nu=nu, seed=_fit_seed(seed, k), warm_start=model
                )
                if pending_proposals is not None:
                    mu, _ = model.posterior(pending_proposals)
                    hedge.update(mu)
                incumbent = x_hist[np.argmin(y_hist)]
                cands = candidate_pool(space.d, rng_k, incumbent)
                x, acq, pending_proposals = propose(
                    model, cands, float(np.min(y_hist)), hedge, rng_k
                )
            hyper = space.from_unit(x)
            try:
                y = float(objective(hyper))
            except Exception:
                y = float("nan")
            if not np.isfinite(y):
                y = _penalty([t.y for t in log.entries])
            trial = Trial(
                iteration=k,
                x_unit=tuple(float(v) for v in x),
                hyper=hyper,
                y=y,
                acquisition=acq,
                timestamp=time.time(),
            )
            log.append(trial)
            if fh is not None:
                fh.write(json.dumps(trial.to_dict(log_timing), sort_keys=True) + "\n")
                fh.flush()
    finally:
        if fh is not None:
            fh.close()

    best = log.best()
    return TuneResult(best_hyper=dict(best.hyper), best_y=best.y, log=log, model=model)


def _fit_seed(seed: int, sweep: int) -> int:
    # Stable per-sweep fitting stream, independent of the candidate stream.
    return int(stream(seed, "tune", "fit", sweep).integers(0, 2**31 - 1))


def tune_method(
    method: str,
    graph,
    budget: int,
    seed: int = 0,
    dim_names: list[str] | None = None,
    restarts: int = 20,
    max_iterations: int | None = None,
    shots: int | None = None,
    n_layers: int = 1,
    log_path=None,
    resume: bool = False,
    log_timing: bool = True,
) -> TuneResult:
    """Tune one optimizer on one problem instance.

    The objective for a candidate hyper setting is the mean final objective
    value over ``restarts`` seeded runs from uniform random starting angles
    (failed runs poison the sweep, which tune() then records as a penalty).
    Dimensions not being tuned keep their published defaults.
    """
    from .optimizers import StopRule, default_hyper, run
    from .simulator import Evaluator

    space = SearchSpace.for_method(method, dim_names)
    base = default_hyper(method)
    spec = method_spec(method)
    cap = max_iterations if max_iterations is not None else spec.default_max_iterations

    def objective(hyper_subset: dict) -> float:
        full = dict(base)
        full.update(hyper_subset)
        finals = []
        for r in range(restarts):
            ev = Evaluator.for_graph(graph, n_layers=n_layers, shots=shots, seed=seed)
            theta0 = stream(seed, "tune", "theta0", r).uniform(-np.pi, np.pi, 2 * n_layers)
            rec = run(
                method,
                ev,
                theta0,
                hyper=full,
                stop=StopRule(max_iterations=cap),
                seed=int(stream(seed, "tune", "run", r).integers(0, 2**31 - 1)),
            )
            if rec.failed:
                return float("nan")
            finals.append(rec.fs[-1] if rec.fs else rec.f0)
        return float(np.mean(finals))

    return tune(
        space,
        objective,
        budget,
        seed=seed,
        log_path=log_path,
        resume=resume,
        log_timing=log_timing,
    )
