"""Metric-preconditioned steps: QNG variants, qBroyden, qBang.

Per-step cost in oracle calls (p = layer count, G = gradient cost):
    qng_step       G + metric(approx)            every iteration
    qbroyden_step  G + metric(block) on step 0, then G
    qbang_step     same as qbroyden_step (metric carried by rank-1 updates)
    mqng_step      G + metric(approx)            every iteration

The mutable ``NaturalState`` carries everything between iterations; one
state instance belongs to exactly one run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_REGULARIZER = 1e-6
DEFAULT_TRUST_DELTA = 1e-8
QBROYDEN_DENOM_FLOOR = 1e-12


@dataclass
class NaturalState:
    """Cross-iteration state for the natural-gradient family."""

    b_inv: np.ndarray | None = None    # inverse metric estimate (qbroyden, qbang)
    metric: np.ndarray | None = None   # low-pass filtered metric (mqng)
    v: np.ndarray | None = None        # momentum velocity (qng)
    m1: np.ndarray | None = None       # first-moment accumulator
    m2: np.ndarray | None = None       # second-moment accumulator
    k: int = field(default=0)          # completed steps
    skips: int = field(default=0)      # degenerate metric updates skipped


def qng_direction(metric, grad, lam: float) -> np.ndarray:
    """Solve (metric + lam I) d = grad.  Singular systems raise LinAlgError."""
    metric = np.asarray(metric, dtype=float)
    grad = np.asarray(grad, dtype=float)
    m = metric + lam * np.eye(len(grad)) if lam != 0.0 else metric
    return np.linalg.solve(m, grad)


def momentum_step(theta, v, d, alpha: float, m: float):
    """Heavy-ball update: v' = m v - alpha d; theta' = theta + v'.

    Returns (theta', v').  m == 0 reduces to a plain step theta - alpha d.
    """
    if not (0.0 <= m <= 1.0):
        raise ValueError("momentum coefficient must lie in [0, 1]")
    v_new = m * np.asarray(v, dtype=float) - alpha * np.asarray(d, dtype=float)
    return np.asarray(theta, dtype=float) + v_new, v_new


def qbroyden_inverse_update(b_inv, grad, eps: float, floor: float = QBROYDEN_DENOM_FLOOR):
    """Rank-1 inverse update of the running metric estimate.

        B_inv' = (I - eps B_inv g g' / den) B_inv / (1 - eps)
        den    = 1 - eps (1 - g' B_inv g)

    Consistent (Sherman-Morrison) with the primal low-pass filter
    B' = (1 - eps) B + eps g g'.  Returns None when |den| < floor.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    b_inv = np.asarray(b_inv, dtype=float)
    grad = np.asarray(grad, dtype=float)
    t = float(grad @ b_inv @ grad)
    den = 1.0 - eps * (1.0 - t)
    if not np.isfinite(den) or abs(den) < floor:
        return None
    bg = b_inv @ grad
    return (b_inv - (eps / den) * np.outer(bg, grad @ b_inv)) / (1.0 - eps)


def _gradient(ev, theta, grad):
    if grad is None:
        return np.asarray(ev.gradient(theta), dtype=float)
    return np.asarray(grad, dtype=float)


def qng_step(
    ev,
    theta,
    alpha: float,
    approx: str = "block_diagonal",
    lam: float = DEFAULT_REGULARIZER,
    momentum: float = 0.0,
    state: NaturalState | None = None,
    grad=None,
):
    """One metric-preconditioned step theta - alpha (g^F + lam I)^-1 grad.

    With momentum > 0 the preconditioned direction drives a heavy-ball
    velocity held in ``state``.
    """
    theta = np.asarray(theta, dtype=float)
    g = _gradient(ev, theta, grad)
    metric = ev.metric(theta, approximation=approx).matrix
    d = qng_direction(metric, g, lam)
    if state is None:
        theta_new = theta - alpha * d
    else:
        v = state.v if state.v is not None else np.zeros_like(theta)
        theta_new, state.v = momentum_step(theta, v, d, alpha, momentum)
        state.k += 1
    return theta_new


def qbroyden_step(
    ev,
    theta,
    state: NaturalState,
    alpha: float,
    eps: float,
    lam: float = DEFAULT_REGULARIZER,
    approx: str = "block_diagonal",
    grad=None,
):
    """Metric inverse seeded from the QFIM once, then carried by rank-1 updates."""
    theta = np.asarray(theta, dtype=float)
    g = _gradient(ev, theta, grad)
    if state.b_inv is None:
        metric = ev.metric(theta, approximation=approx).matrix
        state.b_inv = np.linalg.inv(metric + lam * np.eye(len(theta)))
    else:
        updated = qbroyden_inverse_update(state.b_inv, g, eps)
        if updated is None:
            state.skips += 1
        else:
            state.b_inv = updated
    state.k += 1
    return theta - alpha * (state.b_inv @ g)


def _adam_fold(state: NaturalState, vec: np.ndarray, beta1: float, beta2: float):
    """Fold ``vec`` into the moment accumulators and return bias-corrected moments."""
    if state.m1 is None:
        state.m1 = np.zeros_like(vec)
        state.m2 = np.zeros_like(vec)
    state.m1 = beta1 * state.m1 + (1.0 - beta1) * vec
    state.m2 = beta2 * state.m2 + (1.0 - beta2) * vec * vec
    steps = state.k + 1
    m1_hat = state.m1 / (1.0 - beta1**steps)
    m2_hat = state.m2 / (1.0 - beta2**steps)
    return m1_hat, m2_hat


def qbang_step(
    ev,
    theta,
    state: NaturalState,
    alpha: float,
    eps: float,
    beta1: float,
    beta2: float,
    lam: float = DEFAULT_REGULARIZER,
    delta: float = DEFAULT_TRUST_DELTA,
    approx: str = "block_diagonal",
    grad=None,
):
    """Broyden-carried metric inverse applied to Adam-style gradient moments.

    Direction = (B_inv m1_hat) / (sqrt(m2_hat) + delta), elementwise damping.
    """
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ValueError("moment decays must lie in [0, 1)")
    theta = np.asarray(theta, dtype=float)
    g = _gradient(ev, theta, grad)
    if state.b_inv is None:
        metric = ev.metric(theta, approximation=approx).matrix
        state.b_inv = np.linalg.inv(metric + lam * np.eye(len(theta)))
    else:
        updated = qbroyden_inverse_update(state.b_inv, g, eps)
        if updated is None:
            state.skips += 1
        else:
            state.b_inv = updated
    m1_hat, m2_hat = _adam_fold(state, g, beta1, beta2)
    direction = (state.b_inv @ m1_hat) / (np.sqrt(m2_hat) + delta)
    state.k += 1
    return theta - alpha * direction


def mqng_step(
    ev,
    theta,
    state: NaturalState,
    alpha: float,
    eps: float,
    beta1: float,
    beta2: float,
    lam: float = DEFAULT_REGULARIZER,
    delta: float = DEFAULT_TRUST_DELTA,
    approx: str = "block_diagonal",
    grad=None,
):
    """Momentum variant: fresh metric each step, low-passed, then Adam moments
    over the preconditioned direction.

        M_k = raw metric on step 0, else (1 - eps) M_{k-1} + eps * raw
        d_k = (M_k + lam I)^-1 grad
        step = alpha * m1_hat(d) / (sqrt(m2_hat(d)) + delta)
    """
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ValueError("moment decays must lie in [0, 1)")
    theta = np.asarray(theta, dtype=float)
    g = _gradient(ev, theta, grad)
    raw = ev.metric(theta, approximation=approx).matrix
    if state.metric is None:
        state.metric = np.asarray(raw, dtype=float)
    else:
        state.metric = (1.0 - eps) * state.metric + eps * raw
    d = qng_direction(state.metric, g, lam)
    m1_hat, m2_hat = _adam_fold(state, d, beta1, beta2)
    state.k += 1
    return theta - alpha * (m1_hat / (np.sqrt(m2_hat) + delta))
