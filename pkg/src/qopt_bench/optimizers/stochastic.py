"""Simultaneous-perturbation and coordinate-descent methods.

Oracle calls per step (these totals exclude the runner's one bookkeeping
objective evaluation per iteration):

    spsa_step    2   (one +/- objective pair)
    spsa2_step   2 + 2 * n_h  (gradient pair reused by the curvature pair)
    qnspsa_step  6   (gradient pair + 4 fidelity evaluations)
    rcd_step     2   (single-coordinate two-point shift)

Curvature/metric running averages live in ``CurvatureAverage``.  The solve
at step k uses the average of samples 0..k-1 (an identity prior before any
sample exists), and the step's own sample is folded in afterwards, so the
very first step of the second-order methods points along the plain SPSA
estimate.  The stored average is raw; the eigenvalue floor is applied only
to the solve operand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_EIGEN_FLOOR = 1e-4


def _check_positive(name: str, value: float) -> None:
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be finite and > 0")


def _check_decay(name: str, value: float) -> None:
    if not (0.0 < value <= 1.0):
        raise ValueError(f"{name} must lie in (0, 1]")


@dataclass(frozen=True)
class SPSAConfig:
    """Gain schedules for the perturbation methods.

        a_k = a_init / (big_a + k + 1) ** alpha_decay
        c_k = c_init / (k + 1) ** gamma_decay

    The curvature stream (second-order variant) draws ``n_h`` samples per
    step, scales them by ``ah_init`` and perturbs with its own gain
    ch_init / (k + 1) ** gamma_decay.
    """

    a_init: float = 0.2
    c_init: float = 0.1
    big_a: float = 40.0
    alpha_decay: float = 0.602
    gamma_decay: float = 0.101
    ah_init: float = 1.0
    ch_init: float = 0.1
    n_h: int = 1
    h_floor: float = DEFAULT_EIGEN_FLOOR

    def __post_init__(self) -> None:
        _check_positive("a_init", self.a_init)
        _check_positive("c_init", self.c_init)
        if not (np.isfinite(self.big_a) and self.big_a >= 0):
            raise ValueError("big_a must be finite and >= 0")
        _check_decay("alpha_decay", self.alpha_decay)
        _check_decay("gamma_decay", self.gamma_decay)
        _check_positive("ah_init", self.ah_init)
        _check_positive("ch_init", self.ch_init)
        if int(self.n_h) != self.n_h or self.n_h < 1:
            raise ValueError("n_h must be a positive integer")
        _check_positive("h_floor", self.h_floor)


@dataclass(frozen=True)
class QNSPSAConfig:
    """Metric-preconditioned perturbation method: a_k = alpha / (k+1) ** eps_decay,
    fixed perturbation size c."""

    alpha: float = 0.05
    eps_decay: float = 0.602
    c: float = 0.01
    g_floor: float = DEFAULT_EIGEN_FLOOR

    def __post_init__(self) -> None:
        _check_positive("alpha", self.alpha)
        _check_decay("eps_decay", self.eps_decay)
        _check_positive("c", self.c)
        _check_positive("g_floor", self.g_floor)


@dataclass(frozen=True)
class RCDConfig:
    """Random coordinate descent: step alpha / (k+1) ** gamma_decay along one axis."""

    alpha: float = 0.3
    gamma_decay: float = 0.101

    def __post_init__(self) -> None:
        _check_positive("alpha", self.alpha)
        if not (0.0 <= self.gamma_decay <= 1.0):
            raise ValueError("gamma_decay must lie in [0, 1]")


class CurvatureAverage:
    """Running average of symmetric curvature/metric samples.

    ``solve_operand`` returns the identity until the first sample arrives,
    then the eigenvalue-floored average.  ``fold`` adds a sample with weight
    1/(count+1), i.e. the plain mean of all samples seen so far.
    """

    def __init__(self) -> None:
        self.matrix: np.ndarray | None = None
        self.count: int = 0

    def solve_operand(self, n: int, floor: float) -> np.ndarray:
        if self.matrix is None:
            return np.eye(n)
        return eigen_floor(self.matrix, floor)

    def fold(self, sample: np.ndarray) -> None:
        sample = np.asarray(sample, dtype=float)
        if self.matrix is None:
            self.matrix = sample.copy()
        else:
            w = 1.0 / (self.count + 1)
            self.matrix = (1.0 - w) * self.matrix + w * sample
        self.count += 1


def eigen_floor(matrix: np.ndarray, floor: float) -> np.ndarray:
    """Clip the eigenvalues of a symmetric matrix at +floor."""
    w, v = np.linalg.eigh(matrix)
    return (v * np.maximum(w, floor)) @ v.T


def rademacher(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n) * 2.0 - 1.0


def spsa_gains(k: int, cfg: SPSAConfig) -> tuple[float, float]:
    a_k = cfg.a_init / (cfg.big_a + k + 1) ** cfg.alpha_decay
    c_k = cfg.c_init / (k + 1) ** cfg.gamma_decay
    return a_k, c_k


def _spsa_gradient(ev, theta, c_k, delta):
    f_plus = float(ev.expectation(theta + c_k * delta))
    f_minus = float(ev.expectation(theta - c_k * delta))
    ghat = (f_plus - f_minus) / (2.0 * c_k) * (1.0 / delta)
    return ghat, f_plus, f_minus


def spsa_step(ev, theta, k: int, cfg: SPSAConfig, rng: np.random.Generator) -> np.ndarray:
    """Two-sided simultaneous perturbation step; exactly 2 objective calls."""
    theta = np.asarray(theta, dtype=float)
    a_k, c_k = spsa_gains(k, cfg)
    delta = rademacher(rng, len(theta))
    ghat, _, _ = _spsa_gradient(ev, theta, c_k, delta)
    return theta - a_k * ghat


def spsa2_step(
    ev,
    theta,
    k: int,
    cfg: SPSAConfig,
    rng: np.random.Generator,
    curv: CurvatureAverage,
) -> np.ndarray:
    """Second-order step: precondition the SPSA estimate by averaged curvature samples.

    The two gradient evaluations are reused by each curvature sample, which
    adds two offset evaluations, so the default n_h=1 costs 4 calls total.
    """
    theta = np.asarray(theta, dtype=float)
    n = len(theta)
    a_k, c_k = spsa_gains(k, cfg)
    delta1 = rademacher(rng, n)
    ghat, f_plus, f_minus = _spsa_gradient(ev, theta, c_k, delta1)
    theta_new = theta - a_k * np.linalg.solve(curv.solve_operand(n, cfg.h_floor), ghat)
    ct_k = cfg.ch_init / (k + 1) ** cfg.gamma_decay
    for _ in range(cfg.n_h):
        delta2 = rademacher(rng, n)
        f_pp = float(ev.expectation(theta + c_k * delta1 + ct_k * delta2))
        f_mp = float(ev.expectation(theta - c_k * delta1 + ct_k * delta2))
        d2g = (f_pp - f_plus) - (f_mp - f_minus)
        cross = np.outer(1.0 / delta1, 1.0 / delta2)
        sample = cfg.ah_init * d2g / (2.0 * c_k * ct_k) * 0.5 * (cross + cross.T)
        curv.fold(sample)
    return theta_new


def qnspsa_step(
    ev,
    theta,
    k: int,
    cfg: QNSPSAConfig,
    rng: np.random.Generator,
    curv: CurvatureAverage,
) -> np.ndarray:
    """Precondition the SPSA estimate with a metric built from fidelity samples.

    The metric sample comes from a second difference of state overlaps
    |<psi(theta)|psi(theta')>|^2 at four perturbed points (1 call each):

        sample = -1/2 * d2F / (2 c^2) * sym(delta1 delta2')
    """
    theta = np.asarray(theta, dtype=float)
    n = len(theta)
    a_k = cfg.alpha / (k + 1) ** cfg.eps_decay
    c = cfg.c
    delta1 = rademacher(rng, n)
    ghat, _, _ = _spsa_gradient(ev, theta, c, delta1)
    theta_new = theta - a_k * np.linalg.solve(curv.solve_operand(n, cfg.g_floor), ghat)
    delta2 = rademacher(rng, n)
    f_pp = float(ev.fidelity(theta, theta + c * delta1 + c * delta2))
    f_p = float(ev.fidelity(theta, theta + c * delta1))
    f_mp = float(ev.fidelity(theta, theta - c * delta1 + c * delta2))
    f_m = float(ev.fidelity(theta, theta - c * delta1))
    d2f = f_pp - f_p - f_mp + f_m
    cross = np.outer(delta1, delta2)
    sample = -0.5 * d2f / (2.0 * c * c) * 0.5 * (cross + cross.T)
    curv.fold(sample)
    return theta_new


def rcd_step(ev, theta, k: int, cfg: RCDConfig, rng: np.random.Generator) -> np.ndarray:
    """Shift-rule derivative along one uniformly drawn coordinate (2 calls)."""
    theta = np.asarray(theta, dtype=float)
    j = int(rng.integers(len(theta)))
    deriv = float(ev.partial_shift(theta, j))
    theta_new = theta.copy()
    theta_new[j] -= cfg.alpha / (k + 1) ** cfg.gamma_decay * deriv
    return theta_new
