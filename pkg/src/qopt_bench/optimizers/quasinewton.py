"""Inverse-curvature updates for the quasi-Newton family.

All update functions work on B, the running approximation of the INVERSE
Hessian, and return either the updated matrix or None when the update must
be skipped (degenerate denominators, curvature below floor).  Callers count
skips; a skip leaves the previous B in force.

The secant-penalized update (``update_sp_bfgs``) blends between leaving B
untouched (penalty weight beta == 0, pure-gradient regime) and the exact
BFGS update (beta -> infinity).  Its weight is computed from the step norm
by ``secant_penalty``: beta = max(ns * ||s|| - n0, 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# s'y <= CURVATURE_FLOOR * ||s|| * ||y|| skips BFGS/DFP (no safe curvature).
CURVATURE_FLOOR = 1e-12
# |(s - By)'y| < SR1_SKIP * ||s - By|| * ||y|| skips SR1 (standard guard).
SR1_SKIP = 1e-8


@dataclass(frozen=True)
class SecantPenaltyConfig:
    """Gradient-noise penalty: intercept n0 and slope ns, both >= 0."""

    n0: float
    ns: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.n0) and self.n0 >= 0):
            raise ValueError("n0 must be finite and >= 0")
        if not (np.isfinite(self.ns) and self.ns >= 0):
            raise ValueError("ns must be finite and >= 0")


def secant_penalty(s, pen: SecantPenaltyConfig) -> float:
    """Penalty weight beta = max(ns * ||s||_2 - n0, 0); always >= 0."""
    return max(pen.ns * float(np.linalg.norm(s)) - pen.n0, 0.0)


def _curvature_ok(s: np.ndarray, y: np.ndarray, floor: float) -> bool:
    sy = float(s @ y)
    return np.isfinite(sy) and sy > floor * float(np.linalg.norm(s)) * float(np.linalg.norm(y))


def update_bfgs(b, s, y, floor: float = CURVATURE_FLOOR):
    """Rank-2 inverse update; requires s'y above the curvature floor."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    if not _curvature_ok(s, y, floor):
        return None
    sy = float(s @ y)
    by = b @ y
    yby = float(y @ by)
    rho = 1.0 / sy
    return b + (1.0 + yby * rho) * rho * np.outer(s, s) - rho * (np.outer(s, by) + np.outer(by, s))


def update_dfp(b, s, y, floor: float = CURVATURE_FLOOR):
    """Rank-2 inverse update B + ss'/s'y - Byy'B/y'By."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    if not _curvature_ok(s, y, floor):
        return None
    by = b @ y
    yby = float(y @ by)
    # y'By <= 0 means B has numerically lost positive definiteness along y.
    if not np.isfinite(yby) or yby <= 0.0:
        return None
    return b + np.outer(s, s) / float(s @ y) - np.outer(by, by) / yby


def update_sr1(b, s, y, r: float = SR1_SKIP):
    """Symmetric rank-1 update; positive definiteness deliberately not enforced."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    u = s - b @ y
    norm_u = float(np.linalg.norm(u))
    if norm_u == 0.0:
        return None
    den = float(u @ y)
    # <= so y == 0 (threshold 0) is skipped too, not divided by.
    if not np.isfinite(den) or abs(den) <= r * norm_u * float(np.linalg.norm(y)):
        return None
    return b + np.outer(u, u) / den


def update_sp_bfgs(b, s, y, pen: SecantPenaltyConfig):
    """Penalized BFGS product-form update.

    beta == 0 returns B unchanged (copy).  Otherwise, with
    gamma = 1/(s'y + 1/beta) and omega = 1/(s'y + 2/beta):

        B' = (I - omega s y') B (I - omega y s')
             + [gamma + omega (gamma - omega) y'By] s s'

    Degenerate denominators (s'y == -1/beta or -2/beta) skip the update.
    """
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    beta = secant_penalty(s, pen)
    if beta == 0.0:
        return np.array(b, dtype=float, copy=True)
    sy = float(s @ y)
    d1 = sy + 1.0 / beta
    d2 = sy + 2.0 / beta
    if d1 == 0.0 or d2 == 0.0 or not (np.isfinite(d1) and np.isfinite(d2)):
        return None
    gamma = 1.0 / d1
    omega = 1.0 / d2
    if not (np.isfinite(gamma) and np.isfinite(omega)):
        return None
    t = np.eye(len(s)) - omega * np.outer(s, y)
    yby = float(y @ b @ y)
    coef = gamma + omega * (gamma - omega) * yby
    return t @ b @ t.T + coef * np.outer(s, s)


def ncg_direction(g, g_prev, p_prev, scale: float, steps_since_reset: int, reset_every: int):
    """Conjugate direction with a scaled mixing coefficient.

    beta = (y'g - (1/scale) p_prev'g) / (y'p_prev) where y = g - g_prev.
    scale == 1 gives the Perry-form coefficient; scale -> infinity recovers
    the Hestenes-Stiefel coefficient y'g / y'p_prev.

    Resets to steepest descent (returning (-g, True)) on the first call,
    every ``reset_every`` accumulated steps, on a zero denominator, or when
    the blended direction fails the descent test p'g < 0.
    """
    g = np.asarray(g, dtype=float)
    if g_prev is None or p_prev is None or steps_since_reset >= reset_every:
        return -g, True
    y = g - np.asarray(g_prev, dtype=float)
    p_prev = np.asarray(p_prev, dtype=float)
    den = float(y @ p_prev)
    if den == 0.0 or not np.isfinite(den):
        return -g, True
    beta = (float(y @ g) - float(p_prev @ g) / scale) / den
    p = -g + beta * p_prev
    if not np.all(np.isfinite(p)) or float(p @ g) >= 0.0:
        return -g, True
    return p, False
