"""Backtracking line search with Armijo and curvature acceptance.

Candidate steps are alpha0 * beta_reduce**k for k = 0..max_backtracks.  Two
acceptance modes exist:

    "either"  accept a candidate as soon as the Armijo decrease test OR the
              curvature test holds.  The gradient at the candidate point is
              evaluated only when Armijo fails.
    "both"    classical strong acceptance: a candidate needs Armijo AND the
              curvature test, so every candidate costs one objective and one
              gradient evaluation.

If no candidate is accepted the search returns the last candidate with
``exhausted`` set; callers decide whether to take the step anyway.  A
non-finite objective or gradient during the search sets ``failed`` and the
run that requested the search is expected to abort.

Cost bookkeeping (``n_f_evals`` / ``n_g_evals``) is exposed so callers can
reconcile oracle call counters exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MODE_EITHER = "either"
MODE_BOTH = "both"


@dataclass(frozen=True)
class LineSearchConfig:
    """Backtracking parameters.

    c1 < c2 is the classical well-posedness relation for the two tests, but
    it is deliberately not enforced: the published search bounds allow c1 to
    exceed c2, and acceptance on either condition keeps the loop well
    defined in that regime.
    """

    alpha0: float
    beta_reduce: float
    c1: float = 1e-4
    c2: float = 0.9
    max_backtracks: int = 20
    mode: str = MODE_EITHER

    def __post_init__(self) -> None:
        if not (np.isfinite(self.alpha0) and self.alpha0 > 0):
            raise ValueError("alpha0 must be finite and > 0")
        if not (0.0 < self.beta_reduce < 1.0):
            raise ValueError("beta_reduce must lie in (0, 1)")
        if not (np.isfinite(self.c1) and self.c1 > 0):
            raise ValueError("c1 must be finite and > 0")
        if not (0.0 < self.c2 <= 1.0):
            raise ValueError("c2 must lie in (0, 1]")
        if int(self.max_backtracks) != self.max_backtracks or self.max_backtracks < 0:
            raise ValueError("max_backtracks must be a non-negative integer")
        if self.mode not in (MODE_EITHER, MODE_BOTH):
            raise ValueError(f"unknown line search mode {self.mode!r}")


@dataclass
class LineSearchResult:
    alpha: float
    f_new: float
    g_new: np.ndarray | None
    backtracks: int
    accepted: bool
    exhausted: bool
    failed: bool = False
    n_f_evals: int = 0
    n_g_evals: int = 0


def line_search(oracle, theta, f0, g0, direction, cfg: LineSearchConfig) -> LineSearchResult:
    """Search along ``direction`` from ``theta`` given f0 = f(theta), g0 = grad f(theta)."""
    theta = np.asarray(theta, dtype=float)
    p = np.asarray(direction, dtype=float)
    if not np.all(np.isfinite(p)) or not np.any(p):
        raise ValueError("search direction must be finite and nonzero")
    slope = float(p @ g0)
    n_f = 0
    n_g = 0
    alpha = cfg.alpha0
    f_new = float("nan")
    g_new: np.ndarray | None = None
    for k in range(cfg.max_backtracks + 1):
        alpha = cfg.alpha0 * cfg.beta_reduce**k
        candidate = theta + alpha * p
        f_new = float(oracle.expectation(candidate))
        n_f += 1
        if not np.isfinite(f_new):
            return LineSearchResult(
                alpha, f_new, None, k, accepted=False, exhausted=False,
                failed=True, n_f_evals=n_f, n_g_evals=n_g,
            )
        armijo = f_new <= f0 + cfg.c1 * alpha * slope
        g_new = None
        curvature = False
        # The gradient is needed whenever the curvature test must be decided:
        # always in "both" mode, on Armijo failure in "either" mode.
        if cfg.mode == MODE_BOTH or not armijo:
            g_new = np.asarray(oracle.gradient(candidate), dtype=float)
            n_g += 1
            if not np.all(np.isfinite(g_new)):
                return LineSearchResult(
                    alpha, f_new, None, k, accepted=False, exhausted=False,
                    failed=True, n_f_evals=n_f, n_g_evals=n_g,
                )
            curvature = -(float(p @ g_new)) <= -cfg.c2 * slope
        ok = (armijo or curvature) if cfg.mode == MODE_EITHER else (armijo and curvature)
        if ok:
            return LineSearchResult(
                alpha, f_new, g_new, k, accepted=True, exhausted=False,
                n_f_evals=n_f, n_g_evals=n_g,
            )
    return LineSearchResult(
        alpha, f_new, g_new, cfg.max_backtracks, accepted=False, exhausted=True,
        n_f_evals=n_f, n_g_evals=n_g,
    )
