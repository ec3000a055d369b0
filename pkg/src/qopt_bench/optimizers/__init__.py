"""Optimizer suite: quasi-Newton, natural-gradient, and stochastic methods.

Layout:
    linesearch   backtracking Armijo / curvature acceptance
    quasinewton  inverse-curvature updates (BFGS, DFP, SR1, SP-BFGS) + NCG direction
    natural      metric-preconditioned steps (QNG variants, qBroyden, qBang)
    stochastic   perturbation methods (SPSA, 2SPSA, QNSPSA, RCD)
    schemas      per-method hyperparameter schemas: names, defaults, search bounds
    runner       uniform run() loop producing RunRecords

All methods consume an oracle object exposing (a subset of) the Evaluator
API: expectation, gradient, metric, fidelity, partial_shift, qcalls.
"""

from .linesearch import LineSearchConfig, LineSearchResult, line_search
from .quasinewton import (
    SecantPenaltyConfig,
    ncg_direction,
    secant_penalty,
    update_bfgs,
    update_dfp,
    update_sp_bfgs,
    update_sr1,
)
from .natural import (
    NaturalState,
    momentum_step,
    mqng_step,
    qbang_step,
    qbroyden_inverse_update,
    qbroyden_step,
    qng_direction,
    qng_step,
)
from .stochastic import (
    CurvatureAverage,
    QNSPSAConfig,
    RCDConfig,
    SPSAConfig,
    qnspsa_step,
    rcd_step,
    spsa2_step,
    spsa_gains,
    spsa_step,
)
from .schemas import (
    METHOD_IDS,
    HyperDim,
    MethodSpec,
    default_hyper,
    method_spec,
    validate_hyper,
)
from .runner import RunRecord, StopRule, run

__all__ = [
    "LineSearchConfig",
    "LineSearchResult",
    "line_search",
    "SecantPenaltyConfig",
    "secant_penalty",
    "update_bfgs",
    "update_dfp",
    "update_sr1",
    "update_sp_bfgs",
    "ncg_direction",
    "NaturalState",
    "qng_direction",
    "qng_step",
    "momentum_step",
    "qbroyden_inverse_update",
    "qbroyden_step",
    "qbang_step",
    "mqng_step",
    "SPSAConfig",
    "QNSPSAConfig",
    "RCDConfig",
    "CurvatureAverage",
    "spsa_gains",
    "spsa_step",
    "spsa2_step",
    "qnspsa_step",
    "rcd_step",
    "HyperDim",
    "MethodSpec",
    "METHOD_IDS",
    "method_spec",
    "default_hyper",
    "validate_hyper",
    "StopRule",
    "RunRecord",
    "run",
]
