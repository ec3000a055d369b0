"""Per-method hyperparameter schemas.

Every method publishes its hyperparameter names, defaults, and search
bounds as plain data so the tuner and the CLI can consume them uniformly.
Bounds are inclusive.  Dims marked tunable=False are exposed knobs that the
Bayesian sweeps leave alone (regularizers, trust floors, structural
choices); they still validate and serialize like any other hyperparameter.

Defaults for the line-search and metric families are the tuned settings the
benchmark protocol treats as its baselines; the perturbation family uses
the customary gain-schedule values since no tuned baseline is published for
it (search bounds there are practical ranges, documented here as ours).
"""

from __future__ import annotations

from dataclasses import dataclass

FAMILY_QUASI_NEWTON = "quasi_newton"
FAMILY_NATURAL = "natural_gradient"
FAMILY_STOCHASTIC = "stochastic"

# Benchmark-protocol iteration caps per family.
DEFAULT_MAX_ITERATIONS = {
    FAMILY_QUASI_NEWTON: 60,
    FAMILY_NATURAL: 60,
    FAMILY_STOCHASTIC: 400,
}


@dataclass(frozen=True)
class HyperDim:
    """One hyperparameter: default value, inclusive bounds, tuning scale."""

    name: str
    default: float
    low: float
    high: float
    scale: str = "linear"  # "linear" | "log"
    tunable: bool = True

    def __post_init__(self) -> None:
        if not self.low < self.high:
            raise ValueError(f"{self.name}: low must be < high")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"{self.name}: unknown scale {self.scale!r}")
        if self.scale == "log" and self.low <= 0:
            raise ValueError(f"{self.name}: log scale needs positive bounds")
        if not (self.low <= self.default <= self.high):
            raise ValueError(f"{self.name}: default outside bounds")


@dataclass(frozen=True)
class MethodSpec:
    method_id: str
    family: str
    dims: tuple[HyperDim, ...]
    description: str

    @property
    def default_max_iterations(self) -> int:
        return DEFAULT_MAX_ITERATIONS[self.family]

    @property
    def tunable_dims(self) -> tuple[HyperDim, ...]:
        return tuple(d for d in self.dims if d.tunable)


def _ls_dims(alpha, beta, c1, c2, c1_high=5.0):
    return (
        HyperDim("alpha", alpha, 1e-5, 0.99, scale="log"),
        HyperDim("beta", beta, 0.8, 0.9),
        HyperDim("c1", c1, 1e-5, c1_high, scale="log"),
        HyperDim("c2", c2, 0.1, 1.0),
    )


_QNG_EXTRAS = (
    HyperDim("lam", 1e-6, 1e-12, 1e-2, scale="log", tunable=False),
)

_MOMENT_EXTRAS = _QNG_EXTRAS + (
    HyperDim("delta", 1e-8, 1e-12, 1e-2, scale="log", tunable=False),
)

_SPSA_GAINS = (
    HyperDim("a_init", 0.2, 1e-3, 2.0, scale="log"),
    HyperDim("c_init", 0.1, 1e-3, 1.0, scale="log"),
    HyperDim("big_a", 40.0, 0.0, 100.0),
    HyperDim("alpha_decay", 0.602, 0.1, 1.0),
    HyperDim("gamma_decay", 0.101, 0.01, 1.0),
)

_SPECS = (
    MethodSpec(
        "bfgs",
        FAMILY_QUASI_NEWTON,
        _ls_dims(0.70, 0.8, 1e-4, 1.0),
        "rank-2 inverse-curvature update with backtracking line search",
    ),
    MethodSpec(
        "dfp",
        FAMILY_QUASI_NEWTON,
        _ls_dims(0.37, 0.89, 0.0017, 1.0),
        "dual rank-2 inverse-curvature update with backtracking line search",
    ),
    MethodSpec(
        "ncg",
        FAMILY_QUASI_NEWTON,
        _ls_dims(0.99, 0.83, 0.34, 0.59)
        + (HyperDim("scale", 1.0, 0.1, 10.0, scale="log", tunable=False),),
        "nonlinear conjugate directions with scaled mixing coefficient",
    ),
    MethodSpec(
        "sr1",
        FAMILY_QUASI_NEWTON,
        _ls_dims(0.48, 0.83, 1e-5, 1.0),
        "symmetric rank-1 update, indefiniteness allowed",
    ),
    MethodSpec(
        "sp_bfgs",
        FAMILY_QUASI_NEWTON,
        _ls_dims(0.049, 0.82, 1.67e-5, 1.0, c1_high=1.0)
        + (
            HyperDim("n0", 1e-5, 1e-5, 1.0, scale="log"),
            HyperDim("ns", 1e-5, 1e-5, 1.0, scale="log"),
        ),
        "secant-penalized rank-2 update robust to gradient noise",
    ),
    MethodSpec(
        "qng_block",
        FAMILY_NATURAL,
        (
            HyperDim("alpha", 0.0016, 1e-5, 0.99, scale="log"),
            HyperDim("momentum", 0.0, 0.0, 0.99, tunable=False),
        )
        + _QNG_EXTRAS,
        "metric-preconditioned descent, layer-block metric approximation",
    ),
    MethodSpec(
        "qng_diag",
        FAMILY_NATURAL,
        (
            HyperDim("alpha", 0.0026, 1e-5, 0.99, scale="log"),
            HyperDim("momentum", 0.0, 0.0, 0.99, tunable=False),
        )
        + _QNG_EXTRAS,
        "metric-preconditioned descent, diagonal metric approximation",
    ),
    MethodSpec(
        "qbroyden",
        FAMILY_NATURAL,
        (
            HyperDim("alpha", 0.0088, 1e-5, 0.99, scale="log"),
            HyperDim("eps", 0.0003, 1e-5, 0.99, scale="log"),
        )
        + _QNG_EXTRAS,
        "metric seeded once, then carried by rank-1 inverse updates",
    ),
    MethodSpec(
        "qbang",
        FAMILY_NATURAL,
        (
            HyperDim("alpha", 0.14, 1e-5, 0.99, scale="log"),
            HyperDim("eps", 5.06e-5, 1e-5, 0.98, scale="log"),
            HyperDim("beta1", 0.0078, 1e-5, 0.99, scale="log"),
            HyperDim("beta2", 0.0001, 1e-5, 0.99, scale="log"),
        )
        + _MOMENT_EXTRAS,
        "Broyden-carried metric applied to moment-filtered gradients",
    ),
    MethodSpec(
        "mqng",
        FAMILY_NATURAL,
        (
            HyperDim("alpha", 0.14, 1e-5, 0.99, scale="log"),
            HyperDim("eps", 5.06e-5, 1e-5, 0.99, scale="log"),
            HyperDim("beta1", 0.0078, 1e-5, 0.99, scale="log"),
            HyperDim("beta2", 0.0001, 1e-5, 0.99, scale="log"),
        )
        + _MOMENT_EXTRAS,
        "fresh low-passed metric each step, moments over the preconditioned direction",
    ),
    MethodSpec(
        "spsa",
        FAMILY_STOCHASTIC,
        _SPSA_GAINS,
        "two-sided simultaneous perturbation gradient estimate",
    ),
    MethodSpec(
        "spsa2",
        FAMILY_STOCHASTIC,
        _SPSA_GAINS
        + (
            HyperDim("ah_init", 1.0, 1e-2, 10.0, scale="log"),
            HyperDim("ch_init", 0.1, 1e-3, 1.0, scale="log"),
            HyperDim("h_floor", 1e-4, 1e-8, 1.0, scale="log", tunable=False),
        ),
        "perturbation gradient preconditioned by averaged curvature samples",
    ),
    MethodSpec(
        "qnspsa",
        FAMILY_STOCHASTIC,
        (
            HyperDim("alpha", 0.05, 1e-3, 1.0, scale="log"),
            HyperDim("eps_decay", 0.602, 0.1, 1.0),
            HyperDim("c", 0.01, 1e-3, 0.1, scale="log", tunable=False),
            HyperDim("g_floor", 1e-4, 1e-8, 1.0, scale="log", tunable=False),
        ),
        "perturbation gradient preconditioned by fidelity-sampled metric",
    ),
    MethodSpec(
        "rcd",
        FAMILY_STOCHASTIC,
        (
            HyperDim("alpha", 0.3, 1e-3, 1.0, scale="log"),
            HyperDim("gamma_decay", 0.101, 0.0, 1.0),
        ),
        "single-coordinate shift-rule descent",
    ),
)

_REGISTRY = {spec.method_id: spec for spec in _SPECS}

METHOD_IDS = tuple(spec.method_id for spec in _SPECS)


def method_spec(method_id: str) -> MethodSpec:
    try:
        return _REGISTRY[method_id]
    except KeyError:
        raise KeyError(
            f"unknown method {method_id!r}; known: {', '.join(METHOD_IDS)}"
        ) from None


def default_hyper(method_id: str) -> dict[str, float]:
    return {d.name: d.default for d in method_spec(method_id).dims}


def validate_hyper(method_id: str, hyper: dict | None) -> dict[str, float]:
    """Fill defaults and bound-check; unknown keys are rejected."""
    spec = method_spec(method_id)
    known = {d.name: d for d in spec.dims}
    out = default_hyper(method_id)
    for key, value in (hyper or {}).items():
        if key not in known:
            raise ValueError(f"{method_id}: unknown hyperparameter {key!r}")
        value = float(value)
        dim = known[key]
        if not (dim.low <= value <= dim.high):
            raise ValueError(
                f"{method_id}: {key}={value} outside [{dim.low}, {dim.high}]"
            )
        out[key] = value
    return out
