"""Statevector evaluation of the layered MaxCut ansatz.

State layout: basis index bit k (least significant bit first) is vertex k's
side, matching the assignment convention in :mod:`qopt_bench.problems`.

Circuit convention, fixed and documented so optima are reproducible:

- start from the uniform superposition (Hadamards on |0...0>);
- problem layer ``U_P(gamma) = exp(-i*gamma*E)`` with ``E`` the diagonal of
  negated cut values (a product of one two-eigenvalue phase gate per edge);
- mixer layer ``U_B(beta)`` applies ``exp(-i*beta*X_i)`` per qubit, angle
  NOT halved, so the layer generator is the plain sum of X's.

Parameter order is ``(gamma_1..gamma_p, beta_1..beta_p)`` project-wide.

Gradients use the exact two-term shift rule applied per *gate occurrence*
(each gate has a two-eigenvalue generator, so the rule is exact there; a
single shift of the whole layer parameter is not exact because layer
generators have many distinct gaps).  For the phase gate of edge ``e`` the
eigenvalue gap is ``w_e``: shift ``pi/(2 w_e)``, prefactor ``w_e/2``.  For
each mixer gate the gap is 2: shift ``pi/4``, prefactor 1.

qCall accounting (one qcall = one circuit execution):

- ``expectation``: 1
- ``gradient``: ``2 p (m+ + n)`` with ``m+`` the positive-weight edge count
- ``partial_shift``: 2
- ``metric``: cost model ``p(2p+1)`` (full), ``3p`` (block), ``2p`` (diag)
- ``fidelity``: 1
- ``sample_bitstrings``: 1
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .problems import WeightedGraph, cut_spectrum
from .seeding import stream

Approximation = str  # "full" | "block_diagonal" | "diagonal"

_APPROXIMATIONS = ("full", "block_diagonal", "diagonal")


@dataclass(frozen=True)
class AnsatzConfig:
    n_qubits: int
    n_layers: int = 1
    shots: Optional[int] = None  # None = exact expectations

    def __post_init__(self) -> None:
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if self.n_qubits < 2:
            raise ValueError("n_qubits must be >= 2")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1 when sampled")

    @property
    def n_params(self) -> int:
        return 2 * self.n_layers


@dataclass(frozen=True)
class ParameterVector:
    """Layer angles; flattening order (gammas then betas) is fixed."""

    gammas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.gammas) != len(self.betas):
            raise ValueError("gammas and betas must have equal length")
        vals = tuple(self.gammas) + tuple(self.betas)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("parameters must be finite")

    @property
    def n_layers(self) -> int:
        return len(self.gammas)

    def to_array(self) -> np.ndarray:
        return np.array(self.gammas + self.betas, dtype=np.float64)

    @classmethod
    def from_array(cls, arr: Sequence[float]) -> "ParameterVector":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 1 or len(arr) % 2 != 0:
            raise ValueError("flat parameter vector must have even length")
        p = len(arr) // 2
        return cls(tuple(arr[:p]), tuple(arr[p:]))


@dataclass(frozen=True)
class MetricTensor:
    matrix: np.ndarray
    approximation: Approximation


def _as_flat(theta, n_params: int) -> np.ndarray:
    if isinstance(theta, ParameterVector):
        arr = theta.to_array()
    else:
        arr = np.asarray(theta, dtype=np.float64)
    if arr.shape != (n_params,):
        raise ValueError(f"parameter vector must have shape ({n_params},)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("parameters must be finite")
    return arr


def _apply_1q(psi: np.ndarray, n: int, qubit: int, mat: np.ndarray) -> np.ndarray:
    # C-order reshape puts bit n-1 on axis 0, so qubit q lives on axis n-1-q
    t = psi.reshape([2] * n)
    axis = n - 1 - qubit
    t = np.moveaxis(t, axis, 0)
    t = np.tensordot(mat, t, axes=([1], [0]))
    t = np.moveaxis(t, 0, axis)
    return t.reshape(-1)


def _mixer_gate(beta: float) -> np.ndarray:
    c = math.cos(beta)
    s = math.sin(beta)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def _apply_mixer_layer(
    psi: np.ndarray,
    n: int,
    beta: float,
    shifted_qubit: int = -1,
    shift: float = 0.0,
) -> np.ndarray:
    gate = _mixer_gate(beta)
    for q in range(n):
        if q == shifted_qubit:
            psi = _apply_1q(psi, n, q, _mixer_gate(beta + shift))
        else:
            psi = _apply_1q(psi, n, q, gate)
    return psi


def _sum_x(psi: np.ndarray, n: int) -> np.ndarray:
    """Apply the mixer generator (sum of single-qubit X's)."""
    t = psi.reshape([2] * n)
    out = np.zeros_like(t)
    for q in range(n):
        out += np.flip(t, axis=n - 1 - q)
    return out.reshape(-1)


def sample_from_state(
    psi: np.ndarray, shots: int, rng: np.random.Generator
) -> np.ndarray:
    """Multinomial draw of basis indices from |psi|^2."""
    probs = np.abs(psi) ** 2
    probs = probs / probs.sum()
    return rng.choice(len(probs), size=shots, p=probs)


def fubini_study_from_derivatives(
    psi: np.ndarray, derivatives: Sequence[np.ndarray]
) -> np.ndarray:
    """Assemble the Fubini-Study metric from a state and its parameter
    derivatives: Re(<d_i|d_j> - <d_i|psi><psi|d_j>).  Insensitive to a
    global phase on the state family."""
    k = len(derivatives)
    overlaps = np.array([np.vdot(d, psi) for d in derivatives])
    g = np.empty((k, k), dtype=np.float64)
    for i in range(k):
        for j in range(i, k):
            val = np.vdot(derivatives[i], derivatives[j])
            val -= overlaps[i] * np.conj(overlaps[j])
            g[i, j] = g[j, i] = val.real
    return g


def metric_qcall_cost(n_layers: int, approximation: Approximation) -> int:
    """Documented cost model: one call per retained independent entry for
    the reduced forms, quadratic for the full tensor."""
    p = n_layers
    if approximation == "full":
        return p * (2 * p + 1)  # = (2p)(2p+1)/2 unique entries
    if approximation == "block_diagonal":
        return 3 * p  # one 2x2 symmetric block per layer
    if approximation == "diagonal":
        return 2 * p
    raise ValueError(f"unknown approximation {approximation!r}")


def gradient_qcall_cost(graph: WeightedGraph, n_layers: int) -> int:
    """Two evaluations per gate occurrence; zero-weight edges are identity
    gates and are skipped."""
    m_pos = sum(1 for _, _, w in graph.edges if w > 0.0)
    return 2 * n_layers * (m_pos + graph.n_vertices)


class Evaluator:
    """Single-owner objective oracle for one (graph, ansatz) pair.

    Owns the monotone qcall counter and the shot-noise stream, so one
    Evaluator is created per optimization run.  ``shots=None`` gives exact
    expectations; otherwise each objective evaluation draws that many
    basis-state samples from the seeded stream.
    """

    def __init__(self, graph: WeightedGraph, config: AnsatzConfig, seed: int = 0):
        if config.n_qubits != graph.n_vertices:
            raise ValueError(
                f"config is for {config.n_qubits} qubits, "
                f"graph has {graph.n_vertices} vertices"
            )
        self.graph = graph
        self.config = config
        self.seed = seed
        self._n = graph.n_vertices
        self._p = config.n_layers
        self._energies = cut_spectrum(graph)
        self._edge_energies = [
            np.where((((np.arange(1 << self._n) >> u) ^ (np.arange(1 << self._n) >> v)) & 1).astype(bool), -w, 0.0)
            for u, v, w in graph.edges
        ]
        self._shot_rng = stream(seed, "shots")
        self._qcalls = 0

    @classmethod
    def for_graph(
        cls,
        graph: WeightedGraph,
        n_layers: int = 1,
        shots: Optional[int] = None,
        seed: int = 0,
    ) -> "Evaluator":
        cfg = AnsatzConfig(graph.n_vertices, n_layers, shots)
        return cls(graph, cfg, seed=seed)

    @property
    def qcalls(self) -> int:
        return self._qcalls

    @property
    def n_params(self) -> int:
        return 2 * self._p

    @property
    def energies(self) -> np.ndarray:
        return self._energies

    # ----- state preparation -----

    def statevector(self, theta, _shift=None) -> np.ndarray:
        """Prepared state; free of qcall cost (simulator introspection).

        ``_shift=(kind, layer, index, delta)`` internally offsets a single
        gate occurrence, the primitive behind the per-gate shift rule.
        """
        th = _as_flat(theta, self.n_params)
        gammas, betas = th[: self._p], th[self._p :]
        n = self._n
        psi = np.full(1 << n, 2.0 ** (-n / 2.0), dtype=np.complex128)
        for k in range(self._p):
            phase = gammas[k] * self._energies
            if _shift is not None and _shift[0] == "gamma" and _shift[1] == k:
                phase = phase + _shift[3] * self._edge_energies[_shift[2]]
            psi = psi * np.exp(-1j * phase)
            if _shift is not None and _shift[0] == "beta" and _shift[1] == k:
                psi = _apply_mixer_layer(
                    psi, n, betas[k], shifted_qubit=_shift[2], shift=_shift[3]
                )
            else:
                psi = _apply_mixer_layer(psi, n, betas[k])
        return psi

    # ----- objective -----

    def _value_of_state(self, psi: np.ndarray) -> float:
        self._qcalls += 1
        if self.config.shots is None:
            return float(np.dot(self._energies, np.abs(psi) ** 2))
        idx = sample_from_state(psi, self.config.shots, self._shot_rng)
        return float(self._energies[idx].mean())

    def expectation(self, theta) -> float:
        return self._value_of_state(self.statevector(theta))

    # ----- derivatives -----

    def gradient(self, theta) -> np.ndarray:
        """Exact per-gate parameter-shift gradient (same shot mode as the
        objective; see module docstring for the rule and qcall budget)."""
        th = _as_flat(theta, self.n_params)
        p, n = self._p, self._n
        grad = np.zeros(2 * p)
        for k in range(p):
            for e, (_, _, w) in enumerate(self.graph.edges):
                if w == 0.0:
                    continue
                shift = math.pi / (2.0 * w)
                up = self._value_of_state(
                    self.statevector(th, _shift=("gamma", k, e, +shift))
                )
                dn = self._value_of_state(
                    self.statevector(th, _shift=("gamma", k, e, -shift))
                )
                grad[k] += 0.5 * w * (up - dn)
            for q in range(n):
                up = self._value_of_state(
                    self.statevector(th, _shift=("beta", k, q, +math.pi / 4.0))
                )
                dn = self._value_of_state(
                    self.statevector(th, _shift=("beta", k, q, -math.pi / 4.0))
                )
                grad[p + k] += up - dn
        return grad

    def partial_shift(self, theta, j: int) -> float:
        """Two-point layer-parameter shift estimate of one gradient
        component (2 qcalls).  Exact only when the layer's eigenvalue gaps
        are all unit; used by the random-coordinate method as its cheap
        stochastic estimator."""
        th = _as_flat(theta, self.n_params)
        up = th.copy()
        dn = th.copy()
        up[j] += math.pi / 2.0
        dn[j] -= math.pi / 2.0
        return 0.5 * (self.expectation(up) - self.expectation(dn))

    # ----- metric -----

    def _derivative_states(self, th: np.ndarray):
        p, n = self._p, self._n
        gammas, betas = th[:p], th[p:]
        psi = np.full(1 << n, 2.0 ** (-n / 2.0), dtype=np.complex128)
        after_phase = []
        after_mixer = []
        for k in range(p):
            psi = psi * np.exp(-1j * gammas[k] * self._energies)
            after_phase.append(psi)
            psi = _apply_mixer_layer(psi, n, betas[k])
            after_mixer.append(psi)

        def evolve(v: np.ndarray, start: int) -> np.ndarray:
            for l in range(start, p):
                v = v * np.exp(-1j * gammas[l] * self._energies)
                v = _apply_mixer_layer(v, n, betas[l])
            return v

        derivs: list[np.ndarray] = [np.empty(0)] * (2 * p)
        for k in range(p):
            v = (-1j * self._energies) * after_phase[k]
            v = _apply_mixer_layer(v, n, betas[k])
            derivs[k] = evolve(v, k + 1)
            u = -1j * _sum_x(after_mixer[k], n)
            derivs[p + k] = evolve(u, k + 1)
        return psi, derivs

    def metric(self, theta, approximation: Approximation = "full") -> MetricTensor:
        """Fubini-Study metric tensor g^F (QFIM = 4 g^F), raw and
        unregularized; reduced approximations zero cross-layer couplings
        (block) or keep the diagonal only."""
        if approximation not in _APPROXIMATIONS:
            raise ValueError(f"unknown approximation {approximation!r}")
        th = _as_flat(theta, self.n_params)
        psi, derivs = self._derivative_states(th)
        g = fubini_study_from_derivatives(psi, derivs)
        p = self._p
        if approximation != "full":
            layer = np.concatenate([np.arange(p), np.arange(p)])
            same_layer = layer[:, None] == layer[None, :]
            if approximation == "block_diagonal":
                g = np.where(same_layer, g, 0.0)
            else:
                g = np.diag(np.diag(g))
        self._qcalls += metric_qcall_cost(p, approximation)
        return MetricTensor(g, approximation)

    # ----- sampling and overlaps -----

    def fidelity(self, theta_a, theta_b) -> float:
        """Squared overlap of two prepared states, computed exactly from
        statevectors (one qcall)."""
        self._qcalls += 1
        pa = self.statevector(theta_a)
        pb = self.statevector(theta_b)
        return float(np.abs(np.vdot(pa, pb)) ** 2)

    def sample_bitstrings(self, theta, shots: int) -> np.ndarray:
        """Seeded multinomial draw of basis states (one qcall)."""
        if shots < 1:
            raise ValueError("shots must be >= 1")
        self._qcalls += 1
        return sample_from_state(self.statevector(theta), shots, self._shot_rng)


def prepare_state(graph: WeightedGraph, config: AnsatzConfig, theta) -> np.ndarray:
    """Module-level state preparation (no qcall accounting)."""
    return Evaluator(graph, config).statevector(theta)
