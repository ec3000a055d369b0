"""Weighted MaxCut instances: generation, exact solutions, serialization.

Conventions used project-wide:

- Vertices are ``0..n-1``.  A cut assignment is an integer whose bit ``i``
  (least significant bit first) gives vertex ``i``'s side.
- ``cut_value`` returns the *negated* crossing weight, so better cuts are
  lower and every routine in the project minimizes.
- Edge lists are kept sorted lexicographically with ``u < v``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .seeding import stream

MAX_VERTICES = 24

# Attempts before generation gives up on connectivity (or regular pairing).
RESAMPLE_LIMIT = 200

# Block length for enumeration loops, bounds memory at large n.
_BLOCK = 1 << 18


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph with non-negative edge weights.

    ``seed`` records the generation seed for provenance; hand-built graphs
    use ``None``.  Generated graphs always carry strictly positive weights;
    zero weights are tolerated at the type level so degenerate cases (for
    instance an all-zero objective) remain constructible in tests.
    """

    n_vertices: int
    edges: tuple[tuple[int, int, float], ...]
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        n = self.n_vertices
        if not 2 <= n <= MAX_VERTICES:
            raise ValueError(f"n_vertices must be in [2, {MAX_VERTICES}], got {n}")
        canon = []
        seen = set()
        for edge in self.edges:
            u, v, w = int(edge[0]), int(edge[1]), float(edge[2])
            if not 0 <= u < v < n:
                raise ValueError(f"edge ({u}, {v}) violates 0 <= u < v < n")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u}, {v})")
            if not np.isfinite(w) or w < 0.0:
                raise ValueError(f"edge ({u}, {v}) has invalid weight {w}")
            seen.add((u, v))
            canon.append((u, v, w))
        canon.sort()
        object.__setattr__(self, "edges", tuple(canon))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def total_weight(self) -> float:
        return float(sum(w for _, _, w in self.edges))

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for u, v, _ in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj


@dataclass(frozen=True)
class GroundTruth:
    """Exact optimum of a MaxCut instance, in minimization convention.

    ``optimal_assignments`` lists every assignment achieving the optimum,
    complements included, sorted ascending.
    """

    n_vertices: int
    optimal_value: float
    optimal_assignments: tuple[int, ...]


def is_connected(graph: WeightedGraph) -> bool:
    adj = graph.adjacency()
    seen = {0}
    todo = [0]
    while todo:
        u = todo.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                todo.append(v)
    return len(seen) == graph.n_vertices


def generate_problem(
    n_vertices: int,
    seed: int,
    density: float = 0.5,
    weight_range: tuple[float, float] = (0.1, 1.0),
    degree: Optional[int] = None,
) -> WeightedGraph:
    """Seeded random connected graph with uniform weights.

    Draw order (fixed, so instances regenerate bit-identically):

    1. one uniform per vertex pair in lexicographic order (0,1), (0,2), ...;
       the pair becomes an edge iff the draw is below ``density``;
    2. one uniform weight in ``weight_range`` per included edge, again in
       lexicographic order.

    Disconnected samples are rejected and both passes rerun on the same
    stream, at most ``RESAMPLE_LIMIT`` times before raising.  When
    ``degree`` is given, step 1 is replaced by a stub-pairing draw of a
    simple ``degree``-regular graph (``density`` is ignored).
    """
    if not 2 <= n_vertices <= MAX_VERTICES:
        raise ValueError(f"n_vertices must be in [2, {MAX_VERTICES}]")
    lo, hi = float(weight_range[0]), float(weight_range[1])
    if not (np.isfinite(lo) and np.isfinite(hi) and 0.0 < lo <= hi):
        raise ValueError(f"invalid weight_range {weight_range}")
    if degree is None and not 0.0 <= density <= 1.0:
        raise ValueError(f"density must be in [0, 1], got {density}")
    if degree is not None:
        if not 1 <= degree < n_vertices:
            raise ValueError(f"degree must be in [1, n-1], got {degree}")
        if (n_vertices * degree) % 2 != 0:
            raise ValueError("n_vertices * degree must be even")

    rng = stream(seed, "problem", n_vertices)
    for _ in range(RESAMPLE_LIMIT):
        if degree is None:
            pairs = [
                (u, v)
                for u in range(n_vertices)
                for v in range(u + 1, n_vertices)
            ]
            included = [p for p in pairs if rng.random() < density]
        else:
            included = _draw_regular(n_vertices, degree, rng)
            if included is None:
                continue
        weights = [lo + (hi - lo) * rng.random() for _ in included]
        edges = tuple(
            (u, v, w) for (u, v), w in zip(included, weights)
        )
        if not edges:
            continue
        graph = WeightedGraph(n_vertices, edges, seed=seed)
        if is_connected(graph):
            return graph
    raise RuntimeError(
        f"no connected graph after {RESAMPLE_LIMIT} attempts "
        f"(n={n_vertices}, density={density}, degree={degree}, seed={seed})"
    )


def _draw_regular(
    n: int, degree: int, rng: np.random.Generator
) -> Optional[list[tuple[int, int]]]:
    """One stub-pairing attempt at a simple regular graph, or None."""
    stubs = np.repeat(np.arange(n), degree)
    stubs = stubs[rng.permutation(len(stubs))]
    seen: set[tuple[int, int]] = set()
    for a, b in zip(stubs[0::2], stubs[1::2]):
        u, v = int(min(a, b)), int(max(a, b))
        if u == v or (u, v) in seen:
            return None
        seen.add((u, v))
    return sorted(seen)


def cut_value(graph: WeightedGraph, assignment: int) -> float:
    """Negated weight of edges crossing the cut, so lower is better."""
    if not 0 <= assignment < (1 << graph.n_vertices):
        raise ValueError(f"assignment {assignment} out of range")
    total = 0.0
    for u, v, w in graph.edges:
        if ((assignment >> u) ^ (assignment >> v)) & 1:
            total -= w
    return total


def cut_spectrum(
    graph: WeightedGraph, indices: Optional[np.ndarray] = None
) -> np.ndarray:
    """``cut_value`` over assignments, vectorized.

    With ``indices=None`` returns the full length ``2**n`` table (memory:
    8 bytes per assignment; callers at large n should pass index blocks).
    """
    if indices is None:
        indices = np.arange(1 << graph.n_vertices, dtype=np.int64)
    energies = np.zeros(len(indices), dtype=np.float64)
    for u, v, w in graph.edges:
        crossing = ((indices >> u) ^ (indices >> v)) & 1
        energies -= w * crossing
    return energies


def brute_force(graph: WeightedGraph) -> GroundTruth:
    """Exact optimum by enumerating the ``2**(n-1)`` cuts with vertex 0
    fixed on side 0 (complement halves are redundant), then re-expanding
    each optimal representative to both complements."""
    n = graph.n_vertices
    half = 1 << (n - 1)
    best = np.inf
    reps: list[int] = []
    for start in range(0, half, _BLOCK):
        ks = np.arange(start, min(start + _BLOCK, half), dtype=np.int64)
        # even assignments: bit 0 (vertex 0) fixed to side 0
        block = ks << 1
        energies = cut_spectrum(graph, block)
        block_min = float(energies.min())
        if block_min < best:
            best = block_min
            reps = [int(z) for z in block[energies == block_min]]
        elif block_min == best:
            reps.extend(int(z) for z in block[energies == block_min])
    mask = (1 << n) - 1
    assignments = sorted(set(reps) | {z ^ mask for z in reps})
    return GroundTruth(n, best, tuple(assignments))


def hamming_distance(a: int, b: int, n_vertices: int) -> int:
    """Cut-aware Hamming distance: complements describe the same cut, so
    this is min(d(a, b), d(a, ~b))."""
    mask = (1 << n_vertices) - 1
    d = bin((a ^ b) & mask).count("1")
    return min(d, n_vertices - d)


def nearest_optimal_distance(
    assignment: int, truth: GroundTruth
) -> int:
    """Smallest cut-aware Hamming distance to any optimal assignment."""
    return min(
        hamming_distance(assignment, z, truth.n_vertices)
        for z in truth.optimal_assignments
    )


def to_text(graph: WeightedGraph) -> str:
    """Portable text form: header ``n m seed`` then one ``u v w`` line per
    edge; weights printed at full round-trip precision."""
    seed_str = "-" if graph.seed is None else str(graph.seed)
    lines = [f"{graph.n_vertices} {graph.n_edges} {seed_str}"]
    lines += [f"{u} {v} {w!r}" for u, v, w in graph.edges]
    return "\n".join(lines) + "\n"


def from_text(text: str) -> WeightedGraph:
    rows = [ln for ln in (s.strip() for s in text.splitlines()) if ln]
    if not rows:
        raise ValueError("empty graph text")
    head = rows[0].split()
    if len(head) != 3:
        raise ValueError(f"bad header {rows[0]!r}, expected 'n m seed'")
    n, m = int(head[0]), int(head[1])
    seed = None if head[2] == "-" else int(head[2])
    if len(rows) - 1 != m:
        raise ValueError(f"header says {m} edges, found {len(rows) - 1}")
    edges = []
    for ln in rows[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"bad edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    return WeightedGraph(n, tuple(edges), seed=seed)


def load(path) -> WeightedGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return from_text(fh.read())


def save(graph: WeightedGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_text(graph))
