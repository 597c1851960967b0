"""Average consensus as randomized Kaczmarz on the incidence system A x = 0.

Each edge (u, v) contributes the row e_u - e_v, so a unit step on that row
replaces both endpoint values by their average (pairwise gossip). Momentum
variants reuse the generic solver.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import LinearSystem, MetricSpec
from .sketch import Sketcher
from .solvers import IterateTrace, SolverConfig, run

log = logging.getLogger(__name__)

MAX_RGG_RETRIES = 100


class DisconnectedGraphError(ValueError):
    pass


@dataclass(frozen=True)
class GraphSpec:
    topology: str  # "line" | "cycle" | "rgg"
    n: int
    radius: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.topology not in ("line", "cycle", "rgg"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.n < 2:
            raise ValueError("a graph needs at least 2 nodes")
        if self.topology == "cycle" and self.n < 3:
            raise ValueError("a cycle needs at least 3 nodes")
        if self.topology == "rgg":
            r = self.default_radius(self.n) if self.radius is None else self.radius
            if not 0.0 < r <= math.sqrt(2.0):
                raise ValueError("radius must lie in (0, sqrt(2)]")
            object.__setattr__(self, "radius", r)

    @staticmethod
    def default_radius(n: int) -> float:
        return math.sqrt(math.log(n) / n)


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...]
    positions: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        seen = set()
        for u, v in self.edges:
            if not (0 <= u < v < self.n):
                raise ValueError(f"bad edge ({u}, {v}); need 0 <= u < v < n")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))

    @property
    def m(self) -> int:
        return len(self.edges)

    def is_connected(self) -> bool:
        adj = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == self.n

    def laplacian(self) -> np.ndarray:
        """Degree matrix minus adjacency matrix."""
        L = np.zeros((self.n, self.n))
        for u, v in self.edges:
            L[u, v] -= 1.0
            L[v, u] -= 1.0
            L[u, u] += 1.0
            L[v, v] += 1.0
        return L


def _edges_from_pairs(pairs) -> tuple[tuple[int, int], ...]:
    return tuple(sorted((min(u, v), max(u, v)) for u, v in pairs))


def build_graph(spec: GraphSpec, rng: np.random.Generator | None = None) -> Graph:
    n = spec.n
    if spec.topology == "line":
        return Graph(n, tuple((i, i + 1) for i in range(n - 1)))
    if spec.topology == "cycle":
        return Graph(n, _edges_from_pairs([(i, i + 1) for i in range(n - 1)] + [(n - 1, 0)]))
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    r2 = spec.radius**2
    for attempt in range(MAX_RGG_RETRIES):
        pos = rng.random((n, 2))
        diff = pos[:, None, :] - pos[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        iu, iv = np.nonzero(np.triu(d2 < r2, k=1))
        g = Graph(n, tuple(zip(iu.tolist(), iv.tolist())), positions=pos)
        if g.is_connected():
            if attempt:
                log.info("random geometric graph connected after %d retries", attempt)
            return g
        log.debug("random geometric graph disconnected, retrying")
    raise DisconnectedGraphError(
        f"no connected G({n}, {spec.radius:.4g}) in {MAX_RGG_RETRIES} attempts"
    )


def incidence_matrix(g: Graph, signs: np.ndarray | None = None) -> LinearSystem:
    """Edge-node incidence system with b = 0.

    Row e for edge (u, v) has +1 at u and -1 at v; ``signs`` (+-1 per edge)
    flips individual rows.
    """
    A = np.zeros((g.m, g.n))
    rows = np.arange(g.m)
    u = np.array([e[0] for e in g.edges], dtype=int)
    v = np.array([e[1] for e in g.edges], dtype=int)
    A[rows, u] = 1.0
    A[rows, v] = -1.0
    if signs is not None:
        A *= np.asarray(signs, dtype=float)[:, None]
    return LinearSystem(A, np.zeros(g.m))


def algebraic_connectivity(g: Graph) -> float:
    """Smallest nonzero eigenvalue of the Laplacian."""
    if not g.is_connected():
        raise DisconnectedGraphError("algebraic connectivity needs a connected graph")
    lam = np.linalg.eigvalsh(g.laplacian())
    return float(lam[1])


def closed_form_connectivity(topology: str, n: int) -> float:
    if topology == "line":
        return 2.0 * (1.0 - math.cos(math.pi / n))
    if topology == "cycle":
        return 2.0 * (1.0 - math.cos(2.0 * math.pi / n))
    raise ValueError(f"no closed form for {topology!r}")


def gossip_lambda_min_plus(g: Graph) -> float:
    """lambda_min^+ of W = A^T A / ||A||_F^2 = L / (2m)."""
    return algebraic_connectivity(g) / (2.0 * g.m)


def run_gossip(
    g: Graph, c: np.ndarray, cfg: SolverConfig, *, trial: int = 0
) -> IterateTrace:
    """Randomized gossip with optional momentum started at the private values c."""
    system = incidence_matrix(g)
    metric = MetricSpec.identity(g.n)
    return run(cfg, system, metric, Sketcher.kaczmarz(system), np.asarray(c, float), trial=trial)


def write_edge_list(g: Graph, path: str | Path) -> None:
    lines = [f"{g.n} {g.m}"] + [f"{u} {v}" for u, v in g.edges]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_edge_list(path: str | Path) -> Graph:
    """Parse the "n m" header followed by one 0-based "u v" pair per line."""
    text = Path(path).read_text(encoding="utf-8").split("\n")
    lines = [(no, ln.strip()) for no, ln in enumerate(text, 1) if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty edge list")
    try:
        n, m = (int(t) for t in lines[0][1].split())
    except ValueError as exc:
        raise ValueError(f"{path}:{lines[0][0]}: bad header {lines[0][1]!r}") from exc
    pairs = []
    for no, ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{no}: expected 'u v', got {ln!r}")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise ValueError(f"{path}:{no}: non-integer node id") from exc
    if len(pairs) != m:
        raise ValueError(f"{path}: header says {m} edges, found {len(pairs)}")
    return Graph(n, _edges_from_pairs(pairs))
