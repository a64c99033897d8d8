"""Directed graphs with paired orientations and the sparse incidence operator.

Vertex values live in R^n, edge flows in R^m. The incidence matrix ``D`` has
one row per directed edge, with -1 at the tail column and +1 at the head
column, so ``D @ x`` differences vertex values along edges and ``D.T @ m``
is the net inflow of an edge flow at each vertex. Both products run in
O(nnz). Instances are immutable after construction and safe to share.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import GraphError

__all__ = [
    "DirectedGraph",
    "from_undirected_edge_list",
    "from_directed_edges",
    "divergence",
    "gradient",
]


@dataclass(frozen=True)
class DirectedGraph:
    """A finite directed graph plus its signed edge-vertex incidence operator.

    ``tails[e]`` and ``heads[e]`` give the endpoints of directed edge ``e``.
    Graphs built from an undirected edge list store the two orientations of
    pair ``j`` at rows ``2j`` (forward) and ``2j+1`` (reverse), which lets
    downstream consumers net opposing flows by simple slicing.
    """

    n_vertices: int
    tails: np.ndarray
    heads: np.ndarray
    incidence: sp.csr_matrix = field(repr=False)
    incidence_t: sp.csr_matrix = field(repr=False)
    paired: bool = False

    @property
    def n_edges(self) -> int:
        return self.tails.shape[0]

    @property
    def edges(self) -> list[tuple[int, int]]:
        """Edge list as (tail, head) tuples, in row order of the incidence."""
        return list(zip(self.tails.tolist(), self.heads.tolist()))

    @property
    def n_pairs(self) -> int:
        """Number of undirected pairs; only meaningful when ``paired``."""
        return self.n_edges // 2

    def divergence(self, m: np.ndarray) -> np.ndarray:
        """Net inflow ``D.T @ m`` at each vertex for an edge flow ``m``."""
        m = np.asarray(m, dtype=float)
        if m.shape != (self.n_edges,):
            raise GraphError(
                f"edge flow has shape {m.shape}, expected ({self.n_edges},)"
            )
        return self.incidence_t @ m

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Edgewise difference ``D @ x``, head value minus tail value."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_vertices,):
            raise GraphError(
                f"vertex vector has shape {x.shape}, expected ({self.n_vertices},)"
            )
        return self.incidence @ x

    def edge_laplacian(self) -> sp.csr_matrix:
        """``D @ D.T``, the edge-space operator used by the flow update."""
        return (self.incidence @ self.incidence_t).tocsr()

    def is_connected(self) -> bool:
        return _connected(self.n_vertices, self.tails, self.heads)


def _build_incidence(n_vertices: int, tails: np.ndarray, heads: np.ndarray) -> sp.csr_matrix:
    n_edges = tails.shape[0]
    rows = np.repeat(np.arange(n_edges), 2)
    cols = np.empty(2 * n_edges, dtype=np.int64)
    cols[0::2] = tails
    cols[1::2] = heads
    data = np.empty(2 * n_edges, dtype=float)
    data[0::2] = -1.0
    data[1::2] = 1.0
    return sp.csr_matrix((data, (rows, cols)), shape=(n_edges, n_vertices))


def _connected(n_vertices: int, tails: np.ndarray, heads: np.ndarray) -> bool:
    """BFS over the underlying undirected structure."""
    if n_vertices == 0:
        return True
    adj: list[list[int]] = [[] for _ in range(n_vertices)]
    for a, b in zip(tails.tolist(), heads.tolist()):
        adj[a].append(b)
        adj[b].append(a)
    seen = np.zeros(n_vertices, dtype=bool)
    queue = deque([0])
    seen[0] = True
    count = 1
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if not seen[w]:
                seen[w] = True
                count += 1
                queue.append(w)
    return count == n_vertices


def _check_endpoint(v: int, n_vertices: int, what: str) -> int:
    if not isinstance(v, (int, np.integer)):
        raise GraphError(f"{what} vertex {v!r} is not an integer")
    v = int(v)
    if v < 0 or v >= n_vertices:
        raise GraphError(f"{what} vertex {v} out of range [0, {n_vertices})")
    return v


def from_undirected_edge_list(
    pairs: list[tuple[int, int]],
    n_vertices: int,
    *,
    allow_parallel: bool = False,
    allow_disconnected: bool = False,
) -> DirectedGraph:
    """Build a directed graph by duplicating each undirected pair in both
    orientations.

    Pair ``j = (a, b)`` contributes directed edges ``2j = (a -> b)`` and
    ``2j+1 = (b -> a)``. Self-loops are always rejected; duplicate pairs and
    disconnected graphs are rejected unless the corresponding flag permits
    them (feasibility between arbitrary marginals needs connectivity).
    """
    if n_vertices < 1:
        raise GraphError(f"n_vertices must be positive, got {n_vertices}")
    seen: set[tuple[int, int]] = set()
    tails = np.empty(2 * len(pairs), dtype=np.int64)
    heads = np.empty(2 * len(pairs), dtype=np.int64)
    for j, pair in enumerate(pairs):
        if len(pair) != 2:
            raise GraphError(f"edge entry {pair!r} is not a vertex pair")
        a = _check_endpoint(pair[0], n_vertices, "tail")
        b = _check_endpoint(pair[1], n_vertices, "head")
        if a == b:
            raise GraphError(f"self-loop ({a}, {b}) is not allowed")
        key = (min(a, b), max(a, b))
        if key in seen and not allow_parallel:
            raise GraphError(f"duplicate undirected pair ({a}, {b})")
        seen.add(key)
        tails[2 * j], heads[2 * j] = a, b
        tails[2 * j + 1], heads[2 * j + 1] = b, a
    if not allow_disconnected and not _connected(n_vertices, tails, heads):
        raise GraphError(
            "graph is not connected; pass allow_disconnected=True to accept"
        )
    D = _build_incidence(n_vertices, tails, heads)
    return DirectedGraph(
        n_vertices=n_vertices,
        tails=tails,
        heads=heads,
        incidence=D,
        incidence_t=D.T.tocsr(),
        paired=True,
    )


def from_directed_edges(
    edges: list[tuple[int, int]],
    n_vertices: int,
    *,
    allow_disconnected: bool = False,
) -> DirectedGraph:
    """Build a graph from an explicit directed edge list (no duplication)."""
    if n_vertices < 1:
        raise GraphError(f"n_vertices must be positive, got {n_vertices}")
    tails = np.empty(len(edges), dtype=np.int64)
    heads = np.empty(len(edges), dtype=np.int64)
    for j, pair in enumerate(edges):
        a = _check_endpoint(pair[0], n_vertices, "tail")
        b = _check_endpoint(pair[1], n_vertices, "head")
        if a == b:
            raise GraphError(f"self-loop ({a}, {b}) is not allowed")
        tails[j], heads[j] = a, b
    if not allow_disconnected and not _connected(n_vertices, tails, heads):
        raise GraphError(
            "graph is not connected; pass allow_disconnected=True to accept"
        )
    D = _build_incidence(n_vertices, tails, heads)
    return DirectedGraph(
        n_vertices=n_vertices,
        tails=tails,
        heads=heads,
        incidence=D,
        incidence_t=D.T.tocsr(),
        paired=False,
    )


def divergence(g: DirectedGraph, m: np.ndarray) -> np.ndarray:
    """Net inflow of the edge flow ``m`` at every vertex."""
    return g.divergence(m)


def gradient(g: DirectedGraph, x: np.ndarray) -> np.ndarray:
    """Head-minus-tail difference of the vertex vector ``x`` on every edge."""
    return g.gradient(x)
