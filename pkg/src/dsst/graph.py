"""Communication graph: weighted undirected topology and its Laplacian."""
from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import GraphError

CONNECTIVITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class CommGraph:
    """Weighted undirected graph on nodes ``0..p-1``.

    ``neighbors`` is a CSR view of the adjacency (``indptr``, ``indices``,
    ``weights``) with neighbor ids ascending; every neighbor sum in the
    tracker is taken in that order.
    """

    p: int
    adjacency: np.ndarray
    laplacian: np.ndarray
    spectrum: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def laplacian_apply(self, X) -> np.ndarray:
        """``(L X)_i = sum_j a_ij (X_i - X_j)`` along the first axis."""
        return self.laplacian @ np.asarray(X, dtype=float)

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        iu, ju = np.nonzero(np.triu(self.adjacency))
        return [(int(i), int(j), float(self.adjacency[i, j])) for i, j in zip(iu, ju)]


def from_adjacency(adjacency) -> CommGraph:
    adj = np.array(adjacency, dtype=float, copy=True)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise GraphError(f"adjacency must be square, got {adj.shape}")
    if not np.array_equal(adj, adj.T):
        raise GraphError("adjacency must be symmetric")
    if np.any(np.diag(adj) != 0):
        raise GraphError("self-loops are not allowed")
    if np.any(adj < 0):
        raise GraphError("edge weights must be positive")
    p = adj.shape[0]
    lap = np.diag(adj.sum(axis=1)) - adj
    spectrum = np.sort(np.linalg.eigvalsh(lap))
    indptr = np.zeros(p + 1, dtype=np.intp)
    indices, weights = [], []
    for i in range(p):
        nbrs = np.flatnonzero(adj[i])
        indices.extend(nbrs.tolist())
        weights.extend(adj[i, nbrs].tolist())
        indptr[i + 1] = len(indices)
    for arr in (adj, lap, spectrum):
        arr.setflags(write=False)
    return CommGraph(
        p=p,
        adjacency=adj,
        laplacian=lap,
        spectrum=spectrum,
        indptr=indptr,
        indices=np.asarray(indices, dtype=np.intp),
        weights=np.asarray(weights, dtype=float),
    )


def build_graph(p: int, edges) -> CommGraph:
    """Build a graph from ``(i, j)`` or ``(i, j, weight)`` tuples (0-based ids)."""
    if p < 1:
        raise GraphError("graph needs at least one node")
    adj = np.zeros((p, p))
    seen = set()
    for edge in edges:
        if len(edge) == 2:
            i, j = edge
            w = 1.0
        elif len(edge) == 3:
            i, j, w = edge
        else:
            raise GraphError(f"edge must be (i, j) or (i, j, weight), got {edge!r}")
        i, j, w = int(i), int(j), float(w)
        if not (0 <= i < p and 0 <= j < p):
            raise GraphError(f"edge ({i}, {j}) out of range for p={p}")
        if i == j:
            raise GraphError(f"self-loop at node {i}")
        if not w > 0:
            raise GraphError(f"edge ({i}, {j}) has nonpositive weight {w}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphError(f"duplicate edge {key}")
        seen.add(key)
        adj[i, j] = adj[j, i] = w
    return from_adjacency(adj)


def _reachable_all(g: CommGraph) -> bool:
    seen = np.zeros(g.p, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in g.neighbors(i):
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


def check_connected(g: CommGraph) -> bool:
    """Spectral connectivity test (second Laplacian eigenvalue above tolerance)."""
    reach = _reachable_all(g)
    if g.p == 1:
        return reach
    spectral = bool(g.spectrum[1] > CONNECTIVITY_TOL)
    if spectral != reach:
        warnings.warn(
            f"spectral connectivity ({spectral}) disagrees with reachability "
            f"({reach}); lambda_2={g.spectrum[1]:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
    return spectral


def laplacian_extremes(g: CommGraph) -> tuple[float, float]:
    """Second-smallest and largest Laplacian eigenvalues of a connected graph."""
    if g.p < 2 or not check_connected(g):
        raise GraphError("laplacian_extremes needs a connected graph with p >= 2")
    return float(g.spectrum[1]), float(g.spectrum[-1])


def cycle_graph(p: int, weight: float = 1.0) -> CommGraph:
    if p < 3:
        return build_graph(p, [(0, 1, weight)] if p == 2 else [])
    return build_graph(p, [(i, (i + 1) % p, weight) for i in range(p)])


def path_graph(p: int) -> CommGraph:
    return build_graph(p, [(i, i + 1) for i in range(p - 1)])


def complete_graph(p: int) -> CommGraph:
    return build_graph(p, [(i, j) for i in range(p) for j in range(i + 1, p)])
