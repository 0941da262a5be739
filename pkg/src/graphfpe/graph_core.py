"""Weighted graphs, incidence/Laplacian matrices, and a dense symmetric eigensolver.

Nodes are 0-based inside the library; the 1-based convention of the JSON
graph format is translated once, in :func:`build_graph` and in the CLI.
Edges are stored in a fixed canonical orientation (tail < head, sorted
lexicographically), so every derived matrix is deterministic. Downstream
code must not rely on the sign convention of individual incidence rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DisconnectedGraph,
    DuplicateEdge,
    NoConvergence,
    NonpositiveWeight,
    NotAnEdge,
    NotSymmetric,
    SelfLoop,
)

__all__ = [
    "Graph",
    "SymmetricSpectrum",
    "build_graph",
    "incidence_matrix",
    "graph_laplacian",
    "symmetric_eigen",
]


def freeze(a: np.ndarray) -> np.ndarray:
    """Return a read-only contiguous float copy of ``a``."""
    out = np.array(a, dtype=float, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Graph:
    """Connected undirected weighted graph without self loops or multi-edges."""

    node_count: int
    edges: tuple[tuple[int, int, float], ...]  # canonical orientation tail < head

    @cached_property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_tail(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges], dtype=int)

    @cached_property
    def edge_head(self) -> np.ndarray:
        return np.array([e[1] for e in self.edges], dtype=int)

    @cached_property
    def weights(self) -> np.ndarray:
        return freeze([e[2] for e in self.edges])

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.node_count)]
        for i, j, _ in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return tuple(tuple(sorted(v)) for v in nbrs)

    @cached_property
    def max_degree(self) -> int:
        return max(len(v) for v in self.adjacency)

    @cached_property
    def max_weight(self) -> float:
        return float(self.weights.max())

    @cached_property
    def _edge_lookup(self) -> dict[tuple[int, int], int]:
        return {(i, j): e for e, (i, j, _) in enumerate(self.edges)}

    @cached_property
    def _incidence(self) -> np.ndarray:
        D = np.zeros((self.edge_count, self.node_count))
        s = np.sqrt(self.weights)
        D[np.arange(self.edge_count), self.edge_tail] = s
        D[np.arange(self.edge_count), self.edge_head] = -s
        return freeze(D)

    @cached_property
    def _laplacian(self) -> np.ndarray:
        D = self._incidence
        return freeze(D.T @ D)

    def edge_index(self, i: int, j: int) -> int:
        """Index of the undirected edge {i, j} in canonical order."""
        key = (i, j) if i < j else (j, i)
        try:
            return self._edge_lookup[key]
        except KeyError:
            raise NotAnEdge(f"({i}, {j}) is not an edge of the graph") from None

    def has_edge(self, i: int, j: int) -> bool:
        key = (i, j) if i < j else (j, i)
        return key in self._edge_lookup


@dataclass(frozen=True, eq=False)
class SymmetricSpectrum:
    """Full eigendecomposition of a symmetric matrix.

    ``eigenvalues`` ascend; column k of ``eigenvectors`` pairs with
    eigenvalue k and the columns are orthonormal. Signs of the columns are
    an implementation artifact but deterministic for a fixed input.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def build_graph(n: int, edge_list) -> Graph:
    """Validate and build a connected weighted graph.

    ``edge_list`` uses the external 1-based convention: an iterable of
    (i, j, weight) with node ids in 1..n.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"need an integer node count >= 2, got {n!r}")
    seen: dict[tuple[int, int], float] = {}
    for entry in edge_list:
        i, j, w = entry
        i, j, w = int(i), int(j), float(w)
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValueError(f"edge ({i}, {j}) uses node ids outside 1..{n}")
        if i == j:
            raise SelfLoop(f"self loop at node {i}")
        if not (math.isfinite(w) and w > 0):
            raise NonpositiveWeight(f"edge ({i}, {j}) has weight {w}")
        key = (min(i, j) - 1, max(i, j) - 1)
        if key in seen:
            raise DuplicateEdge(f"edge ({i}, {j}) given more than once")
        seen[key] = w
    edges = tuple((i, j, seen[(i, j)]) for i, j in sorted(seen))
    graph = Graph(node_count=int(n), edges=edges)
    _check_connected(graph)
    return graph


def _check_connected(graph: Graph) -> None:
    reached = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in graph.adjacency[u]:
            if v not in reached:
                reached.add(v)
                stack.append(v)
    if len(reached) != graph.node_count:
        missing = sorted(set(range(graph.node_count)) - reached)
        raise DisconnectedGraph(
            f"graph is not connected; nodes {[v + 1 for v in missing]} unreachable from node 1"
        )


def incidence_matrix(graph: Graph) -> np.ndarray:
    """Discrete gradient matrix D, one row per edge: +sqrt(w) at tail, -sqrt(w) at head.

    The returned array is cached on the graph and read-only.
    """
    return graph._incidence


def graph_laplacian(graph: Graph) -> np.ndarray:
    """Combinatorial weighted Laplacian D^T D (positive semidefinite, kernel = constants).

    The returned array is cached on the graph and read-only.
    """
    return graph._laplacian


def symmetric_eigen(matrix, max_sweeps: int = 100) -> SymmetricSpectrum:
    """Full spectrum of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps run in a fixed row-major order over the strict upper triangle,
    which makes the output (including eigenvector signs) deterministic.
    Convergence: off-diagonal Frobenius norm <= 1e-12 * ||M||_F within
    ``max_sweeps`` sweeps, else :class:`NoConvergence`. Input must be
    symmetric within 1e-10 * max|M|.
    """
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    n = M.shape[0]
    scale = float(np.max(np.abs(M))) if M.size else 0.0
    if scale > 0 and float(np.max(np.abs(M - M.T))) > 1e-10 * scale:
        raise NotSymmetric("matrix is not symmetric within 1e-10 * max|M|")

    A = 0.5 * (M + M.T)
    Q = np.eye(n)
    norm_f = float(np.linalg.norm(A))
    off_tol = 1e-12 * norm_f
    skip = off_tol / max(n, 1)

    diag_mask = ~np.eye(n, dtype=bool)

    def off_norm() -> float:
        # summed directly over off-diagonal entries: the subtraction
        # ||A||_F^2 - ||diag||^2 cancels and cannot resolve small residues
        return float(np.sqrt(np.sum(A[diag_mask] ** 2)))

    converged = n < 2 or norm_f == 0.0 or off_norm() <= off_tol
    sweeps = 0
    while not converged and sweeps < max_sweeps:
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= skip:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                if tau >= 0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # A <- J^T A J with the Givens rotation J in the (p,q) plane
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = 0.0
                A[q, p] = 0.0
                col_p = Q[:, p].copy()
                col_q = Q[:, q].copy()
                Q[:, p] = c * col_p - s * col_q
                Q[:, q] = s * col_p + c * col_q
        converged = off_norm() <= off_tol
    if not converged:
        raise NoConvergence(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")

    values = np.diag(A).copy()
    order = np.argsort(values, kind="stable")
    return SymmetricSpectrum(eigenvalues=freeze(values[order]), eigenvectors=freeze(Q[:, order]))
