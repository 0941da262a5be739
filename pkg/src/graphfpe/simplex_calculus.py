"""Discrete Wasserstein calculus on the probability simplex of a graph.

Sign convention: the node-weighted Laplacian is the positive semidefinite
form L(rho) = D^T Theta(rho) D, so that L(rho) Phi = -div(rho grad Phi).
Potentials are defined up to an additive constant; the canonical
representative returned by :func:`solve_potential` has mean zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    BoundaryDensity,
    DimensionMismatch,
    GraphMismatch,
    NotZeroSum,
)
from .graph_core import Graph, SymmetricSpectrum, freeze, incidence_matrix, symmetric_eigen

__all__ = [
    "MASS_TOL",
    "Density",
    "TangentVector",
    "VectorField",
    "Potential",
    "WeightedLaplacian",
    "theta",
    "edge_thetas",
    "graph_gradient",
    "divergence",
    "inner_product",
    "weighted_laplacian",
    "solve_potential",
    "metric_inner",
    "hodge_decompose",
]

MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Density:
    """Point of the probability simplex over the nodes."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError(f"density must be a nonempty vector, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("density has non-finite entries")
        if np.any(v < 0):
            raise ValueError(f"density has negative mass (min {v.min():.3e})")
        total = float(v.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"density mass is {total!r}, not 1 within {MASS_TOL}")
        object.__setattr__(self, "values", freeze(v))

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def interior(self) -> bool:
        """True iff every node carries strictly positive mass."""
        return float(self.values.min()) > 0.0


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Zero-sum perturbation of a density."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError(f"tangent vector must be a nonempty vector, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("tangent vector has non-finite entries")
        total = float(v.sum())
        if abs(total) > MASS_TOL:
            raise NotZeroSum(f"tangent vector sums to {total!r}, not 0 within {MASS_TOL}")
        object.__setattr__(self, "values", freeze(v))

    @property
    def n(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class VectorField:
    """Antisymmetric edge field, stored once per canonical edge (tail < head).

    The value at index e is v_{ij} for the canonical orientation of edge e;
    v_{ji} = -v_{ij} is implied, and off-edge pairs carry no value.
    """

    graph: Graph
    edge_values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.edge_values, dtype=float)
        if v.shape != (self.graph.edge_count,):
            raise DimensionMismatch(
                f"field has {v.shape} values for a graph with {self.graph.edge_count} edges"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("vector field has non-finite entries")
        object.__setattr__(self, "edge_values", freeze(v))


@dataclass(frozen=True, eq=False)
class Potential:
    """Node function, meaningful up to an additive constant."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError(f"potential must be a nonempty vector, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("potential has non-finite entries")
        object.__setattr__(self, "values", freeze(v))

    def centered(self) -> "Potential":
        """Canonical mean-zero representative."""
        return Potential(self.values - self.values.mean())


@dataclass(frozen=True, eq=False)
class WeightedLaplacian:
    """L(rho) = D^T Theta(rho) D together with its spectrum, fixed at construction.

    ``theta_kind`` identifies the edge-weight rule; only the arithmetic
    average is implemented.
    """

    graph: Graph
    density: Density
    matrix: np.ndarray
    spectrum: SymmetricSpectrum
    theta_kind: str = "average"

    def apply_pinv(self, sigma: np.ndarray) -> np.ndarray:
        """Apply the pseudo-inverse (zero mode dropped) to a zero-sum vector."""
        lam = self.spectrum.eigenvalues
        if lam[-1] <= 0 or lam[1] <= 1e-14 * lam[-1]:
            raise BoundaryDensity("weighted Laplacian tangent spectrum is degenerate")
        Q = self.spectrum.eigenvectors
        coeff = Q.T @ sigma
        return Q[:, 1:] @ (coeff[1:] / lam[1:])

    @cached_property
    def tangent_eigenvalues(self) -> np.ndarray:
        """Nonzero part of the spectrum (the metric's eigenvalues on the tangent space)."""
        return self.spectrum.eigenvalues[1:]


def _check_nodes(graph: Graph, rho: Density) -> None:
    if rho.n != graph.node_count:
        raise DimensionMismatch(
            f"density has {rho.n} entries for a graph with {graph.node_count} nodes"
        )


def theta(graph: Graph, rho: Density, i: int, j: int) -> float:
    """Arithmetic-average edge weight theta_ij = (rho_i + rho_j) / 2 for an edge (i, j)."""
    _check_nodes(graph, rho)
    graph.edge_index(i, j)  # raises NotAnEdge for non-edges
    return float(0.5 * (rho.values[i] + rho.values[j]))


def edge_thetas(graph: Graph, rho: Density) -> np.ndarray:
    """theta_ij for every canonical edge, aligned with ``graph.edges``."""
    _check_nodes(graph, rho)
    v = rho.values
    return 0.5 * (v[graph.edge_tail] + v[graph.edge_head])


def graph_gradient(graph: Graph, phi: Potential) -> VectorField:
    """Potential field with edge values sqrt(w_ij) (Phi_i - Phi_j)."""
    if phi.values.size != graph.node_count:
        raise DimensionMismatch(
            f"potential has {phi.values.size} entries for {graph.node_count} nodes"
        )
    return VectorField(graph, incidence_matrix(graph) @ phi.values)


def divergence(graph: Graph, rho: Density, field: VectorField) -> TangentVector:
    """div(rho v) at each node: -sum_j sqrt(w_ij) v_ij theta_ij. Always zero-sum."""
    if field.graph != graph:
        raise GraphMismatch("vector field belongs to a different graph")
    th = edge_thetas(graph, rho)
    return TangentVector(-incidence_matrix(graph).T @ (th * field.edge_values))


def inner_product(v: VectorField, w: VectorField, rho: Density) -> float:
    """Flux inner product (v, w)_rho = sum over undirected edges of v w theta."""
    if v.graph != w.graph:
        raise GraphMismatch("fields belong to different graphs")
    th = edge_thetas(v.graph, rho)
    return float(np.dot(v.edge_values * w.edge_values, th))


def weighted_laplacian(graph: Graph, rho: Density, theta_kind: str = "average") -> WeightedLaplacian:
    """Build L(rho) = D^T Theta(rho) D along with its full spectrum."""
    if theta_kind != "average":
        raise ValueError(f"unsupported theta rule {theta_kind!r}; only 'average' is implemented")
    th = edge_thetas(graph, rho)
    D = incidence_matrix(graph)
    matrix = D.T @ (th[:, None] * D)
    matrix = 0.5 * (matrix + matrix.T)  # kill rounding asymmetry before the eigensolver
    return WeightedLaplacian(
        graph=graph,
        density=rho,
        matrix=freeze(matrix),
        spectrum=symmetric_eigen(matrix),
        theta_kind=theta_kind,
    )


def _as_zero_sum(sigma, n: int) -> np.ndarray:
    if isinstance(sigma, TangentVector):
        v = sigma.values
    else:
        v = np.asarray(sigma, dtype=float)
        if abs(float(v.sum())) > MASS_TOL:
            raise NotZeroSum(f"vector sums to {float(v.sum())!r}, not 0 within {MASS_TOL}")
    if v.shape != (n,):
        raise DimensionMismatch(f"expected a vector of length {n}, got shape {v.shape}")
    return v


def solve_potential(lap: WeightedLaplacian, sigma) -> Potential:
    """Unique mean-zero Phi with L(rho) Phi = sigma (rho interior)."""
    if not lap.density.interior:
        raise BoundaryDensity("pseudo-inverse requires an interior density")
    v = _as_zero_sum(sigma, lap.graph.node_count)
    phi = lap.apply_pinv(v)
    return Potential(phi - phi.mean())


def metric_inner(sigma1, sigma2, lap: WeightedLaplacian) -> float:
    """Wasserstein metric tensor g(sigma1, sigma2) = sigma1^T L^+(rho) sigma2."""
    if not lap.density.interior:
        raise BoundaryDensity("metric tensor requires an interior density")
    n = lap.graph.node_count
    a = _as_zero_sum(sigma1, n)
    b = _as_zero_sum(sigma2, n)
    return float(a @ lap.apply_pinv(b))


def hodge_decompose(graph: Graph, rho: Density, field: VectorField) -> tuple[Potential, VectorField]:
    """Split v into a potential gradient and a rho-divergence-free remainder.

    Returns (Phi, u) with v = grad Phi + u, div(rho u) = 0, and Phi mean-zero.
    """
    if not rho.interior:
        raise BoundaryDensity("Hodge decomposition requires an interior density")
    if field.graph != graph:
        raise GraphMismatch("vector field belongs to a different graph")
    lap = weighted_laplacian(graph, rho)
    div_v = divergence(graph, rho, field)
    phi = solve_potential(lap, -div_v.values)
    u = VectorField(graph, field.edge_values - incidence_matrix(graph) @ phi.values)
    return phi, u
