"""Free energy on the simplex and its Gibbs equilibria.

F(rho) = 1/2 rho^T W rho + V^T rho + beta * sum_i rho_i log rho_i, with the
0 log 0 = 0 convention. The drift field returned by :func:`energy_gradient`
is W rho + V + beta (log rho + 1); for a symmetric interaction matrix this
is the free-energy gradient, and for a non-symmetric one it is the drift
that defines the Fisher-rate dynamics (the free energy then no longer
generates the flow).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    BoundaryDensity,
    DimensionMismatch,
    NoConvergence,
    NonSymmetricW,
)
from .graph_core import freeze, symmetric_eigen
from .simplex_calculus import Density

__all__ = [
    "EnergyModel",
    "GibbsResult",
    "ConvexityCertificate",
    "energy",
    "energy_gradient",
    "energy_hessian",
    "convexity_certificate",
    "gibbs_fixed_point",
    "find_all_equilibria",
]

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EnergyModel:
    """Interaction matrix, linear potential, and entropy temperature."""

    interaction: np.ndarray  # n x n coupling matrix
    potential: np.ndarray  # per-node linear term
    beta: float  # entropy weight, > 0

    def __post_init__(self):
        W = np.asarray(self.interaction, dtype=float)
        V = np.asarray(self.potential, dtype=float)
        if V.ndim != 1 or V.size == 0:
            raise DimensionMismatch(f"potential must be a vector, got shape {V.shape}")
        if W.shape != (V.size, V.size):
            raise DimensionMismatch(
                f"interaction shape {W.shape} does not match potential length {V.size}"
            )
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(V))):
            raise ValueError("model has non-finite entries")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be positive, got {self.beta!r}")
        object.__setattr__(self, "interaction", freeze(W))
        object.__setattr__(self, "potential", freeze(V))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def n(self) -> int:
        return self.potential.size

    @cached_property
    def is_symmetric(self) -> bool:
        W = self.interaction
        scale = max(1.0, float(np.max(np.abs(W))) if W.size else 0.0)
        return float(np.max(np.abs(W - W.T))) <= SYMMETRY_TOL * scale


@dataclass(frozen=True, eq=False)
class GibbsResult:
    """Converged (or best partial) Gibbs fixed point."""

    density: Density
    normalizer: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class ConvexityCertificate:
    """Sufficient convexity check: lambda_min(W) + beta > 0 on the whole simplex.

    ``certified_convex`` False means inconclusive, not a disproof.
    """

    certified_convex: bool
    lambda_min_bound: float


def _check_model_density(model: EnergyModel, rho: Density) -> None:
    if rho.n != model.n:
        raise DimensionMismatch(f"density has {rho.n} entries, model expects {model.n}")


def energy(model: EnergyModel, rho: Density) -> float:
    """Free energy F(rho); 0 log 0 is taken as 0."""
    _check_model_density(model, rho)
    v = rho.values
    ent = float(np.sum(np.where(v > 0, v * np.log(np.where(v > 0, v, 1.0)), 0.0)))
    return float(0.5 * v @ (model.interaction @ v) + model.potential @ v + model.beta * ent)


def energy_gradient(model: EnergyModel, rho: Density) -> np.ndarray:
    """Drift field F(rho) = W rho + V + beta (log rho + 1); needs an interior rho.

    Only differences F_i - F_j enter the dynamics, so the constant beta term
    is harmless.
    """
    _check_model_density(model, rho)
    if not rho.interior:
        raise BoundaryDensity("energy gradient needs strictly positive mass everywhere")
    v = rho.values
    return model.interaction @ v + model.potential + model.beta * (np.log(v) + 1.0)


def energy_hessian(model: EnergyModel, rho: Density) -> np.ndarray:
    """Hess F(rho) = W + beta diag(1/rho); needs an interior rho."""
    _check_model_density(model, rho)
    if not rho.interior:
        raise BoundaryDensity("energy Hessian needs strictly positive mass everywhere")
    return model.interaction + model.beta * np.diag(1.0 / rho.values)


def convexity_certificate(model: EnergyModel) -> ConvexityCertificate:
    """Certify strict convexity via diag(1/rho) >= I on the simplex."""
    if not model.is_symmetric:
        raise NonSymmetricW("convexity certificate requires a symmetric interaction matrix")
    lam_min_w = float(symmetric_eigen(model.interaction).eigenvalues[0])
    bound = lam_min_w + model.beta
    return ConvexityCertificate(certified_convex=bound > 0, lambda_min_bound=bound)


def _gibbs_map(model: EnergyModel, v: np.ndarray) -> tuple[np.ndarray, float]:
    """Softmin map G(rho)_i = exp(-((W rho)_i + V_i)/beta) / K and the normalizer K."""
    a = -(model.interaction @ v + model.potential) / model.beta
    shift = float(a.max())
    g = np.exp(a - shift)
    total = float(g.sum())
    return g / total, float(np.exp(shift) * total)


def gibbs_fixed_point(
    model: EnergyModel,
    init: Density,
    tol: float = 1e-12,
    max_iter: int = 10_000,
    damping: float = 0.5,
) -> GibbsResult:
    """Damped fixed-point iteration rho <- (1-a) rho + a G(rho).

    The damping factor halves automatically whenever the residual grows,
    which keeps strongly attractive interactions from oscillating. Raises
    :class:`NoConvergence` with the last iterate attached if ``max_iter``
    is exhausted.
    """
    _check_model_density(model, init)
    if not init.interior:
        raise BoundaryDensity("fixed-point iteration starts from an interior density")
    if not (0 < damping <= 1):
        raise ValueError(f"damping must lie in (0, 1], got {damping!r}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol!r}")

    v = init.values.copy()
    alpha = damping
    prev_residual = np.inf
    for k in range(max_iter + 1):
        g, normalizer = _gibbs_map(model, v)
        residual = float(np.max(np.abs(v - g)))
        if residual <= tol:
            return GibbsResult(
                density=Density(v / v.sum()),
                normalizer=normalizer,
                iterations=k,
                residual=residual,
            )
        if residual > prev_residual:
            alpha = max(0.5 * alpha, 2.0**-20)
        prev_residual = residual
        v = (1.0 - alpha) * v + alpha * g
        v /= v.sum()
    partial = GibbsResult(
        density=Density(v / v.sum()),
        normalizer=normalizer,
        iterations=max_iter,
        residual=residual,
    )
    raise NoConvergence(
        f"Gibbs iteration residual {residual:.3e} > tol {tol:.3e} after {max_iter} iterations",
        result=partial,
    )


def find_all_equilibria(
    model: EnergyModel,
    starts,
    tol: float = 1e-12,
    max_iter: int = 10_000,
    damping: float = 0.5,
    jobs: int = 1,
) -> list[GibbsResult]:
    """Run the fixed-point solver from every start and deduplicate.

    Results closer than 10*tol in the max norm are merged; the survivors are
    sorted by free energy (ties broken lexicographically by density). Starts
    that fail to converge are skipped and counted in a warning.
    """
    starts = list(starts)

    def solve(rho0: Density):
        try:
            return gibbs_fixed_point(model, rho0, tol=tol, max_iter=max_iter, damping=damping)
        except NoConvergence:
            return None

    if jobs > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            raw = list(pool.map(solve, starts))
    else:
        raw = [solve(s) for s in starts]

    failed = sum(1 for r in raw if r is None)
    if failed:
        logger.warning("%d of %d equilibrium starts did not converge", failed, len(starts))

    candidates = [r for r in raw if r is not None]
    candidates.sort(key=lambda r: (energy(model, r.density), tuple(r.density.values)))
    kept: list[GibbsResult] = []
    for cand in candidates:
        if all(
            float(np.max(np.abs(cand.density.values - k.density.values))) > 10.0 * tol
            for k in kept
        ):
            kept.append(cand)
    return kept
