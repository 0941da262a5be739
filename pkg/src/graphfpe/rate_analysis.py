"""Convergence-rate formulas: global decay constant, asymptotic and Fisher
rates, relative entropy/Fisher functionals, and log-Sobolev estimation.

Two domain restrictions are deliberate. The 1-norm of the Hessian is taken
over the invariant region (bounded by |||W|||_1 + beta/m) because over the
whole simplex the entropy term makes it infinite. The minimal Hessian
eigenvalue uses the certified global bound lambda_min(W) + beta instead of
a numeric search over the simplex.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundaryDensity,
    DimensionMismatch,
    NonPositiveHessian,
    NonPositiveSymmetrizedJacobian,
    NonSymmetricW,
    NotCertifiedConvex,
    NoValidSamples,
)
from .fpe_dynamics import dissipation, invariant_region
from .free_energy import (
    EnergyModel,
    convexity_certificate,
    energy,
    energy_hessian,
    gibbs_fixed_point,
)
from .graph_core import Graph, graph_laplacian, symmetric_eigen
from .simplex_calculus import Density, weighted_laplacian

__all__ = [
    "RateReport",
    "DecayCheck",
    "LsiEstimate",
    "relative_entropy",
    "relative_fisher",
    "rate_constants",
    "verify_decay_bound",
    "asymptotic_rate",
    "hessian_quadratic_rate",
    "fisher_rate",
    "estimate_lsi_constant",
    "tail_slope",
]


@dataclass(frozen=True, eq=False)
class RateReport:
    """Every constant entering the global exponential decay bound.

    ``hess_norm1`` is the 1-norm bound over the invariant region (floor m),
    not over the whole simplex. ``x_star`` is the optimal region-splitting
    parameter where the far-field and near-field rates cross.
    """

    m: float
    lambda_sec_hat: float
    lambda_max_hat: float
    lambda_min_hess: float
    hess_norm1: float
    delta_F: float
    C1: float
    C2: float
    C3: float
    r: float
    C: float
    x_star: float
    rho_inf: Density
    f_inf: float


@dataclass(frozen=True)
class DecayCheck:
    """Outcome of checking the exponential bound along a trajectory.

    ``max_violation`` is the worst observed (F(t) - F_inf) / (e^{-Ct} dF)
    minus one; negative values mean the bound held with slack.
    """

    holds: bool
    max_violation: float


@dataclass(frozen=True, eq=False)
class LsiEstimate:
    """Sampled upper estimate of the optimal log-Sobolev constant."""

    lambda_hat: float
    worst_density: Density
    samples_retained: int


def relative_entropy(model: EnergyModel, rho: Density, rho_inf: Density) -> float:
    """H(rho | rho_inf) = F(rho) - F(rho_inf)."""
    return energy(model, rho) - energy(model, rho_inf)


def relative_fisher(model: EnergyModel, graph: Graph, rho: Density, rho_inf: Density | None = None) -> float:
    """I(rho | rho_inf) = F(rho)^T L(rho) F(rho) = -dissipation.

    The equilibrium argument is accepted for interface symmetry with
    :func:`relative_entropy`; the functional depends on it only through the
    drift already encoded in the model.
    """
    if rho_inf is not None and rho_inf.n != rho.n:
        raise DimensionMismatch("rho and rho_inf have different lengths")
    return -dissipation(model, graph, rho)


def _sqrt_of_spd(matrix: np.ndarray, error: type[Exception], what: str) -> np.ndarray:
    spec = symmetric_eigen(matrix)
    lam = spec.eigenvalues
    if float(lam[0]) <= 0.0:
        raise error(f"{what} is not positive definite (min eigenvalue {float(lam[0]):.3e})")
    Q = spec.eigenvectors
    return (Q * np.sqrt(lam)) @ Q.T


def _second_smallest_of_product(lap_matrix: np.ndarray, spd_half: np.ndarray) -> float:
    """lambda_sec of L * S for SPD S, via the symmetric similar matrix S^1/2 L S^1/2."""
    sym = spd_half @ lap_matrix @ spd_half
    return float(symmetric_eigen(0.5 * (sym + sym.T)).eigenvalues[1])


def hessian_quadratic_rate(model: EnergyModel, graph: Graph, rho: Density) -> float:
    """min over potentials of Phi^T L HessF L Phi subject to Phi^T L Phi = 1.

    Equals the second-smallest eigenvalue of L(rho) HessF(rho); at an
    equilibrium this is the asymptotic decay rate.
    """
    if not model.is_symmetric:
        raise NonSymmetricW("Hessian quadratic form requires a symmetric interaction matrix")
    if not rho.interior:
        raise BoundaryDensity("Hessian quadratic form needs an interior density")
    hess_half = _sqrt_of_spd(energy_hessian(model, rho), NonPositiveHessian, "Hess F")
    return _second_smallest_of_product(weighted_laplacian(graph, rho).matrix, hess_half)


def asymptotic_rate(model: EnergyModel, graph: Graph, rho_inf: Density) -> float:
    """lambda = lambda_sec(L(rho_inf) HessF(rho_inf)) governing the decay tail."""
    return hessian_quadratic_rate(model, graph, rho_inf)


def linearized_rate(model: EnergyModel, graph: Graph, rho_inf: Density) -> float:
    """Slowest tangent eigenvalue of L(rho_inf) HessF(rho_inf) via the L-side similarity.

    Uses L^1/2 HessF L^1/2, which shares the nonzero spectrum of L HessF but
    needs no positive-definite Hessian, so it also covers equilibria of
    non-convex energies where the full-space Hessian is indefinite. The
    structural zero from the kernel of L is dropped (smallest |eigenvalue|);
    a negative return value flags an unstable equilibrium. Coincides with
    :func:`asymptotic_rate` whenever the Hessian is positive definite.
    """
    if not model.is_symmetric:
        raise NonSymmetricW("linearized rate requires a symmetric interaction matrix")
    if not rho_inf.interior:
        raise BoundaryDensity("linearized rate needs an interior density")
    hess = energy_hessian(model, rho_inf)
    lap_spec = weighted_laplacian(graph, rho_inf).spectrum
    lam = np.clip(lap_spec.eigenvalues, 0.0, None)
    Q = lap_spec.eigenvectors
    lap_half = (Q * np.sqrt(lam)) @ Q.T
    sym = lap_half @ hess @ lap_half
    values = symmetric_eigen(0.5 * (sym + sym.T)).eigenvalues
    keep = np.delete(values, int(np.argmin(np.abs(values))))
    return float(keep.min())


def fisher_rate(model: EnergyModel, graph: Graph, rho_inf: Density) -> float:
    """lambda = lambda_sec(L(rho_inf) (JF^T + JF)(rho_inf)).

    Valid for non-symmetric interaction matrices; JF = W + beta diag(1/rho).
    With a symmetric W this is exactly twice the asymptotic rate.
    """
    if not rho_inf.interior:
        raise BoundaryDensity("Fisher rate needs an interior equilibrium")
    W = model.interaction
    sym_jac = W + W.T + 2.0 * model.beta * np.diag(1.0 / rho_inf.values)
    half = _sqrt_of_spd(sym_jac, NonPositiveSymmetrizedJacobian, "symmetrized Jacobian")
    return _second_smallest_of_product(weighted_laplacian(graph, rho_inf).matrix, half)


def rate_constants(
    model: EnergyModel,
    graph: Graph,
    rho0: Density,
    gibbs_tol: float = 1e-13,
    gibbs_max_iter: int = 500_000,
) -> RateReport:
    """Assemble every explicit constant of the global decay bound.

    Requires a certified-convex model and an interior start. The Gibbs
    equilibrium is computed internally. The Theorem-style r and the
    C3/sqrt(C1 C2) route agree algebraically; both are evaluated and
    cross-checked to 1e-9 relative as an internal consistency guard.
    """
    cert = convexity_certificate(model)
    if not cert.certified_convex:
        raise NotCertifiedConvex(
            f"convexity certificate failed (lambda_min(W) + beta = {cert.lambda_min_bound:.6g})"
        )
    if not rho0.interior:
        raise BoundaryDensity("rate constants need an interior starting density")

    gibbs = gibbs_fixed_point(model, rho0, tol=gibbs_tol, max_iter=gibbs_max_iter)
    rho_inf = gibbs.density
    f_inf = energy(model, rho_inf)

    region = invariant_region(model, graph, rho0)
    m = region.m
    hat = symmetric_eigen(graph_laplacian(graph))
    lam_sec = float(hat.eigenvalues[1])
    lam_max = float(hat.eigenvalues[-1])
    lam_min_hess = cert.lambda_min_bound
    hess_norm1 = float(np.max(np.abs(model.interaction).sum(axis=0))) + model.beta / m
    delta_f = max(energy(model, rho0) - f_inf, 0.0)

    deg_w = graph.max_degree * graph.max_weight
    C2 = 2.0 * m * lam_sec * lam_min_hess
    C3 = (
        2.0
        * math.sqrt(2.0)
        * deg_w
        * hess_norm1
        / math.sqrt(lam_min_hess)
        * (1.0 - m)
        / m
        * lam_max
        / lam_sec
    )
    if delta_f > 0.0:
        C1 = C2 / delta_f
        r = (
            math.sqrt(2.0)
            * deg_w
            * hess_norm1
            / lam_min_hess**1.5
            * (1.0 - m)
            / m**2
            * lam_max
            / lam_sec**2
            * math.sqrt(delta_f)
        )
        # rationalized root of C1 x = C2 - C3 sqrt(x); the naive quadratic
        # formula cancels catastrophically when C3^2 >> C1 C2
        sqrt_x = 2.0 * C2 / (C3 + math.sqrt(C3 * C3 + 4.0 * C1 * C2))
        r_alt = C3 / math.sqrt(C1 * C2)
        if abs(r - r_alt) > 1e-9 * max(r, r_alt):
            raise RuntimeError(f"rate constant inconsistency: r={r!r} vs C3/sqrt(C1 C2)={r_alt!r}")
    else:
        # started at the equilibrium: the far-field branch is vacuous
        C1 = math.inf
        r = 0.0
        sqrt_x = 0.0
    C = C2 / (r + 1.0) ** 2
    c_alt = C2 / (C3 / math.sqrt(C1 * C2) + 1.0) ** 2 if delta_f > 0.0 else C2
    if abs(C - c_alt) > 1e-9 * max(C, c_alt):
        raise RuntimeError(f"rate constant inconsistency: C={C!r} vs C2/(r'+1)^2={c_alt!r}")

    return RateReport(
        m=m,
        lambda_sec_hat=lam_sec,
        lambda_max_hat=lam_max,
        lambda_min_hess=lam_min_hess,
        hess_norm1=hess_norm1,
        delta_F=delta_f,
        C1=C1,
        C2=C2,
        C3=C3,
        r=r,
        C=C,
        x_star=sqrt_x * sqrt_x,
        rho_inf=rho_inf,
        f_inf=f_inf,
    )


def verify_decay_bound(trajectory, report: RateReport, f_inf: float) -> DecayCheck:
    """Check F(rho(t)) - F_inf <= e^{-Ct} (F(rho0) - F_inf) at all recorded times."""
    gaps = trajectory.energy - f_inf
    bounds = np.exp(-report.C * trajectory.times) * report.delta_F
    worst = -math.inf
    for gap, bound in zip(gaps, bounds):
        if bound > 0.0:
            ratio = float(gap) / float(bound)
        elif gap <= 1e-12 * max(1.0, abs(f_inf)):
            ratio = 0.0
        else:
            ratio = math.inf
        worst = max(worst, ratio)
    return DecayCheck(holds=bool(worst <= 1.0 + 1e-9), max_violation=worst - 1.0)


def tail_slope(times, values, min_value: float = 1e-11, fraction: float = 0.3) -> float:
    """Least-squares slope of log(values) vs time over the decay tail.

    Keeps samples above ``min_value`` and regresses on the last ``fraction``
    of them (at least two points).
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    mask = v > min_value
    if int(mask.sum()) < 2:
        raise ValueError(f"fewer than two samples above {min_value!r}")
    t = t[mask]
    v = v[mask]
    k = max(2, int(math.ceil(fraction * t.size)))
    t = t[-k:]
    v = v[-k:]
    A = np.stack([t, np.ones_like(t)], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(v), rcond=None)
    return float(coef[0])


def estimate_lsi_constant(
    model: EnergyModel,
    graph: Graph,
    rho_inf: Density,
    count: int,
    seed: int,
    min_mass: float = 1e-4,
    jobs: int = 1,
) -> LsiEstimate:
    """Sampled estimate of the largest lambda with H <= I / (2 lambda).

    Draws ``count`` uniform (flat Dirichlet) simplex points with every
    coordinate >= ``min_mass``, and minimizes I/(2H) over samples whose
    entropy gap exceeds 1e-12. Deterministic for a fixed seed. The
    inequality is stated for beta = 1; other temperatures are accepted as an
    extension (both functionals carry beta consistently).
    """
    cert = convexity_certificate(model)
    if not cert.certified_convex:
        raise NotCertifiedConvex(
            f"LSI estimation requires a certified-convex model "
            f"(lambda_min(W) + beta = {cert.lambda_min_bound:.6g})"
        )
    if not rho_inf.interior:
        raise BoundaryDensity("LSI estimation needs an interior equilibrium")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count!r}")
    n = model.n
    if not (0 <= min_mass < 1.0 / n):
        raise ValueError(f"min_mass must lie in [0, 1/n), got {min_mass!r}")

    rng = np.random.default_rng(seed)
    alpha = np.ones(n)
    samples = np.empty((count, n))
    filled = 0
    while filled < count:
        x = rng.dirichlet(alpha)
        if float(x.min()) >= min_mass:
            samples[filled] = x
            filled += 1

    f_inf = energy(model, rho_inf)

    def ratio_at(idx: int) -> float:
        rho = Density(samples[idx])
        gap = energy(model, rho) - f_inf
        if gap < 1e-12:
            return math.inf  # excluded from the minimum
        return relative_fisher(model, graph, rho) / (2.0 * gap)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            ratios = np.fromiter(pool.map(ratio_at, range(count)), dtype=float, count=count)
    else:
        ratios = np.fromiter((ratio_at(i) for i in range(count)), dtype=float, count=count)

    retained = int(np.sum(np.isfinite(ratios)))
    if retained == 0:
        raise NoValidSamples("every sample fell within 1e-12 of the equilibrium energy")
    best = int(np.argmin(ratios))
    return LsiEstimate(
        lambda_hat=float(ratios[best]),
        worst_density=Density(samples[best]),
        samples_retained=retained,
    )
