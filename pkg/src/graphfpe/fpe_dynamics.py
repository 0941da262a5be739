"""Nonlinear Fokker-Planck dynamics on the simplex of a graph.

The flow is d rho / dt = -L(rho) F(rho), written per node as
sum_j w_ij theta_ij (F_j - F_i) with F the drift field of the energy model.
Integration uses an explicit embedded Fehlberg 4(5) pair with three step
guards: scaled local error, a positivity floor derived from the invariant
region, and (for gradient flows) monotonicity of the free energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryDensity, DimensionMismatch, StepSizeUnderflow
from .free_energy import EnergyModel, energy, energy_gradient
from .graph_core import Graph, freeze, incidence_matrix
from .simplex_calculus import Density, TangentVector

__all__ = [
    "Trajectory",
    "InvariantRegion",
    "fpe_rhs",
    "invariant_region",
    "integrate",
    "dissipation",
]

# Fehlberg 4(5) tableau: six stages, 4th-order propagated solution with a
# 5th-order companion for the local error estimate.
_RK_C = (0.0, 1.0 / 4.0, 3.0 / 8.0, 12.0 / 13.0, 1.0, 1.0 / 2.0)
_RK_A = (
    (),
    (1.0 / 4.0,),
    (3.0 / 32.0, 9.0 / 32.0),
    (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
    (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
    (-8.0 / 27.0, 2.0, -3554.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
)
_RK_B4 = (25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0)
_RK_ERR = (1.0 / 360.0, 0.0, -128.0 / 4275.0, -2197.0 / 75240.0, 1.0 / 50.0, 2.0 / 55.0)

_ABS_FLOOR = 1e-14  # keeps log(rho) representable even with the region guard off
_MASS_DRIFT_BUDGET = 1e-13  # per accepted step, before renormalization


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded states of one integration run with energy/dissipation diagnostics."""

    times: np.ndarray
    densities: tuple[Density, ...]
    energy: np.ndarray
    dissipation: np.ndarray
    accepted_steps: int
    rejected_steps: int

    @property
    def final_density(self) -> Density:
        return self.densities[-1]


@dataclass(frozen=True, eq=False)
class InvariantRegion:
    """Repeller-bounded compact region that trajectories never leave.

    ``epsilons`` is the defining sequence eps_1..eps_n, ``m`` the resulting
    componentwise floor, and ``M`` the model magnitude constant it is built
    from.
    """

    epsilons: np.ndarray
    m: float
    M: float


def _check_inputs(model: EnergyModel, graph: Graph, rho: Density) -> None:
    if model.n != graph.node_count:
        raise DimensionMismatch(
            f"model has {model.n} nodes, graph has {graph.node_count}"
        )
    if rho.n != graph.node_count:
        raise DimensionMismatch(
            f"density has {rho.n} entries, graph has {graph.node_count} nodes"
        )


def _drift_raw(model: EnergyModel, values: np.ndarray) -> np.ndarray:
    return model.interaction @ values + model.potential + model.beta * (np.log(values) + 1.0)


def _rhs_raw(model: EnergyModel, graph: Graph, values: np.ndarray) -> np.ndarray:
    """Edge-summed right-hand side on raw positive values (no validation)."""
    F = _drift_raw(model, values)
    tail, head = graph.edge_tail, graph.edge_head
    th = 0.5 * (values[tail] + values[head])
    flux = graph.weights * th * (F[tail] - F[head])
    out = np.zeros_like(values)
    np.subtract.at(out, tail, flux)
    np.add.at(out, head, flux)
    return out


def _dissipation_raw(model: EnergyModel, graph: Graph, values: np.ndarray) -> float:
    F = _drift_raw(model, values)
    g = incidence_matrix(graph) @ F
    th = 0.5 * (values[graph.edge_tail] + values[graph.edge_head])
    return -float(np.dot(th, g * g))


def fpe_rhs(model: EnergyModel, graph: Graph, rho: Density) -> TangentVector:
    """Time derivative of the density: equals -L(rho) F(rho), zero-sum."""
    _check_inputs(model, graph, rho)
    if not rho.interior:
        raise BoundaryDensity("FPE right-hand side needs an interior density")
    return TangentVector(_rhs_raw(model, graph, rho.values))


def dissipation(model: EnergyModel, graph: Graph, rho: Density) -> float:
    """Energy production -F^T L(rho) F <= 0 (equals dF/dt along the flow)."""
    _check_inputs(model, graph, rho)
    if not rho.interior:
        raise BoundaryDensity("dissipation needs an interior density")
    return _dissipation_raw(model, graph, rho.values)


def invariant_region(model: EnergyModel, graph: Graph, rho0: Density) -> InvariantRegion:
    """Repeller constants for the starting density.

    M = exp(2 max_{i,j}(|V_i| + |W_ij|)); with c = 1/(1 + (2M)^(1/beta)),
    eps_1 = min(c, min rho0)/2, eps_l = c eps_{l-1}, and the floor is
    m = c^(n-2) min(c, min rho0)/2.
    """
    _check_inputs(model, graph, rho0)
    if not rho0.interior:
        raise BoundaryDensity("invariant region needs an interior starting density")
    n = model.n
    mag = float(np.max(np.abs(model.potential)[:, None] + np.abs(model.interaction)))
    log_q = (math.log(2.0) + 2.0 * mag) / model.beta
    if log_q > 700.0:
        raise ValueError(
            "model magnitudes overflow the invariant-region bound (exp(2 max|V|+|W|) too large)"
        )
    c = 1.0 / (1.0 + math.exp(log_q))
    min0 = float(rho0.values.min())
    eps1 = 0.5 * min(c, min0)
    epsilons = eps1 * np.power(c, np.arange(n))
    m = 0.5 * c ** (n - 2) * min(c, min0)
    return InvariantRegion(epsilons=freeze(epsilons), m=float(m), M=float(math.exp(2.0 * mag)))


def integrate(
    model: EnergyModel,
    graph: Graph,
    rho0: Density,
    t_end: float,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-11,
    max_step: float | None = None,
    record_every: int = 10,
    positivity_floor: float | None = None,
) -> Trajectory:
    """Integrate the flow from rho0 over [0, t_end] with adaptive steps.

    A step is rejected and halved if any component of the candidate would
    drop below the positivity floor (max(m(rho0)/2, 1e-14) by default;
    pass ``positivity_floor=1e-14`` to disable the invariant-region guard)
    or, for symmetric interactions, if the free energy would increase by
    more than ``abs_tol``. Accepted states are renormalized onto the
    simplex; the drift removed this way stays below 1e-13 per step. States
    are recorded every ``record_every`` accepted steps (0 = initial and
    final only), plus the final state.
    """
    _check_inputs(model, graph, rho0)
    if not rho0.interior:
        raise BoundaryDensity("integration starts from an interior density")
    if not (t_end > 0):
        raise ValueError(f"t_end must be positive, got {t_end!r}")
    if record_every < 0:
        raise ValueError(f"record_every must be >= 0, got {record_every!r}")
    if max_step is not None and not max_step > 0:
        raise ValueError(f"max_step must be positive, got {max_step!r}")

    if positivity_floor is None:
        floor = max(invariant_region(model, graph, rho0).m / 2.0, _ABS_FLOOR)
    else:
        floor = max(float(positivity_floor), _ABS_FLOOR)
    guard_energy = model.is_symmetric
    h_cap = float(max_step) if max_step is not None else math.inf

    y = rho0.values.copy()
    t = 0.0
    current_energy = energy(model, rho0)

    times: list[float] = []
    states: list[np.ndarray] = []
    energies: list[float] = []
    dissipations: list[float] = []

    def record(time: float, values: np.ndarray, e: float | None = None) -> None:
        times.append(time)
        states.append(values.copy())
        energies.append(energy(model, Density(values)) if e is None else e)
        dissipations.append(_dissipation_raw(model, graph, values))

    record(0.0, y, current_energy)

    k = [np.empty_like(y) for _ in range(6)]
    k[0] = _rhs_raw(model, graph, y)
    h = min(t_end, h_cap, 0.01 / (1.0 + float(np.max(np.abs(k[0])))))
    accepted = 0
    rejected = 0
    t_tiny = 1e-15 * max(1.0, t_end)

    def partial() -> Trajectory:
        return _build_trajectory(times, states, energies, dissipations, accepted, rejected)

    while t < t_end - t_tiny:
        if h < 1e-14 * max(1.0, t):
            raise StepSizeUnderflow(
                f"step size underflow at t={t!r} (h={h!r})", trajectory=partial()
            )
        h_try = min(h, t_end - t)

        # stages (k1 is reused across rejections of the same state)
        stage_ok = True
        for s in range(1, 6):
            ys = y + h_try * sum(a * k[m] for m, a in enumerate(_RK_A[s]))
            if float(ys.min()) < floor:
                stage_ok = False
                break
            k[s] = _rhs_raw(model, graph, ys)
        if not stage_ok:
            rejected += 1
            h = 0.5 * h_try
            continue

        y_new = y + h_try * sum(b * k[m] for m, b in enumerate(_RK_B4) if b != 0.0)
        if float(y_new.min()) < floor:
            rejected += 1
            h = 0.5 * h_try
            continue

        err = h_try * sum(e * k[m] for m, e in enumerate(_RK_ERR) if e != 0.0)
        scale = abs_tol + rel_tol * np.abs(y)
        err_norm = float(np.max(np.abs(err) / scale))
        if err_norm > 1.0:
            rejected += 1
            h = h_try * min(max(0.9 * err_norm**-0.2, 0.2), 1.0)
            continue

        mass = float(y_new.sum())
        if abs(mass - 1.0) > _MASS_DRIFT_BUDGET:
            rejected += 1
            h = 0.5 * h_try
            continue
        y_new = y_new / mass

        if guard_energy:
            new_energy = energy(model, Density(y_new))
            if new_energy - current_energy > abs_tol:
                rejected += 1
                h = 0.5 * h_try
                continue
            current_energy = new_energy

        y = y_new
        t += h_try
        accepted += 1
        k[0] = _rhs_raw(model, graph, y)
        h = min(h_try * min(max(0.9 * max(err_norm, 1e-12) ** -0.2, 0.2), 5.0), h_cap)
        if record_every > 0 and accepted % record_every == 0 and t < t_end - t_tiny:
            record(t, y, current_energy if guard_energy else None)

    record(t_end, y, current_energy if guard_energy else None)
    return _build_trajectory(times, states, energies, dissipations, accepted, rejected)


def _build_trajectory(times, states, energies, dissipations, accepted, rejected) -> Trajectory:
    return Trajectory(
        times=freeze(times),
        densities=tuple(Density(s) for s in states),
        energy=freeze(energies),
        dissipation=freeze(dissipations),
        accepted_steps=accepted,
        rejected_steps=rejected,
    )
