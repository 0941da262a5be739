"""Command-line harness: config validation, orchestration, bit-stable outputs.

Usage:
    graphfpe <gibbs|simulate|rates|lsi|w2|decompose> --config cfg.json
             [--out DIR] [--jobs N] [--seed S]

Every command is deterministic given (config, seed); floats in JSON and CSV
outputs are written with 17 significant digits so repeated runs are
byte-identical. Each output embeds the SHA-256 digest of the canonicalized
config plus the library version. Exit codes: 0 success, 2 config or
validation problem, 3 numerical non-convergence, 4 precondition violation.
Set GRAPHFPE_LOG to error/warn/info/debug to control logging.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import (
    BoundaryDensity,
    ConfigError,
    DimensionMismatch,
    GraphFpeError,
    NoConvergence,
    NonPositiveHessian,
    NonPositiveSymmetrizedJacobian,
    NonSymmetricW,
    NotAnEdge,
    NotCertifiedConvex,
    NotZeroSum,
    NoValidSamples,
    StepSizeUnderflow,
)
from .fpe_dynamics import integrate
from .free_energy import (
    EnergyModel,
    convexity_certificate,
    energy,
    find_all_equilibria,
    gibbs_fixed_point,
)
from .graph_core import Graph, build_graph
from .rate_analysis import (
    asymptotic_rate,
    fisher_rate,
    linearized_rate,
    rate_constants,
    relative_fisher,
    tail_slope,
    verify_decay_bound,
)
from .simplex_calculus import Density, VectorField, divergence, hodge_decompose, inner_product
from .wasserstein_metric import w2_distance

logger = logging.getLogger("graphfpe")

_CONFIG_ERRORS = (
    ConfigError,
    DimensionMismatch,
    NotAnEdge,
)
_PRECONDITION_ERRORS = (
    NotCertifiedConvex,
    BoundaryDensity,
    NonPositiveHessian,
    NonSymmetricW,
    NonPositiveSymmetrizedJacobian,
    NotZeroSum,
    NoValidSamples,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_PRECONDITION = 4


# -- stable serialization ----------------------------------------------------

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _dump_stable(obj, indent: int = 0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = [_dump_stable(v, indent + 1) for v in obj]
        if not items:
            return "[]"
        return "[\n" + ",\n".join(inner + it for it in items) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [
            inner + json.dumps(str(k)) + ": " + _dump_stable(obj[k], indent + 1)
            for k in sorted(obj)
        ]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(_dump_stable(payload) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format(float(x), ".17g") for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)


def _digest(obj) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()


# -- config loading ----------------------------------------------------------

def _schema() -> dict:
    text = resources.files("graphfpe").joinpath("config_schema.json").read_text("utf-8")
    return json.loads(text)


def _load_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text("utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _validate_config(config: dict) -> None:
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        where = "$" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path
        )
        raise ConfigError(f"config error at {where}: {err.message}")


def _resolve_section(config: dict, key: str, base: Path, fragment: str) -> dict:
    section = config[key]
    if "path" in section:
        loaded = _load_json(base / section["path"])
        schema = _schema()
        sub = {"$ref": f"#/$defs/{fragment}", "$defs": schema["$defs"]}
        try:
            jsonschema.validate(loaded, sub)
        except jsonschema.exceptions.ValidationError as exc:
            raise ConfigError(f"{section['path']}: {exc.message}") from exc
        return loaded
    return section


def _build_graph(gdict: dict) -> Graph:
    try:
        return build_graph(gdict["n"], gdict["edges"])
    except (GraphFpeError, ValueError) as exc:
        raise ConfigError(f"invalid graph: {exc}") from exc


def _build_model(mdict: dict, n: int) -> EnergyModel:
    V = mdict.get("V")
    W = mdict.get("W")
    V = np.zeros(n) if V is None else np.asarray(V, dtype=float)
    W = np.zeros((n, n)) if W is None else np.asarray(W, dtype=float)
    try:
        model = EnergyModel(interaction=W, potential=V, beta=float(mdict["beta"]))
    except (GraphFpeError, ValueError) as exc:
        raise ConfigError(f"invalid model: {exc}") from exc
    if model.n != n:
        raise ConfigError(f"model is {model.n}-dimensional but the graph has {n} nodes")
    return model


def _density(values, what: str, n: int) -> Density:
    try:
        rho = Density(np.asarray(values, dtype=float))
    except (GraphFpeError, ValueError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from exc
    if rho.n != n:
        raise ConfigError(f"{what} has {rho.n} entries but the graph has {n} nodes")
    return rho


class _Run:
    """Everything shared by the command handlers."""

    def __init__(self, args):
        config_path = Path(args.config)
        self.config = _load_json(config_path)
        _validate_config(self.config)
        base = config_path.parent
        self.graph_dict = _resolve_section(self.config, "graph", base, "graph_inline")
        self.model_dict = _resolve_section(self.config, "model", base, "model_inline")
        self.graph = _build_graph(self.graph_dict)
        self.model = _build_model(self.model_dict, self.graph.node_count)
        self.base = base
        self.out = Path(args.out) if args.out else Path(self.config.get("output_dir", "."))
        self.out.mkdir(parents=True, exist_ok=True)
        self.seed = args.seed if args.seed is not None else int(self.config.get("seed", 0))
        self.jobs = max(1, args.jobs)
        self.stamp = {
            "config_digest": _digest(self.config),
            "graph_digest": _digest(self.graph_dict),
            "model_digest": _digest(self.model_dict),
            "version": __version__,
            "seed": self.seed,
        }

    def section(self, name: str) -> dict:
        return self.config.get(name, {})

    def density(self, values, what: str) -> Density:
        return _density(values, what, self.graph.node_count)

    def uniform(self) -> Density:
        n = self.graph.node_count
        return Density(np.full(n, 1.0 / n))

    def default_starts(self) -> list[Density]:
        """Uniform plus one corner-leaning start per node (mass 0.9 at the corner)."""
        n = self.graph.node_count
        starts = [self.uniform()]
        off = 0.1 / (n - 1)
        for i in range(n):
            v = np.full(n, off)
            v[i] = 0.9
            starts.append(Density(v / v.sum()))
        return starts


def _gibbs_payload(result, model) -> dict:
    return {
        "density": result.density.values,
        "K": result.normalizer,
        "iterations": result.iterations,
        "residual": result.residual,
        "energy": energy(model, result.density),
    }


def cmd_gibbs(run: _Run) -> int:
    opts = run.section("gibbs")
    tol = opts.get("tol", 1e-12)
    max_iter = opts.get("max_iter", 10_000)
    damping = opts.get("damping", 0.5)
    init = run.density(opts["init"], "gibbs.init") if "init" in opts else run.uniform()
    payload = dict(run.stamp)
    if "starts" in opts:
        starts = [run.density(s, "gibbs.starts entry") for s in opts["starts"]]
        results = find_all_equilibria(
            run.model, starts, tol=tol, max_iter=max_iter, damping=damping, jobs=run.jobs
        )
        if not results:
            payload["converged"] = False
            payload["equilibria"] = []
            _write_json(run.out / "gibbs.json", payload)
            return EXIT_NUMERIC
        payload["converged"] = True
        payload["equilibria"] = [_gibbs_payload(r, run.model) for r in results]
        payload.update(_gibbs_payload(results[0], run.model))
        _write_json(run.out / "gibbs.json", payload)
        return EXIT_OK
    try:
        result = gibbs_fixed_point(run.model, init, tol=tol, max_iter=max_iter, damping=damping)
    except NoConvergence as exc:
        payload["converged"] = False
        payload.update(_gibbs_payload(exc.result, run.model))
        _write_json(run.out / "gibbs.json", payload)
        logger.error("gibbs iteration did not converge: %s", exc)
        return EXIT_NUMERIC
    payload["converged"] = True
    payload.update(_gibbs_payload(result, run.model))
    _write_json(run.out / "gibbs.json", payload)
    return EXIT_OK


def _trajectory_rows(traj):
    for k in range(traj.times.size):
        yield [traj.times[k], *traj.densities[k].values, traj.energy[k], traj.dissipation[k]]


def cmd_simulate(run: _Run) -> int:
    opts = run.section("simulate")
    if "rho0" not in opts or "t_end" not in opts:
        raise ConfigError("simulate requires 'rho0' and 't_end'")
    rho0 = run.density(opts["rho0"], "simulate.rho0")
    kwargs = {
        "rel_tol": opts.get("rel_tol", 1e-8),
        "abs_tol": opts.get("abs_tol", 1e-11),
        "max_step": opts.get("max_step"),
        "record_every": opts.get("record_every", 10),
        "positivity_floor": opts.get("positivity_floor"),
    }
    n = run.graph.node_count
    header = ["t", *[f"rho_{i + 1}" for i in range(n)], "energy", "dissipation"]
    started = time.perf_counter()
    try:
        traj = integrate(run.model, run.graph, rho0, opts["t_end"], **kwargs)
        completed = True
    except StepSizeUnderflow as exc:
        traj = exc.trajectory
        completed = False
        logger.error("integration stopped early: %s", exc)
    elapsed = time.perf_counter() - started
    logger.info("integration wall time: %.3fs", elapsed)

    _write_csv(run.out / "trajectory.csv", header, _trajectory_rows(traj))
    final = traj.final_density
    try:
        gibbs = gibbs_fixed_point(run.model, final, tol=1e-12, max_iter=100_000)
        rel_entropy = energy(run.model, final) - energy(run.model, gibbs.density)
    except NoConvergence:
        rel_entropy = None
    payload = dict(run.stamp)
    payload.update(
        {
            "completed": completed,
            "final_time": traj.times[-1],
            "final_density": final.values,
            "relative_entropy": rel_entropy,
            "relative_fisher": relative_fisher(run.model, run.graph, final),
            "accepted_steps": traj.accepted_steps,
            "rejected_steps": traj.rejected_steps,
            "records": int(traj.times.size),
        }
    )
    _write_json(run.out / "summary.json", payload)
    return EXIT_OK if completed else EXIT_NUMERIC


def _read_trajectory_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    try:
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read trajectory file {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"malformed trajectory file {path}: {exc}") from exc
    return raw[:, 0], raw[:, -2]  # t and energy columns


class _EnergySeries:
    """Duck-typed stand-in for Trajectory in verify_decay_bound."""

    def __init__(self, times, energies):
        self.times = times
        self.energy = energies


def cmd_rates(run: _Run, equilibria_flag: bool = False) -> int:
    opts = run.section("rates")
    if "rho0" not in opts:
        raise ConfigError("rates requires 'rho0'")
    rho0 = run.density(opts["rho0"], "rates.rho0")
    payload = dict(run.stamp)
    equilibria_only = bool(opts.get("equilibria_only", False)) or equilibria_flag

    if equilibria_only:
        starts = (
            [run.density(s, "rates.starts entry") for s in opts["starts"]]
            if "starts" in opts
            else run.default_starts()
        )
        results = find_all_equilibria(run.model, starts, jobs=run.jobs)
        if not results:
            raise NoConvergence("no equilibrium start converged")
        entries = []
        for res in results:
            entry = {
                "density": res.density.values,
                "energy": energy(run.model, res.density),
                "residual": res.residual,
            }
            try:
                entry["lambda_asymptotic"] = asymptotic_rate(run.model, run.graph, res.density)
                entry["hessian_positive"] = True
            except NonPositiveHessian:
                # indefinite full-space Hessian: fall back to the L-side
                # similarity, which still yields the tangent linearization
                # rate (negative values flag unstable equilibria)
                entry["lambda_asymptotic"] = linearized_rate(run.model, run.graph, res.density)
                entry["hessian_positive"] = False
            try:
                entry["lambda_fisher"] = fisher_rate(run.model, run.graph, res.density)
            except NonPositiveSymmetrizedJacobian:
                entry["lambda_fisher"] = None
            entries.append(entry)
        payload["equilibria"] = entries
        certified = False
        try:
            certified = convexity_certificate(run.model).certified_convex
        except NonSymmetricW:
            pass
        payload["certified_convex"] = certified
        _write_json(run.out / "rates.json", payload)
        return EXIT_OK

    report = rate_constants(
        run.model,
        run.graph,
        rho0,
        gibbs_tol=opts.get("gibbs_tol", 1e-13),
        gibbs_max_iter=opts.get("gibbs_max_iter", 500_000),
    )
    lam = asymptotic_rate(run.model, run.graph, report.rho_inf)
    lam_fisher = fisher_rate(run.model, run.graph, report.rho_inf)
    payload.update(
        {
            "certified_convex": True,
            "m": report.m,
            "lambda_sec_hat": report.lambda_sec_hat,
            "lambda_max_hat": report.lambda_max_hat,
            "lambda_min_hess": report.lambda_min_hess,
            "hess_norm1": report.hess_norm1,
            "delta_F": report.delta_F,
            "C1": report.C1,
            "C2": report.C2,
            "C3": report.C3,
            "r": report.r,
            "C": report.C,
            "x_star": report.x_star,
            "rho_inf": report.rho_inf.values,
            "f_inf": report.f_inf,
            "lambda_asymptotic": lam,
            "lambda_fisher": lam_fisher,
        }
    )
    if "trajectory" in opts:
        times, energies = _read_trajectory_csv(run.base / opts["trajectory"])
        check = verify_decay_bound(_EnergySeries(times, energies), report, report.f_inf)
        payload["bound_holds"] = check.holds
        payload["bound_max_violation"] = check.max_violation
        try:
            payload["observed_tail_slope"] = tail_slope(times, energies - report.f_inf)
        except ValueError:
            payload["observed_tail_slope"] = None
    _write_json(run.out / "rates.json", payload)
    return EXIT_OK


def cmd_lsi(run: _Run) -> int:
    from .rate_analysis import estimate_lsi_constant

    opts = run.section("lsi")
    if "count" not in opts:
        raise ConfigError("lsi requires 'count'")
    init = run.density(opts["rho0"], "lsi.rho0") if "rho0" in opts else run.uniform()
    gibbs = gibbs_fixed_point(run.model, init, tol=1e-13, max_iter=500_000)
    estimate = estimate_lsi_constant(
        run.model,
        run.graph,
        gibbs.density,
        count=opts["count"],
        seed=run.seed,
        min_mass=opts.get("min_mass", 1e-4),
        jobs=run.jobs,
    )
    payload = dict(run.stamp)
    payload.update(
        {
            "count": opts["count"],
            "min_mass": opts.get("min_mass", 1e-4),
            "lambda_hat": estimate.lambda_hat,
            "worst_density": estimate.worst_density.values,
            "samples_retained": estimate.samples_retained,
            "rho_inf": gibbs.density.values,
        }
    )
    _write_json(run.out / "lsi.json", payload)
    return EXIT_OK


def cmd_w2(run: _Run) -> int:
    opts = run.section("w2")
    if "rho0" not in opts or "rho1" not in opts:
        raise ConfigError("w2 requires 'rho0' and 'rho1'")
    rho0 = run.density(opts["rho0"], "w2.rho0")
    rho1 = run.density(opts["rho1"], "w2.rho1")
    K = opts.get("K", 16)
    result = w2_distance(
        run.graph,
        rho0,
        rho1,
        K=K,
        max_iters=opts.get("max_iters", 5000),
        grad_tol=opts.get("grad_tol", 1e-8),
        step_init=opts.get("step_init", 1.0),
    )
    payload = dict(run.stamp)
    payload.update(
        {
            "distance": result.distance,
            "action": result.path.action,
            "converged": result.converged,
            "iterations": result.iterations,
            "grad_norm": result.grad_norm,
            "K": K,
        }
    )
    _write_json(run.out / "w2.json", payload)
    if opts.get("path_csv", False):
        n = run.graph.node_count
        header = ["k", "t", *[f"rho_{i + 1}" for i in range(n)]]
        rows = [
            [k, k / K, *rho.values] for k, rho in enumerate(result.path.densities)
        ]
        _write_csv(run.out / "w2_path.csv", header, rows)
    if not result.converged:
        logger.error("w2 optimization stopped at grad norm %.3e > tol", result.grad_norm)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_decompose(run: _Run) -> int:
    opts = run.section("decompose")
    if "rho" not in opts or "field" not in opts:
        raise ConfigError("decompose requires 'rho' and 'field'")
    rho = run.density(opts["rho"], "decompose.rho")
    graph = run.graph
    values = np.zeros(graph.edge_count)
    seen = set()
    for i, j, val in opts["field"]:
        i0, j0 = int(i) - 1, int(j) - 1
        try:
            e = graph.edge_index(i0, j0)
        except NotAnEdge as exc:
            raise ConfigError(f"decompose.field: ({i}, {j}) is not an edge") from exc
        if e in seen:
            raise ConfigError(f"decompose.field: edge ({i}, {j}) listed twice")
        seen.add(e)
        values[e] = float(val) if i0 < j0 else -float(val)
    field = VectorField(graph, values)

    phi, u = hodge_decompose(graph, rho, field)
    residual = divergence(graph, rho, u)
    grad_edges = field.edge_values - u.edge_values

    def edge_list(vals) -> list:
        return [[i + 1, j + 1, float(v)] for (i, j, _), v in zip(graph.edges, vals)]

    payload = dict(run.stamp)
    payload.update(
        {
            "potential": phi.values,
            "gradient_field": edge_list(grad_edges),
            "rotational_field": edge_list(u.edge_values),
            "div_residual_max": float(np.max(np.abs(residual.values))),
            "u_inf_norm": float(np.max(np.abs(u.edge_values))) if graph.edge_count else 0.0,
            "inner_products": {
                "total": inner_product(field, field, rho),
                "gradient": inner_product(
                    VectorField(graph, grad_edges), VectorField(graph, grad_edges), rho
                ),
                "rotational": inner_product(u, u, rho),
            },
        }
    )
    _write_json(run.out / "hodge.json", payload)
    return EXIT_OK


def _setup_logging() -> None:
    levels = {
        "error": logging.ERROR,
        "warn": logging.WARNING,
        "info": logging.INFO,
        "debug": logging.DEBUG,
    }
    raw = os.environ.get("GRAPHFPE_LOG", "warn").lower()
    level = levels.get(raw)
    if level is None:
        level = logging.WARNING
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")
    logger.setLevel(level)
    if raw not in levels:
        logger.warning("unknown GRAPHFPE_LOG value %r; using 'warn'", raw)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphfpe",
        description="Wasserstein calculus and Fokker-Planck dynamics on finite weighted graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("gibbs", "solve the Gibbs fixed point (optionally multi-start)"),
        ("simulate", "integrate the Fokker-Planck flow and record a trajectory"),
        ("rates", "evaluate the explicit convergence-rate constants"),
        ("lsi", "estimate the log-Sobolev constant by simplex sampling"),
        ("w2", "compute the 2-Wasserstein distance between two densities"),
        ("decompose", "Hodge-decompose an edge vector field"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (default: config output_dir or '.')")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers for multi-start/sampling")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if name == "rates":
            p.add_argument(
                "--equilibrium",
                action="store_true",
                help="report per-equilibrium asymptotic rates instead of the global bound",
            )
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = _parser().parse_args(argv)
    try:
        run = _Run(args)
        if args.command == "gibbs":
            return cmd_gibbs(run)
        if args.command == "simulate":
            return cmd_simulate(run)
        if args.command == "rates":
            return cmd_rates(run, equilibria_flag=getattr(args, "equilibrium", False))
        if args.command == "lsi":
            return cmd_lsi(run)
        if args.command == "w2":
            return cmd_w2(run)
        if args.command == "decompose":
            return cmd_decompose(run)
        raise ConfigError(f"unknown command {args.command!r}")
    except _CONFIG_ERRORS as exc:
        print(f"graphfpe: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _PRECONDITION_ERRORS as exc:
        print(f"graphfpe: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (NoConvergence, StepSizeUnderflow) as exc:
        print(f"graphfpe: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
