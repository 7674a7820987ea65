"""Executable checks on solved grids and simulated strategies.

Each check returns a :class:`PropertyReport`; ``passed`` is exactly
``worst_violation <= tolerance``. The residual and value-iteration checks are
written independently of the solver's matrix assembly and only share the
model primitives and the jump map with it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .hjb import FeedbackPolicy, SolverConfig, ValueGrid, control_grid, jump_destination, solve
from .model import ModelParams, premium_rate
from .simulate import estimate_value

RESIDUAL_TOL = 1e-6
ORACLE_TOL = 1e-8
SLOPE_TOL = 1e-8
ROUNDOFF = 1e-12


@dataclass
class PropertyReport:
    name: str
    passed: bool
    worst_violation: float
    location: int | float | str | None = None
    details: str = ""
    tolerance: float = 0.0
    data: list[dict] = field(default_factory=list, repr=False)

    @classmethod
    def from_violation(cls, name, worst, tol, location=None, details="", data=None):
        return cls(name, bool(worst <= tol), float(worst), location, details, tol, data or [])


def check_value_structure(vg: ValueGrid) -> list[PropertyReport]:
    """Zero at the origin, monotone, slope at least one, ``V/x`` nonincreasing, finite Lipschitz constant."""
    V, x = np.asarray(vg.V, float), vg.x
    scale = max(1.0, float(np.abs(V).max()))
    out = [PropertyReport.from_violation("value_zero_at_origin", abs(V[0]), ROUNDOFF, 0)]

    steps = np.diff(V)
    j = int(np.argmin(steps))
    out.append(PropertyReport.from_violation("value_nondecreasing", max(0.0, -steps[j]), SLOPE_TOL * scale, j + 1))

    slopes = steps / np.diff(x)
    j = int(np.argmin(slopes))
    out.append(PropertyReport.from_violation("slope_at_least_one", max(0.0, 1.0 - slopes[j]), SLOPE_TOL, j + 1,
                                             f"min slope {slopes[j]:.12g}"))

    ratio = V[1:] / x[1:]
    rises = np.diff(ratio)
    K = float(ratio[0])
    if rises.size:
        j = int(np.argmax(rises))
        worst = max(0.0, float(rises[j]))
    else:
        j, worst = 0, 0.0
    out.append(PropertyReport.from_violation("ratio_nonincreasing", worst, SLOPE_TOL * max(1.0, abs(K)), j + 2,
                                             f"K = V_1/x_1 = {K:.12g}"))

    lip = float(slopes.max())
    out.append(PropertyReport.from_violation("lipschitz_finite", 0.0 if math.isfinite(lip) else math.inf, 0.0,
                                             int(np.argmax(slopes)) + 1, f"max slope {lip:.12g}"))
    return out


def node_residuals(vg: ValueGrid, params: ModelParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-node ``max_u G``, obstacle residual, and their max, nodes ``1 .. n-1``.

    Loops over nodes and interpolates with ``np.interp``; no solver internals.
    """
    psi = np.asarray(vg.psi, float)
    y, x = vg.y, vg.x
    n, h = len(y), 1.0 / len(y)
    controls = np.asarray(vg.controls, float)
    growth = params.a * premium_rate(params, controls)
    probs = params.claims.probs
    Gmax = np.full(n, np.nan)
    obst = np.full(n, np.nan)
    for j in range(1, n):
        if j < n - 1:
            transport = growth * y[j] * (1 - y[j]) * (psi[j + 1] - psi[j]) / h
        else:
            transport = growth * x[j]
        target = jump_destination(np.full(len(controls), y[j]), controls, params, vg.jump_formula)
        landed = np.where(target > 0, np.interp(np.maximum(target, 0.0), y, psi), 0.0)
        G = -params.r * psi[j] + transport + params.beta * (landed @ probs - psi[j])
        Gmax[j] = G.max()
        obst[j] = 1.0 - (psi[j] - psi[j - 1]) / (x[j] - x[j - 1])
    return Gmax, obst, np.maximum(Gmax, obst)


def check_vi_residual(vg: ValueGrid, params: ModelParams, tol: float = RESIDUAL_TOL) -> PropertyReport:
    _, _, res = node_residuals(vg, params)
    interior = np.abs(res[1:])
    j = int(np.argmax(interior))
    return PropertyReport.from_violation("vi_residual", float(interior[j]), tol, j + 1)


def value_iteration(params: ModelParams, n: int, controls: np.ndarray, formula: str = "derived",
                    tol: float = 1e-13, max_iter: int = 2_000_000) -> tuple[np.ndarray, int]:
    """Picard iteration of the discrete Bellman operator (continue with some ``u``, or pay one node down)."""
    y = np.arange(n) / n
    x = y / (1 - y)
    h = 1.0 / n
    dx = np.diff(x)
    growth = params.a * premium_rate(params, controls)
    drift = growth[:, None] * (y * (1 - y))[None, :] / h
    drift[:, -1] = 0.0
    forcing = np.zeros((len(controls), n))
    forcing[:, -1] = growth * x[-1]
    target = jump_destination(y[None, :], controls[:, None], params, formula)
    alive = target > 0
    tgt = np.maximum(target, 0.0)
    probs = params.claims.probs
    denom = params.r + params.beta + drift

    psi = np.zeros(n)
    for it in range(1, max_iter + 1):
        landed = np.where(alive, np.interp(tgt, y, psi), 0.0) @ probs
        up = np.append(psi[1:], 0.0)
        cont = (drift * up + params.beta * landed + forcing) / denom
        new = np.empty(n)
        new[0] = 0.0
        new[1:] = np.maximum(cont[:, 1:].max(axis=0), psi[:-1] + dx)
        step = np.abs(new - psi).max()
        psi = new
        if step <= tol * max(1.0, np.abs(psi).max()):
            return psi, it
    raise RuntimeError(f"value iteration did not converge in {max_iter} sweeps")


def check_dpp_oracle(params: ModelParams, n: int = 40, control_points: int = 5, formula: str = "derived",
                     tol: float = ORACLE_TOL, enforce_assumptions: bool = True) -> PropertyReport:
    controls = control_grid(params, control_points)
    vg, rep = solve(params, SolverConfig(n=n, control_points=control_points, jump_formula=formula,
                                         enforce_assumptions=enforce_assumptions))
    vi, iters = value_iteration(params, n, controls, formula)
    diff = np.abs(vg.psi - vi)
    j = int(np.argmax(diff))
    return PropertyReport.from_violation("dpp_oracle", float(diff[j]), tol, j,
                                         f"policy iteration {rep.iterations} its, value iteration {iters} sweeps")


@dataclass
class RefinementStudy:
    ns: tuple[int, ...]
    diffs: list[float]
    ratios: list[float]
    constant: float
    scale: float

    @property
    def at_roundoff(self) -> bool:
        return max(self.diffs) <= 1e-10 * self.scale


def refinement_study(params: ModelParams, ns: Sequence[int] = (500, 1000, 2000),
                     config: SolverConfig | None = None) -> RefinementStudy:
    """Sup difference between successive grids on the coarse grid's nodes.

    ``constant`` estimates ``C`` in a first-order error ``C h`` as twice the
    largest ``diff / h_coarse``.
    """
    config = config or SolverConfig()
    sols = []
    for n in ns:
        cfg = SolverConfig(n=n, control_points=config.control_points, tol=config.tol,
                           max_iter=config.max_iter, jump_formula=config.jump_formula,
                           enforce_assumptions=config.enforce_assumptions)
        sols.append(solve(params, cfg)[0])
    diffs = []
    for coarse, fine in zip(sols, sols[1:]):
        step = fine.grid.n // coarse.grid.n
        diffs.append(float(np.abs(coarse.psi - fine.psi[::step][:coarse.grid.n]).max()))
    ratios = [a / b if b > 0 else math.inf for a, b in zip(diffs, diffs[1:])]
    C = 2.0 * max(d * n for d, n in zip(diffs, ns))
    scale = max(float(np.abs(s.psi).max()) for s in sols)
    return RefinementStudy(tuple(ns), diffs, ratios, C, scale)


def audit_library(params: ModelParams, policy: FeedbackPolicy, x0: float) -> list[tuple[str, FeedbackPolicy]]:
    """Constant-retention barrier strategies to score against the solved value."""
    retentions = sorted({params.u_min, 0.5 * (params.u_min + params.u_max), params.u_max})
    barriers = [0.5 * x0, x0, 2.0 * x0]
    if math.isfinite(policy.barrier) and policy.barrier > 0:
        barriers.append(2.0 * policy.barrier)
    out = []
    for u in retentions:
        for b in barriers:
            out.append((f"u={u:.6g},b={b:.6g}", FeedbackPolicy.constant(u, b, params)))
    return out


def check_cross_validation(params: ModelParams, vg: ValueGrid, policy: FeedbackPolicy,
                           test_points: Iterable[float], paths: int, seed: int, grid_error: float,
                           audit_paths: int | None = None) -> PropertyReport:
    """Solved value vs Monte Carlo of the extracted policy, plus the supremum audit.

    Agreement needs ``|MC - V| <= 3 se + grid_error``; every audited policy
    needs ``MC <= V + 3 se``. Both allow ``1e-12 |V|`` of roundoff.
    """
    audit_paths = audit_paths or paths
    worst, where, rows = -math.inf, None, []
    for i, x0 in enumerate(test_points):
        v = float(vg.value_at(x0))
        floor = ROUNDOFF * max(1.0, abs(v))
        est = estimate_value(params, policy, x0, paths, seed)
        excess = abs(est.mean - v) - (3 * est.std_error + grid_error + floor)
        rows.append(dict(x0=x0, policy="extracted", mean=est.mean, std_error=est.std_error, grid_value=v,
                         excess=excess))
        if excess > worst:
            worst, where = excess, f"x0={x0:g} extracted"
        for j, (name, alt) in enumerate(audit_library(params, policy, x0)):
            est = estimate_value(params, alt, x0, audit_paths, seed + 1 + 1000 * i + j)
            excess = est.mean - (v + 3 * est.std_error + floor)
            rows.append(dict(x0=x0, policy=name, mean=est.mean, std_error=est.std_error, grid_value=v,
                             excess=excess))
            if excess > worst:
                worst, where = excess, f"x0={x0:g} {name}"
    return PropertyReport.from_violation("cross_validation", max(worst, 0.0), 0.0, where,
                                         f"grid error allowance {grid_error:.3g}", rows)


def write_report(reports: Sequence[PropertyReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "passed", "worst_violation", "location"])
        for rep in reports:
            w.writerow([rep.name, int(rep.passed), f"{rep.worst_violation:.17g}",
                        "" if rep.location is None else rep.location])
