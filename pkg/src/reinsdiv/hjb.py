"""Discrete HJB variational inequality on the compactified reserve axis.

The reserve ``x >= 0`` is mapped to ``y = x / (x + 1)`` in ``[0, 1)`` and the
value ``psi(y) = V(x)`` is computed on the uniform grid ``y_j = j / n``,
``j = 0 .. n-1``. Each interior node either follows a retention level ``u``
(continuation row, the discrete Hamiltonian ``G`` set to zero) or pays a
dividend (obstacle row). Howard's policy iteration alternates an exact sparse
solve of the linear system for the current policy with a per-node argmax.

Scheme details:

* drift ``a p(u) y (1 - y) psi'`` is upwinded with the forward difference
  (the drift is nonnegative for every admissible ``u``);
* the dividend row is ``psi_j - psi_{j-1} = x_j - x_{j-1}``: paying
  ``x_j - x_{j-1}`` moves the reserve one node down. Its residual is
  ``1 - (psi_j - psi_{j-1}) / (x_j - x_{j-1})``, the backward difference of
  ``1 - V'`` in the original coordinates;
* at the top node the drift sees the dividend slope ``dx/dy`` instead of a
  ghost node above the truncated domain;
* claim targets are linearly interpolated; targets at or below zero are ruin
  and contribute value zero.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import ModelParams, premium_rate, validate_assumptions, warn_if_unscaled

log = logging.getLogger(__name__)

JUMP_FORMULAS = ("derived", "printed")
DIVIDEND = -1


class AssumptionError(ValueError):
    """Raised when the discount rate does not dominate the reserve growth."""


def transform(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("reserve must be nonnegative")
    y = x / (x + 1.0)
    return float(y) if y.ndim == 0 else y


def inverse_transform(y):
    y = np.asarray(y, dtype=float)
    if np.any(y >= 1) or np.any(y < 0):
        raise ValueError("y must lie in [0, 1)")
    x = y / (1.0 - y)
    return float(x) if x.ndim == 0 else x


def jump_destination(y, u, params: ModelParams, formula: str = "derived") -> np.ndarray:
    """Post-claim position in ``y`` coordinates, one entry per claim atom.

    ``derived`` applies the multiplicative jump ``X -> X (1 - c)`` with
    ``c = a rho (y_atom ∧ u)``, i.e. ``y' = y (1 - c) / (1 - c y)``.
    ``printed`` uses ``y' = (y (1 - c) - c) / (c y + 1 - c)``, evaluated as
    ``x' = (x (1 - 2c) - c) / (1 + 2 c x)`` so it stays well defined for
    ``c >= 1``. A result ``<= 0`` signals ruin.

    ``y`` and ``u`` broadcast against each other; the atom axis is appended.
    """
    y = np.asarray(y, dtype=float)[..., None]
    u = np.asarray(u, dtype=float)[..., None]
    c = params.jump_fraction(u, params.claims.sizes)
    if formula == "derived":
        with np.errstate(divide="ignore", invalid="ignore"):
            target = np.where(c <= 1.0, y * (1.0 - c) / (1.0 - c * y), (1.0 - c) * y)
        return np.where(y == 0.0, 0.0, target)
    if formula == "printed":
        x = y / (1.0 - y)
        xp = (x * (1.0 - 2.0 * c) - c) / (1.0 + 2.0 * c * x)
        return np.where(xp > 0, xp / (1.0 + np.maximum(xp, 0.0)), xp)
    raise ValueError(f"unknown jump formula {formula!r}; expected one of {JUMP_FORMULAS}")


@dataclass(frozen=True)
class Grid:
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("grid needs at least 3 nodes")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    @property
    def x(self) -> np.ndarray:
        y = self.y
        return y / (1.0 - y)

    @property
    def dx(self) -> np.ndarray:
        """``x_j - x_{j-1}`` for ``j = 1 .. n-1``, computed without cancellation."""
        y = self.y
        return self.h / ((1.0 - y[1:]) * (1.0 - y[:-1]))


@dataclass(frozen=True)
class SolverConfig:
    n: int = 2000
    control_points: int = 101
    tol: float = 1e-8
    eval_tol: float = 1e-10
    max_iter: int = 500
    jump_formula: str = "derived"
    enforce_assumptions: bool = True

    def __post_init__(self):
        if self.jump_formula not in JUMP_FORMULAS:
            raise ValueError(f"jump_formula must be one of {JUMP_FORMULAS}")
        if self.control_points < 1:
            raise ValueError("control_points must be positive")


@dataclass(frozen=True)
class ValueGrid:
    """Solved value ``psi(y_j) = V(x_j)``, retention argmax and dividend flags."""

    grid: Grid
    psi: np.ndarray
    u_star: np.ndarray
    dividend_flag: np.ndarray
    controls: np.ndarray
    jump_formula: str = "derived"

    @property
    def V(self) -> np.ndarray:
        return self.psi

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def y(self) -> np.ndarray:
        return self.grid.y

    def value_at(self, x0):
        """Linear interpolation of ``V`` in ``x``; slope one beyond the top node."""
        x0 = np.asarray(x0, dtype=float)
        xs, vs = self.x, self.psi
        v = np.interp(x0, xs, vs)
        v = np.where(x0 > xs[-1], vs[-1] + (x0 - xs[-1]), v)
        return float(v) if v.ndim == 0 else v


@dataclass
class SolveReport:
    iterations: int
    sup_residual: float
    converged: bool
    policy_changes_last_iter: int
    mmatrix_ok: bool = True
    elapsed: float = 0.0
    residual_history: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class FeedbackPolicy:
    """Retention as a piecewise-constant function of the reserve plus a barrier.

    Reserve above ``barrier`` is paid out at once; the retention at ``x`` is
    the one stored at the nearest grid node.
    """

    x_nodes: np.ndarray
    u_nodes: np.ndarray
    barrier: float
    u_min: float
    u_max: float
    single_region: bool = True

    def retention(self, x: float) -> float:
        xs = self.x_nodes
        j = int(np.searchsorted(xs, x))
        if j >= len(xs):
            return float(self.u_nodes[-1])
        if j > 0 and x - xs[j - 1] <= xs[j] - x:
            j -= 1
        return float(self.u_nodes[j])

    @classmethod
    def constant(cls, retention: float, barrier: float, params: ModelParams) -> "FeedbackPolicy":
        return cls(np.array([0.0]), np.array([float(retention)]), float(barrier),
                   params.u_min, params.u_max)


def control_grid(params: ModelParams, points: int) -> np.ndarray:
    if points == 1:
        return np.array([params.u_max])
    return np.linspace(params.u_min, params.u_max, points)


class _Discretization:
    """Policy-independent stencils for every (control, node) pair."""

    def __init__(self, params: ModelParams, grid: Grid, controls: np.ndarray, formula: str):
        self.params, self.grid, self.controls = params, grid, controls
        n, h = grid.n, grid.h
        y, x = grid.y, grid.x
        self.dx = grid.dx
        growth = params.a * premium_rate(params, controls)
        self.growth = growth
        # forward-difference coefficient d/h; the top node uses the forcing term instead
        drift = growth[:, None] * (y * (1.0 - y))[None, :] / h
        drift[:, -1] = 0.0
        self.drift = drift
        self.top_forcing = growth * x[-1]

        target = jump_destination(y[None, :], controls[:, None], params, formula)
        self.ruin = target <= 0.0
        pos = np.clip(target, 0.0, y[-1]) * n
        k = np.floor(pos).astype(np.intp)
        k = np.clip(k, 0, n - 1)
        w = pos - k
        top = k >= n - 1
        w[top] = 0.0
        self.k = k
        self.k1 = np.minimum(k + 1, n - 1)
        self.w = w
        self.probs = params.claims.probs

    def jump_values(self, psi: np.ndarray) -> np.ndarray:
        """``sum_i p_i psi~(y'_i)`` for every (control, node)."""
        interp = (1.0 - self.w) * psi[self.k] + self.w * psi[self.k1]
        interp = np.where(self.ruin, 0.0, interp)
        return interp @ self.probs

    def hamiltonian(self, psi: np.ndarray) -> np.ndarray:
        """Discrete ``G`` for every (control, node); shape ``(controls, n)``."""
        p = self.params
        fwd = np.append(psi[1:] - psi[:-1], 0.0)
        g = -p.r * psi + self.drift * fwd + p.beta * (self.jump_values(psi) - psi)
        g[:, -1] += self.top_forcing
        return g

    def obstacle(self, psi: np.ndarray) -> np.ndarray:
        """``1 - (psi_j - psi_{j-1}) / (x_j - x_{j-1})``; entry 0 is undefined (nan)."""
        out = np.full(psi.shape, np.nan)
        out[1:] = 1.0 - (psi[1:] - psi[:-1]) / self.dx
        return out

    def assemble(self, action: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
        """Linear system ``A psi = b`` for a policy; ``action[j]`` is a control index or DIVIDEND."""
        n = self.grid.n
        p = self.params
        rows, cols, vals = [0], [0], [1.0]
        b = np.zeros(n)

        div = np.flatnonzero(action == DIVIDEND)
        div = div[div > 0]
        rows += [*div, *div]
        cols += [*div, *(div - 1)]
        vals += [1.0] * len(div) + [-1.0] * len(div)
        b[div] = self.dx[div - 1]

        cont = np.flatnonzero(action >= 0)
        cont = cont[cont > 0]
        m = action[cont]
        d = self.drift[m, cont]
        rows += list(cont)
        cols += list(cont)
        vals += list(p.r + p.beta + d)
        inner = cont < n - 1
        rows += list(cont[inner])
        cols += list(cont[inner] + 1)
        vals += list(-d[inner])
        is_top = cont == n - 1
        b[cont[is_top]] = self.top_forcing[m[is_top]]
        if p.beta > 0:
            for i, prob in enumerate(self.probs):
                live = ~self.ruin[m, cont, i]
                jr = cont[live]
                mi = m[live]
                w = self.w[mi, jr, i]
                rows += list(jr) + list(jr)
                cols += list(self.k[mi, jr, i]) + list(self.k1[mi, jr, i])
                vals += list(-p.beta * prob * (1.0 - w)) + list(-p.beta * prob * w)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        return A, b


def is_m_matrix(A: sp.spmatrix, rtol: float = 1e-12) -> bool:
    """Nonpositive off-diagonals and weak row diagonal dominance."""
    A = sp.csr_matrix(A)
    diag = A.diagonal()
    off = A - sp.diags(diag)
    if off.nnz and off.data.max() > rtol * np.abs(diag).max():
        return False
    offsum = np.asarray(abs(off).sum(axis=1)).ravel()
    return bool(np.all(diag > 0) and np.all(diag - offsum >= -rtol * diag))


def _evaluate(A: sp.csr_matrix, b: np.ndarray, eval_tol: float) -> np.ndarray:
    psi = spla.spsolve(A.tocsc(), b)
    # one round of iterative refinement keeps residuals at roundoff for large x
    scale = max(1.0, np.abs(b).max())
    res = b - A @ psi
    if np.abs(res).max() > eval_tol * scale:
        psi = psi + spla.spsolve(A.tocsc(), res)
    return psi


def _improve(G: np.ndarray, O: np.ndarray, action: np.ndarray, tie: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-node argmax over controls and the dividend action.

    Ties between controls go to the larger retention; the current action is
    kept when it is within ``tie`` of the best.
    """
    nc = G.shape[0]
    best_m = nc - 1 - np.argmax(G[::-1], axis=0)
    best_g = G[best_m, np.arange(G.shape[1])]
    cand = np.where(O > best_g, DIVIDEND, best_m)
    cand_val = np.maximum(O, best_g)
    cur_val = np.where(action == DIVIDEND, O, G[np.clip(action, 0, nc - 1), np.arange(G.shape[1])])
    keep = cur_val >= cand_val - tie
    new = np.where(keep, action, cand)
    new[0] = action[0]
    return new, best_m, np.maximum(O, best_g)


def solve(params: ModelParams, config: SolverConfig | None = None) -> tuple[ValueGrid, SolveReport]:
    """Howard policy iteration for the discrete variational inequality."""
    config = config or SolverConfig()
    report = validate_assumptions(params)
    if config.enforce_assumptions and not report.A2_ok:
        raise AssumptionError("; ".join(m for m in report.messages if m.startswith("A2")))
    warn_if_unscaled(params)

    t0 = time.perf_counter()
    grid = Grid(config.n)
    controls = control_grid(params, config.control_points)
    disc = _Discretization(params, grid, controls, config.jump_formula)
    n = grid.n

    action = np.full(n, DIVIDEND, dtype=np.intp)
    action[0] = DIVIDEND
    mm_ok = True
    history: list[float] = []
    changes = n
    sup_res = np.inf
    converged = False
    it = 0
    best_m = np.full(n, len(controls) - 1)
    for it in range(1, config.max_iter + 1):
        A, b = disc.assemble(action)
        mm_ok &= is_m_matrix(A)
        psi = _evaluate(A, b, config.eval_tol)
        G = disc.hamiltonian(psi)
        O = disc.obstacle(psi)
        O[0] = -np.inf
        tie = 1e-13 * max(1.0, np.abs(psi).max())
        new_action, best_m, vi = _improve(G, O, action, tie)
        sup_res = float(np.abs(vi[1:]).max())
        history.append(sup_res)
        changes = int(np.count_nonzero(new_action != action))
        log.debug("policy iteration %d: residual %.3e, %d changes", it, sup_res, changes)
        action = new_action
        if changes == 0:
            converged = sup_res <= config.tol
            break

    if not mm_ok:
        warnings.warn("policy evaluation matrix lost the M-matrix property", stacklevel=2)
    vg = ValueGrid(grid=grid, psi=psi, u_star=controls[best_m], dividend_flag=(action == DIVIDEND) & (np.arange(n) > 0),
                   controls=controls, jump_formula=config.jump_formula)
    rep = SolveReport(iterations=it, sup_residual=sup_res, converged=converged,
                      policy_changes_last_iter=changes, mmatrix_ok=mm_ok,
                      elapsed=time.perf_counter() - t0, residual_history=history)
    return vg, rep


def extract_policy(vg: ValueGrid, params: ModelParams) -> FeedbackPolicy:
    """Executable feedback strategy from a solved grid.

    A flagged node ``j`` pays ``x_j - x_{j-1}`` and moves to node ``j-1``, so
    the reflection level is the node just below the first flagged node.
    """
    flags = vg.dividend_flag
    idx = np.flatnonzero(flags[1:]) + 1
    if idx.size == 0:
        warnings.warn("no dividend node on the grid; barrier set to +inf", stacklevel=2)
        barrier = np.inf
        single = True
    else:
        first = idx[0]
        barrier = float(vg.x[first - 1])
        single = bool(flags[first:].all())
        if not single:
            warnings.warn("dividend region is not a single interval above the barrier", stacklevel=2)
    u_nodes = np.clip(vg.u_star, params.u_min, params.u_max)
    return FeedbackPolicy(vg.x.copy(), u_nodes, barrier, params.u_min, params.u_max, single)
