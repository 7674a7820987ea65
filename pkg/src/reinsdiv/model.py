"""Model constants and closed-form quantities.

Claims follow a compound Poisson law with intensity ``beta`` and a finite
discrete severity law. The claim function is proportional,
``f(n, y) = rho * n * y``: a claim of size ``y`` hits the fraction ``rho``
of the ``n`` contracts in force. The insurer retains
``y ∧ u`` per claim and cedes the excess ``(y - u)^+``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

PROB_SUM_TOL = 1e-12
RETENTION_TOL = 1e-12


class ParameterError(ValueError):
    """Raised for parameter sets outside the model's domain."""


class InadmissibleRetention(ValueError):
    """Raised when a retention level lies below the minimal retention."""


@dataclass(frozen=True)
class ClaimLaw:
    """Finite claim-size law ``G = sum_i p_i * delta_{y_i}``.

    ``atoms`` is a sequence of ``(y_i, p_i)`` pairs with strictly increasing
    positive sizes and positive probabilities summing to one.
    """

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        atoms = tuple((float(y), float(p)) for y, p in self.atoms)
        if not atoms:
            raise ParameterError("claim law needs at least one atom")
        sizes = [y for y, _ in atoms]
        probs = [p for _, p in atoms]
        if any(y <= 0 for y in sizes):
            raise ParameterError("claim sizes must be strictly positive")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ParameterError("claim sizes must be strictly increasing")
        if any(p <= 0 for p in probs):
            raise ParameterError("claim probabilities must be strictly positive")
        if abs(math.fsum(probs) - 1.0) > PROB_SUM_TOL:
            raise ParameterError(f"claim probabilities sum to {math.fsum(probs)!r}, not 1")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def dirac(cls, size: float) -> "ClaimLaw":
        return cls(((size, 1.0),))

    @property
    def sizes(self) -> np.ndarray:
        return np.array([y for y, _ in self.atoms])

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms])

    @property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.probs)
        c[-1] = 1.0
        return c

    @property
    def max_size(self) -> float:
        return self.atoms[-1][0]

    def mean(self) -> float:
        return math.fsum(y * p for y, p in self.atoms)

    def expect(self, g) -> float:
        """``E[g(Y)]`` by exact summation over the atoms."""
        return math.fsum(p * g(y) for y, p in self.atoms)

    def sample_index(self, uniform: float) -> int:
        """Inverse-CDF atom selection for ``uniform`` in ``[0, 1)``."""
        return int(np.searchsorted(self.cdf, uniform, side="right"))


def claim_function(rho: float, n, y):
    """Total claim ``f(n, y) = rho * n * y`` for ``n`` contracts."""
    return rho * n * y


def _hedge_gap(k1, k2, beta, rho, claims: ClaimLaw, u: float) -> float:
    """``p(u) - beta * E[f(1, Y ∧ u)]``, computed from the generic definitions."""
    nu = claims.expect(lambda y: claim_function(rho, 1.0, y))
    ceded = claims.expect(lambda y: claim_function(rho, 1.0, max(y - u, 0.0)))
    retained = claims.expect(lambda y: claim_function(rho, 1.0, min(y, u)))
    return (1 + k1) * beta * nu - (1 + k2) * beta * ceded - beta * retained


def min_retention(claims: ClaimLaw, k1: float, k2: float, beta: float = 1.0, rho: float = 1.0,
                  *, max_iter: int = 200) -> tuple[float, float]:
    """Smallest retention whose premium covers the retained expected claims.

    Returns ``(u_min, raw_root)``. ``u_min`` is found by bisection on
    ``[0, max claim]`` and clamped at zero when the premium already covers
    the retained claims at full cession. ``raw_root`` is the unclamped root
    ``E[Y] * (1 - k1/k2)`` in that case (``-inf`` when ``k2 == 0``).
    """
    gap = lambda u: _hedge_gap(k1, k2, beta, rho, claims, u)
    if gap(0.0) >= 0.0:
        raw = claims.mean() * (1.0 - k1 / k2) if k2 > 0 else -math.inf
        return 0.0, min(raw, 0.0)
    lo, hi = 0.0, claims.max_size
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if gap(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return hi, hi


@dataclass(frozen=True)
class ModelParams:
    """Market and model constants plus derived ``nu``, ``a`` and ``u_min``.

    ``k1 < k2`` is the natural ordering (reinsurer charges more) but is not
    enforced; ``loadings_ordered`` records it. ``lipschitz_scale_ok`` records
    whether ``a * rho * max(y) <= 1``; when it fails, a single claim can
    take the reserve below zero, which the solver and simulator treat as ruin.
    """

    k1: float
    k2: float
    beta: float
    zeta0: float
    r: float
    rho: float
    claims: ClaimLaw
    nu: float = field(init=False)
    a: float = field(init=False)
    u_min: float = field(init=False)
    u_min_raw: float = field(init=False)
    loadings_ordered: bool = field(init=False)
    lipschitz_scale_ok: bool = field(init=False)

    def __post_init__(self):
        if not self.k1 >= 0:
            raise ParameterError("k1 must be nonnegative")
        if not self.k2 > -1:
            raise ParameterError("k2 must exceed -1")
        if not self.beta >= 0:
            raise ParameterError("beta must be nonnegative")
        if not self.zeta0 > 0:
            raise ParameterError("zeta0 must be positive")
        if not self.r > 0:
            raise ParameterError("r must be positive")
        if not 0 < self.rho <= 1:
            raise ParameterError("rho must lie in (0, 1]")
        nu = self.claims.expect(lambda y: claim_function(self.rho, 1.0, y))
        a = solvency_coefficient(self.zeta0, nu)
        u_min, raw = min_retention(self.claims, self.k1, self.k2, self.beta, self.rho)
        set_ = object.__setattr__
        set_(self, "nu", nu)
        set_(self, "a", a)
        set_(self, "u_min", u_min)
        set_(self, "u_min_raw", raw)
        set_(self, "loadings_ordered", self.k1 < self.k2)
        set_(self, "lipschitz_scale_ok", a * self.lipschitz_constant <= 1.0)

    @classmethod
    def dirac(cls, k1, k2, beta, zeta0, r, rho, delta=1.0) -> "ModelParams":
        return cls(k1=k1, k2=k2, beta=beta, zeta0=zeta0, r=r, rho=rho, claims=ClaimLaw.dirac(delta))

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    @property
    def lipschitz_constant(self) -> float:
        """Lipschitz constant of ``f(., y)`` over claim sizes, ``rho * max y``."""
        return self.rho * self.claims.max_size

    @property
    def u_max(self) -> float:
        return self.claims.max_size

    @property
    def max_growth_rate(self) -> float:
        """Upper bound ``(1 + k1) * beta / zeta0`` on the reserve growth rate ``a * p(u)``."""
        return (1 + self.k1) * self.beta / self.zeta0

    @property
    def a2_threshold(self) -> float:
        return 2.0 * self.max_growth_rate

    def growth_rate(self, u):
        """Drift coefficient ``a * p(u)`` of ``dX = a X p(u) dt``."""
        return self.a * premium_rate(self, u)

    def jump_fraction(self, u, size):
        """Fraction of the reserve lost to a claim of ``size`` at retention ``u``."""
        return self.a * claim_function(self.rho, 1.0, np.minimum(size, u))


def solvency_coefficient(zeta0: float, nu: float) -> float:
    """``a = 1 / (zeta0 * nu)``; the contract cap at reserve ``x`` is ``a * x``."""
    if not (zeta0 > 0 and nu > 0):
        raise ParameterError("solvency coefficient needs zeta0 > 0 and nu > 0")
    return 1.0 / (zeta0 * nu)


def premium_rate(params: ModelParams, u, *, check: bool = True):
    """Premium per contract at retention ``u`` (scalar or array).

    ``(1 + k1) beta nu - (1 + k2) beta E[f(1, (Y - u)^+)]``. Retentions above
    the largest claim behave as full retention.
    """
    u_arr = np.asarray(u, dtype=float)
    if check and np.any(u_arr < params.u_min - RETENTION_TOL * params.u_max):
        raise InadmissibleRetention(
            f"retention {u_arr.min()!r} below minimal retention {params.u_min!r}")
    sizes, probs = params.claims.sizes, params.claims.probs
    excess = np.maximum(sizes - u_arr[..., None], 0.0)
    ceded = claim_function(params.rho, 1.0, excess) @ probs
    p = (1 + params.k1) * params.beta * params.nu - (1 + params.k2) * params.beta * ceded
    return float(p) if p.ndim == 0 else p


@dataclass
class AssumptionReport:
    A1_ok: bool
    A2_ok: bool
    lipschitz_scale_ok: bool
    a2_threshold: float
    messages: list[str]

    @property
    def solvable(self) -> bool:
        return self.A1_ok and self.A2_ok


def validate_assumptions(params: ModelParams) -> AssumptionReport:
    """Check the claim-function and discount-rate assumptions.

    The claim function ``rho * x * y`` with ``rho`` in ``(0, 1]`` is linear
    (hence convex) and nondecreasing in ``x``, increasing in ``y``, vanishes
    on both axes and is Lipschitz in ``x``; the first check therefore reduces
    to the range of ``rho``, which construction already enforces.
    """
    msgs = []
    a1 = 0 < params.rho <= 1
    threshold = params.a2_threshold
    a2 = params.r > threshold
    if not a2:
        msgs.append(f"A2 violated: r = {params.r:g} must exceed 2(1+k1)beta/zeta0 = {threshold:.6g}")
    lip = params.lipschitz_scale_ok
    if not lip:
        msgs.append(_unscaled_message(params))
    if not params.loadings_ordered:
        msgs.append(f"k1 = {params.k1:g} >= k2 = {params.k2:g}: reinsurance is cheaper than the insurer's own loading")
    return AssumptionReport(a1, a2, lip, threshold, msgs)


def _unscaled_message(params: ModelParams) -> str:
    return (f"a * rho * max claim = {params.a * params.lipschitz_constant:.6g} > 1: claims at "
            f"retention above {1.0 / (params.a * params.rho):.6g} ruin the company outright")


def warn_if_unscaled(params: ModelParams) -> None:
    if not params.lipschitz_scale_ok:
        warnings.warn(_unscaled_message(params), stacklevel=3)


def make_claims(atoms: Sequence[tuple[float, float]]) -> ClaimLaw:
    return ClaimLaw(tuple(atoms))
