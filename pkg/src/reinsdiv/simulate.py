"""Exact event-driven Monte Carlo of the controlled reserve.

Between claims the reserve solves ``dX = a p(u) X dt``, so it grows
geometrically and barrier hitting times and discounted dividend flows are
closed-form. A claim of size ``y`` removes the fraction ``a rho (y ∧ u)``
of the reserve; the reserve is ruined once it is at or below zero.

Every path draws from its own Philox stream keyed by ``(seed, path index)``,
so estimates are reproducible and independent of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .hjb import FeedbackPolicy
from .model import RETENTION_TOL, InadmissibleRetention, ModelParams, premium_rate

GROWTH_RTOL = 1e-12


class Dividend(NamedTuple):
    """A lump payment (``duration == 0``) or a uniform flow over ``[time, time + duration]``."""

    time: float
    amount: float
    duration: float = 0.0

    def discounted(self, r: float) -> float:
        if self.duration == 0.0:
            return math.exp(-r * self.time) * self.amount
        rate = self.amount / self.duration
        return rate * math.exp(-r * self.time) * -math.expm1(-r * self.duration) / r


class Event(NamedTuple):
    time: float
    kind: str  # growth | claim | dividend | ruin
    reserve_after: float
    amount: float


@dataclass
class PathRecord:
    jump_times: list[float] = field(default_factory=list)
    reserves_pre_jump: list[float] = field(default_factory=list)
    dividends: list[Dividend] = field(default_factory=list)
    ruin_time: float = math.inf
    discounted_dividends: float = 0.0
    final_reserve: float = 0.0
    events: list[Event] = field(default_factory=list)

    def recomputed_discounted(self, r: float) -> float:
        return math.fsum(d.discounted(r) for d in self.dividends)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    paths: int
    seed: int


@dataclass(frozen=True)
class ScriptedStrategy:
    """Open-loop strategy: constant retention and scheduled lump dividends.

    A scheduled lump larger than the reserve is cut to the reserve, which
    ruins the company at that instant.
    """

    retention: float
    lumps: tuple[tuple[float, float], ...] = ()

    def scaled(self, factor: float) -> "ScriptedStrategy":
        return ScriptedStrategy(self.retention, tuple((t, factor * a) for t, a in self.lumps))


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream ``index`` of the family keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def default_horizon(params: ModelParams) -> float:
    """Horizon beyond which discounting leaves at most a 1e-6 fraction of value."""
    return math.log(1e6) / params.r


class _ClaimStream:
    def __init__(self, params: ModelParams, rng: np.random.Generator):
        self.beta = params.beta
        self.cdf = params.claims.cdf
        self.sizes = params.claims.sizes
        self.rng = rng

    def next_gap(self) -> float:
        if self.beta <= 0:
            return math.inf
        return -math.log(1.0 - self.rng.random()) / self.beta

    def next_size(self) -> float:
        i = int(np.searchsorted(self.cdf, self.rng.random(), side="right"))
        return float(self.sizes[min(i, len(self.sizes) - 1)])


def draw_claims(params: ModelParams, horizon: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Claim epochs and sizes on ``[0, horizon]``."""
    stream = _ClaimStream(params, rng)
    times, sizes = [], []
    t = stream.next_gap()
    while t <= horizon:
        times.append(t)
        sizes.append(stream.next_size())
        t += stream.next_gap()
    return np.array(times), np.array(sizes)


def _check_retention(params: ModelParams, u: float) -> None:
    tol = RETENTION_TOL * params.u_max
    if u < params.u_min - tol or u > params.u_max + tol:
        raise InadmissibleRetention(f"retention {u!r} outside [{params.u_min!r}, {params.u_max!r}]")


def simulate_path(params: ModelParams, policy: FeedbackPolicy, x0: float, horizon: float,
                  rng: np.random.Generator, *, record_events: bool = False) -> PathRecord:
    """One reserve trajectory under a barrier/feedback policy, up to ``min(ruin, horizon)``.

    Retention is re-read from the policy at claim epochs and barrier hits and
    held fixed in between.
    """
    rec = PathRecord()
    r = params.r
    b = policy.barrier
    bound_rate = params.max_growth_rate
    t, X = 0.0, float(x0)
    emit = rec.events.append if record_events else (lambda e: None)

    def pay(div: Dividend, reserve_after: float):
        rec.dividends.append(div)
        emit(Event(div.time, "dividend", reserve_after, div.amount))

    if X <= 0:
        rec.ruin_time = 0.0
        emit(Event(0.0, "ruin", X, 0.0))
        return rec
    if X > b:
        pay(Dividend(0.0, X - b), b)
        X = b
        if X <= 0:
            rec.ruin_time = 0.0
            emit(Event(0.0, "ruin", X, 0.0))
            rec.discounted_dividends = rec.recomputed_discounted(r)
            return rec

    claims = _ClaimStream(params, rng)
    next_claim = claims.next_gap()
    while True:
        u = policy.retention(X)
        _check_retention(params, u)
        g = params.a * premium_rate(params, u, check=False)
        t_end = min(next_claim, horizon)
        if X >= b:
            t_hit = t
        elif g > 0 and math.isfinite(b):
            t_hit = t + math.log(b / X) / g
        else:
            t_hit = math.inf
        if t_hit < t_end:
            if t_hit > t:
                X = b
                t = t_hit
                emit(Event(t, "growth", X, 0.0))
                u = policy.retention(X)
                _check_retention(params, u)
                g = params.a * premium_rate(params, u, check=False)
            if g > 0 and t_end > t:
                pay(Dividend(t, g * b * (t_end - t), t_end - t), b)
        else:
            X = X * math.exp(g * (t_end - t))
        if X > x0 * math.exp(bound_rate * t_end) * (1 + GROWTH_RTOL):
            raise AssertionError("reserve exceeded the deterministic growth bound")
        t = t_end
        if next_claim > horizon:
            emit(Event(t, "growth", X, 0.0))
            break
        size = claims.next_size()
        rec.jump_times.append(t)
        rec.reserves_pre_jump.append(X)
        loss = X * params.jump_fraction(u, size)
        X = X - loss
        emit(Event(t, "claim", X, loss))
        if X <= 0:
            rec.ruin_time = t
            emit(Event(t, "ruin", X, 0.0))
            break
        next_claim = t + claims.next_gap()
    rec.final_reserve = X
    rec.discounted_dividends = rec.recomputed_discounted(r)
    return rec


def scripted_trajectory(params: ModelParams, strategy: ScriptedStrategy, x0: float,
                        claim_times: Sequence[float], claim_sizes: Sequence[float],
                        horizon: float, *, absorb: bool = True) -> tuple[np.ndarray, np.ndarray, PathRecord]:
    """Reserve after every event (claims, lumps, horizon) under an open-loop strategy.

    With ``absorb`` the reserve is zero from the ruin time on; otherwise the
    (nonpositive) value reached at ruin is held.
    """
    u = strategy.retention
    _check_retention(params, u)
    g = params.a * premium_rate(params, u, check=False)
    events = sorted([(float(t), 0, float(s)) for t, s in zip(claim_times, claim_sizes) if t <= horizon]
                    + [(float(t), 1, float(a)) for t, a in strategy.lumps if t <= horizon])
    events.append((horizon, 2, 0.0))
    rec = PathRecord()
    times, reserves = [], []
    t, X = 0.0, float(x0)
    ruined = X <= 0
    if ruined:
        rec.ruin_time = 0.0
    for te, kind, val in events:
        if not ruined:
            X = X * math.exp(g * (te - t))
            if kind == 0:
                rec.jump_times.append(te)
                rec.reserves_pre_jump.append(X)
                X = X - X * params.jump_fraction(u, val)
            elif kind == 1:
                amount = min(val, X)
                rec.dividends.append(Dividend(te, amount))
                X = X - amount
            if X <= 0:
                ruined = True
                rec.ruin_time = te
        t = te
        times.append(te)
        reserves.append(0.0 if ruined and absorb else X)
    rec.final_reserve = 0.0 if ruined and absorb else X
    rec.discounted_dividends = rec.recomputed_discounted(params.r)
    return np.array(times), np.array(reserves), rec


def _estimate(values: np.ndarray, seed: int) -> McEstimate:
    n = len(values)
    mean = float(np.sum(values) / n)
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return McEstimate(mean, se, n, seed)


def estimate_value(params: ModelParams, policy: FeedbackPolicy | ScriptedStrategy, x0: float,
                   paths: int, seed: int, horizon: float | None = None) -> McEstimate:
    """Mean discounted dividends over ``paths`` independent trajectories."""
    if paths < 2:
        raise ValueError("need at least two paths for a standard error")
    horizon = default_horizon(params) if horizon is None else horizon
    values = np.empty(paths)
    for k in range(paths):
        rng = path_rng(seed, k)
        if isinstance(policy, ScriptedStrategy):
            ct, cs = draw_claims(params, horizon, rng)
            values[k] = scripted_trajectory(params, policy, x0, ct, cs, horizon)[2].discounted_dividends
        else:
            values[k] = simulate_path(params, policy, x0, horizon, rng).discounted_dividends
    return _estimate(values, seed)


@dataclass(frozen=True)
class PairedResult:
    pairs: int
    violations: int
    raw_violations: int
    worst_gap: float


def paired_paths(params: ModelParams, strategy: ScriptedStrategy, x0: float, x0_prime: float,
                 pairs: int, seed: int, horizon: float | None = None) -> PairedResult:
    """Pathwise ordering of two reserves driven by the same claims and strategy.

    ``violations`` counts pairs where the smaller start ends up strictly above
    the larger one at some event time, comparing the ruin-absorbed processes.
    ``raw_violations`` compares the unabsorbed post-claim values, which can
    reverse when one claim takes both reserves below zero.
    """
    if not 0 <= x0 <= x0_prime:
        raise ValueError("need 0 <= x0 <= x0_prime")
    horizon = default_horizon(params) if horizon is None else horizon
    bad = raw_bad = 0
    worst = 0.0
    for k in range(pairs):
        ct, cs = draw_claims(params, horizon, path_rng(seed, k))
        _, lo, _ = scripted_trajectory(params, strategy, x0, ct, cs, horizon)
        _, hi, _ = scripted_trajectory(params, strategy, x0_prime, ct, cs, horizon)
        gap = lo - hi
        if np.any(gap > 0):
            bad += 1
            worst = max(worst, float(gap.max()))
        _, lo_raw, _ = scripted_trajectory(params, strategy, x0, ct, cs, horizon, absorb=False)
        _, hi_raw, _ = scripted_trajectory(params, strategy, x0_prime, ct, cs, horizon, absorb=False)
        raw_bad += bool(np.any(lo_raw > hi_raw))
    return PairedResult(pairs, bad, raw_bad, worst)


def scaled_paths(params: ModelParams, strategy: ScriptedStrategy, x: float, x_extra: float,
                 pairs: int, seed: int, horizon: float | None = None, rtol: float = 1e-12) -> PairedResult:
    """Scaling check: ``x/(x+x') X^{x+x', L} <= X^{x, x/(x+x') L}`` along shared paths.

    Ordering is checked up to relative roundoff ``rtol``.
    """
    horizon = default_horizon(params) if horizon is None else horizon
    lam = x / (x + x_extra)
    small = strategy.scaled(lam)
    bad = 0
    worst = 0.0
    for k in range(pairs):
        ct, cs = draw_claims(params, horizon, path_rng(seed, k))
        _, big, _ = scripted_trajectory(params, strategy, x + x_extra, ct, cs, horizon)
        _, mine, _ = scripted_trajectory(params, small, x, ct, cs, horizon)
        gap = lam * big - mine
        tol = rtol * np.maximum(1.0, np.abs(mine))
        if np.any(gap > tol):
            bad += 1
            worst = max(worst, float(gap.max()))
    return PairedResult(pairs, bad, 0, worst)


@dataclass(frozen=True)
class CounterexampleResult:
    r: float
    x0: float
    analytic: float
    estimate: McEstimate
    no_claim_probability: McEstimate


def counterexample_collective(r: float, paths: int, seed: int, *, x0: float = 1e-3,
                              k1: float = 0.2, k2: float = 0.25) -> CounterexampleResult:
    """Single-contract collective risk model with unit claims at rate one.

    Strategy: full retention and one unit dividend at ``t = 1`` if no claim
    has arrived by then. Its value ``e^{-(r+1)}`` does not vanish as the
    initial capital ``x0`` goes to zero.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    premium = k1 - k2 + (1 + k2) * 1.0
    disc = np.empty(paths)
    survived = np.empty(paths)
    for k in range(paths):
        rng = path_rng(seed, k)
        X, t, claims = x0, 0.0, 0
        ruined = False
        while True:
            gap = -math.log(1.0 - rng.random())
            if t + gap > 1.0:
                break
            t += gap
            claims += 1
            X = x0 + premium * t - claims
            if X <= 0:
                ruined = True
                break
        pays = claims == 0 and not ruined
        # reserve at t=1 is x0 + premium >= 1, so the unit payment is admissible
        disc[k] = math.exp(-r) if pays else 0.0
        survived[k] = 1.0 if claims == 0 else 0.0
    return CounterexampleResult(r, x0, math.exp(-(r + 1.0)), _estimate(disc, seed), _estimate(survived, seed))


def path_events_rows(path_id: int, rec: PathRecord) -> Iterable[tuple]:
    for e in rec.events:
        yield (path_id, e.time, e.kind, e.reserve_after, e.amount)
