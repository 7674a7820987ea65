import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from reinsdiv import FeedbackPolicy
from reinsdiv.model import InadmissibleRetention
from reinsdiv.simulate import (Dividend, ScriptedStrategy, counterexample_collective, default_horizon, draw_claims,
                               estimate_value, paired_paths, path_events_rows, path_rng, scaled_paths,
                               scripted_trajectory, simulate_path)


def test_dividend_discounting_matches_quadrature():
    assert Dividend(2.0, 3.0).discounted(0.1) == pytest.approx(3.0 * math.exp(-0.2))
    flow = Dividend(1.0, 4.0, 2.0)
    exact, _ = quad(lambda t: 2.0 * math.exp(-0.3 * t), 1.0, 3.0)
    assert flow.discounted(0.3) == pytest.approx(exact, rel=1e-12)


def test_no_claim_growth(fig1):
    times, reserves, rec = scripted_trajectory(fig1, ScriptedStrategy(1.0), 1.0, [], [], 1.0)
    assert reserves[-1] == pytest.approx(1.0335505392, abs=1e-10)
    assert reserves[-1] == pytest.approx(math.exp(0.033), rel=1e-14)
    assert rec.ruin_time == math.inf


def test_single_claim_hand_computed(two_atoms):
    p = two_atoms
    g = 1.25 * 1.1 * 0.5 * 0.4  # a (1 + k1) beta nu
    _, reserves, rec = scripted_trajectory(p, ScriptedStrategy(1.0), 1.0, [0.5], [1.0], 1.0)
    assert rec.reserves_pre_jump[0] == pytest.approx(math.exp(0.5 * g), rel=1e-14)
    assert reserves[0] == pytest.approx(math.exp(0.5 * g) * (1 - 1.25 * 0.5), rel=1e-14)
    assert reserves[-1] == pytest.approx(math.exp(g) * 0.375, rel=1e-14)


def test_lump_larger_than_reserve_ruins(two_atoms):
    _, reserves, rec = scripted_trajectory(two_atoms, ScriptedStrategy(1.0, ((0.1, 5.0),)), 1.0, [], [], 1.0)
    assert rec.ruin_time == 0.1
    assert rec.dividends[0].amount < 5.0
    assert reserves[-1] == 0.0


def test_barrier_flow_closed_form(two_atoms):
    p = two_atoms
    b, T = 2.0, 3.0
    g = p.growth_rate(1.0)
    policy = FeedbackPolicy.constant(1.0, b, p)
    for k in range(200):
        rec = simulate_path(p, policy, b, T, path_rng(7, k))
        if not rec.jump_times:
            break
    else:
        pytest.fail("no claim-free path found")
    assert rec.discounted_dividends == pytest.approx(g * b * -math.expm1(-p.r * T) / p.r, rel=1e-12)


def test_initial_excess_paid_at_once(two_atoms):
    policy = FeedbackPolicy.constant(1.0, 2.0, two_atoms)
    rec = simulate_path(two_atoms, policy, 3.0, 1.0, path_rng(0, 0), record_events=True)
    assert rec.dividends[0] == Dividend(0.0, 1.0)
    assert rec.events[0].kind == "dividend"
    rows = list(path_events_rows(4, rec))
    assert rows[0][:3] == (4, 0.0, "dividend")


def test_zero_reserve_is_ruined(fig1):
    rec = simulate_path(fig1, FeedbackPolicy.constant(1.0, 1.0, fig1), 0.0, 10.0, path_rng(0, 0))
    assert rec.ruin_time == 0.0 and rec.discounted_dividends == 0.0


def test_zero_barrier_pays_everything(fig1):
    est = estimate_value(fig1, FeedbackPolicy.constant(1.0, 0.0, fig1), 3.0, 50, 1)
    assert est.mean == 3.0 and est.std_error == 0.0


@pytest.mark.parametrize("x0", [1.0, 2.0])
def test_barrier_value_against_closed_form(fig1, x0):
    # every claim ruins (a rho = 25), so the value is the flow g b from the
    # hitting time of b up to an exponential claim time
    b, g = 2.0, fig1.growth_rate(1.0)
    rb = fig1.r + fig1.beta
    t_hit = math.log(b / x0) / g
    exact = math.exp(-rb * t_hit) * g * b / rb
    est = estimate_value(fig1, FeedbackPolicy.constant(1.0, b, fig1), x0, 20_000, 3)
    assert abs(est.mean - exact) <= 3 * est.std_error + 1e-6 * exact


def test_estimates_are_reproducible(two_atoms):
    pol = FeedbackPolicy.constant(1.0, 1.5, two_atoms)
    a = estimate_value(two_atoms, pol, 1.0, 300, 11)
    b = estimate_value(two_atoms, pol, 1.0, 300, 11)
    c = estimate_value(two_atoms, pol, 1.0, 200, 11)
    assert a == b
    assert a.mean != estimate_value(two_atoms, pol, 1.0, 300, 12).mean
    # the first 200 paths are the same streams regardless of the total count
    assert c.mean == pytest.approx(np.mean([simulate_path(two_atoms, pol, 1.0, default_horizon(two_atoms),
                                                          path_rng(11, k)).discounted_dividends
                                            for k in range(200)]), rel=1e-14)
    with pytest.raises(ValueError):
        estimate_value(two_atoms, pol, 1.0, 1, 0)


def test_claim_arrivals_are_poisson(two_atoms):
    counts = [len(draw_claims(two_atoms, 10.0, path_rng(5, k))[0]) for k in range(4000)]
    assert np.mean(counts) == pytest.approx(5.0, abs=4 * math.sqrt(5.0 / 4000))
    sizes = np.concatenate([draw_claims(two_atoms, 10.0, path_rng(6, k))[1] for k in range(1000)])
    assert set(np.unique(sizes)) <= {0.5, 1.0}
    frac = np.mean(sizes == 1.0)
    assert frac == pytest.approx(0.6, abs=4 * math.sqrt(0.24 / len(sizes)))


def test_inadmissible_retention_rejected(fig1):
    with pytest.raises(InadmissibleRetention):
        simulate_path(fig1, FeedbackPolicy.constant(0.1, 1.0, fig1), 0.5, 1.0, path_rng(0, 0))
    with pytest.raises(InadmissibleRetention):
        scripted_trajectory(fig1, ScriptedStrategy(1.5), 1.0, [], [], 1.0)


claim_paths = st.lists(st.tuples(st.floats(0.0, 20.0), st.sampled_from([0.5, 1.0])), max_size=15)


@settings(max_examples=200, deadline=None)
@given(claims=claim_paths, x0=st.floats(0.01, 5.0), extra=st.floats(0.0, 5.0), u=st.floats(0.56, 1.0),
       lumps=st.lists(st.tuples(st.floats(0.0, 20.0), st.floats(0.0, 2.0)), max_size=4))
def test_pathwise_comparison(two_atoms, claims, x0, extra, u, lumps):
    times, sizes = zip(*sorted(claims)) if claims else ((), ())
    strat = ScriptedStrategy(u, tuple(lumps))
    _, lo, _ = scripted_trajectory(two_atoms, strat, x0, times, sizes, 20.0)
    _, hi, _ = scripted_trajectory(two_atoms, strat, x0 + extra, times, sizes, 20.0)
    assert np.all(lo <= hi)


@settings(max_examples=200, deadline=None)
@given(claims=claim_paths, x=st.floats(0.01, 5.0), extra=st.floats(0.0, 5.0),
       lumps=st.lists(st.tuples(st.floats(0.0, 20.0), st.floats(0.0, 2.0)), max_size=4))
def test_pathwise_scaling(two_atoms, claims, x, extra, lumps):
    # linear dynamics: shrinking the start and the dividends by lam shrinks the path by lam
    times, sizes = zip(*sorted(claims)) if claims else ((), ())
    lam = x / (x + extra)
    strat = ScriptedStrategy(1.0, tuple(lumps))
    _, big, _ = scripted_trajectory(two_atoms, strat, x + extra, times, sizes, 20.0)
    _, small, _ = scripted_trajectory(two_atoms, strat.scaled(lam), x, times, sizes, 20.0)
    np.testing.assert_allclose(lam * big, small, rtol=1e-12, atol=1e-12)


def test_paired_and_scaled_paths(fig1, two_atoms):
    strat = ScriptedStrategy(1.0, ((1.0, 0.05), (2.0, 0.05)))
    res = paired_paths(two_atoms, strat, 1.0, 2.0, 300, 9)
    assert res.violations == 0 and res.worst_gap == 0.0
    assert paired_paths(fig1, strat, 1.0, 2.0, 300, 9).violations == 0
    assert scaled_paths(two_atoms, strat, 1.0, 1.0, 300, 9).violations == 0
    with pytest.raises(ValueError):
        paired_paths(fig1, strat, 2.0, 1.0, 10, 0)


def test_counterexample_small_run():
    res = counterexample_collective(0.07, 10_000, 5)
    assert res.analytic == pytest.approx(0.343009, abs=5e-7)
    assert abs(res.estimate.mean - res.analytic) <= 3 * res.estimate.std_error
    assert abs(res.no_claim_probability.mean - math.exp(-1)) <= 3 * res.no_claim_probability.std_error


def test_counterexample_large_discount():
    res = counterexample_collective(50.0, 1000, 5)
    assert res.analytic == pytest.approx(math.exp(-51.0))
    assert res.estimate.mean <= math.exp(-50.0)
    with pytest.raises(ValueError):
        counterexample_collective(0.0, 10, 0)


def test_default_horizon(fig1):
    assert math.exp(-fig1.r * default_horizon(fig1)) == pytest.approx(1e-6)
