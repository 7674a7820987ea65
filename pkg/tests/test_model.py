import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reinsdiv import ClaimLaw, ModelParams, min_retention, premium_rate, solvency_coefficient, validate_assumptions
from reinsdiv.model import InadmissibleRetention, ParameterError, claim_function, warn_if_unscaled


# figure parameters: nu = rho * delta, a = 1 / (zeta0 nu)
def test_fig1_derived_constants(fig1):
    assert fig1.nu == pytest.approx(0.1, abs=1e-15)
    assert fig1.a == pytest.approx(250.0, rel=1e-14)
    assert fig1.u_min == pytest.approx(1.0 - 0.2 / 0.25, abs=1e-12)
    assert fig1.loadings_ordered


def test_fig1_premium_values(fig1):
    # full retention keeps the whole premium (1 + k1) beta nu
    assert premium_rate(fig1, 1.0) == pytest.approx(1.2 * 0.0011 * 0.1, rel=1e-14)
    # at u = 0.2 the insurer cedes (1 + k2) beta rho (1 - u)
    assert premium_rate(fig1, 0.2) == pytest.approx(1.32e-4 - 1.25 * 0.0011 * 0.1 * 0.8, rel=1e-12)
    assert fig1.growth_rate(1.0) == pytest.approx(0.033, rel=1e-13)


def test_fig2_minimal_retention_clamped(fig2):
    assert fig2.u_min == 0.0
    assert fig2.u_min_raw == pytest.approx(1.0 - 0.2 / 0.19, rel=1e-12)
    assert not fig2.loadings_ordered
    assert premium_rate(fig2, 0.0) == pytest.approx(1.2 * 0.0011 * 0.1 - 1.19 * 0.0011 * 0.1, rel=1e-10)


def test_two_atom_minimal_retention(two_atoms):
    # on [0.5, 1] the hedge gap over beta rho is -0.1 + 0.18 u
    assert two_atoms.u_min == pytest.approx(0.1 / 0.18, abs=1e-12)
    assert two_atoms.nu == pytest.approx(0.5 * (0.4 * 0.5 + 0.6 * 1.0), rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(k1=st.floats(0.0, 2.0), k2=st.floats(0.01, 3.0), delta=st.floats(0.1, 10.0))
def test_dirac_min_retention_matches_closed_form(k1, k2, delta):
    u, raw = min_retention(ClaimLaw.dirac(delta), k1, k2)
    expected = delta * (1.0 - k1 / k2)
    assert raw == pytest.approx(min(expected, 0.0) if expected <= 0 else expected, abs=1e-12 * delta)
    assert u == pytest.approx(max(expected, 0.0), abs=1e-12 * delta)


@settings(max_examples=100, deadline=None)
@given(u1=st.floats(0.2, 1.0), u2=st.floats(0.2, 1.0))
def test_premium_nondecreasing_in_retention(u1, u2):
    p = ModelParams.dirac(0.2, 0.25, 0.0011, 0.04, 0.07, 0.1)
    lo, hi = sorted((u1, u2))
    assert premium_rate(p, lo) <= premium_rate(p, hi)


def test_premium_vectorized_and_rejects_low_retention(fig1):
    u = np.array([0.2, 0.6, 1.0])
    np.testing.assert_allclose(premium_rate(fig1, u), [premium_rate(fig1, v) for v in u], rtol=0, atol=0)
    with pytest.raises(InadmissibleRetention):
        premium_rate(fig1, 0.1)
    assert premium_rate(fig1, 0.1, check=False) < premium_rate(fig1, 0.2)


def test_retention_above_max_claim_is_full_retention(fig1):
    assert premium_rate(fig1, 3.0) == premium_rate(fig1, 1.0)


def test_jump_fraction(fig1):
    assert fig1.jump_fraction(0.5, 1.0) == pytest.approx(250 * 0.1 * 0.5)
    assert fig1.jump_fraction(1.0, 0.3) == pytest.approx(250 * 0.1 * 0.3)
    assert claim_function(0.1, 3.0, 2.0) == pytest.approx(0.6)


def test_solvency_coefficient():
    assert solvency_coefficient(0.04, 0.1) == pytest.approx(250.0)
    with pytest.raises(ParameterError):
        solvency_coefficient(0.0, 0.1)


def test_validate_assumptions(fig1, fig2, two_atoms):
    rep = validate_assumptions(fig1)
    assert rep.A1_ok and rep.A2_ok and rep.solvable
    assert rep.a2_threshold == pytest.approx(2 * 1.2 * 0.0011 / 0.04)
    assert not rep.lipschitz_scale_ok
    assert any("ruin" in m for m in rep.messages)
    assert any("k1" in m for m in validate_assumptions(fig2).messages)
    assert validate_assumptions(two_atoms).messages == []
    bad = validate_assumptions(fig1.with_(r=0.05))
    assert not bad.A2_ok and bad.messages[0].startswith("A2")


def test_unscaled_warning(fig1, two_atoms):
    with pytest.warns(UserWarning, match="ruin"):
        warn_if_unscaled(fig1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        warn_if_unscaled(two_atoms)


@pytest.mark.parametrize("atoms", [
    (),
    ((0.0, 1.0),),
    ((1.0, 0.5), (0.5, 0.5)),
    ((1.0, 0.5), (2.0, 0.4)),
    ((1.0, 1.2), (2.0, -0.2)),
])
def test_claim_law_validation(atoms):
    with pytest.raises(ParameterError):
        ClaimLaw(atoms)


@pytest.mark.parametrize("field,value", [("k1", -0.1), ("k2", -1.0), ("beta", -1e-3), ("zeta0", 0.0),
                                         ("r", 0.0), ("rho", 1.5), ("rho", 0.0)])
def test_parameter_domain(fig1, field, value):
    with pytest.raises(ParameterError):
        fig1.with_(**{field: value})


def test_zero_intensity_allowed(fig1):
    p = fig1.with_(beta=0.0)
    assert premium_rate(p, 1.0) == 0.0
    assert p.max_growth_rate == 0.0


def test_claim_law_sampling():
    law = ClaimLaw(((0.5, 0.25), (1.0, 0.75)))
    assert law.mean() == pytest.approx(0.875)
    assert law.sample_index(0.0) == 0
    assert law.sample_index(0.2499) == 0
    assert law.sample_index(0.25) == 1
    assert law.sample_index(0.999999) == 1
    assert law.cdf[-1] == 1.0
    assert law.expect(math.sqrt) == pytest.approx(0.25 * math.sqrt(0.5) + 0.75)
