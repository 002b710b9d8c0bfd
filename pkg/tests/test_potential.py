import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gamma_delta_from_roots, prototype_W
from shmeta.errors import ArgumentError, DomainError
from shmeta.potential import (PotentialSpec, eval_potential, linearization, multi_indices,
                              sternberg_check, validate_hypotheses)


@pytest.mark.parametrize("s,order,expected", [(1.0, 0, 0.0), (0.0, 0, 0.25), (1.0, 2, 2.0)])
def test_prototype_values(proto, s, order, expected):
    assert eval_potential(proto, s, order) == pytest.approx(expected, abs=1e-15)


def test_prototype_matches_closed_form(proto):
    s = np.linspace(-3, 3, 101)
    assert np.allclose(proto(s), prototype_W(s), atol=1e-14)
    assert np.allclose(proto(s, 1), s**3 - s, atol=1e-13)


def test_unsupported_derivative_order(proto):
    with pytest.raises(ArgumentError):
        eval_potential(proto, 0.5, 3)


def test_prototype_satisfies_all_hypotheses(proto):
    rep = validate_hypotheses(proto, 1000, 3)
    assert rep.passed
    assert rep["w4"].margin >= 0


def test_shifted_well_breaks_zero_at_one():
    shifted = PotentialSpec.polynomial([1.1, 0.0, -2.0, 0.0, 1.0])
    rep = validate_hypotheses(shifted, 1000, 3)
    assert not rep["w3"].passed
    assert not rep.passed


def test_growth_constant_bounded_by_sampled_infimum(proto):
    # dense-sampling oracle for inf W(s)/(s-1)^2 over [0, 3] minus s = 1
    s = np.linspace(0, 3, 300001)
    s = s[np.abs(s - 1) > 1e-6]
    inf = float(np.min(prototype_W(s) / (s - 1) ** 2))
    assert inf == pytest.approx(0.25, abs=1e-9)
    assert validate_hypotheses(PotentialSpec.prototype(c_w=0.25))["w4"].passed
    assert not validate_hypotheses(PotentialSpec.prototype(c_w=0.5))["w4"].passed


def test_validation_rejects_tiny_samples(proto):
    with pytest.raises(ArgumentError):
        validate_hypotheses(proto, 10)


def test_from_config_roundtrip():
    spec = PotentialSpec.from_config({"kind": "polynomial", "coeffs": [0.25, 0, -0.5, 0, 0.25]})
    assert np.allclose(spec(np.array([0.0, 2.0])), [0.25, 2.25])
    with pytest.raises(ArgumentError):
        PotentialSpec.from_config({"kind": "prototype", "bogus": 1})


@pytest.mark.parametrize("q", [0.0, 0.05, 0.1, 0.2])
def test_linearization_matches_numeric_roots(proto, q):
    c = linearization(proto, q)
    g, d = gamma_delta_from_roots(q)
    assert abs(c.gamma - g) < 1e-10
    assert abs(c.delta - d) < 1e-10


def test_linearization_zero_q_is_fourth_root_of_minus_one(proto):
    c = linearization(proto, 0.0)
    assert c.gamma == pytest.approx(math.sqrt(2) / 2, abs=1e-15)
    assert c.delta == pytest.approx(math.sqrt(2) / 2, abs=1e-15)
    for r in c.roots:
        assert abs(r**4 + 1) < 1e-14


def test_linearization_at_q_point_one(proto):
    c = linearization(proto, 0.1)
    assert c.gamma == pytest.approx(0.6892024, abs=5e-8)
    assert c.delta == pytest.approx(0.7245688, abs=5e-8)


def test_linearization_rejects_large_q(proto):
    with pytest.raises(DomainError, match="sqrt"):
        linearization(proto, 2.5)


def test_sternberg_at_zero_q(proto):
    rep = sternberg_check(linearization(proto, 0.0))
    assert rep.condition_holds
    assert rep.q_smoothness == 1
    assert rep.spectral_spread_plus == 1.0 and rep.spectral_spread_minus == 1.0


def test_sternberg_brute_force_at_q_point_one(proto):
    c = linearization(proto, 0.1)
    rep = sternberg_check(c)
    lam = np.array(c.roots)
    combos = list(multi_indices(4, 2))
    assert len(combos) == 10
    worst = min(abs(lam[j] - np.dot(m, lam)) for m in combos for j in range(4))
    assert rep.condition_holds and worst > 0.1


def test_sternberg_rejects_other_orders(proto):
    with pytest.raises(ArgumentError):
        sternberg_check(linearization(proto, 0.0), order=3)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-1.9, max_value=1.99))
def test_sternberg_holds_for_admissible_q(q):
    rep = sternberg_check(linearization(PotentialSpec.prototype(), q))
    assert rep.condition_holds
    assert rep.q_smoothness == 1
    assert rep.spectral_spread_plus == pytest.approx(1.0)
