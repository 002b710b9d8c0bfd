import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import fd_gradient, random_band_limited, sine_energy_closed_form, tanh_profile_energy
from shmeta.energy import (EnergyParams, IntervalEnergy, UnderResolvedWarning, bad_set_measure,
                           energy_eps, energy_rescaled, interpolation_margin)
from shmeta.errors import ArgumentError, DomainError
from shmeta.field import Field, Grid
from shmeta.potential import PotentialSpec

SINE_ENERGY = 1.873713047023109  # eps = 0.05, q = 0.1, n = 4096
TANH_ENERGY_8192 = 0.8485259961195146  # rescaled, [-20, 20], q = 0, n = 8192


def sine(n):
    return Field.from_function(Grid.torus(n), lambda x: np.sin(2 * np.pi * x))


def test_params_validation(proto):
    with pytest.raises(ArgumentError):
        EnergyParams(0.0)
    with pytest.raises(DomainError):
        EnergyParams(0.05, 2.0).check(proto)
    assert EnergyParams(0.05).q == 0.1


@pytest.mark.parametrize("grid", [Grid.torus(256), Grid.interval(0, 1, 257)])
def test_well_has_zero_energy(proto, grid):
    e = energy_eps(Field.constant(grid, 1.0), EnergyParams(0.05, 0.3), proto)
    assert e.total == 0.0


def test_zero_field_energy(proto):
    e = energy_eps(Field.constant(Grid.torus(256), 0.0), EnergyParams(0.1, 0.0), proto)
    assert e.total == pytest.approx(2.5, abs=1e-14)


def test_sine_energy_regression(proto):
    p = EnergyParams(0.05, 0.1)
    values = [energy_eps(sine(n), p, proto).total for n in (4096, 8192, 16384)]
    assert abs(values[1] - values[2]) < 1e-10
    assert values[0] == pytest.approx(SINE_ENERGY, abs=1e-12)
    assert SINE_ENERGY == pytest.approx(sine_energy_closed_form(0.05, 0.1), abs=1e-12)


def test_breakdown_sums_to_total(proto):
    e = energy_eps(sine(512), EnergyParams(0.05, 0.1), proto)
    assert e.total == pytest.approx(e.potential_term + e.gradient_term + e.hessian_term)
    assert e.gradient_term < 0 < e.hessian_term


def test_under_resolved_warning(proto):
    with pytest.warns(UnderResolvedWarning):
        energy_eps(sine(64), EnergyParams(0.05, 0.1), proto)


def test_rescaled_energy_of_wells_and_zero(proto):
    g = Grid.interval(0, 1, 257)
    assert energy_rescaled(Field.constant(g, -1.0), 0.7, proto).total == 0.0
    assert energy_rescaled(Field.constant(g, 0.0), 0.0, proto).total == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(ArgumentError):
        energy_rescaled(sine(64), 0.0, proto)


def test_tanh_profile_energy(proto):
    def value(n):
        f = Field.from_function(Grid.interval(-20, 20, n), lambda x: np.tanh(x / math.sqrt(2)))
        return energy_rescaled(f, 0.0, proto).total

    v1, v2 = value(8192), value(16384)
    assert v1 == pytest.approx(TANH_ENERGY_8192, abs=1e-13)
    exact = tanh_profile_energy()
    # second-order quadrature: halving h divides the error by four
    assert (exact - v1) / (exact - v2) == pytest.approx(4.0, rel=0.01)
    assert abs(v1 - exact) < 5e-6


def test_interval_gradient_matches_finite_differences(proto):
    rng = np.random.default_rng(1)
    n, h = 24, 0.05
    e = IntervalEnergy(n, h, 0.1, 0.3, proto)
    u = np.tanh(np.linspace(-2, 2, n)) + 0.1 * rng.standard_normal(n)
    assert np.allclose(e.gradient(u), fd_gradient(e.value, u), rtol=1e-6, atol=1e-6)


def test_interval_hessian_matches_gradient_differences(proto):
    n, h = 16, 0.1
    e = IntervalEnergy(n, h, 0.2, 0.1, proto)
    u = np.cos(np.linspace(0, 3, n))
    bands = e.hessian_bands(u)
    H = np.zeros((n, n))
    for k in range(3):
        idx = np.arange(n - k)
        H[idx, idx + k] = bands[2 - k, k:]
        H[idx + k, idx] = bands[2 - k, k:]
    cols = np.column_stack([fd_gradient(lambda v: e.gradient(v)[i], u) for i in range(n)]).T
    assert np.allclose(H, cols, rtol=1e-5, atol=1e-5)


def test_margin_examples(proto):
    p = EnergyParams(0.05, 0.2)
    g = Grid.torus(256)
    assert interpolation_margin(Field.constant(g, 1.0), p, proto) == 0.0
    assert interpolation_margin(Field.constant(g, 0.0), p, proto) == pytest.approx(0.25)
    with pytest.raises(ArgumentError):
        interpolation_margin(Field.constant(Grid.interval(0, 0.01, 64), 0.0), p, proto)


def test_margin_nonnegative_on_random_band_limited_fields(proto):
    rng = np.random.default_rng(2024)
    p = EnergyParams(0.05, 0.2)
    g = Grid.torus(512)
    fields = [Field(g, random_band_limited(rng, 512, int(rng.integers(1, 40)))) for _ in range(1000)]
    margins = [interpolation_margin(f, p, proto) for f in fields]
    assert min(margins) >= 0
    # a nonnegative margin certifies a nonnegative energy for the same field
    assert all(energy_eps(f, p, proto).total >= 0 for f in fields)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 60), st.floats(0.1, 3.0), st.integers(0, 2**31))
def test_margin_nonnegative_property(modes, amp, seed):
    rng = np.random.default_rng(seed)
    f = Field(Grid.torus(512), random_band_limited(rng, 512, modes, amp))
    assert interpolation_margin(f, EnergyParams(0.05, 0.2), PotentialSpec.prototype()) >= 0


def test_bad_set_examples():
    g = Grid.interval(0, 0.5, 501)
    p = EnergyParams(0.02, 0.0)
    assert bad_set_measure(Field.constant(g, 1.0), p, 0.1) == 0.0
    assert bad_set_measure(Field.constant(g, 0.0), p, 0.1) == pytest.approx(0.5)
    with pytest.raises(ArgumentError):
        bad_set_measure(Field.constant(g, 0.0), p, 1.5)

