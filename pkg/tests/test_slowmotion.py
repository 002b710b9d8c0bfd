import math

import numpy as np
import pytest

from shmeta.energy import EnergyParams
from shmeta.errors import ArgumentError, ComplianceError
from shmeta.field import Field, Grid
from shmeta.flow import SI, FlowConfig, FlowState, evolve
from shmeta.potential import PotentialSpec
from shmeta.slowmotion import (JumpFunction, SlowMotionConfig, default_grid_n, departure_time,
                               make_initial_data, observation_time, timescale_experiment,
                               track_interfaces)
from shmeta.slowmotion import _run_departure, reference_m1

PROTO = PotentialSpec.prototype()
TWO = JumpFunction((0.25, 0.75))


def test_jump_function_basics():
    v = JumpFunction((0.75, 0.25))
    assert v.jump_locations == (0.25, 0.75) and v.N == 2 and v.min_gap == pytest.approx(0.5)
    s = v.sample(Grid.torus(16)).samples
    assert np.array_equal(s, [1] * 4 + [-1] * 8 + [1] * 4)
    with pytest.raises(ArgumentError):
        JumpFunction((0.2, 0.4, 0.6))
    with pytest.raises(ArgumentError):
        JumpFunction((0.2, 0.2))


def test_config_validation():
    with pytest.raises(ArgumentError):
        SlowMotionConfig(delta=0.0)
    with pytest.raises(ArgumentError):
        SlowMotionConfig(h_kind="linear")
    with pytest.raises(ArgumentError):
        SlowMotionConfig(delta=0.1).check_against(TWO)
    assert SlowMotionConfig().threshold == 0.05


def test_default_grid_resolves_layers():
    assert default_grid_n(0.03) == 1024
    assert default_grid_n(0.5) == 256


def test_initial_data_near_jumps():
    u, rep = make_initial_data(TWO, EnergyParams(0.03, 0.0), PROTO, strict=False)
    assert rep.l1_to_jump < 6 * 0.03
    assert rep.zeros_within_2delta and len(rep.zeros) == 2


def test_initial_data_distance_shrinks_with_eps():
    d = [make_initial_data(TWO, EnergyParams(e, 0.0), PROTO, strict=False)[1].l1_to_jump
         for e in (0.06, 0.05, 0.04, 0.03)]
    assert all(a > b for a, b in zip(d, d[1:]))


def test_sign_flip_negates_initial_data():
    u, _ = make_initial_data(TWO, EnergyParams(0.05, 0.0), PROTO, strict=False)
    w, _ = make_initial_data(TWO.flipped(), EnergyParams(0.05, 0.0), PROTO, strict=False)
    assert np.array_equal(w.samples, -u.samples)


def test_strict_preparation_reports_measurements():
    with pytest.raises(ComplianceError) as info:
        make_initial_data(TWO, EnergyParams(0.05, 0.0), PROTO)
    rep = info.value.report
    assert rep.l1_to_jump > rep.delta and not rep.h1


def test_collapsed_preparation_has_no_zeros():
    four = JumpFunction((0.125, 0.375, 0.625, 0.875))
    _, rep = make_initial_data(four, EnergyParams(0.08, 0.0), PROTO, SlowMotionConfig(delta=0.03), strict=False)
    assert rep.zeros == [] and not rep.zeros_within_2delta


def test_tracking_constant_run():
    p = EnergyParams(0.05, 0.0)
    tr = evolve(FlowState.initial(Field.constant(Grid.torus(256), 1.0), p, PROTO), FlowConfig(0.5, 5.0, SI), p, PROTO)
    track = track_interfaces(tr)
    assert all(z == [] for z in track.zeros) and track.collisions == []
    assert departure_time(tr, tr.snapshot_fields()[0], 1e-12) is None


def test_symmetric_two_interface_run():
    p = EnergyParams(0.05, 0.0)
    u0, _ = make_initial_data(TWO, p, PROTO, strict=False)
    tr = evolve(FlowState.initial(u0, p, PROTO), FlowConfig(0.5, 50.0, SI, snapshot_stride=5), p, PROTO)
    track = track_interfaces(tr)
    counts = track.counts()
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    assert set(counts) == {2} and track.collisions == []
    h = u0.grid.h
    for z in track.zeros:
        assert abs(z[0] + z[1] - 1.0) < h


def test_departure_at_vanishing_threshold_is_first_motion():
    p = EnergyParams(0.05, 0.1)
    x = Grid.torus(256).x
    u0 = Field(Grid.torus(256), np.tanh(np.sin(2 * np.pi * x) / 0.1))
    tr = evolve(FlowState.initial(u0, p, PROTO), FlowConfig(0.01, 0.1, SI), p, PROTO)
    assert departure_time(tr, u0, 1e-300) == tr.snapshot_times[1]
    with pytest.raises(ArgumentError):
        departure_time(tr, u0, 0.0)


def test_lower_bound_target_grows_when_delta_halves():
    gamma, d = math.sqrt(2) / 2, 0.5
    assert (d - 4 * 0.025) * gamma > (d - 4 * 0.05) * gamma
    assert observation_time(0.05, d, gamma, 0.05) == pytest.approx(0.0025 * math.exp(0.3 * gamma / 0.05))


def test_budget_exhaustion_flags_partial_result():
    cfg = SlowMotionConfig(eps_values=(0.05, 0.06, 0.07), budget_seconds=1.0, t_start=10.0)
    r = timescale_experiment(TWO, cfg, PROTO)
    assert r.extra["partial"] and r.fit is None
    assert {e["reason"] for e in r.excluded} == {"budget"}
    assert r.expected_slope == pytest.approx(0.3 * math.sqrt(2) / 2)
    for row in r.rows:
        assert not row["departed_before_T_obs"]


@pytest.mark.xfail(strict=True, reason="equispaced layers lock in place; neither configuration departs in budget")
def test_smaller_gap_departs_sooner():
    eps = 0.06
    cfg = SlowMotionConfig(delta=0.03, eps_values=(eps,), budget_seconds=10.0, t_start=10.0)
    m1 = reference_m1(0.0, PROTO)
    two = _run_departure((TWO, eps, cfg, PROTO, m1))
    four = _run_departure((JumpFunction((0.125, 0.375, 0.625, 0.875)), eps, cfg, PROTO, m1))
    assert four["T_departure"] is not None
    assert two["T_departure"] is None or four["T_departure"] < two["T_departure"]
