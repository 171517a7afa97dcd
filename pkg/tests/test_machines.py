import cmath
import math

import pytest
from hypothesis import given, settings, strategies as st

from gfmswing.machines import (
    GfmParams,
    GfmState,
    SgParams,
    SgState,
    apc_step,
    current_phase,
    gfm_rates,
    limited_current,
    limiter_active,
    limiter_angle,
    limiter_resistance,
    power_limited,
    power_normal,
    rpc_step,
    sg_swing_step,
    unconstrained_current,
)
from gfmswing.network import solve_two_node
from gfmswing.units import InvalidInputError, PerUnitBase, polar

BASE = PerUnitBase()
DEG = math.pi / 180.0

# Table-style post-fault and during-fault operating points used throughout:
# x_l = 0.65 / 0.3389, equivalent source 1.0 / 0.2222, current cap 1.2.
POST = dict(v_ref=1.0, v_grid_eq=1.0, x_l=0.65)
FAULT = dict(v_ref=1.0, v_grid_eq=2.0 / 9.0, x_l=0.30 + 1.0 / (1 / 0.35 + 1 / 0.35 + 1 / 0.05))


def test_unconstrained_current_zero_difference():
    assert abs(unconstrained_current(0.0, 1.0, 1.0, 0.65)) == 0.0


def test_unconstrained_current_fault_point():
    i = unconstrained_current(40.54 * DEG, FAULT["v_ref"], FAULT["v_grid_eq"], FAULT["x_l"])
    assert abs(i) == pytest.approx(2.489, abs=2e-3)


def test_unconstrained_current_sqrt2():
    i = unconstrained_current(90.0 * DEG, 1.0, 1.0, 0.65)
    assert abs(i) == pytest.approx(math.sqrt(2.0) / 0.65, rel=1e-12)


def test_limiter_active_examples():
    assert not limiter_active(0.0, 1.0, 1.0, 0.65, 1.2)
    assert limiter_active(40.54 * DEG, FAULT["v_ref"], FAULT["v_grid_eq"], FAULT["x_l"], 1.2)
    assert not limiter_active(90.0 * DEG, 1.0, 1.0, 0.65, 2.2)


def test_limiter_resistance_examples():
    assert limiter_resistance(0.0, 1.0, 1.0, 0.65, 1.2) == 0.0
    # oracle: sqrt(|1<delta - 1|^2 / i_max^2 - x_l^2) by hand
    assert limiter_resistance(90.0 * DEG, 1.0, 1.0, 0.65, 1.2) == pytest.approx(
        math.sqrt(2.0 / 1.44 - 0.65**2), rel=1e-12
    )
    assert limiter_resistance(90.0 * DEG, 1.0, 1.0, 0.65, 1.2) == pytest.approx(0.98305, abs=1e-5)
    assert limiter_resistance(math.pi, 1.0, 1.0, 0.65, 1.2) == pytest.approx(
        math.sqrt(4.0 / 1.44 - 0.65**2), rel=1e-12
    )
    assert limiter_resistance(math.pi, 1.0, 1.0, 0.65, 1.2) == pytest.approx(1.5347, abs=1e-4)


def test_limited_current_worked_point():
    r_e = limiter_resistance(90.0 * DEG, 1.0, 1.0, 0.65, 1.2)
    i = limited_current(90.0 * DEG, 1.0, 1.0, 0.65, r_e)
    assert abs(i) == pytest.approx(1.2, abs=1e-9)
    assert math.degrees(cmath.phase(i)) == pytest.approx(101.527, abs=1e-3)


def test_limited_current_180():
    r_e = limiter_resistance(math.pi, 1.0, 1.0, 0.65, 1.2)
    assert abs(limited_current(math.pi, 1.0, 1.0, 0.65, r_e)) == pytest.approx(1.2, abs=1e-9)


def test_limited_current_fault_stage():
    r_e = limiter_resistance(90.0 * DEG, FAULT["v_ref"], FAULT["v_grid_eq"], FAULT["x_l"], 1.2)
    assert r_e == pytest.approx(0.78351, abs=1e-5)
    i = limited_current(90.0 * DEG, FAULT["v_ref"], FAULT["v_grid_eq"], FAULT["x_l"], r_e)
    assert abs(i) == pytest.approx(1.2, abs=1e-9)
    assert math.degrees(cmath.phase(i)) == pytest.approx(79.14, abs=5e-3)


def test_limited_current_contract_violation():
    # r_e = 0 claimed while the current would exceed the cap
    with pytest.raises(InvalidInputError):
        limited_current(90.0 * DEG, 1.0, 1.0, 0.65, 0.0, i_max=1.2)


def test_current_phase_examples():
    assert current_phase(1.0, 0.0) == 0.0
    assert current_phase(0.0, 1.0) == pytest.approx(math.pi / 2)
    assert math.degrees(current_phase(1.1757, 0.2398)) == pytest.approx(11.527, abs=2e-3)
    with pytest.raises(InvalidInputError):
        current_phase(0.0, 0.0)


def test_limiter_angle_examples():
    assert limiter_angle(0.0, 0.65) == 0.0
    assert limiter_angle(0.65, 0.65) == pytest.approx(math.pi / 4, rel=1e-12)
    assert math.degrees(limiter_angle(0.98305, 0.65)) == pytest.approx(56.527, abs=2e-3)


@given(st.floats(min_value=0.0, max_value=50.0), st.floats(min_value=1e-3, max_value=5.0))
def test_limiter_angle_range(r_e, x_l):
    a = limiter_angle(r_e, x_l)
    assert 0.0 <= a < math.pi / 2
    assert (a == 0.0) == (r_e == 0.0)


def test_power_limited_worked_points():
    r_e = limiter_resistance(90.0 * DEG, 1.0, 1.0, 0.65, 1.2)
    assert power_limited(90.0 * DEG, 1.0, 1.0, 0.65, r_e, 1.2) == pytest.approx(-0.2398, abs=1e-4)
    r_f = limiter_resistance(90.0 * DEG, FAULT["v_ref"], FAULT["v_grid_eq"], FAULT["x_l"], 1.2)
    assert power_limited(
        90.0 * DEG, FAULT["v_ref"], FAULT["v_grid_eq"], FAULT["x_l"], r_f, 1.2
    ) == pytest.approx(0.0503, abs=1e-4)
    # vanishing-limiter, aligned angles: no power
    assert power_limited(0.0, 1.0, 1.0, 0.65, 1e-12, 1.2) == pytest.approx(0.0, abs=1e-9)


def test_power_normal_examples():
    assert power_normal(0.0, 1.0, 1.0, 0.65) == 0.0
    assert power_normal(90.0 * DEG, 1.0, 1.0, 0.65) == pytest.approx(1.0 / 0.65, rel=1e-12)
    assert power_normal(40.54 * DEG, 1.0, 1.0, 0.65) == pytest.approx(1.0, abs=1e-4)


# --- invariants -----------------------------------------------------------------


@settings(max_examples=300)
@given(
    st.floats(min_value=1e-3, max_value=2 * math.pi - 1e-3),
    st.floats(min_value=0.8, max_value=1.2),
    st.floats(min_value=0.1, max_value=1.2),
    st.floats(min_value=0.1, max_value=1.5),
    st.floats(min_value=0.8, max_value=2.5),
)
def test_limited_magnitude_invariant(delta, v_ref, v_ge, x_l, i_max):
    r_e = limiter_resistance(delta, v_ref, v_ge, x_l, i_max)
    if r_e > 0.0:
        assert abs(limited_current(delta, v_ref, v_ge, x_l, r_e)) == pytest.approx(
            i_max, abs=1e-9
        )
        assert limiter_active(delta, v_ref, v_ge, x_l, i_max)
    else:
        assert not limiter_active(delta, v_ref, v_ge, x_l, i_max)


def test_current_angle_identity_full_circle():
    """Limited-current phase equals half the control angle plus the
    limiter angle, as a full angle (not just its tangent)."""
    worst = 0.0
    for k in range(1, 1000):
        d = k * 2 * math.pi / 1000
        r_e = limiter_resistance(d, 1.0, 1.0, 0.65, 1.2)
        if r_e <= 0.0:
            continue
        i = limited_current(d, 1.0, 1.0, 0.65, r_e)
        predicted = 0.5 * d + limiter_angle(r_e, 0.65)
        err = abs((cmath.phase(i) - predicted + math.pi) % (2 * math.pi) - math.pi)
        worst = max(worst, err)
    assert worst < 1e-9


def test_identity_at_limiter_boundary():
    # just inactive: pure reactance geometry gives exactly delta / 2
    d = 30.0 * DEG
    assert limiter_resistance(d, 1.0, 1.0, 0.65, 1.2) == 0.0
    i = unconstrained_current(d, 1.0, 1.0, 0.65)
    assert cmath.phase(i) == pytest.approx(d / 2, abs=1e-12)


def test_closed_form_matches_circuit_oracle():
    """Independent route: the closed-form limited power must equal the
    direct two-node phasor solution."""
    import random

    rng = random.Random(42)
    checked = 0
    while checked < 1000:
        d = rng.uniform(0, 2 * math.pi)
        x_l = rng.uniform(0.1, 1.5)
        v_ge = rng.uniform(0.1, 1.2)
        i_max = rng.uniform(0.8, 2.5)
        r_e = limiter_resistance(d, 1.0, v_ge, x_l, i_max)
        if r_e <= 0.0:
            continue
        checked += 1
        sol = solve_two_node(polar(1.0, d), complex(v_ge), x_l, r_e)
        assert power_limited(d, 1.0, v_ge, x_l, r_e, i_max) == pytest.approx(sol.p, abs=1e-9)


def test_limiter_resistance_continuity_and_zero_set():
    def max_step(n: int) -> float:
        vals = [limiter_resistance(k * 2 * math.pi / n, 1.0, 1.0, 0.65, 1.2) for k in range(n + 1)]
        return max(abs(b - a) for a, b in zip(vals, vals[1:]))

    for k in range(0, 3601):
        d = k * 2 * math.pi / 3600
        assert (limiter_resistance(d, 1.0, 1.0, 0.65, 1.2) > 0.0) == limiter_active(
            d, 1.0, 1.0, 0.65, 1.2
        )
    # square-root onset: continuous, so increments shrink under refinement
    assert max_step(14400) < max_step(3600) < max_step(900)
    assert max_step(14400) < 0.02


# --- state transitions ------------------------------------------------------------


def test_apc_step_equilibrium():
    s = GfmState(delta=0.5, v_cmd=1.0)
    p = GfmParams()
    assert apc_step(s, p.p_ref, 1e-3, p, BASE).delta == s.delta


def test_apc_step_rate():
    s = GfmState(delta=0.0, v_cmd=1.0)
    p = GfmParams(k_p=0.01)
    s2 = apc_step(s, p.p_ref - 0.5, 1e-3, p, BASE)
    assert s2.delta == pytest.approx(BASE.omega0 * 0.01 * 0.5 * 1e-3, rel=1e-12)
    assert s2.delta == pytest.approx(1.5708e-3, abs=1e-7)


def test_inertial_matches_noninertial_at_filter_steady_state():
    p_ni = GfmParams(inertial=False)
    p_in = GfmParams(inertial=True)
    s_ni = GfmState(delta=0.1, v_cmd=1.0)
    s_in = GfmState(delta=0.1, v_cmd=1.0, p_filt=0.7)
    # constant power, filter already at its input: identical angle steps
    for _ in range(100):
        s_ni = apc_step(s_ni, 0.7, 1e-3, p_ni, BASE)
        s_in = apc_step(s_in, 0.7, 1e-3, p_in, BASE)
    assert s_in.delta == pytest.approx(s_ni.delta, rel=1e-12)


def test_rpc_step_examples():
    p = GfmParams(k_q=0.05, q_ref=0.0)
    s = GfmState(delta=0.0, v_cmd=1.0)
    assert rpc_step(s, 0.0, 1e-3, p).v_cmd == pytest.approx(1.0)
    assert rpc_step(s, -0.2, 1e-3, p).v_cmd == pytest.approx(1.01, rel=1e-12)
    assert rpc_step(s, +0.2, 1e-3, p).v_cmd == pytest.approx(0.99, rel=1e-12)


def test_sg_swing_equilibrium_and_acceleration():
    p = SgParams(h=3.5, d=0.0, p_m=1.0)
    s = SgState(delta=0.3, omega_dev=0.0)
    assert sg_swing_step(s, 1.0, 1e-3, p, BASE) == s
    s2 = sg_swing_step(s, 0.0, 1e-6, p, BASE)
    assert (s2.omega_dev - s.omega_dev) / 1e-6 == pytest.approx(1.0 / 7.0, rel=1e-9)


def test_sg_damping_decreases_speed():
    p = SgParams(h=3.5, d=2.0, p_m=1.0)
    s = SgState(delta=0.3, omega_dev=0.05)
    for _ in range(50):
        s2 = sg_swing_step(s, p.p_m, 1e-3, p, BASE)
        assert s2.omega_dev < s.omega_dev
        s = s2


def test_noninertial_converges_to_droop_equilibrium():
    """Closed loop against the sine power curve: from anywhere inside
    (0, 90) degrees the angle settles at asin(p_ref x / (v v_g))."""
    p = GfmParams(k_p=0.01, p_ref=1.0)
    target = math.asin(1.0 * 0.65 / (1.0 * 1.0))
    for d0 in (5.0 * DEG, 30.0 * DEG, 80.0 * DEG):
        s = GfmState(delta=d0, v_cmd=1.0)
        for _ in range(40000):
            s = apc_step(s, power_normal(s.delta, 1.0, 1.0, 0.65), 5e-4, p, BASE)
        assert s.delta == pytest.approx(target, abs=1e-6)


def test_gfm_rates_shapes():
    p = GfmParams(inertial=True)
    assert len(gfm_rates((0.1, 0.5, 0.2), 0.9, 0.1, p, BASE)) == 3
    assert len(gfm_rates((0.1,), 0.9, 0.1, GfmParams(), BASE)) == 1


def test_param_validation():
    with pytest.raises(InvalidInputError):
        GfmParams(k_p=0.0)
    with pytest.raises(InvalidInputError):
        GfmParams(i_max=-1.0)
    with pytest.raises(InvalidInputError):
        GfmParams(inertial=True, w_p=0.0)
    with pytest.raises(InvalidInputError):
        SgParams(h=0.0)
    with pytest.raises(InvalidInputError):
        SgParams(d=-0.1)
