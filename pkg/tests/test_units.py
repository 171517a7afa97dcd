import math

import pytest
from hypothesis import given, strategies as st

from gfmswing.units import (
    InvalidInputError,
    PerUnitBase,
    angle,
    angle_diff,
    from_pu,
    parallel_reactance,
    polar,
    pu_convert,
    wrap_angle,
)

BASE = PerUnitBase(s_base_mw=250.0, v_base_kv=20.0, f0_hz=50.0)


def test_base_derived_quantities():
    assert BASE.z_base_ohm == pytest.approx(1.6, abs=1e-12)
    assert BASE.omega0 == pytest.approx(2 * math.pi * 50.0, abs=1e-9)


def test_base_rejects_nonpositive():
    with pytest.raises(InvalidInputError):
        PerUnitBase(s_base_mw=-1.0)


def test_pu_convert_examples():
    assert pu_convert(1.6, BASE, "impedance") == pytest.approx(1.0, abs=1e-12)
    assert pu_convert(0.0, BASE, "impedance") == 0.0
    assert pu_convert(0.95, BASE, "impedance") == pytest.approx(0.59375, abs=1e-12)
    assert pu_convert(250.0, BASE, "power") == pytest.approx(1.0, abs=1e-12)
    assert pu_convert(20.0, BASE, "voltage") == pytest.approx(1.0, abs=1e-12)


def test_pu_convert_unknown_kind():
    with pytest.raises(InvalidInputError):
        pu_convert(1.0, BASE, "current")
    with pytest.raises(InvalidInputError):
        from_pu(1.0, BASE, "frequency")


@given(
    st.floats(min_value=1e-6, max_value=1e6),
    st.sampled_from(["impedance", "power", "voltage"]),
)
def test_pu_round_trip(value, kind):
    assert from_pu(pu_convert(value, BASE, kind), BASE, kind) == pytest.approx(
        value, rel=1e-12
    )


def test_parallel_reactance_examples():
    assert parallel_reactance([0.35]) == pytest.approx(0.35, abs=1e-15)
    assert parallel_reactance([0.35, 0.35]) == pytest.approx(0.175, abs=1e-15)
    assert parallel_reactance([0.35, 0.35, 0.05]) == pytest.approx(0.038889, abs=1e-6)


def test_parallel_reactance_errors():
    with pytest.raises(InvalidInputError):
        parallel_reactance([])
    with pytest.raises(InvalidInputError):
        parallel_reactance([0.35, -0.1])
    with pytest.raises(InvalidInputError):
        parallel_reactance([0.0])


@given(st.lists(st.floats(min_value=1e-3, max_value=1e3), min_size=1, max_size=6))
def test_parallel_reactance_below_min(xs):
    assert parallel_reactance(xs) <= min(xs) * (1 + 1e-12)


@given(st.lists(st.floats(min_value=1e-3, max_value=1e3), min_size=2, max_size=6))
def test_parallel_reactance_commutative(xs):
    assert parallel_reactance(xs) == pytest.approx(
        parallel_reactance(list(reversed(xs))), rel=1e-12
    )


@given(
    st.floats(min_value=1e-6, max_value=1e6),
    st.floats(min_value=-math.pi + 1e-9, max_value=math.pi),
)
def test_polar_round_trip(mag, ang):
    z = polar(mag, ang)
    assert abs(z) == pytest.approx(mag, rel=1e-12)
    assert angle_diff(angle(z), ang) == pytest.approx(0.0, abs=1e-9 * max(1.0, abs(ang)))


@given(st.floats(min_value=-100.0, max_value=100.0))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    # wrapped value differs from the input by an exact multiple of 2 pi
    k = (a - w) / (2 * math.pi)
    assert k == pytest.approx(round(k), abs=1e-6)


def test_angle_negative_real_axis():
    assert angle(complex(-1.0, 0.0)) == pytest.approx(math.pi)
