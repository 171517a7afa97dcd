"""Source models: droop grid-forming converter (with and without emulated
inertia), the circular current limiter equivalent, and a classical
synchronous generator.

The limiter is modeled quasi-statically: whenever the unconstrained current
demand exceeds the cap, the converter behaves as its commanded voltage
behind a virtual resistance chosen so the current magnitude lands exactly
on the cap. All angles are radians, all electrical quantities per unit.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

from .units import InvalidInputError, PerUnitBase, Phasor, polar


@dataclass(frozen=True)
class GfmParams:
    """Grid-forming converter control parameters.

    ``droop gain`` k_p is interpreted as a per-unit frequency droop: the
    control angle advances at omega0 * k_p * (p_ref - p) rad/s. The
    inertial variant low-pass filters the power feedback (w_p, w_q rad/s).
    k_pi and sigma document the inner loop; the quasi-static equivalent
    does not depend on them.
    """

    k_p: float = 0.01
    k_q: float = 0.05
    p_ref: float = 1.0
    q_ref: float = 0.0
    v_mref: float = 1.0
    i_max: float = 1.2
    inertial: bool = False
    # 5 rad/s emulates enough inertia for post-fault loss of synchronism;
    # faster filters collapse to quasi-static (non-inertial-like) behavior.
    w_p: float = 5.0
    w_q: float = 5.0
    k_pi: float = 1.0
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.k_p <= 0:
            raise InvalidInputError("k_p must be positive")
        if self.i_max <= 0:
            raise InvalidInputError("i_max must be positive")
        if self.v_mref <= 0:
            raise InvalidInputError("v_mref must be positive")
        if self.inertial and (self.w_p <= 0 or self.w_q <= 0):
            raise InvalidInputError("LPF cutoffs must be positive for the inertial variant")


@dataclass(frozen=True)
class GfmState:
    """Converter control state. ``delta`` is the control angle relative to
    the grid reference and is never wrapped (its divergence flags loss of
    synchronism). ``current_limited`` mirrors the sign of the virtual
    resistance at the last network solve."""

    delta: float
    v_cmd: float
    p_filt: float = 0.0
    q_filt: float = 0.0
    current_limited: bool = False

    def __post_init__(self) -> None:
        if self.v_cmd <= 0:
            raise InvalidInputError("commanded voltage must be positive")


@dataclass(frozen=True)
class SgParams:
    """Classical synchronous machine: constant EMF behind transient
    reactance plus the swing equation."""

    h: float = 3.5
    d: float = 2.0
    x_internal: float = 0.30
    e_mag: float | None = None  # None: from pre-fault load flow at p_m
    p_m: float = 1.0

    def __post_init__(self) -> None:
        if self.h <= 0:
            raise InvalidInputError("inertia constant must be positive")
        if self.d < 0:
            raise InvalidInputError("damping must be non-negative")
        if self.x_internal <= 0:
            raise InvalidInputError("internal reactance must be positive")


@dataclass(frozen=True)
class SgState:
    delta: float
    omega_dev: float = 0.0  # speed deviation, pu


# --- circular current limiter ------------------------------------------------


def unconstrained_current(delta: float, v_ref: float, v_grid_eq: float, x_l: float) -> Phasor:
    """Current the converter would drive with no limiter (pu)."""
    if x_l <= 0:
        raise InvalidInputError("x_l must be positive")
    return (polar(v_ref, delta) - v_grid_eq) / complex(0.0, x_l)


def _demand_sq(delta: float, v_ref: float, v_grid_eq: float) -> float:
    # |v_ref<delta - v_grid_eq|^2 without trig round-trip
    return v_ref * v_ref - 2.0 * v_ref * v_grid_eq * math.cos(delta) + v_grid_eq * v_grid_eq


def limiter_active(delta: float, v_ref: float, v_grid_eq: float, x_l: float, i_max: float) -> bool:
    """True when the unconstrained current magnitude exceeds the cap."""
    if x_l <= 0:
        raise InvalidInputError("x_l must be positive")
    return _demand_sq(delta, v_ref, v_grid_eq) / (i_max * i_max) > x_l * x_l


def limiter_resistance(
    delta: float, v_ref: float, v_grid_eq: float, x_l: float, i_max: float
) -> float:
    """Virtual series resistance that caps the current magnitude at i_max.

    Zero whenever the limiter is inactive; continuous in delta.
    """
    if x_l <= 0 or i_max <= 0:
        raise InvalidInputError("x_l and i_max must be positive")
    disc = _demand_sq(delta, v_ref, v_grid_eq) / (i_max * i_max) - x_l * x_l
    return math.sqrt(disc) if disc > 0.0 else 0.0


def limited_current(
    delta: float, v_ref: float, v_grid_eq: float, x_l: float, r_e: float, i_max: float | None = None
) -> Phasor:
    """Converter current with the limiter engaged: magnitude pinned at the
    cap by construction of ``r_e``."""
    if x_l <= 0:
        raise InvalidInputError("x_l must be positive")
    i = (polar(v_ref, delta) - v_grid_eq) / complex(r_e, x_l)
    if r_e <= 0.0 and i_max is not None and abs(i) > i_max * (1.0 + 1e-9):
        raise InvalidInputError(
            f"limited_current called with r_e=0 while |i|={abs(i):.6f} exceeds i_max={i_max}"
        )
    return i


def current_phase(i_gd: float, i_gq: float) -> float:
    """Current phase angle in the control dq frame, four-quadrant."""
    if i_gd == 0.0 and i_gq == 0.0:
        raise InvalidInputError("current phase undefined for zero current")
    return math.atan2(i_gq, i_gd)


def limiter_angle(r_e: float, x_l: float) -> float:
    """Virtual angle of the limiter branch: atan2(r_e, x_l) in [0, pi/2).

    Zero exactly when the limiter is inactive; with the limiter engaged the
    current angle equals delta/2 plus this angle.
    """
    if x_l <= 0:
        raise InvalidInputError("x_l must be positive")
    if r_e < 0:
        raise InvalidInputError("r_e must be non-negative")
    return math.atan2(r_e, x_l)


def power_limited(
    delta: float, v_ref: float, v_grid_eq: float, x_l: float, r_e: float, i_max: float
) -> float:
    """Active power delivered by the converter source in limited mode,
    net of the virtual-resistance term (closed form)."""
    z2 = r_e * r_e + x_l * x_l
    num = r_e * (v_ref * v_ref - v_ref * v_grid_eq * math.cos(delta))
    num += x_l * v_ref * v_grid_eq * math.sin(delta)
    return num / z2 - i_max * i_max * r_e


def power_normal(delta: float, v_src: float, v_grid_eq: float, x_total: float) -> float:
    """Active power over a purely reactive tie (voltage-control mode)."""
    if x_total <= 0:
        raise InvalidInputError("x_total must be positive")
    return v_src * v_grid_eq * math.sin(delta) / x_total


# --- state transitions --------------------------------------------------------


def apc_step(state: GfmState, p_e: float, dt: float, params: GfmParams, base: PerUnitBase) -> GfmState:
    """Advance the active-power loop by one explicit Euler step.

    The engine integrates with RK4 by calling the rate functions below;
    this single-step form is the reference semantics.
    """
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    if params.inertial:
        p_filt = state.p_filt + params.w_p * (p_e - state.p_filt) * dt
        delta = state.delta + base.omega0 * params.k_p * (params.p_ref - p_filt) * dt
        return replace(state, delta=delta, p_filt=p_filt)
    delta = state.delta + base.omega0 * params.k_p * (params.p_ref - p_e) * dt
    return replace(state, delta=delta)


def rpc_step(state: GfmState, q_e: float, dt: float, params: GfmParams) -> GfmState:
    """Advance the reactive/voltage loop: algebraic droop for the
    non-inertial variant, filtered droop for the inertial one."""
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    if params.inertial:
        q_filt = state.q_filt + params.w_q * (q_e - state.q_filt) * dt
        return replace(state, q_filt=q_filt, v_cmd=params.v_mref + params.k_q * (params.q_ref - q_filt))
    return replace(state, v_cmd=params.v_mref + params.k_q * (params.q_ref - q_e))


def gfm_rates(state_vec: tuple[float, ...], p_e: float, q_e: float, params: GfmParams, base: PerUnitBase) -> tuple[float, ...]:
    """Time derivatives of the converter state vector.

    Non-inertial: (delta,) -> (ddelta,). Inertial: (delta, p_filt, q_filt).
    """
    if params.inertial:
        delta, p_filt, q_filt = state_vec
        return (
            base.omega0 * params.k_p * (params.p_ref - p_filt),
            params.w_p * (p_e - p_filt),
            params.w_q * (q_e - q_filt),
        )
    return (base.omega0 * params.k_p * (params.p_ref - p_e),)


def sg_swing_step(state: SgState, p_e: float, dt: float, params: SgParams, base: PerUnitBase) -> SgState:
    """One explicit Euler step of the classical swing equation."""
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    ddelta, domega = sg_rates((state.delta, state.omega_dev), p_e, params, base)
    return SgState(delta=state.delta + ddelta * dt, omega_dev=state.omega_dev + domega * dt)


def sg_rates(state_vec: tuple[float, float], p_e: float, params: SgParams, base: PerUnitBase) -> tuple[float, float]:
    """d(delta)/dt = omega0 * omega_dev; 2H d(omega_dev)/dt = p_m - p_e - D omega_dev."""
    _, omega_dev = state_vec
    return (
        base.omega0 * omega_dev,
        (params.p_m - p_e - params.d * omega_dev) / (2.0 * params.h),
    )
