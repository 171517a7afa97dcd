"""Fixed-step time-domain engine.

One run integrates a single machine against the per-stage Thevenin
equivalent with classic RK4, re-solving the algebraic network at every
stage evaluation, and records one trace sample per step. Runs are
deterministic: same scenario, same bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

from . import relay as relay_mod
from .machines import (
    GfmParams,
    GfmState,
    SgParams,
    SgState,
    gfm_rates,
    sg_rates,
)
from .network import (
    ApplyFault,
    ClearFault,
    ConfigurationError,
    NetworkParams,
    SetPoint,
    SimEvent,
    Stage,
    StageEquivalent,
    TwoNodeSolution,
    solve_two_node,
    stage_equivalent,
)
from .units import PerUnitBase, Phasor, polar, wrap_angle


class SimulationFault(RuntimeError):
    """Raised when the network solve fails mid-run; carries the timestamp."""


@dataclass(frozen=True, slots=True)
class TraceRecord:
    """One timestep sample as seen at the machine and at the line-1 relay."""

    t: float
    v_pcc: Phasor
    i_g: Phasor
    p_e: float
    q_e: float
    delta_ctrl: float  # unwrapped control/rotor angle, rad
    delta_pcc: float  # physical terminal-bus angle vs grid, wrapped, rad
    phi: float
    r_e: float
    current_limited: bool
    z_pu: Phasor | None
    z_ohm: Phasor | None


@dataclass
class RunResult:
    trace: list[TraceRecord]
    relay_log: "relay_mod.RelayLog | None" = None
    verdict: object | None = None
    dt: float = 0.0
    t_fault: float | None = None
    t_clear: float | None = None


CSV_COLUMNS = (
    "t",
    "v_pcc_re",
    "v_pcc_im",
    "i_g_re",
    "i_g_im",
    "p_e",
    "q_e",
    "delta_ctrl_deg_unwrapped",
    "delta_pcc_deg",
    "phi_deg",
    "r_e",
    "mode",
    "z_re_ohm",
    "z_im_ohm",
)


def trace_to_csv(trace: list[TraceRecord]) -> str:
    """Render a trace with the fixed column schema (stable golden format)."""
    deg = 180.0 / math.pi
    lines = [",".join(CSV_COLUMNS)]
    for r in trace:
        z_re = f"{r.z_ohm.real:.12g}" if r.z_ohm is not None else ""
        z_im = f"{r.z_ohm.imag:.12g}" if r.z_ohm is not None else ""
        lines.append(
            ",".join(
                (
                    f"{r.t:.12g}",
                    f"{r.v_pcc.real:.12g}",
                    f"{r.v_pcc.imag:.12g}",
                    f"{r.i_g.real:.12g}",
                    f"{r.i_g.imag:.12g}",
                    f"{r.p_e:.12g}",
                    f"{r.q_e:.12g}",
                    f"{r.delta_ctrl * deg:.12g}",
                    f"{r.delta_pcc * deg:.12g}",
                    f"{r.phi * deg:.12g}",
                    f"{r.r_e:.12g}",
                    "1" if r.current_limited else "0",
                    z_re,
                    z_im,
                )
            )
        )
    return "\n".join(lines) + "\n"


def series_limiter_resistance(dv_mag_sq: float, r_series: float, x_series: float, i_max: float) -> float:
    """Virtual resistance for a general (r + jx) tie; reduces to the pure
    reactance form when r_series is zero."""
    disc = dv_mag_sq / (i_max * i_max) - x_series * x_series
    if disc <= r_series * r_series:
        return 0.0
    return math.sqrt(disc) - r_series


def _gfm_solve(
    delta: float, v_cmd: float, eq: StageEquivalent, params: GfmParams, x_s: float
) -> tuple[TwoNodeSolution, float, float]:
    """Network solve for the converter; returns the solution, the limiter
    resistance, and the reactive power measured at the terminal bus behind
    x_s (where the droop sensors sit; active power is node-independent)."""
    src = polar(v_cmd, delta)
    dv = src - eq.v_grid_eq
    r_e = series_limiter_resistance(dv.real * dv.real + dv.imag * dv.imag, eq.r_l, eq.x_l, params.i_max)
    sol = solve_two_node(src, eq.v_grid_eq, eq.x_l, r_e, eq.r_l)
    q_pcc = sol.q - x_s * (sol.i.real * sol.i.real + sol.i.imag * sol.i.imag)
    return sol, r_e, q_pcc


def _sg_solve(delta: float, e_mag: float, eq: StageEquivalent) -> TwoNodeSolution:
    return solve_two_node(polar(e_mag, delta), eq.v_grid_eq, eq.x_l, 0.0, eq.r_l)


# --- initialization -------------------------------------------------------------


def _bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-15) -> float:
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise ConfigurationError("equilibrium bracket does not change sign")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid
        if flo * fm < 0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def _first_crossing(f: Callable[[float], float], lo: float, hi: float, steps: int = 360) -> float:
    """First zero of f on [lo, hi], scanning then bisecting. The power-angle
    curve is not monotone once the limiter engages, so a plain endpoint
    bracket is not enough."""
    h = (hi - lo) / steps
    prev_x, prev_f = lo, f(lo)
    if prev_f == 0.0:
        return lo
    for k in range(1, steps + 1):
        x = lo + k * h
        fx = f(x)
        if prev_f * fx <= 0.0:
            return _bisect(f, prev_x, x)
        prev_x, prev_f = x, fx
    raise ConfigurationError("equilibrium bracket does not change sign")


def init_gfm(params: GfmParams, eq: StageEquivalent, x_s: float) -> GfmState:
    """Pre-fault equilibrium: angle from the power balance, commanded
    voltage from the reactive droop, solved jointly to round-off."""
    v_cmd = params.v_mref
    delta = 0.0
    for _ in range(200):
        def p_err(d: float, v: float = v_cmd) -> float:
            sol, _, _ = _gfm_solve(d, v, eq, params, x_s)
            return sol.p - params.p_ref

        try:
            delta = _first_crossing(p_err, 0.0, math.pi / 2.0)
        except ConfigurationError as exc:
            raise ConfigurationError(
                f"no pre-fault equilibrium: p_ref={params.p_ref} unreachable (check x_g1/x_g2/grid_voltage)"
            ) from exc
        sol, _, q_pcc = _gfm_solve(delta, v_cmd, eq, params, x_s)
        v_next = params.v_mref + params.k_q * (params.q_ref - q_pcc)
        if abs(v_next - v_cmd) < 1e-15:
            v_cmd = v_next
            break
        v_cmd = v_next
    sol, r_e, q_pcc = _gfm_solve(delta, v_cmd, eq, params, x_s)
    return GfmState(
        delta=delta,
        v_cmd=v_cmd,
        p_filt=sol.p,
        q_filt=q_pcc,
        current_limited=r_e > 0.0,
    )


def init_sg(params: SgParams, eq: StageEquivalent, v_g: float) -> tuple[SgParams, SgState]:
    """Pre-fault equilibrium. With e_mag unset, the EMF comes from a load
    flow holding the terminal bus at 1.0 pu while delivering p_m."""
    if params.e_mag is None:
        z_net = eq.z_l - complex(0.0, params.x_internal)
        if z_net.imag <= 0:
            raise ConfigurationError("network reactance must exceed the machine internal reactance")

        def p_err(theta: float) -> float:
            v_pcc = polar(1.0, theta)
            i = (v_pcc - eq.v_grid_eq) / z_net
            return (v_pcc * i.conjugate()).real - params.p_m

        try:
            theta = _first_crossing(p_err, 0.0, math.pi / 2.0)
        except ConfigurationError as exc:
            raise ConfigurationError(
                f"no SG pre-fault equilibrium: p_m={params.p_m} unreachable on the pre-fault network"
            ) from exc
        v_pcc = polar(1.0, theta)
        i = (v_pcc - eq.v_grid_eq) / z_net
        emf = v_pcc + complex(0.0, params.x_internal) * i
        params = replace(params, e_mag=abs(emf))
        return params, SgState(delta=math.atan2(emf.imag, emf.real), omega_dev=0.0)

    def p_err2(d: float) -> float:
        return _sg_solve(d, params.e_mag, eq).p - params.p_m

    try:
        delta = _first_crossing(p_err2, 0.0, math.pi / 2.0)
    except ConfigurationError as exc:
        raise ConfigurationError(
            f"no SG pre-fault equilibrium: p_m={params.p_m} unreachable at e_mag={params.e_mag}"
        ) from exc
    return params, SgState(delta=delta, omega_dev=0.0)


# --- run loop -------------------------------------------------------------------


@dataclass
class _Timeline:
    """Event queue resolved against the step grid."""

    events: list[SimEvent]
    idx: int = 0

    def due(self, t: float) -> list[SimEvent]:
        out = []
        while self.idx < len(self.events) and self.events[self.idx].t <= t + 1e-12:
            out.append(self.events[self.idx])
            self.idx += 1
        return out


def run_single_machine(
    base: PerUnitBase,
    network: NetworkParams,
    machine: GfmParams | SgParams,
    events: list[SimEvent],
    dt: float,
    t_end: float,
    v_g: float = 1.0,
    i_floor: float = 0.02,
) -> RunResult:
    """Integrate one machine against the staged network equivalents."""
    if dt <= 0 or t_end <= 0:
        raise ConfigurationError("dt and t_end must be positive")
    events = sorted(events, key=lambda e: e.t)
    for prev, nxt in zip(events, events[1:]):
        if nxt.t < prev.t:
            raise ConfigurationError("events must be time-ordered")
    if events and t_end <= events[-1].t:
        raise ConfigurationError("t_end must exceed the last event time")

    is_gfm = isinstance(machine, GfmParams)
    eq_pre = stage_equivalent(network, Stage.PRE_FAULT, v_g)
    if is_gfm:
        gfm_state = init_gfm(machine, eq_pre, network.x_s)
    else:
        machine, sg_state = init_sg(machine, eq_pre, v_g)

    timeline = _Timeline(events)
    eq = eq_pre
    t_fault: float | None = None
    t_clear: float | None = None
    n_steps = round(t_end / dt)
    trace: list[TraceRecord] = []
    z_line1 = network.z_line1
    vg_ph = complex(v_g)

    def record(t: float) -> None:
        if is_gfm:
            sol, r_e, q_pcc = _gfm_solve(gfm_state.delta, gfm_state.v_cmd, eq, machine, network.x_s)
            delta_ctrl = gfm_state.delta
            src = polar(gfm_state.v_cmd, gfm_state.delta)
        else:
            sol = _sg_solve(sg_state.delta, machine.e_mag, eq)
            r_e = 0.0
            delta_ctrl = sg_state.delta
            src = polar(machine.e_mag, sg_state.delta)
            q_pcc = sol.q - network.x_s * (sol.i.real**2 + sol.i.imag**2)
        if not (math.isfinite(sol.p) and math.isfinite(sol.i.real)):
            raise SimulationFault(f"network solve produced non-finite values at t={t:.6f} s")
        v_pcc = src - complex(r_e, network.x_s) * sol.i
        i_line = (v_pcc - vg_ph) / z_line1
        z_pu = relay_mod.measure_impedance_pu(v_pcc, i_line, i_floor)
        if abs(sol.i) > 1e-12:
            raw_phi = math.atan2(sol.i.imag, sol.i.real)
            phi = wrap_angle(raw_phi - delta_ctrl) if is_gfm else wrap_angle(
                math.atan2(v_pcc.imag, v_pcc.real) - raw_phi
            )
        else:
            phi = 0.0
        trace.append(
            TraceRecord(
                t=t,
                v_pcc=v_pcc,
                i_g=sol.i,
                p_e=sol.p,
                q_e=q_pcc,
                delta_ctrl=delta_ctrl,
                delta_pcc=wrap_angle(math.atan2(v_pcc.imag, v_pcc.real)),
                phi=phi,
                r_e=r_e,
                current_limited=r_e > 0.0,
                z_pu=z_pu,
                z_ohm=z_pu * base.z_base_ohm if z_pu is not None else None,
            )
        )

    for k in range(n_steps):
        t = k * dt
        for ev in timeline.due(t):
            if isinstance(ev, ApplyFault):
                eq = stage_equivalent(network, Stage.DURING_FAULT, v_g, ev.x_gnd, ev.fraction)
                t_fault = t
            elif isinstance(ev, ClearFault):
                eq = stage_equivalent(network, Stage.POST_FAULT, v_g)
                t_clear = t
            elif isinstance(ev, SetPoint):
                machine = replace(machine, **{ev.name: ev.value})

        record(t)

        if is_gfm:
            if machine.inertial:
                vec = (gfm_state.delta, gfm_state.p_filt, gfm_state.q_filt)

                def rates(v: tuple[float, ...]) -> tuple[float, ...]:
                    v_cmd = machine.v_mref + machine.k_q * (machine.q_ref - v[2])
                    sol, _, q_pcc = _gfm_solve(v[0], max(v_cmd, 1e-6), eq, machine, network.x_s)
                    return gfm_rates(v, sol.p, q_pcc, machine, base)

                new_vec = _rk4(vec, rates, dt)
                v_cmd = machine.v_mref + machine.k_q * (machine.q_ref - new_vec[2])
                _, r_e_now, _ = _gfm_solve(new_vec[0], max(v_cmd, 1e-6), eq, machine, network.x_s)
                gfm_state = GfmState(
                    delta=new_vec[0],
                    v_cmd=max(v_cmd, 1e-6),
                    p_filt=new_vec[1],
                    q_filt=new_vec[2],
                    current_limited=r_e_now > 0.0,
                )
            else:
                v_cmd = gfm_state.v_cmd  # frozen over the step
                vec = (gfm_state.delta,)

                def rates(v: tuple[float, ...]) -> tuple[float, ...]:
                    sol, _, _ = _gfm_solve(v[0], v_cmd, eq, machine, network.x_s)
                    return gfm_rates(v, sol.p, 0.0, machine, base)

                new_vec = _rk4(vec, rates, dt)
                _, r_e_now, q_pcc_now = _gfm_solve(gfm_state.delta, v_cmd, eq, machine, network.x_s)
                v_cmd_next = machine.v_mref + machine.k_q * (machine.q_ref - q_pcc_now)
                gfm_state = GfmState(
                    delta=new_vec[0],
                    v_cmd=max(v_cmd_next, 1e-6),
                    p_filt=0.0,
                    q_filt=0.0,
                    current_limited=r_e_now > 0.0,
                )
        else:
            vec = (sg_state.delta, sg_state.omega_dev)

            def rates(v: tuple[float, ...]) -> tuple[float, ...]:
                sol = _sg_solve(v[0], machine.e_mag, eq)
                return sg_rates(v, sol.p, machine, base)

            new_vec = _rk4(vec, rates, dt)
            sg_state = SgState(delta=new_vec[0], omega_dev=new_vec[1])

    record(n_steps * dt)
    return RunResult(trace=trace, dt=dt, t_fault=t_fault, t_clear=t_clear)


def _rk4(
    vec: tuple[float, ...], rates: Callable[[tuple[float, ...]], tuple[float, ...]], dt: float
) -> tuple[float, ...]:
    k1 = rates(vec)
    k2 = rates(tuple(x + 0.5 * dt * k for x, k in zip(vec, k1)))
    k3 = rates(tuple(x + 0.5 * dt * k for x, k in zip(vec, k2)))
    k4 = rates(tuple(x + dt * k for x, k in zip(vec, k3)))
    return tuple(
        x + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d)
        for x, a, b, c, d in zip(vec, k1, k2, k3, k4)
    )
