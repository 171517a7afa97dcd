"""Multi-machine phasor simulation on the WSCC 9-bus system.

Machines enter the nodal solve as Norton sources behind their internal
impedance; the studied machine at bus 2 can be a grid-forming converter
(with the same virtual-resistance limiter as the single-machine model,
driven by a per-step Thevenin reduction of the rest of the network) or a
classical generator. Loads are constant impedance from the initializing
power flow. The trace is written from the bus-2 machine's point of view
with the relay on line 7-8 at the bus-7 end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import relay as relay_mod
from .engine import RunResult, SimulationFault, TraceRecord, series_limiter_resistance
from .machines import GfmParams, SgParams, gfm_rates, sg_rates
from .network import (
    Branch,
    ConfigurationError,
    MultiMachineNetwork,
    newton_power_flow,
    solve_nodal,
    wscc9_network,
)
from .units import PerUnitBase, polar, wrap_angle

# Classical-machine constants for the two fixed WSCC generators
# (inertia s, damping pu, transient reactance pu on 100 MVA).
G1_SG = SgParams(h=23.64, d=2.0, x_internal=0.0608, e_mag=1.0, p_m=0.0)
G3_SG = SgParams(h=3.01, d=2.0, x_internal=0.1813, e_mag=1.0, p_m=0.0)
BUS2_SG = SgParams(h=6.4, d=2.0, x_internal=0.1198, e_mag=1.0, p_m=0.0)

GFM_INTERNAL_X = 0.30  # converter-side series reactance on its own rating
FAULT_BUS = 6  # bus 7
FAULT_X = 0.05
TRIPPED_LINE = "L5-7"
RELAY_BRANCH = "L7-8"
RELAY_BUS = 6  # measures at the bus-7 end, looking into line 7-8

MACHINE_BUSES = (0, 1, 2)


@dataclass
class _StageMatrices:
    y_ext: np.ndarray  # network + loads + fixed-machine admittances
    z_th: complex  # Thevenin impedance at the studied machine's bus
    relay_branch: Branch | None


def _stage(
    net: MultiMachineNetwork,
    y_load: dict[int, complex],
    sg_admittances: dict[int, complex],
    removed: set[str],
    fault_shunt: complex | None,
    study_bus: int,
) -> _StageMatrices:
    y = net.ybus(removed)
    for bus, yl in y_load.items():
        y[bus, bus] += yl
    for bus, ym in sg_admittances.items():
        y[bus, bus] += ym
    if fault_shunt is not None:
        y[FAULT_BUS, FAULT_BUS] += fault_shunt
    e = np.zeros(net.n_bus, dtype=complex)
    e[study_bus] = 1.0
    try:
        z_th = np.linalg.solve(y, e)[study_bus]
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError(f"singular stage network: {exc}") from exc
    relay_branch = next(
        (b for b in net.branches if b.name == RELAY_BRANCH and b.name not in removed), None
    )
    return _StageMatrices(y_ext=y, z_th=z_th, relay_branch=relay_branch)


def run_wscc9(
    machine2: GfmParams | SgParams,
    t_fault: float,
    t_clear: float,
    dt: float,
    t_end: float,
    p_dispatch2: float = 1.0,
    fault_x: float = FAULT_X,
    i_floor: float = relay_mod.DEFAULT_I_FLOOR,
    base: PerUnitBase | None = None,
) -> RunResult:
    """Fault on line 5-7 near bus 7, cleared by tripping that line."""
    if not (0 < t_fault < t_clear < t_end):
        raise ConfigurationError("need 0 < t_fault < t_clear < t_end")
    if fault_x <= 0:
        raise ConfigurationError("fault reactance must be positive")
    net = wscc9_network()
    base = base or PerUnitBase(s_base_mw=net.base_mva, v_base_kv=230.0, f0_hz=50.0)
    is_gfm = isinstance(machine2, GfmParams)

    # Initializing load flow: bus 1 slack, buses 2 and 3 PV.
    v0 = newton_power_flow(
        net, slack_bus=0, pv_buses={1: (p_dispatch2, 1.025), 2: (0.85, 1.025)}, slack_v=1.04
    )
    y_full = net.ybus()
    i_inj = y_full @ v0
    s_inj = v0 * np.conj(i_inj)
    y_load = {bus: np.conj(s) / abs(v0[bus]) ** 2 for bus, s in net.loads.items()}

    # Machine internal sources from the flow solution.
    sg_units: dict[int, SgParams] = {0: G1_SG, 2: G3_SG}
    if not is_gfm:
        sg_units[1] = machine2
    sg_state: dict[int, tuple[float, float]] = {}
    sg_params: dict[int, SgParams] = {}
    for bus, proto in sg_units.items():
        s_gen = s_inj[bus] + net.loads.get(bus, 0.0)
        i_gen = np.conj(s_gen / v0[bus])
        emf = v0[bus] + 1j * proto.x_internal * i_gen
        sg_params[bus] = replace(proto, e_mag=abs(emf), p_m=s_gen.real)
        sg_state[bus] = (math.atan2(emf.imag, emf.real), 0.0)

    gfm_vec: tuple[float, ...] = ()
    gfm_v_cmd = 1.0
    gfm: GfmParams | None = None
    x_m = 0.0
    if is_gfm:
        x_m = GFM_INTERNAL_X
        s_gen = s_inj[1] + net.loads.get(1, 0.0)
        i_gen = np.conj(s_gen / v0[1])
        src = v0[1] + 1j * x_m * i_gen
        q_bus = s_gen.imag
        gfm = replace(
            machine2,
            p_ref=s_gen.real,
            q_ref=q_bus,
            v_mref=abs(src),
        )
        theta0 = math.atan2(src.imag, src.real)
        gfm_v_cmd = abs(src)
        gfm_vec = (theta0, s_gen.real, q_bus) if gfm.inertial else (theta0,)

    sg_admittances = {bus: 1.0 / complex(0.0, p.x_internal) for bus, p in sg_params.items()}

    stages = {
        "pre": _stage(net, y_load, sg_admittances, set(), None, 1),
        "fault": _stage(net, y_load, sg_admittances, set(), 1.0 / complex(0.0, fault_x), 1),
        "post": _stage(net, y_load, sg_admittances, {TRIPPED_LINE}, None, 1),
    }

    def network_solve(stage: _StageMatrices, sg_vec: dict[int, tuple[float, float]], gvec, v_cmd):
        """Returns bus voltages, per-machine currents, gfm r_e."""
        i_n = np.zeros(net.n_bus, dtype=complex)
        for bus, (delta, _w) in sg_vec.items():
            i_n[bus] = polar(sg_params[bus].e_mag, delta) * sg_admittances[bus]
        r_e = 0.0
        y_g = 0.0
        src = 0.0j
        if is_gfm:
            v_oc = np.linalg.solve(stage.y_ext, i_n)[1]
            src = polar(v_cmd, gvec[0])
            dv = src - v_oc
            zth = stage.z_th
            r_e = series_limiter_resistance(
                abs(dv) ** 2, zth.real, x_m + zth.imag, gfm.i_max
            )
            y_g = 1.0 / complex(r_e, x_m)
        y = stage.y_ext.copy()
        rhs = i_n.copy()
        if is_gfm:
            y[1, 1] += y_g
            rhs[1] += src * y_g
        v = solve_nodal(y, rhs)
        currents: dict[int, complex] = {}
        for bus, (delta, _w) in sg_vec.items():
            currents[bus] = (polar(sg_params[bus].e_mag, delta) - v[bus]) / complex(
                0.0, sg_params[bus].x_internal
            )
        if is_gfm:
            currents[1] = (src - v[1]) / complex(r_e, x_m)
        return v, currents, r_e, src

    def pack(sg_vec, gvec):
        flat = []
        for bus in sorted(sg_vec):
            flat.extend(sg_vec[bus])
        flat.extend(gvec)
        return tuple(flat)

    def unpack(flat):
        sg_vec = {}
        i = 0
        for bus in sorted(sg_state):
            sg_vec[bus] = (flat[i], flat[i + 1])
            i += 2
        return sg_vec, tuple(flat[i:])

    def rates(flat, stage, v_cmd):
        sg_vec, gvec = unpack(flat)
        if is_gfm and gfm.inertial:
            v_cmd = max(gfm.v_mref + gfm.k_q * (gfm.q_ref - gvec[2]), 1e-6)
        v, currents, r_e, src = network_solve(stage, sg_vec, gvec, v_cmd)
        out = []
        for bus in sorted(sg_vec):
            p_e = (polar(sg_params[bus].e_mag, sg_vec[bus][0]) * currents[bus].conjugate()).real
            out.extend(sg_rates(sg_vec[bus], p_e, sg_params[bus], base))
        if is_gfm:
            i2 = currents[1]
            v_t = src - r_e * i2
            p_e = (v_t * i2.conjugate()).real
            q_bus = (v[1] * i2.conjugate()).imag
            out.extend(gfm_rates(gvec, p_e, q_bus, gfm, base))
        return tuple(out)

    n_steps = round(t_end / dt)
    trace: list[TraceRecord] = []
    stage = stages["pre"]

    for k in range(n_steps + 1):
        t = k * dt
        if t >= t_clear - 1e-12:
            stage = stages["post"]
        elif t >= t_fault - 1e-12:
            stage = stages["fault"]

        sg_vec, gvec = sg_state, gfm_vec
        v, currents, r_e, src = network_solve(stage, sg_vec, gvec, gfm_v_cmd)
        if not np.isfinite(v).all():
            raise SimulationFault(f"network solve diverged at t={t:.6f} s")

        # Trace from the bus-2 machine's viewpoint; relay on line 7-8.
        ref_angle = sg_state[0][0]
        if is_gfm:
            i2 = currents[1]
            v_t = src - r_e * i2
            p_e = (v_t * i2.conjugate()).real
            q_e = (v[1] * i2.conjugate()).imag
            delta_ctrl = gvec[0] - ref_angle
            phi = wrap_angle(math.atan2(i2.imag, i2.real) - gvec[0]) if abs(i2) > 1e-12 else 0.0
        else:
            i2 = currents[1]
            p_e = (polar(sg_params[1].e_mag, sg_vec[1][0]) * i2.conjugate()).real
            q_e = (v[1] * i2.conjugate()).imag
            delta_ctrl = sg_vec[1][0] - ref_angle
            phi = (
                wrap_angle(math.atan2(v[1].imag, v[1].real) - math.atan2(i2.imag, i2.real))
                if abs(i2) > 1e-12
                else 0.0
            )
        z_pu = None
        if stage.relay_branch is not None:
            br = stage.relay_branch
            y_ser = 1.0 / complex(br.r, br.x)
            i_line = (v[br.from_bus] - v[br.to_bus]) * y_ser + v[br.from_bus] * complex(0, br.b / 2)
            z_pu = relay_mod.measure_impedance_pu(v[RELAY_BUS], i_line, i_floor)
        trace.append(
            TraceRecord(
                t=t,
                v_pcc=complex(v[1]),
                i_g=complex(i2),
                p_e=float(p_e),
                q_e=float(q_e),
                delta_ctrl=delta_ctrl,
                delta_pcc=wrap_angle(
                    math.atan2(v[1].imag, v[1].real) - math.atan2(v[0].imag, v[0].real)
                ),
                phi=phi,
                r_e=float(r_e),
                current_limited=r_e > 0.0,
                z_pu=complex(z_pu) if z_pu is not None else None,
                z_ohm=complex(z_pu) * base.z_base_ohm if z_pu is not None else None,
            )
        )
        if k == n_steps:
            break

        flat = pack(sg_state, gfm_vec)
        k1 = rates(flat, stage, gfm_v_cmd)
        k2 = rates(tuple(x + 0.5 * dt * r for x, r in zip(flat, k1)), stage, gfm_v_cmd)
        k3 = rates(tuple(x + 0.5 * dt * r for x, r in zip(flat, k2)), stage, gfm_v_cmd)
        k4 = rates(tuple(x + dt * r for x, r in zip(flat, k3)), stage, gfm_v_cmd)
        flat = tuple(
            x + dt / 6.0 * (a + 2 * b + 2 * c + d)
            for x, a, b, c, d in zip(flat, k1, k2, k3, k4)
        )
        sg_state, gfm_vec = unpack(flat)
        if is_gfm and not gfm.inertial:
            q_now = (v[1] * currents[1].conjugate()).imag
            gfm_v_cmd = max(gfm.v_mref + gfm.k_q * (gfm.q_ref - q_now), 1e-6)
        elif is_gfm:
            gfm_v_cmd = max(gfm.v_mref + gfm.k_q * (gfm.q_ref - gfm_vec[2]), 1e-6)

    return RunResult(trace=trace, dt=dt, t_fault=t_fault, t_clear=t_clear)
