"""Scenario execution: dispatch to the right engine, evaluate the relay,
classify stability, and assemble the run summary document."""

from __future__ import annotations

import math
from dataclasses import replace

from . import analysis
from .engine import RunResult, run_single_machine
from .machines import GfmParams
from .multimachine import run_wscc9
from .network import ApplyFault, ClearFault
from .relay import RelayLog, evaluate as relay_evaluate
from .scenario import Scenario, SchemaError, scenario_to_dict


def run_scenario(sc: Scenario) -> RunResult:
    """Simulate, then attach the relay log and the stability verdict."""
    if sc.kind == "smib":
        i_floor = sc.relay.i_floor if sc.relay is not None else 0.02
        result = run_single_machine(
            base=sc.base,
            network=sc.network,
            machine=sc.machine,
            events=sc.events,
            dt=sc.dt,
            t_end=sc.t_end,
            v_g=sc.grid_voltage,
            i_floor=i_floor,
        )
    else:
        t_fault = sc.t_fault
        t_clear = sc.t_clear
        if t_fault is None or t_clear is None:
            raise SchemaError("wscc9 scenario needs apply_fault and clear_fault events")
        fault = next(e for e in sc.events if isinstance(e, ApplyFault))
        result = run_wscc9(
            machine2=sc.machine,
            t_fault=t_fault,
            t_clear=t_clear,
            dt=sc.dt,
            t_end=sc.t_end,
            p_dispatch2=sc.dispatch_p,
            fault_x=fault.x_gnd if fault.x_gnd is not None else 0.05,
            i_floor=sc.relay.i_floor if sc.relay is not None else 0.02,
        )
    if sc.relay is not None:
        result.relay_log = relay_evaluate([(r.t, r.z_ohm) for r in result.trace], sc.relay)
    horizon = result.trace[-1].t - (result.t_fault if result.t_fault is not None else 0.0)
    if horizon >= 5.0:
        result.verdict = analysis.classify(result.trace, result.t_fault)
    return result


def relay_summary(log: RelayLog | None, t_clear: float | None) -> dict:
    if log is None:
        return {"configured": False}
    post = [v for v in log.psb if t_clear is None or v.t_outer >= t_clear]
    return {
        "configured": True,
        "n_crossings": len(log.crossings),
        "psb_transits": [
            {
                "t_outer": round(v.t_outer, 6),
                "t_middle": round(v.t_middle, 6),
                "transit_s": round(v.transit, 6),
                "verdict": "swing" if v.is_swing else ("malformed-fault" if v.malformed else "fault"),
            }
            for v in log.psb
        ],
        "swing_detected": log.swing_detected,
        "post_clearance_swing_detected": any(v.is_swing for v in post),
        "ost_trip_t": log.ost_trip_t,
    }


def summary_dict(sc: Scenario, result: RunResult) -> dict:
    deg = 180.0 / math.pi
    trace = result.trace
    d0 = trace[0].delta_ctrl
    doc = {
        "scenario_name": sc.name,
        "samples": len(trace),
        "t_end": trace[-1].t,
        "t_fault": result.t_fault,
        "t_clear": result.t_clear,
        "delta_ctrl_initial_deg": d0 * deg,
        "delta_ctrl_final_deg": trace[-1].delta_ctrl * deg,
        "delta_ctrl_max_excursion_deg": max(abs(r.delta_ctrl - d0) for r in trace) * deg,
        "delta_pcc_min_deg": min(r.delta_pcc for r in trace) * deg,
        "delta_pcc_max_deg": max(r.delta_pcc for r in trace) * deg,
        "limited_dwell_fraction": sum(1 for r in trace if r.current_limited) / len(trace),
        "mode_alternations": sum(
            1 for a, b in zip(trace, trace[1:]) if a.current_limited != b.current_limited
        ),
        "relay": relay_summary(result.relay_log, result.t_clear),
        "defaults_applied": list(sc.defaults_applied),
        "scenario": scenario_to_dict(sc),
    }
    if result.verdict is not None:
        v = result.verdict
        doc["verdict"] = {
            "kind": v.kind.value,
            "max_delta_deg": v.max_delta_deg,
            "delta_pcc_min_deg": v.delta_pcc_min_deg,
            "delta_pcc_max_deg": v.delta_pcc_max_deg,
            "limited_dwell_fraction": v.limited_dwell_fraction,
            "settled": v.settled,
        }
    return doc


def cct_for_scenario(
    sc: Scenario,
    fct_lo: float,
    fct_hi: float,
    tol: float = 0.005,
    boundary: analysis.CctBoundary = analysis.CctBoundary.SEVERE_SWING,
    t_horizon: float | None = None,
) -> analysis.CctResult:
    """CCT bisection over clearing-time overrides of one scenario."""
    if sc.t_fault is None:
        raise SchemaError("scenario has no fault event; nothing to bisect")

    def run_fct(fct: float) -> RunResult:
        probe = sc.with_fct(fct)
        if t_horizon is not None:
            probe.t_end = probe.t_fault + t_horizon
        probe.relay = None  # relay evaluation is irrelevant to the boundary
        return run_scenario(probe)

    return analysis.cct_search(run_fct, fct_lo, fct_hi, tol=tol, boundary=boundary)
