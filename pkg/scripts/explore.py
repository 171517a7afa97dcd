#!/usr/bin/env python3
"""Scratch exploration of the table-1 dynamics (not part of the package)."""
import math
import sys
import time

from gfmswing import (
    ApplyFault,
    ClearFault,
    GfmParams,
    NetworkParams,
    PerUnitBase,
    SgParams,
    run_single_machine,
)

DEG = 180.0 / math.pi


def summarize(res, label):
    tr = res.trace
    d0 = tr[0].delta_ctrl
    dmax = max(r.delta_ctrl for r in tr) - d0
    dpcc = [r.delta_pcc * DEG for r in tr]
    lim = [r for r in tr if r.current_limited]
    # circle deviation on post-fault limited samples
    dev = 0.0
    if res.t_clear is not None:
        for r in lim:
            if r.t >= res.t_clear and r.z_pu is not None:
                dev = max(dev, abs(abs(r.z_pu - complex(0, 0.35)) - 1 / 1.2))
    # mode alternations
    alt = sum(1 for a, b in zip(tr, tr[1:]) if a.current_limited != b.current_limited)
    final_rate = (tr[-1].delta_ctrl - tr[-400].delta_ctrl) / (tr[-1].t - tr[-400].t)
    print(
        f"{label}: dmax={dmax*DEG:8.1f}deg  dpcc=[{min(dpcc):6.1f},{max(dpcc):6.1f}]  "
        f"final_d={(tr[-1].delta_ctrl-d0)*DEG:8.1f}  rate={final_rate:8.4f} rad/s  "
        f"alt={alt}  circ_dev={dev:.2e}  p_end={tr[-1].p_e:.4f}"
    )
    return dmax * DEG


def run_gfm(fct, t_end=7.0, dt=5e-4, inertial=False, kp=0.01, wp=5.0, tf=1.0):
    base = PerUnitBase()
    net = NetworkParams()
    m = GfmParams(inertial=inertial, k_p=kp, w_p=wp, w_q=wp)
    ev = [ApplyFault(t=tf), ClearFault(t=tf + fct)]
    return run_single_machine(base, net, m, ev, dt, t_end)


def run_sg(fct, p_m=1.0, t_end=9.0, dt=5e-4, tf=1.0, d=2.0):
    base = PerUnitBase()
    net = NetworkParams()
    m = SgParams(p_m=p_m, d=d)
    ev = [ApplyFault(t=tf), ClearFault(t=tf + fct)]
    return run_single_machine(base, net, m, ev, dt, t_end)


if __name__ == "__main__":
    t0 = time.time()
    print("== non-inertial GFM, vary FCT ==")
    for fct in (0.10, 0.12, 0.13, 0.135, 0.14, 0.16, 0.20):
        summarize(run_gfm(fct), f"fct={fct:5.3f}")
    print(f"(elapsed {time.time()-t0:.1f}s)")

    print("== non-inertial CCT bracket (boundary: delta>360) ==")
    lo, hi = 0.05, 0.30
    for _ in range(12):
        mid = 0.5 * (lo + hi)
        res = run_gfm(mid, t_end=6.0)
        big = (max(r.delta_ctrl for r in res.trace) - res.trace[0].delta_ctrl) > 2 * math.pi
        lo, hi = (lo, mid) if big else (mid, hi)
    print(f"CCT in [{lo:.4f}, {hi:.4f}]")

    print("== inertial GFM: spec default wp=31.4, kp=0.01 ==")
    for fct in (0.14, 0.3, 0.6, 1.0):
        summarize(run_gfm(fct, t_end=10.0, inertial=True), f"inertial fct={fct:4.2f}")

    print("== inertial GFM: smaller wp ==")
    for wp in (10.0, 5.0, 3.14, 2.0, 1.0):
        summarize(run_gfm(0.3, t_end=12.0, inertial=True, wp=wp), f"wp={wp:5.2f} fct=0.30")

    print("== inertial GFM: larger kp with wp=31.4 ==")
    for kp in (0.05, 0.1, 0.2, 0.3):
        summarize(run_gfm(0.3, t_end=12.0, inertial=True, kp=kp), f"kp={kp:4.2f} fct=0.30")

    print("== SG p_m=1.0, vary FCT ==")
    for fct in (0.14, 0.20, 0.24, 0.26, 0.28, 0.30):
        summarize(run_sg(fct), f"sg fct={fct:4.2f}")
    print(f"(total {time.time()-t0:.1f}s)")
