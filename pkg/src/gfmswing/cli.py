"""Command-line front end.

Subcommands: run (trace + relay log + summary), cct (clearing-time
bisection), curves (power-angle curves per stage), verify (analytical
contract checks, nonzero exit on violation), blinder-bound (reverse
blinder design check), sweep (batch of clearing-time variants).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import analysis
from .engine import trace_to_csv
from .machines import GfmParams
from .network import Stage, stage_equivalent
from .relay import blinder_preset, check_reverse_blinders, relay_log_jsonl, reverse_blinder_bound
from .scenario import Scenario, SchemaError, list_presets, parse_scenario, scenario_to_dict
from .study import cct_for_scenario, run_scenario, summary_dict
from .units import InvalidInputError


def _load(args: argparse.Namespace) -> Scenario:
    sc = parse_scenario(args.scenario)
    if getattr(args, "dt", None) is not None:
        sc.dt = args.dt
    if getattr(args, "fct", None) is not None:
        sc = sc.with_fct(args.fct)
    if getattr(args, "relay_preset", None) is not None:
        from .relay import RelayConfig

        sc.relay = RelayConfig(
            blinders=blinder_preset(args.relay_preset),
            dt_psb=sc.relay.dt_psb if sc.relay else 0.03,
            i_floor=sc.relay.i_floor if sc.relay else 0.02,
            z_base_ohm=sc.base.z_base_ohm,
        )
        sc.relay_preset_name = args.relay_preset
    return sc


def _outdir(args: argparse.Namespace) -> Path:
    out = Path(getattr(args, "out", None) or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SystemExit(f"cannot create output directory {out}: {exc}")
    return out


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise SystemExit(f"cannot write {path}: {exc}")
    print(f"wrote {path}")


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def cmd_run(args: argparse.Namespace) -> int:
    sc = _load(args)
    if args.seed_echo:
        print(_json({"scenario": scenario_to_dict(sc), "defaults_applied": sc.defaults_applied}))
    result = run_scenario(sc)
    out = _outdir(args)
    stem = sc.name
    _write(out / f"{stem}-trace.csv", trace_to_csv(result.trace))
    if result.relay_log is not None:
        _write(out / f"{stem}-relay.jsonl", relay_log_jsonl(result.relay_log))
    summary = summary_dict(sc, result)
    _write(out / f"{stem}-summary.json", _json(summary))
    if args.plot:
        from . import plots

        plots.impedance_plot(
            result.trace, sc.relay.blinders if sc.relay else None, out / f"{stem}-impedance.svg"
        )
        plots.timeseries_plot(result.trace, out / f"{stem}-timeseries.svg")
        print(f"wrote {out / f'{stem}-impedance.svg'} and {out / f'{stem}-timeseries.svg'}")
    if "verdict" in summary:
        v = summary["verdict"]
        print(
            f"verdict: {v['kind']} (max excursion {v['max_delta_deg']:.1f} deg, "
            f"terminal-bus angle [{v['delta_pcc_min_deg']:.1f}, {v['delta_pcc_max_deg']:.1f}] deg)"
        )
    r = summary["relay"]
    if r.get("configured"):
        print(
            f"relay: swing_detected={r['swing_detected']} "
            f"ost_trip_t={r['ost_trip_t']} transits={len(r['psb_transits'])}"
        )
    return 0


def cmd_cct(args: argparse.Namespace) -> int:
    sc = _load(args)
    boundary = analysis.CctBoundary(args.boundary)
    res = cct_for_scenario(sc, args.lo, args.hi, tol=args.tol, boundary=boundary, t_horizon=args.horizon)
    doc = {
        "scenario_name": sc.name,
        "boundary": boundary.value,
        "cct_s": res.cct,
        "bracket": [res.lo, res.hi],
        "iterations": res.iterations,
        "bisection_log": [{"fct": f, "beyond_boundary": b} for f, b in res.log],
    }
    out = _outdir(args)
    _write(out / f"{sc.name}-cct.json", _json(doc))
    print(f"CCT ({boundary.value}) = {res.cct:.4f} s (bracket [{res.lo:.4f}, {res.hi:.4f}])")
    return 0


def cmd_curves(args: argparse.Namespace) -> int:
    sc = _load(args)
    if sc.kind != "smib":
        raise SystemExit("curves: only the single-machine topology has staged equivalents")
    m = sc.machine
    v_ref = m.v_mref if isinstance(m, GfmParams) else (m.e_mag if m.e_mag else 1.0)
    i_max = m.i_max if isinstance(m, GfmParams) else float("inf")
    out = _outdir(args)
    for stage in Stage:
        eq = stage_equivalent(sc.network, stage, sc.grid_voltage)
        if math.isinf(i_max):
            curve = analysis.power_angle_curve(eq, v_ref, 1e9, n_points=args.points)
        else:
            curve = analysis.power_angle_curve(eq, v_ref, i_max, n_points=args.points)
        lines = ["delta_deg,p_pu,r_e_pu"]
        for d, p, r in zip(curve.delta_rad, curve.p, curve.r_e):
            lines.append(f"{math.degrees(d):.12g},{p:.12g},{r:.12g}")
        _write(out / f"{sc.name}-curve-{stage.value}.csv", "\n".join(lines) + "\n")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    sc = _load(args)
    if sc.kind != "smib" or not isinstance(sc.machine, GfmParams):
        raise SystemExit("verify: contract checks target the single-machine converter scenarios")
    m = sc.machine
    net = sc.network
    eq_post = stage_equivalent(net, Stage.POST_FAULT, sc.grid_voltage)
    checks = []

    err = analysis.identity_check(m.v_mref, abs(eq_post.v_grid_eq), eq_post.x_l, m.i_max)
    checks.append(("current-angle identity (rad)", err, 1e-9))

    err = analysis.oracle_power_match()
    checks.append(("closed-form vs circuit power (pu)", err, 1e-9))

    result = run_scenario(sc)
    dev = analysis.circle_check(
        result.trace, net.x_g1, net.theta_g1, sc.grid_voltage, m.i_max, t_min=result.t_clear
    )
    if dev is None:
        checks.append(("impedance circle radius (pu)", float("nan"), 1e-6))
    else:
        checks.append(("impedance circle radius (pu)", dev, 1e-6))

    worst_i = 0.0
    for r in result.trace:
        if r.current_limited:
            worst_i = max(worst_i, abs(abs(r.i_g) - m.i_max))
    checks.append(("limited current magnitude (pu)", worst_i, 1e-9))

    ok = True
    for name, value, tol in checks:
        passed = value == value and value < tol  # NaN fails
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {value:.3e} (tolerance {tol:.0e})")
    doc = {
        "scenario_name": sc.name,
        "checks": [
            {"name": n, "value": v, "tolerance": tol, "pass": (v == v and v < tol)}
            for n, v, tol in checks
        ],
    }
    out = _outdir(args)
    _write(out / f"{sc.name}-verify.json", _json(doc))
    return 0 if ok else 2


def cmd_blinder_bound(args: argparse.Namespace) -> int:
    sc = _load(args)
    if sc.kind != "smib":
        raise SystemExit("blinder-bound: defined for the single-machine topology")
    i_max = sc.machine.i_max if isinstance(sc.machine, GfmParams) else None
    if i_max is None:
        raise SystemExit("blinder-bound: scenario machine has no current limit")
    bound = reverse_blinder_bound(
        sc.network.x_g1, sc.network.theta_g1, sc.grid_voltage, i_max, sc.base.z_base_ohm
    )
    print(f"reverse-blinder bound: {bound.pu:.4f} pu = {bound.ohm:.4f} ohm")
    doc = {"scenario_name": sc.name, "bound_pu": bound.pu, "bound_ohm": bound.ohm, "blinders": {}}
    status = 0
    if sc.relay is not None:
        verdicts = check_reverse_blinders(sc.relay.blinders, bound.ohm)
        for name, zone in sc.relay.blinders.zones():
            ok = verdicts[name]
            doc["blinders"][name] = {"right_ohm": zone.right, "pass": ok}
            print(f"  {name} reverse blinder {zone.right:.3f} ohm: {'PASS' if ok else 'FAIL'}")
            status |= 0 if ok else 2
    out = _outdir(args)
    _write(out / f"{sc.name}-blinder-bound.json", _json(doc))
    return status


def _sweep_one(payload: tuple[str, float]) -> dict:
    path, fct = payload
    sc = parse_scenario(path).with_fct(fct)
    result = run_scenario(sc)
    doc = summary_dict(sc, result)
    doc["fct"] = fct
    return doc


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        lo, hi, step = (float(x) for x in args.fct_range.split(":"))
    except ValueError:
        raise SystemExit("sweep: --fct-range must be LO:HI:STEP")
    if step <= 0 or hi < lo:
        raise SystemExit("sweep: need LO <= HI and STEP > 0")
    n = int(round((hi - lo) / step))
    fcts = [round(lo + k * step, 9) for k in range(n + 1)]
    path = str(args.scenario)
    payloads = [(path, f) for f in fcts]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            docs = list(pool.map(_sweep_one, payloads))
    else:
        docs = [_sweep_one(p) for p in payloads]
    out = _outdir(args)
    name = parse_scenario(path).name
    lines = ["fct,verdict,max_delta_deg,swing_detected,ost_trip_t"]
    for doc in docs:
        v = doc.get("verdict", {})
        r = doc["relay"]
        lines.append(
            f"{doc['fct']},{v.get('kind', '')},{v.get('max_delta_deg', '')},"
            f"{r.get('swing_detected', '')},{r.get('ost_trip_t', '')}"
        )
        _write(out / f"{name}-fct{doc['fct']:g}-summary.json", _json(doc))
    _write(out / f"{name}-sweep.csv", "\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gfmswing",
        description=(
            "Phasor-domain power-swing simulator and PSB/OST relay emulator. "
            f"Shipped scenario presets: {', '.join(list_presets())}."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, fct: bool = True) -> None:
        p.add_argument("scenario", help="scenario file or preset name")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--dt", type=float, default=None, help="integration step override (s)")
        if fct:
            p.add_argument("--fct", type=float, default=None, help="fault-clearing-time override (s)")

    p_run = sub.add_parser("run", help="simulate and write trace, relay log and summary")
    add_common(p_run)
    p_run.add_argument("--relay-preset", default=None, help="blinder preset override")
    p_run.add_argument("--plot", action="store_true", help="write SVG diagnostics")
    p_run.add_argument("--seed-echo", action="store_true", help="print the resolved scenario")
    p_run.set_defaults(func=cmd_run)

    p_cct = sub.add_parser("cct", help="bisect the critical clearing time")
    add_common(p_cct, fct=False)
    p_cct.add_argument("--lo", type=float, default=0.05)
    p_cct.add_argument("--hi", type=float, default=0.4)
    p_cct.add_argument("--tol", type=float, default=0.005)
    p_cct.add_argument(
        "--boundary",
        choices=[b.value for b in analysis.CctBoundary],
        default=analysis.CctBoundary.SEVERE_SWING.value,
    )
    p_cct.add_argument("--horizon", type=float, default=None, help="post-fault horizon per probe (s)")
    p_cct.set_defaults(func=cmd_cct)

    p_curves = sub.add_parser("curves", help="power-angle curves per network stage")
    add_common(p_curves, fct=False)
    p_curves.add_argument("--points", type=int, default=721)
    p_curves.set_defaults(func=cmd_curves)

    p_verify = sub.add_parser("verify", help="analytical contract checks (nonzero exit on violation)")
    add_common(p_verify)
    p_verify.set_defaults(func=cmd_verify)

    p_bb = sub.add_parser("blinder-bound", help="reverse-blinder design bound and preset check")
    add_common(p_bb, fct=False)
    p_bb.set_defaults(func=cmd_blinder_bound)

    p_sweep = sub.add_parser("sweep", help="batch of clearing-time variants")
    add_common(p_sweep, fct=False)
    p_sweep.add_argument("--fct-range", required=True, help="LO:HI:STEP in seconds")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
