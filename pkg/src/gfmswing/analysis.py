"""Higher-level studies on top of the engine: stability classification,
critical-clearing-time search, power-angle curves, and the analytical
verification sweeps for the current-limited impedance geometry.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .engine import TraceRecord
from .machines import (
    limited_current,
    limiter_angle,
    limiter_resistance,
    power_limited,
    power_normal,
)
from .network import StageEquivalent, solve_two_node
from .units import InvalidInputError, polar, wrap_angle

TWO_PI = 2.0 * math.pi

SETTLE_RATE = 0.01  # rad/s over the final second
SETTLE_WINDOW = 1.0  # s
LOS_THRESHOLD = 4.0 * math.pi  # 720 degrees of unwrapped excursion


class VerdictKind(enum.Enum):
    STABLE_NO_LIMIT = "stable_no_limit"
    RESYNC_AFTER_SWING = "resync_after_swing"
    LOSS_OF_SYNCHRONISM = "loss_of_synchronism"


@dataclass(frozen=True)
class StabilityVerdict:
    kind: VerdictKind
    max_delta_deg: float  # peak unwrapped excursion from the initial angle
    delta_pcc_min_deg: float
    delta_pcc_max_deg: float
    limited_dwell_fraction: float
    settled: bool


def _settled(trace: Sequence[TraceRecord]) -> bool:
    t_last = trace[-1].t
    window = [r for r in trace if r.t >= t_last - SETTLE_WINDOW]
    if len(window) < 2:
        return False
    span = window[-1].t - window[0].t
    if span <= 0:
        return False
    rate = abs(window[-1].delta_ctrl - window[0].delta_ctrl) / span
    return rate < SETTLE_RATE


def classify(trace: Sequence[TraceRecord], t_fault: float | None = None) -> StabilityVerdict:
    """Stability verdict from a completed trace.

    Requires at least 5 s of post-fault horizon so settling is decidable.
    Loss of synchronism means the unwrapped angle ran beyond 720 degrees
    without re-settling; an excursion past 180 degrees that settles again
    is a resynchronization after a severe swing.
    """
    if not trace:
        raise InvalidInputError("empty trace")
    t_ref = t_fault if t_fault is not None else trace[0].t
    if trace[-1].t - t_ref < 5.0:
        raise InvalidInputError("trace too short to classify: need >= 5 s past the fault")
    d0 = trace[0].delta_ctrl
    excursion = max(abs(r.delta_ctrl - d0) for r in trace)
    dpcc = [r.delta_pcc for r in trace]
    dwell = sum(1 for r in trace if r.current_limited) / len(trace)
    settled = _settled(trace)
    if not settled and excursion > LOS_THRESHOLD:
        kind = VerdictKind.LOSS_OF_SYNCHRONISM
    elif excursion > math.pi:
        kind = VerdictKind.RESYNC_AFTER_SWING
    else:
        kind = VerdictKind.STABLE_NO_LIMIT
    deg = 180.0 / math.pi
    return StabilityVerdict(
        kind=kind,
        max_delta_deg=excursion * deg,
        delta_pcc_min_deg=min(dpcc) * deg,
        delta_pcc_max_deg=max(dpcc) * deg,
        limited_dwell_fraction=dwell,
        settled=settled,
    )


class CctBoundary(enum.Enum):
    """What counts as 'critical': entering a severe swing (the control
    angle running past 360 degrees) or outright loss of synchronism."""

    SEVERE_SWING = "severe_swing"
    LOS = "los"


def _beyond_boundary(trace: Sequence[TraceRecord], boundary: CctBoundary, t_fault: float | None) -> bool:
    d0 = trace[0].delta_ctrl
    excursion = max(abs(r.delta_ctrl - d0) for r in trace)
    if boundary is CctBoundary.SEVERE_SWING:
        return excursion > TWO_PI
    return classify(trace, t_fault).kind is VerdictKind.LOSS_OF_SYNCHRONISM


@dataclass(frozen=True)
class CctResult:
    cct: float
    lo: float  # largest clearing time observed below the boundary
    hi: float  # smallest clearing time observed beyond it
    iterations: int
    log: tuple[tuple[float, bool], ...]  # (fct, beyond_boundary)


def cct_search(
    run_fct: Callable[[float], "object"],
    fct_lo: float,
    fct_hi: float,
    tol: float = 0.005,
    boundary: CctBoundary = CctBoundary.SEVERE_SWING,
) -> CctResult:
    """Bisect the fault-clearing time against a stability boundary.

    ``run_fct`` maps a clearing time to a RunResult (the caller fixes the
    scenario); monotonicity of the boundary in FCT is assumed.
    """
    if not (0 < fct_lo < fct_hi):
        raise InvalidInputError("need 0 < fct_lo < fct_hi")
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    res_lo = run_fct(fct_lo)
    res_hi = run_fct(fct_hi)
    beyond_lo = _beyond_boundary(res_lo.trace, boundary, res_lo.t_fault)
    beyond_hi = _beyond_boundary(res_hi.trace, boundary, res_hi.t_fault)
    if beyond_lo or not beyond_hi:
        raise InvalidInputError(
            f"no stability boundary inside [{fct_lo}, {fct_hi}]: "
            f"lo beyond={beyond_lo}, hi beyond={beyond_hi}"
        )
    log = [(fct_lo, beyond_lo), (fct_hi, beyond_hi)]
    lo, hi = fct_lo, fct_hi
    iterations = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        res = run_fct(mid)
        beyond = _beyond_boundary(res.trace, boundary, res.t_fault)
        log.append((mid, beyond))
        if beyond:
            hi = mid
        else:
            lo = mid
        iterations += 1
    return CctResult(cct=0.5 * (lo + hi), lo=lo, hi=hi, iterations=iterations, log=tuple(log))


@dataclass(frozen=True)
class PowerAngleCurve:
    stage: str
    delta_rad: tuple[float, ...]
    p: tuple[float, ...]
    r_e: tuple[float, ...]


def power_angle_curve(
    eq: StageEquivalent,
    v_ref: float,
    i_max: float,
    n_points: int = 721,
    label: str | None = None,
) -> PowerAngleCurve:
    """P(delta) over [0, 360] degrees: the sine curve where the limiter is
    idle, the limited closed form where it engages (continuous join)."""
    deltas = [k * TWO_PI / (n_points - 1) for k in range(n_points)]
    v_ge = abs(eq.v_grid_eq)
    ps, res = [], []
    for d in deltas:
        r_e = limiter_resistance(d, v_ref, v_ge, eq.x_l, i_max)
        if r_e > 0.0:
            ps.append(power_limited(d, v_ref, v_ge, eq.x_l, r_e, i_max))
        else:
            ps.append(power_normal(d, v_ref, v_ge, eq.x_l))
        res.append(r_e)
    return PowerAngleCurve(
        stage=label if label is not None else eq.stage.value,
        delta_rad=tuple(deltas),
        p=tuple(ps),
        r_e=tuple(res),
    )


def identity_check(
    v_ref: float,
    v_grid_eq: float,
    x_l: float,
    i_max: float,
    n_points: int = 1000,
) -> float:
    """Max angle error between the limited-current phase and half the
    control angle plus the limiter angle, over the limiter-active region
    of (0, 360) degrees. Contract: below 1e-9 rad."""
    worst = 0.0
    checked = 0
    for k in range(1, n_points + 1):
        d = k * TWO_PI / (n_points + 1)
        r_e = limiter_resistance(d, v_ref, v_grid_eq, x_l, i_max)
        if r_e <= 0.0:
            continue
        i = limited_current(d, v_ref, v_grid_eq, x_l, r_e)
        predicted = 0.5 * d + limiter_angle(r_e, x_l)
        err = abs(wrap_angle(math.atan2(i.imag, i.real) - predicted))
        worst = max(worst, err)
        checked += 1
    if checked == 0:
        raise InvalidInputError("limiter never active on the sampled grid")
    return worst


def circle_check(
    trace: Sequence[TraceRecord],
    x_g1: float,
    theta_g1: float,
    v_g: float,
    i_max: float,
    t_min: float | None = None,
) -> float | None:
    """Max radial deviation of limited-mode impedance samples from the
    circle centered at the line-1 impedance with radius v_g/i_max (pu).
    None when the trace holds no usable limited-mode samples."""
    center = polar(x_g1, theta_g1)
    radius = v_g / i_max
    worst = None
    for r in trace:
        if not r.current_limited or r.z_pu is None:
            continue
        if t_min is not None and r.t < t_min:
            continue
        dev = abs(abs(r.z_pu - center) - radius)
        worst = dev if worst is None else max(worst, dev)
    return worst


def oracle_power_match(
    n_samples: int = 1000,
    seed: int = 2024,
    tol_report: bool = False,
) -> float:
    """Max |closed form - circuit solve| of the limited-mode power over
    random limiter-active draws. Independent routes must agree to 1e-9."""
    import random

    rng = random.Random(seed)
    worst = 0.0
    drawn = 0
    while drawn < n_samples:
        d = rng.uniform(0.0, TWO_PI)
        x_l = rng.uniform(0.1, 1.5)
        v_ge = rng.uniform(0.1, 1.2)
        i_max = rng.uniform(0.8, 2.5)
        v_ref = rng.uniform(0.8, 1.2)
        r_e = limiter_resistance(d, v_ref, v_ge, x_l, i_max)
        if r_e <= 0.0:
            continue
        drawn += 1
        closed = power_limited(d, v_ref, v_ge, x_l, r_e, i_max)
        sol = solve_two_node(polar(v_ref, d), complex(v_ge), x_l, r_e)
        worst = max(worst, abs(closed - sol.p))
    return worst
