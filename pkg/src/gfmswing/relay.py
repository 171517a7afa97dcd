"""Impedance measurement, blinder zones, power-swing blocking (PSB) and
out-of-step tripping (OST) logic, plus the reverse-blinder design bound
for current-limited grid-forming sources.

Blinders are vertical lines R = const in the impedance plane with optional
reactance caps; the three zones are strictly nested. PSB classifies each
inbound outer-to-middle transit by its duration; OST trips on the first
inner-zone entry of a transit already classified as a swing.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

from .units import InvalidInputError, Phasor, polar

DEFAULT_I_FLOOR = 0.02
DEFAULT_DT_PSB = 0.03


def measure_impedance_pu(v: Phasor, i: Phasor, i_floor: float = DEFAULT_I_FLOOR) -> Phasor | None:
    """Per-unit impedance v/i, or None when the current is below the
    measurement floor (no usable relay quantity)."""
    if abs(i) <= i_floor:
        return None
    return v / i


def measure_impedance(
    v: Phasor, i: Phasor, z_base_ohm: float, i_floor: float = DEFAULT_I_FLOOR
) -> Phasor | None:
    """Relay impedance in ohm; None when blocked by the current floor."""
    z = measure_impedance_pu(v, i, i_floor)
    return None if z is None else z * z_base_ohm


@dataclass(frozen=True)
class BlinderZone:
    """One zone: left/right resistive blinders (ohm) and optional
    reactance caps (ohm)."""

    right: float
    left: float
    x_top: float | None = None
    x_bottom: float | None = None

    def __post_init__(self) -> None:
        if self.right <= self.left:
            raise InvalidInputError("right blinder must exceed left blinder")
        if self.x_top is not None and self.x_bottom is not None and self.x_top <= self.x_bottom:
            raise InvalidInputError("x_top must exceed x_bottom")

    def contains(self, z: Phasor) -> bool:
        if not (self.left < z.real < self.right):
            return False
        if self.x_top is not None and z.imag >= self.x_top:
            return False
        if self.x_bottom is not None and z.imag <= self.x_bottom:
            return False
        return True


@dataclass(frozen=True)
class BlinderSet:
    outer: BlinderZone
    middle: BlinderZone
    inner: BlinderZone

    def __post_init__(self) -> None:
        if not (self.outer.right > self.middle.right > self.inner.right):
            raise InvalidInputError("right blinders must nest strictly: outer > middle > inner")
        if not (self.outer.left < self.middle.left < self.inner.left):
            raise InvalidInputError("left blinders must nest strictly: outer < middle < inner")

    def zones(self) -> tuple[tuple[str, BlinderZone], ...]:
        return (("outer", self.outer), ("middle", self.middle), ("inner", self.inner))


class Region(enum.IntEnum):
    OUTSIDE = 0
    OUTER_ONLY = 1
    OUTER_MIDDLE = 2
    INNER = 3


def zone_test(z: Phasor, blinders: BlinderSet) -> Region:
    """Innermost nested zone containing z."""
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise InvalidInputError("zone_test requires a finite impedance")
    if blinders.inner.contains(z):
        return Region.INNER
    if blinders.middle.contains(z):
        return Region.OUTER_MIDDLE
    if blinders.outer.contains(z):
        return Region.OUTER_ONLY
    return Region.OUTSIDE


@dataclass(frozen=True)
class Crossing:
    """Zone-boundary event. zone='signal' marks measurement loss, which
    deliberately breaks trajectory continuity."""

    t: float
    zone: str  # outer | middle | inner | signal
    direction: str  # in | out | lost


_IN_ORDER = {"outer": 0, "middle": 1, "inner": 2}


def _crossing_time(
    t1: float, t2: float, z1: Phasor, z2: Phasor, zone: BlinderZone
) -> float:
    """Membership flip instant on the straight segment z1->z2, found by
    bisection (equivalent to boundary interpolation, shape-agnostic)."""
    inside1 = zone.contains(z1)
    lo, hi = 0.0, 1.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        zm = z1 + mid * (z2 - z1)
        if zone.contains(zm) == inside1:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    return t1 + s * (t2 - t1)


def detect_crossings(
    trajectory: list[tuple[float, Phasor | None]], blinders: BlinderSet
) -> list[Crossing]:
    """Timestamped zone-boundary events along a timed impedance sequence.

    Crossing instants are interpolated within the bracketing sample pair so
    transit-time verdicts are insensitive to the sampling step. Blocked
    samples (None) emit a signal-lost marker and suppress interpolation
    across the gap.
    """
    out: list[Crossing] = []
    prev_t: float | None = None
    prev_z: Phasor | None = None
    in_gap = False
    for t, z in trajectory:
        if prev_t is not None and t <= prev_t:
            raise InvalidInputError("trajectory must be strictly time-ordered")
        if z is None:
            if prev_z is not None and not in_gap:
                out.append(Crossing(t, "signal", "lost"))
            in_gap = True
            prev_t = t
            continue
        if prev_z is not None and not in_gap:
            events = []
            for name, zone in blinders.zones():
                was, now = zone.contains(prev_z), zone.contains(z)
                if was != now:
                    tc = _crossing_time(prev_t, t, prev_z, z, zone)
                    events.append(Crossing(tc, name, "in" if now else "out"))
            events.sort(
                key=lambda c: (
                    c.t,
                    _IN_ORDER[c.zone] if c.direction == "in" else -_IN_ORDER[c.zone],
                )
            )
            out.extend(events)
        prev_t, prev_z, in_gap = t, z, False
    return out


@dataclass(frozen=True)
class PsbVerdict:
    t_outer: float
    t_middle: float
    transit: float
    is_swing: bool
    malformed: bool = False


def psb_evaluate(crossings: list[Crossing], dt_psb: float = DEFAULT_DT_PSB) -> list[PsbVerdict]:
    """Classify every inbound outer-to-middle transit: longer than the
    threshold means power swing (block distance elements), otherwise fault.

    A middle entry with no armed outer entry is a malformed trajectory and
    is treated as a fault. The logic re-arms once the trajectory leaves the
    outer zone (or the signal drops).
    """
    if dt_psb <= 0:
        raise InvalidInputError("dt_psb must be positive")
    verdicts: list[PsbVerdict] = []
    pending_outer: float | None = None
    classified = False
    for c in crossings:
        if c.zone == "signal":
            pending_outer = None
            classified = False
        elif c.zone == "outer" and c.direction == "in":
            if not classified and pending_outer is None:
                pending_outer = c.t
        elif c.zone == "outer" and c.direction == "out":
            pending_outer = None
            classified = False
        elif c.zone == "middle" and c.direction == "in":
            if pending_outer is not None:
                transit = c.t - pending_outer
                verdicts.append(
                    PsbVerdict(pending_outer, c.t, transit, is_swing=transit > dt_psb)
                )
                pending_outer = None
                classified = True
            elif not classified:
                verdicts.append(PsbVerdict(c.t, c.t, 0.0, is_swing=False, malformed=True))
                classified = True
    return verdicts


def ost_evaluate(crossings: list[Crossing], verdicts: list[PsbVerdict]) -> float | None:
    """Trip time: first inner-zone entry while the ongoing transit episode
    is classified as a swing; None when never armed or never entered."""
    swing_times = sorted(v.t_middle for v in verdicts if v.is_swing)
    armed = False
    si = 0
    for c in sorted(crossings, key=lambda c: c.t):
        while si < len(swing_times) and swing_times[si] <= c.t:
            armed = True
            si += 1
        if c.zone == "signal" or (c.zone == "outer" and c.direction == "out"):
            armed = False
        elif c.zone == "inner" and c.direction == "in" and armed:
            return c.t
    return None


@dataclass
class RelayLog:
    crossings: list[Crossing] = field(default_factory=list)
    psb: list[PsbVerdict] = field(default_factory=list)
    ost_trip_t: float | None = None

    @property
    def swing_detected(self) -> bool:
        return any(v.is_swing for v in self.psb)


@dataclass(frozen=True)
class RelayConfig:
    blinders: BlinderSet
    dt_psb: float = DEFAULT_DT_PSB
    i_floor: float = DEFAULT_I_FLOOR
    z_base_ohm: float = 1.6

    def __post_init__(self) -> None:
        if self.dt_psb <= 0:
            raise InvalidInputError("dt_psb must be positive")


def evaluate(trajectory: list[tuple[float, Phasor | None]], config: RelayConfig) -> RelayLog:
    """Full relay pipeline over a timed impedance trajectory (ohm)."""
    crossings = detect_crossings(trajectory, config.blinders)
    verdicts = psb_evaluate(crossings, config.dt_psb)
    trip = ost_evaluate(crossings, verdicts)
    return RelayLog(crossings=crossings, psb=verdicts, ost_trip_t=trip)


def relay_log_jsonl(log: RelayLog) -> str:
    """Line-delimited export: {t, event, zone, verdict}."""
    rows = []
    for c in log.crossings:
        rows.append({"t": round(c.t, 9), "event": f"cross_{c.direction}", "zone": c.zone, "verdict": None})
    for v in log.psb:
        rows.append(
            {
                "t": round(v.t_middle, 9),
                "event": "psb",
                "zone": "middle",
                "verdict": "swing" if v.is_swing else ("malformed-fault" if v.malformed else "fault"),
                "transit_s": round(v.transit, 9),
            }
        )
    if log.ost_trip_t is not None:
        rows.append({"t": round(log.ost_trip_t, 9), "event": "ost_trip", "zone": "inner", "verdict": "trip"})
    rows.sort(key=lambda r: r["t"])
    return "\n".join(json.dumps(r) for r in rows) + ("\n" if rows else "")


@dataclass(frozen=True)
class BlinderBound:
    """Maximum resistive reach of the current-limited impedance circle:
    reverse blinders must sit strictly below it to be crossed."""

    pu: float
    ohm: float


def reverse_blinder_bound(
    x_g1: float, theta_g1: float, v_g: float, i_max: float, z_base_ohm: float
) -> BlinderBound:
    """Circle center real part plus radius: x_g1*cos(theta_g1) + v_g/i_max."""
    if i_max <= 0:
        raise InvalidInputError("i_max must be positive")
    bound_pu = x_g1 * math.cos(theta_g1) + v_g / i_max
    return BlinderBound(pu=bound_pu, ohm=bound_pu * z_base_ohm)


def check_reverse_blinders(blinders: BlinderSet, bound_ohm: float) -> dict[str, bool]:
    """True per zone when its reverse (right) blinder lies strictly below
    the reach bound, i.e. a half-revolution swing will cross it."""
    return {name: zone.right < bound_ohm for name, zone in blinders.zones()}


# Shipped presets. sg-default brackets the synchronous-machine swing locus:
# its right blinders map to rotor angles of roughly 105/120/146 degrees on
# the studied network (the inner one past the post-fault saddle, so only
# unstable swings reach it), and its bottom reactance cap keeps the
# low-lying current-limited circle of a GFM source out of the zones.
# gfm-extended moves the reverse blinders inside the circle reach bound.
PRESETS: dict[str, BlinderSet] = {
    "sg-default": BlinderSet(
        outer=BlinderZone(right=0.40, left=-2.0, x_top=3.0, x_bottom=-0.3),
        middle=BlinderZone(right=0.30, left=-1.7, x_top=3.0, x_bottom=-0.3),
        inner=BlinderZone(right=0.16, left=-1.4, x_top=3.0, x_bottom=-0.3),
    ),
    "gfm-extended": BlinderSet(
        outer=BlinderZone(right=0.95, left=-2.0, x_top=3.0, x_bottom=-3.0),
        middle=BlinderZone(right=0.90, left=-1.7, x_top=3.0, x_bottom=-3.0),
        inner=BlinderZone(right=0.85, left=-1.4, x_top=3.0, x_bottom=-3.0),
    ),
}


def blinder_preset(name: str) -> BlinderSet:
    try:
        return PRESETS[name]
    except KeyError:
        raise InvalidInputError(
            f"unknown blinder preset {name!r}; available: {sorted(PRESETS)}"
        ) from None
