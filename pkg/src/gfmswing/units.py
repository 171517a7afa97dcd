"""Per-unit system, phasor helpers and angle utilities.

Phasors are plain Python ``complex`` values in per unit; this module only
adds the constructors/accessors and the per-unit bookkeeping that the rest
of the package shares.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi

Phasor = complex


class InvalidInputError(ValueError):
    """Raised when an operation is called with inputs outside its domain."""


def polar(magnitude: float, angle_rad: float) -> Phasor:
    """Phasor from magnitude and angle (rad)."""
    return cmath.rect(magnitude, angle_rad)


def angle(z: Phasor) -> float:
    """Four-quadrant angle in (-pi, pi]."""
    a = cmath.phase(z)
    # cmath.phase maps the negative real axis to +pi already; normalize -pi.
    return math.pi if a == -math.pi else a


def require_finite(z: Phasor, name: str = "phasor") -> Phasor:
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise InvalidInputError(f"{name} must be finite, got {z!r}")
    return z


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.fmod(a + math.pi, TWO_PI)
    if w <= 0.0:
        w += TWO_PI
    return w - math.pi


def angle_diff(a: float, b: float) -> float:
    """Smallest signed difference a - b, wrapped to (-pi, pi]."""
    return wrap_angle(a - b)


@dataclass(frozen=True)
class PerUnitBase:
    """Machine base quantities; impedance base follows from V and S."""

    s_base_mw: float = 250.0
    v_base_kv: float = 20.0
    f0_hz: float = 50.0

    def __post_init__(self) -> None:
        if self.s_base_mw <= 0 or self.v_base_kv <= 0 or self.f0_hz <= 0:
            raise InvalidInputError("base quantities must be positive")

    @property
    def z_base_ohm(self) -> float:
        return self.v_base_kv**2 / self.s_base_mw

    @property
    def omega0(self) -> float:
        return TWO_PI * self.f0_hz


_BASE_ATTR = {"impedance": "z_base_ohm", "power": "s_base_mw", "voltage": "v_base_kv"}


def pu_convert(value: float, base: PerUnitBase, kind: str) -> float:
    """Physical value (ohm, MW or kV) to per unit on ``base``."""
    try:
        ref = getattr(base, _BASE_ATTR[kind])
    except KeyError:
        raise InvalidInputError(f"unknown per-unit kind {kind!r}") from None
    return value / ref


def from_pu(value: float, base: PerUnitBase, kind: str) -> float:
    """Inverse of :func:`pu_convert`."""
    try:
        ref = getattr(base, _BASE_ATTR[kind])
    except KeyError:
        raise InvalidInputError(f"unknown per-unit kind {kind!r}") from None
    return value * ref


def parallel_reactance(xs: list[float]) -> float:
    """Parallel combination 1 / sum(1/x) of positive reactances."""
    if not xs:
        raise InvalidInputError("parallel_reactance needs at least one reactance")
    for x in xs:
        if x <= 0:
            raise InvalidInputError(f"reactances must be positive, got {x}")
    return 1.0 / sum(1.0 / x for x in xs)
