"""Network reductions and solvers.

Single-machine studies use a per-stage Thevenin equivalent of everything
beyond the converter terminal; the multi-machine study uses a nodal
admittance solve. Reductions are exact (complex arithmetic), so the pure
reactance defaults reproduce the textbook series/parallel formulas.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .units import InvalidInputError, Phasor, parallel_reactance, polar


class ConfigurationError(ValueError):
    """Network or scenario configuration that cannot be solved."""


class Stage(enum.Enum):
    PRE_FAULT = "pre_fault"
    DURING_FAULT = "during_fault"
    POST_FAULT = "post_fault"


@dataclass(frozen=True)
class NetworkParams:
    """Single-machine network: machine-side series reactance x_s, two
    parallel lines to the infinite bus, fault grounding reactance.

    x_f documents the converter filter; the voltage loop regulates the
    node behind x_s, so x_f never enters the equivalents. theta_g1 is the
    impedance angle of line 1 (pi/2 = lossless).
    """

    x_s: float = 0.30
    x_f: float = 0.20
    x_g1: float = 0.35
    x_g2: float = 0.35
    x_gnd: float = 0.05
    theta_g1: float = math.pi / 2.0
    use_paper_vge_formula: bool = False

    def __post_init__(self) -> None:
        for name in ("x_s", "x_f", "x_g1", "x_g2", "x_gnd"):
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be positive")
        if not (0.0 < self.theta_g1 <= math.pi / 2.0):
            raise InvalidInputError("theta_g1 must lie in (0, pi/2]")

    @property
    def z_line1(self) -> complex:
        return polar(self.x_g1, self.theta_g1)


@dataclass(frozen=True)
class StageEquivalent:
    """Thevenin equivalent seen by the machine source: series impedance
    z_l (machine reactance included) to a source v_grid_eq."""

    z_l: complex
    v_grid_eq: complex
    stage: Stage

    @property
    def x_l(self) -> float:
        return self.z_l.imag

    @property
    def r_l(self) -> float:
        return self.z_l.real

    @property
    def v_ge_mag(self) -> float:
        return abs(self.v_grid_eq)


# --- simulation events ---------------------------------------------------------


@dataclass(frozen=True)
class ApplyFault:
    """Three-phase fault through x_gnd on line 2, ``fraction`` of the way
    from the terminal bus (0 = at the bus end, the studied case)."""

    t: float
    x_gnd: float | None = None
    fraction: float = 0.0

    def __post_init__(self) -> None:
        if self.t < 0:
            raise InvalidInputError("event time must be non-negative")
        if not (0.0 <= self.fraction < 1.0):
            raise InvalidInputError("fault fraction must lie in [0, 1)")


@dataclass(frozen=True)
class ClearFault:
    """Clear the fault by tripping line 2 (both breakers)."""

    t: float

    def __post_init__(self) -> None:
        if self.t < 0:
            raise InvalidInputError("event time must be non-negative")


@dataclass(frozen=True)
class SetPoint:
    """Reference-value change (p_ref, q_ref, v_mref or p_m)."""

    t: float
    name: str
    value: float

    _ALLOWED = ("p_ref", "q_ref", "v_mref", "p_m")

    def __post_init__(self) -> None:
        if self.t < 0:
            raise InvalidInputError("event time must be non-negative")
        if self.name not in self._ALLOWED:
            raise InvalidInputError(f"setpoint {self.name!r} not one of {self._ALLOWED}")


SimEvent = ApplyFault | ClearFault | SetPoint


def stage_equivalent(
    network: NetworkParams,
    stage: Stage,
    v_g: float,
    x_gnd: float | None = None,
    fraction: float = 0.0,
) -> StageEquivalent:
    """Per-stage Thevenin equivalent seen from the machine source node.

    Pre-fault: both lines in parallel. During fault: fault shunt on line 2,
    reduced by exact superposition (the equivalent source magnitude drops).
    Post-fault: line 2 tripped.
    """
    z_s = complex(0.0, network.x_s)
    z1 = network.z_line1
    z2 = complex(0.0, network.x_g2)
    if stage is Stage.PRE_FAULT:
        z_lines = z1 * z2 / (z1 + z2)
        return StageEquivalent(z_s + z_lines, complex(v_g), stage)
    if stage is Stage.POST_FAULT:
        return StageEquivalent(z_s + z1, complex(v_g), stage)

    x_f = network.x_gnd if x_gnd is None else x_gnd
    if x_f <= 0:
        raise InvalidInputError("fault reactance must be positive")
    z_f = complex(0.0, x_f)
    if fraction == 0.0:
        # Fault node coincides with the terminal bus.
        z_lines = z1 * z2 / (z1 + z2)
        if network.use_paper_vge_formula:
            # Literal printed divider, kept for comparison; exceeds v_g.
            xp = parallel_reactance([network.x_g1, network.x_g2, x_f])
            v_th = complex(v_g * x_f / xp)
        else:
            v_th = v_g * z_f / (z_f + z_lines)
        z_th = z_lines * z_f / (z_lines + z_f)
        return StageEquivalent(z_s + z_th, v_th, stage)

    # Intermediate fault: two-node elimination (terminal bus, fault node).
    z_a = complex(0.0, network.x_g2 * fraction)
    z_b = complex(0.0, network.x_g2 * (1.0 - fraction))
    y = np.array(
        [
            [1.0 / z1 + 1.0 / z_a, -1.0 / z_a],
            [-1.0 / z_a, 1.0 / z_a + 1.0 / z_b + 1.0 / z_f],
        ],
        dtype=complex,
    )
    i_src = np.array([v_g / z1, v_g / z_b], dtype=complex)
    try:
        v_oc = np.linalg.solve(y, i_src)[0]
        z_th = np.linalg.inv(y)[0, 0]
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError(f"singular fault-stage network: {exc}") from exc
    return StageEquivalent(z_s + z_th, complex(v_oc), stage)


@dataclass(frozen=True)
class TwoNodeSolution:
    """Machine current, terminal voltage behind the virtual resistance,
    and the active/reactive power delivered at that terminal."""

    i: Phasor
    v_t: Phasor
    p: float
    q: float


def solve_two_node(source: Phasor, v_grid_eq: Phasor, x_l: float, r_e: float, r_l: float = 0.0) -> TwoNodeSolution:
    """Solve source --[r_e + r_l + j x_l]-- v_grid_eq exactly."""
    if x_l <= 0:
        raise InvalidInputError("x_l must be positive")
    if r_e < 0:
        raise InvalidInputError("r_e must be non-negative")
    i = (source - v_grid_eq) / complex(r_e + r_l, x_l)
    v_t = source - r_e * i
    s = v_t * i.conjugate()
    return TwoNodeSolution(i=i, v_t=v_t, p=s.real, q=s.imag)


# --- multi-machine nodal network ------------------------------------------------


@dataclass(frozen=True)
class Branch:
    name: str
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0


@dataclass
class MultiMachineNetwork:
    """Bus/branch model on a common system base, with constant-impedance
    loads and machines attached behind their internal reactances."""

    n_bus: int
    branches: list[Branch]
    loads: dict[int, complex] = field(default_factory=dict)  # S at nominal V
    base_mva: float = 100.0

    def __post_init__(self) -> None:
        for br in self.branches:
            if not (0 <= br.from_bus < self.n_bus and 0 <= br.to_bus < self.n_bus):
                raise ConfigurationError(f"branch {br.name} references an unknown bus")
            if br.x == 0 and br.r == 0:
                raise ConfigurationError(f"branch {br.name} has zero impedance")
        if not self._connected(set()):
            raise ConfigurationError("network graph is not connected")

    def _connected(self, removed: set[str]) -> bool:
        adj: dict[int, set[int]] = {k: set() for k in range(self.n_bus)}
        for br in self.branches:
            if br.name in removed:
                continue
            adj[br.from_bus].add(br.to_bus)
            adj[br.to_bus].add(br.from_bus)
        seen = {0}
        frontier = [0]
        while frontier:
            seen.update(nxt := {b for f in frontier for b in adj[f] if b not in seen})
            frontier = list(nxt)
        return len(seen) == self.n_bus

    def ybus(self, removed_branches: set[str] = frozenset()) -> np.ndarray:
        y = np.zeros((self.n_bus, self.n_bus), dtype=complex)
        for br in self.branches:
            if br.name in removed_branches:
                continue
            ys = 1.0 / complex(br.r, br.x)
            ysh = complex(0.0, br.b / 2.0)
            f, t = br.from_bus, br.to_bus
            y[f, f] += ys + ysh
            y[t, t] += ys + ysh
            y[f, t] -= ys
            y[t, f] -= ys
        return y


def solve_nodal(y: np.ndarray, injections: np.ndarray) -> np.ndarray:
    """Bus voltages from Y V = I; raises on a singular (ungrounded) matrix."""
    try:
        v = np.linalg.solve(y, injections)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError(f"singular admittance matrix: {exc}") from exc
    residual = np.abs(y @ v - injections).max() if len(injections) else 0.0
    if not np.isfinite(v).all() or residual > 1e-8:
        raise ConfigurationError(f"nodal solve did not converge (residual {residual:.2e})")
    return v


def newton_power_flow(
    net: MultiMachineNetwork,
    slack_bus: int,
    pv_buses: dict[int, tuple[float, float]],  # bus -> (P_gen pu, V setpoint)
    slack_v: float = 1.04,
    tol: float = 1e-10,
    max_iter: int = 40,
) -> np.ndarray:
    """Small Newton-Raphson power flow used only for initialization."""
    y = net.ybus()
    n = net.n_bus
    s_sched = np.zeros(n, dtype=complex)
    for bus, s in net.loads.items():
        s_sched[bus] -= s
    for bus, (p, _v) in pv_buses.items():
        s_sched[bus] += p

    v = np.ones(n, dtype=complex) * 1.0
    v[slack_bus] = slack_v
    for bus, (_p, vset) in pv_buses.items():
        v[bus] = vset

    pq = [k for k in range(n) if k != slack_bus and k not in pv_buses]
    pv = sorted(pv_buses)
    ang_idx = pv + pq  # unknown angles
    mag_idx = pq  # unknown magnitudes

    th = np.angle(v)
    vm = np.abs(v)
    for _ in range(max_iter):
        vc = vm * np.exp(1j * th)
        s_calc = vc * np.conj(y @ vc)
        mis = np.concatenate(
            [np.real(s_calc - s_sched)[ang_idx], np.imag(s_calc - s_sched)[mag_idx]]
        )
        if np.abs(mis).max() < tol:
            return vc
        # Numerical Jacobian: tiny system, clarity over speed.
        m = len(ang_idx) + len(mag_idx)
        jac = np.zeros((m, m))
        eps = 1e-7
        for col, k in enumerate(ang_idx):
            th2 = th.copy()
            th2[k] += eps
            vc2 = vm * np.exp(1j * th2)
            s2 = vc2 * np.conj(y @ vc2)
            d = (s2 - s_calc) / eps
            jac[:, col] = np.concatenate([np.real(d)[ang_idx], np.imag(d)[mag_idx]])
        for col, k in enumerate(mag_idx):
            vm2 = vm.copy()
            vm2[k] += eps
            vc2 = vm2 * np.exp(1j * th)
            s2 = vc2 * np.conj(y @ vc2)
            d = (s2 - s_calc) / eps
            jac[:, len(ang_idx) + col] = np.concatenate(
                [np.real(d)[ang_idx], np.imag(d)[mag_idx]]
            )
        try:
            dx = np.linalg.solve(jac, -mis)
        except np.linalg.LinAlgError as exc:
            raise ConfigurationError(f"power flow Jacobian singular: {exc}") from exc
        th[ang_idx] += dx[: len(ang_idx)]
        vm[mag_idx] += dx[len(ang_idx):]
    raise ConfigurationError("power flow did not converge")


def wscc9_network() -> MultiMachineNetwork:
    """Standard WSCC 3-machine 9-bus system (100 MVA base)."""
    branches = [
        Branch("T1-4", 0, 3, 0.0, 0.0576, 0.0),
        Branch("L4-6", 3, 5, 0.017, 0.092, 0.158),
        Branch("L6-9", 5, 8, 0.039, 0.17, 0.358),
        Branch("T3-9", 2, 8, 0.0, 0.0586, 0.0),
        Branch("L8-9", 7, 8, 0.0119, 0.1008, 0.209),
        Branch("L7-8", 6, 7, 0.0085, 0.072, 0.149),
        Branch("T2-7", 1, 6, 0.0, 0.0625, 0.0),
        Branch("L5-7", 4, 6, 0.032, 0.161, 0.306),
        Branch("L4-5", 3, 4, 0.01, 0.085, 0.176),
    ]
    loads = {4: complex(1.25, 0.50), 5: complex(0.90, 0.30), 7: complex(1.00, 0.35)}
    return MultiMachineNetwork(n_bus=9, branches=branches, loads=loads)
