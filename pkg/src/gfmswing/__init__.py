"""Phasor-domain power-swing simulator and protection-relay emulator for
grid-forming converter and synchronous-generator sources."""

from .units import PerUnitBase, Phasor, from_pu, parallel_reactance, polar, pu_convert
from .machines import GfmParams, GfmState, SgParams, SgState
from .network import (
    ApplyFault,
    ClearFault,
    NetworkParams,
    SetPoint,
    Stage,
    StageEquivalent,
    solve_two_node,
    stage_equivalent,
)
from .engine import RunResult, TraceRecord, run_single_machine, trace_to_csv
from .relay import BlinderSet, BlinderZone, RelayConfig, RelayLog, blinder_preset, reverse_blinder_bound

__version__ = "0.1.0"

__all__ = [
    "ApplyFault",
    "BlinderSet",
    "BlinderZone",
    "ClearFault",
    "GfmParams",
    "GfmState",
    "NetworkParams",
    "PerUnitBase",
    "Phasor",
    "RelayConfig",
    "RelayLog",
    "RunResult",
    "SetPoint",
    "SgParams",
    "SgState",
    "Stage",
    "StageEquivalent",
    "TraceRecord",
    "blinder_preset",
    "from_pu",
    "parallel_reactance",
    "polar",
    "pu_convert",
    "reverse_blinder_bound",
    "run_single_machine",
    "solve_two_node",
    "stage_equivalent",
    "trace_to_csv",
]
