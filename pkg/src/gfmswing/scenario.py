"""Scenario files: YAML schema, strict validation with key-path errors,
defaults echoing, and the named presets shipped with the package.

A scenario either describes the single-machine system (base + network +
machine + events) or selects the wscc9 topology with a machine choice for
bus 2. A summary document produced by a run embeds the fully resolved
scenario under the key "scenario"; feeding that file back reproduces the
run byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .machines import GfmParams, SgParams
from .network import ApplyFault, ClearFault, NetworkParams, SetPoint, SimEvent
from .relay import (
    DEFAULT_DT_PSB,
    DEFAULT_I_FLOOR,
    BlinderSet,
    BlinderZone,
    RelayConfig,
    blinder_preset,
)
from .units import InvalidInputError, PerUnitBase


class SchemaError(ValueError):
    """Scenario document violates the schema; message carries the key path."""


@dataclass
class Scenario:
    name: str
    kind: str  # "smib" | "wscc9"
    base: PerUnitBase
    machine: GfmParams | SgParams
    events: list[SimEvent]
    dt: float
    t_end: float
    grid_voltage: float = 1.0
    network: NetworkParams | None = None
    relay: RelayConfig | None = None
    relay_preset_name: str | None = None
    dispatch_p: float = 1.0  # wscc9 bus-2 dispatch
    outputs: dict[str, str] = field(default_factory=dict)
    defaults_applied: list[str] = field(default_factory=list)

    @property
    def t_fault(self) -> float | None:
        return next((e.t for e in self.events if isinstance(e, ApplyFault)), None)

    @property
    def t_clear(self) -> float | None:
        return next((e.t for e in self.events if isinstance(e, ClearFault)), None)

    def with_fct(self, fct: float) -> "Scenario":
        """Copy with the clearing event moved to fault time + fct."""
        t_f = self.t_fault
        if t_f is None:
            raise SchemaError("scenario has no fault event; cannot override FCT")
        events = [ClearFault(t=t_f + fct) if isinstance(e, ClearFault) else e for e in self.events]
        if not any(isinstance(e, ClearFault) for e in events):
            events.append(ClearFault(t=t_f + fct))
        out = _copy(self)
        out.events = sorted(events, key=lambda e: e.t)
        return out


def _copy(sc: Scenario) -> Scenario:
    import copy

    return copy.copy(sc)


# --- validation helpers ---------------------------------------------------------


def _require_mapping(node, path: str) -> dict:
    if not isinstance(node, dict):
        raise SchemaError(f"{path}: expected a mapping, got {type(node).__name__}")
    return node

def _check_keys(node: dict, path: str, allowed: set[str], required: set[str] = frozenset()) -> None:
    unknown = set(node) - allowed
    if unknown:
        raise SchemaError(f"{path}: unknown key(s) {sorted(unknown)}; allowed: {sorted(allowed)}")
    missing = required - set(node)
    if missing:
        raise SchemaError(f"{path}: missing required key(s) {sorted(missing)}")


def _number(node: dict, key: str, path: str, default=None):
    if key not in node:
        if default is None:
            raise SchemaError(f"{path}.{key}: required number missing")
        return default
    v = node[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{path}.{key}: expected a number, got {v!r}")
    return float(v)


# --- section parsers ------------------------------------------------------------


def _parse_base(node, defaults: list[str]) -> PerUnitBase:
    if node is None:
        defaults.append("base = 250 MW / 20 kV / 50 Hz")
        return PerUnitBase()
    node = _require_mapping(node, "base")
    _check_keys(node, "base", {"s_base_mw", "v_base_kv", "f0_hz"})
    for key, dflt in (("s_base_mw", 250.0), ("v_base_kv", 20.0), ("f0_hz", 50.0)):
        if key not in node:
            defaults.append(f"base.{key} = {dflt}")
    try:
        return PerUnitBase(
            s_base_mw=_number(node, "s_base_mw", "base", 250.0),
            v_base_kv=_number(node, "v_base_kv", "base", 20.0),
            f0_hz=_number(node, "f0_hz", "base", 50.0),
        )
    except InvalidInputError as exc:
        raise SchemaError(f"base: {exc}") from exc


_NETWORK_KEYS = {"x_s", "x_f", "x_g1", "x_g2", "x_gnd", "theta_g1_deg", "use_paper_vge_formula"}


def _parse_network(node, defaults: list[str]) -> NetworkParams:
    import math

    if node is None:
        defaults.append("network = table-1 reactances")
        return NetworkParams()
    node = _require_mapping(node, "network")
    _check_keys(node, "network", _NETWORK_KEYS)
    kwargs = {}
    for key in ("x_s", "x_f", "x_g1", "x_g2", "x_gnd"):
        if key in node:
            kwargs[key] = _number(node, key, "network")
        else:
            defaults.append(f"network.{key} = {getattr(NetworkParams(), key)}")
    if "theta_g1_deg" in node:
        kwargs["theta_g1"] = math.radians(_number(node, "theta_g1_deg", "network"))
    if "use_paper_vge_formula" in node:
        flag = node["use_paper_vge_formula"]
        if not isinstance(flag, bool):
            raise SchemaError("network.use_paper_vge_formula: expected a boolean")
        kwargs["use_paper_vge_formula"] = flag
    try:
        return NetworkParams(**kwargs)
    except InvalidInputError as exc:
        raise SchemaError(f"network: {exc}") from exc


_GFM_KEYS = {"type", "k_p", "k_q", "p_ref", "q_ref", "v_mref", "i_max", "w_p", "w_q"}
_SG_KEYS = {"type", "h", "d", "x_internal", "e_mag", "p_m"}


def _parse_machine(node, defaults: list[str]) -> GfmParams | SgParams:
    node = _require_mapping(node, "machine")
    mtype = node.get("type")
    if mtype in ("gfm_noninertial", "gfm_inertial"):
        _check_keys(node, "machine", _GFM_KEYS, {"type"})
        kwargs = {"inertial": mtype == "gfm_inertial"}
        ref = GfmParams(inertial=kwargs["inertial"])
        for key in _GFM_KEYS - {"type"}:
            if key in node:
                kwargs[key] = _number(node, key, "machine")
            elif key in ("w_p", "w_q") and mtype == "gfm_noninertial":
                continue
            else:
                defaults.append(f"machine.{key} = {getattr(ref, key)}")
        try:
            return GfmParams(**kwargs)
        except InvalidInputError as exc:
            raise SchemaError(f"machine: {exc}") from exc
    if mtype == "sg":
        _check_keys(node, "machine", _SG_KEYS, {"type"})
        kwargs = {}
        ref = SgParams()
        for key in _SG_KEYS - {"type"}:
            if key in node:
                kwargs[key] = _number(node, key, "machine")
            elif key != "e_mag":
                defaults.append(f"machine.{key} = {getattr(ref, key)}")
        try:
            return SgParams(**kwargs)
        except InvalidInputError as exc:
            raise SchemaError(f"machine: {exc}") from exc
    raise SchemaError(
        f"machine.type: expected one of gfm_noninertial|gfm_inertial|sg, got {mtype!r}"
    )


_EVENT_KINDS = {"apply_fault", "clear_fault", "set_point"}


def _parse_events(node, path: str = "events") -> list[SimEvent]:
    if node is None:
        return []
    if not isinstance(node, list):
        raise SchemaError(f"{path}: expected a list of events")
    events: list[SimEvent] = []
    for idx, item in enumerate(node):
        p = f"{path}[{idx}]"
        item = _require_mapping(item, p)
        kind = item.get("kind")
        if kind not in _EVENT_KINDS:
            raise SchemaError(f"{p}.kind: expected one of {sorted(_EVENT_KINDS)}, got {kind!r}")
        try:
            if kind == "apply_fault":
                _check_keys(item, p, {"kind", "t", "x_gnd", "fraction"}, {"t"})
                events.append(
                    ApplyFault(
                        t=_number(item, "t", p),
                        x_gnd=_number(item, "x_gnd", p) if "x_gnd" in item else None,
                        fraction=_number(item, "fraction", p, 0.0),
                    )
                )
            elif kind == "clear_fault":
                _check_keys(item, p, {"kind", "t"}, {"t"})
                events.append(ClearFault(t=_number(item, "t", p)))
            else:
                _check_keys(item, p, {"kind", "t", "name", "value"}, {"t", "name", "value"})
                events.append(SetPoint(t=_number(item, "t", p), name=str(item["name"]), value=_number(item, "value", p)))
        except InvalidInputError as exc:
            raise SchemaError(f"{p}: {exc}") from exc
    times = [e.t for e in events]
    if times != sorted(times):
        raise SchemaError(f"{path}: events must be time-ordered")
    return events


def _parse_blinder_zone(node, path: str) -> BlinderZone:
    node = _require_mapping(node, path)
    _check_keys(node, path, {"right", "left", "x_top", "x_bottom"}, {"right", "left"})
    try:
        return BlinderZone(
            right=_number(node, "right", path),
            left=_number(node, "left", path),
            x_top=_number(node, "x_top", path) if "x_top" in node else None,
            x_bottom=_number(node, "x_bottom", path) if "x_bottom" in node else None,
        )
    except InvalidInputError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def _parse_relay(node, base: PerUnitBase, defaults: list[str]) -> tuple[RelayConfig | None, str | None]:
    if node is None:
        return None, None
    node = _require_mapping(node, "relay")
    _check_keys(node, "relay", {"preset", "blinders", "dt_psb", "i_floor", "z_base_ohm"})
    preset_name = None
    if "preset" in node and "blinders" in node:
        raise SchemaError("relay: give either a preset or explicit blinders, not both")
    if "preset" in node:
        preset_name = str(node["preset"])
        try:
            blinders = blinder_preset(preset_name)
        except InvalidInputError as exc:
            raise SchemaError(f"relay.preset: {exc}") from exc
    elif "blinders" in node:
        bnode = _require_mapping(node["blinders"], "relay.blinders")
        _check_keys(bnode, "relay.blinders", {"outer", "middle", "inner"}, {"outer", "middle", "inner"})
        try:
            blinders = BlinderSet(
                outer=_parse_blinder_zone(bnode["outer"], "relay.blinders.outer"),
                middle=_parse_blinder_zone(bnode["middle"], "relay.blinders.middle"),
                inner=_parse_blinder_zone(bnode["inner"], "relay.blinders.inner"),
            )
        except InvalidInputError as exc:
            raise SchemaError(f"relay.blinders: {exc}") from exc
    else:
        raise SchemaError("relay: needs a preset name or explicit blinders")
    if "dt_psb" not in node:
        defaults.append(f"relay.dt_psb = {DEFAULT_DT_PSB}")
    if "i_floor" not in node:
        defaults.append(f"relay.i_floor = {DEFAULT_I_FLOOR}")
    try:
        cfg = RelayConfig(
            blinders=blinders,
            dt_psb=_number(node, "dt_psb", "relay", DEFAULT_DT_PSB),
            i_floor=_number(node, "i_floor", "relay", DEFAULT_I_FLOOR),
            z_base_ohm=_number(node, "z_base_ohm", "relay", base.z_base_ohm),
        )
    except InvalidInputError as exc:
        raise SchemaError(f"relay: {exc}") from exc
    return cfg, preset_name


_TOP_KEYS = {
    "name",
    "topology",
    "base",
    "grid_voltage",
    "network",
    "machine",
    "dispatch_p",
    "events",
    "sim",
    "relay",
    "outputs",
}


def parse_scenario_dict(doc: dict, name_hint: str = "scenario") -> Scenario:
    """Validate a scenario mapping and apply defaults (echoed in the result)."""
    doc = _require_mapping(doc, "<root>")
    if not doc:
        raise SchemaError("<root>: empty scenario document")
    if "scenario" in doc:  # summary round-trip form
        return parse_scenario_dict(_require_mapping(doc["scenario"], "scenario"), name_hint)
    _check_keys(doc, "<root>", _TOP_KEYS, {"machine", "sim"})
    defaults: list[str] = []
    name = str(doc.get("name", name_hint))
    topology = doc.get("topology", "smib")
    if topology not in ("smib", "wscc9"):
        raise SchemaError(f"topology: expected smib or wscc9, got {topology!r}")

    base = _parse_base(doc.get("base"), defaults)
    machine = _parse_machine(doc.get("machine"), defaults)
    events = _parse_events(doc.get("events"))

    sim = _require_mapping(doc.get("sim"), "sim")
    _check_keys(sim, "sim", {"dt", "t_end"}, {"t_end"})
    if "dt" not in sim:
        defaults.append("sim.dt = 0.0005")
    dt = _number(sim, "dt", "sim", 0.0005)
    t_end = _number(sim, "t_end", "sim")
    if dt <= 0:
        raise SchemaError("sim.dt: must be positive")
    if t_end <= 0:
        raise SchemaError("sim.t_end: must be positive")
    if events and t_end <= max(e.t for e in events):
        raise SchemaError("sim.t_end: must exceed the last event time")

    grid_voltage = _number(doc, "grid_voltage", "<root>", 1.0)
    if "grid_voltage" not in doc:
        defaults.append("grid_voltage = 1.0")
    if grid_voltage <= 0:
        raise SchemaError("grid_voltage: must be positive")

    network = None
    if topology == "smib":
        network = _parse_network(doc.get("network"), defaults)
    elif doc.get("network") is not None:
        raise SchemaError("network: not configurable for the wscc9 topology preset")

    relay, preset_name = _parse_relay(doc.get("relay"), base, defaults)

    outputs = doc.get("outputs") or {}
    outputs = _require_mapping(outputs, "outputs") if outputs else {}
    _check_keys(outputs, "outputs", {"csv", "relay_log", "summary", "plot"})
    outputs = {k: str(v) for k, v in outputs.items()}

    dispatch_p = _number(doc, "dispatch_p", "<root>", 1.0)
    if topology == "wscc9":
        if "dispatch_p" not in doc:
            defaults.append("dispatch_p = 1.0")
        if not events or not any(isinstance(e, ApplyFault) for e in events):
            raise SchemaError("events: the wscc9 preset needs an apply_fault/clear_fault pair")
        if any(isinstance(e, SetPoint) for e in events):
            raise SchemaError("events: set_point events are not supported on the wscc9 preset")

    return Scenario(
        name=name,
        kind=topology,
        base=base,
        machine=machine,
        events=events,
        dt=dt,
        t_end=t_end,
        grid_voltage=grid_voltage,
        network=network,
        relay=relay,
        relay_preset_name=preset_name,
        dispatch_p=dispatch_p,
        outputs=outputs,
        defaults_applied=defaults,
    )


def parse_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario from a YAML (or summary JSON) file, or
    from a shipped preset name."""
    p = resolve_scenario_path(path)
    text = p.read_text()
    if not text.strip():
        raise SchemaError(f"{p}: empty scenario document")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"{p}: not valid YAML/JSON: {exc}") from exc
    if doc is None:
        raise SchemaError(f"{p}: empty scenario document")
    return parse_scenario_dict(doc, name_hint=p.stem)


def resolve_scenario_path(path: str | Path) -> Path:
    p = Path(path)
    if p.exists():
        return p
    preset = preset_dir() / f"{p.name}.yaml"
    if not p.suffix and preset.exists():
        return preset
    raise SchemaError(f"scenario file not found: {path} (and no preset of that name)")


def preset_dir() -> Path:
    return Path(resources.files("gfmswing") / "presets")


def list_presets() -> list[str]:
    return sorted(f.stem for f in preset_dir().glob("*.yaml"))


# --- resolved-scenario echo (summary embedding / round trip) ---------------------


def scenario_to_dict(sc: Scenario) -> dict:
    import math

    doc: dict = {
        "name": sc.name,
        "topology": sc.kind,
        "base": {
            "s_base_mw": sc.base.s_base_mw,
            "v_base_kv": sc.base.v_base_kv,
            "f0_hz": sc.base.f0_hz,
        },
        "grid_voltage": sc.grid_voltage,
        "sim": {"dt": sc.dt, "t_end": sc.t_end},
    }
    m = sc.machine
    if isinstance(m, GfmParams):
        doc["machine"] = {
            "type": "gfm_inertial" if m.inertial else "gfm_noninertial",
            "k_p": m.k_p,
            "k_q": m.k_q,
            "p_ref": m.p_ref,
            "q_ref": m.q_ref,
            "v_mref": m.v_mref,
            "i_max": m.i_max,
        }
        if m.inertial:
            doc["machine"]["w_p"] = m.w_p
            doc["machine"]["w_q"] = m.w_q
    else:
        doc["machine"] = {"type": "sg", "h": m.h, "d": m.d, "x_internal": m.x_internal, "p_m": m.p_m}
        if m.e_mag is not None:
            doc["machine"]["e_mag"] = m.e_mag
    if sc.network is not None:
        doc["network"] = {
            "x_s": sc.network.x_s,
            "x_f": sc.network.x_f,
            "x_g1": sc.network.x_g1,
            "x_g2": sc.network.x_g2,
            "x_gnd": sc.network.x_gnd,
            "theta_g1_deg": math.degrees(sc.network.theta_g1),
            "use_paper_vge_formula": sc.network.use_paper_vge_formula,
        }
    else:
        doc["dispatch_p"] = sc.dispatch_p
    evs = []
    for e in sc.events:
        if isinstance(e, ApplyFault):
            item = {"t": e.t, "kind": "apply_fault", "fraction": e.fraction}
            if e.x_gnd is not None:
                item["x_gnd"] = e.x_gnd
            evs.append(item)
        elif isinstance(e, ClearFault):
            evs.append({"t": e.t, "kind": "clear_fault"})
        else:
            evs.append({"t": e.t, "kind": "set_point", "name": e.name, "value": e.value})
    doc["events"] = evs
    if sc.relay is not None:
        zones = {}
        for zname, zone in sc.relay.blinders.zones():
            zd = {"right": zone.right, "left": zone.left}
            if zone.x_top is not None:
                zd["x_top"] = zone.x_top
            if zone.x_bottom is not None:
                zd["x_bottom"] = zone.x_bottom
            zones[zname] = zd
        doc["relay"] = {
            "blinders": zones,
            "dt_psb": sc.relay.dt_psb,
            "i_floor": sc.relay.i_floor,
            "z_base_ohm": sc.relay.z_base_ohm,
        }
    if sc.outputs:
        doc["outputs"] = dict(sc.outputs)
    return doc
