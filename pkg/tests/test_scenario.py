import math

import pytest

from gfmswing.machines import GfmParams, SgParams
from gfmswing.network import ApplyFault, ClearFault
from gfmswing.scenario import (
    SchemaError,
    list_presets,
    parse_scenario,
    parse_scenario_dict,
    scenario_to_dict,
)


def test_shipped_presets_parse():
    assert set(list_presets()) == {
        "sg-smib",
        "table1-inertial",
        "table1-noninertial",
        "wscc9-gfm",
        "wscc9-sg",
    }
    for name in list_presets():
        parse_scenario(name)


def test_table1_noninertial_values():
    sc = parse_scenario("table1-noninertial")
    assert sc.network.x_s == 0.30
    assert sc.network.x_g1 == 0.35
    assert sc.network.x_g2 == 0.35
    assert sc.network.x_gnd == 0.05
    assert isinstance(sc.machine, GfmParams)
    assert sc.machine.k_p == 0.01
    assert sc.machine.k_q == 0.05
    assert sc.machine.i_max == 1.2
    assert sc.t_clear - sc.t_fault == pytest.approx(0.14, abs=1e-12)
    assert sc.base.z_base_ohm == pytest.approx(1.6)
    assert sc.relay is not None and sc.relay_preset_name == "gfm-extended"


def test_sg_preset_machine():
    sc = parse_scenario("sg-smib")
    assert isinstance(sc.machine, SgParams)
    assert sc.machine.h == 3.5
    assert sc.machine.e_mag is None  # resolved by the pre-fault load flow


def test_empty_document_rejected(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    with pytest.raises(SchemaError):
        parse_scenario(p)
    with pytest.raises(SchemaError):
        parse_scenario_dict({})


def test_domain_error_names_key():
    doc = {
        "machine": {"type": "gfm_noninertial"},
        "sim": {"t_end": 2.0},
        "network": {"x_gnd": -0.05},
    }
    with pytest.raises(SchemaError) as err:
        parse_scenario_dict(doc)
    assert "x_gnd" in str(err.value)


def test_unknown_key_reports_path():
    doc = {"machine": {"type": "sg", "inertia": 3.5}, "sim": {"t_end": 2.0}}
    with pytest.raises(SchemaError) as err:
        parse_scenario_dict(doc)
    assert "machine" in str(err.value) and "inertia" in str(err.value)


def test_unknown_top_level_key():
    with pytest.raises(SchemaError) as err:
        parse_scenario_dict({"machine": {"type": "sg"}, "sim": {"t_end": 1.0}, "grid": 1.0})
    assert "grid" in str(err.value)


def test_events_must_be_ordered():
    doc = {
        "machine": {"type": "gfm_noninertial"},
        "sim": {"t_end": 5.0},
        "events": [
            {"t": 2.0, "kind": "clear_fault"},
            {"t": 1.0, "kind": "apply_fault"},
        ],
    }
    with pytest.raises(SchemaError) as err:
        parse_scenario_dict(doc)
    assert "time-ordered" in str(err.value)


def test_t_end_must_cover_events():
    doc = {
        "machine": {"type": "gfm_noninertial"},
        "sim": {"t_end": 1.05},
        "events": [
            {"t": 1.0, "kind": "apply_fault"},
            {"t": 1.1, "kind": "clear_fault"},
        ],
    }
    with pytest.raises(SchemaError) as err:
        parse_scenario_dict(doc)
    assert "t_end" in str(err.value)


def test_defaults_are_echoed():
    sc = parse_scenario_dict({"machine": {"type": "gfm_noninertial"}, "sim": {"t_end": 2.0}})
    assert any("base" in d for d in sc.defaults_applied)
    assert any("grid_voltage" in d for d in sc.defaults_applied)
    assert any("machine.k_p" in d for d in sc.defaults_applied)


def test_relay_preset_and_explicit_mutually_exclusive():
    doc = {
        "machine": {"type": "gfm_noninertial"},
        "sim": {"t_end": 2.0},
        "relay": {
            "preset": "gfm-extended",
            "blinders": {
                "outer": {"right": 1.0, "left": -1.0},
                "middle": {"right": 0.9, "left": -0.9},
                "inner": {"right": 0.8, "left": -0.8},
            },
        },
    }
    with pytest.raises(SchemaError):
        parse_scenario_dict(doc)


def test_with_fct_override():
    sc = parse_scenario("table1-noninertial")
    sc2 = sc.with_fct(0.10)
    assert sc2.t_clear - sc2.t_fault == pytest.approx(0.10)
    assert sc.t_clear - sc.t_fault == pytest.approx(0.14)  # original untouched


def test_round_trip_through_resolved_dict():
    sc = parse_scenario("table1-noninertial")
    doc = scenario_to_dict(sc)
    sc2 = parse_scenario_dict(doc)
    assert scenario_to_dict(sc2) == doc
    # summary embedding form
    sc3 = parse_scenario_dict({"scenario": doc})
    assert scenario_to_dict(sc3) == doc


def test_wscc9_requires_fault_events():
    doc = {
        "topology": "wscc9",
        "machine": {"type": "gfm_noninertial"},
        "sim": {"t_end": 5.0},
    }
    with pytest.raises(SchemaError) as err:
        parse_scenario_dict(doc)
    assert "apply_fault" in str(err.value)


def test_wscc9_rejects_custom_network():
    doc = {
        "topology": "wscc9",
        "machine": {"type": "gfm_noninertial"},
        "network": {"x_s": 0.3},
        "sim": {"t_end": 5.0},
        "events": [
            {"t": 1.0, "kind": "apply_fault"},
            {"t": 1.1, "kind": "clear_fault"},
        ],
    }
    with pytest.raises(SchemaError):
        parse_scenario_dict(doc)


def test_missing_scenario_file():
    with pytest.raises(SchemaError):
        parse_scenario("definitely-not-a-preset")
