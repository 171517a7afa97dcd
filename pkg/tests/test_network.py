import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gfmswing.network import (
    ApplyFault,
    ClearFault,
    ConfigurationError,
    MultiMachineNetwork,
    NetworkParams,
    SetPoint,
    Stage,
    newton_power_flow,
    solve_nodal,
    solve_two_node,
    stage_equivalent,
    wscc9_network,
)
from gfmswing.units import InvalidInputError, polar

NET = NetworkParams()  # table-1 reactances
DEG = math.pi / 180.0


def thevenin_oracle_fault(net: NetworkParams, v_g: float) -> tuple[complex, complex]:
    """Independent route: nodal reduction of {two lines, fault shunt} seen
    from the terminal bus (fault at the bus end of line 2)."""
    y_lines = 1.0 / net.z_line1 + 1.0 / complex(0, net.x_g2)
    y_f = 1.0 / complex(0, net.x_gnd)
    i_src = v_g / net.z_line1 + v_g / complex(0, net.x_g2)
    v_oc = i_src / (y_lines + y_f)
    z_th = 1.0 / (y_lines + y_f)
    return v_oc, z_th


def test_stage_equivalent_pre_fault():
    eq = stage_equivalent(NET, Stage.PRE_FAULT, 1.0)
    assert eq.x_l == pytest.approx(0.475, abs=1e-12)
    assert eq.r_l == pytest.approx(0.0, abs=1e-15)
    assert abs(eq.v_grid_eq) == pytest.approx(1.0, abs=1e-12)


def test_stage_equivalent_during_fault():
    eq = stage_equivalent(NET, Stage.DURING_FAULT, 1.0)
    assert eq.x_l == pytest.approx(0.3389, abs=1e-4)
    assert abs(eq.v_grid_eq) == pytest.approx(0.2222, abs=1e-4)
    # cross-check against the independent nodal reduction
    v_oc, z_th = thevenin_oracle_fault(NET, 1.0)
    assert eq.v_grid_eq == pytest.approx(v_oc, abs=1e-12)
    assert eq.z_l == pytest.approx(complex(0, NET.x_s) + z_th, abs=1e-12)


def test_stage_equivalent_post_fault():
    eq = stage_equivalent(NET, Stage.POST_FAULT, 1.0)
    assert eq.x_l == pytest.approx(0.65, abs=1e-12)
    assert abs(eq.v_grid_eq) == pytest.approx(1.0, abs=1e-12)


def test_stage_equivalent_orderings():
    pre = stage_equivalent(NET, Stage.PRE_FAULT, 1.0)
    dur = stage_equivalent(NET, Stage.DURING_FAULT, 1.0)
    post = stage_equivalent(NET, Stage.POST_FAULT, 1.0)
    assert abs(dur.v_grid_eq) < abs(pre.v_grid_eq)
    assert post.x_l > pre.x_l


def test_intermediate_fault_fraction_limits():
    eq0 = stage_equivalent(NET, Stage.DURING_FAULT, 1.0, fraction=0.0)
    eq_eps = stage_equivalent(NET, Stage.DURING_FAULT, 1.0, fraction=1e-9)
    assert eq_eps.z_l == pytest.approx(eq0.z_l, abs=1e-6)
    assert eq_eps.v_grid_eq == pytest.approx(eq0.v_grid_eq, abs=1e-6)
    # fault further down the line is shallower: stronger equivalent source
    eq_mid = stage_equivalent(NET, Stage.DURING_FAULT, 1.0, fraction=0.5)
    assert abs(eq_mid.v_grid_eq) > abs(eq0.v_grid_eq)


def test_paper_vge_formula_switch():
    net = NetworkParams(use_paper_vge_formula=True)
    eq = stage_equivalent(net, Stage.DURING_FAULT, 1.0)
    # the literal printed divider evaluates above the grid voltage
    assert abs(eq.v_grid_eq) == pytest.approx(0.05 / 0.0388889, abs=1e-4)
    assert abs(eq.v_grid_eq) > 1.0


def test_network_params_validation():
    with pytest.raises(InvalidInputError):
        NetworkParams(x_gnd=-0.05)
    with pytest.raises(InvalidInputError):
        NetworkParams(theta_g1=0.0)
    with pytest.raises(InvalidInputError):
        stage_equivalent(NET, Stage.DURING_FAULT, 1.0, x_gnd=0.0)


def test_solve_two_node_zero_difference():
    sol = solve_two_node(complex(1.0), complex(1.0), 0.65, 0.3)
    assert abs(sol.i) == 0.0
    assert sol.p == 0.0 and sol.q == 0.0


def test_solve_two_node_limited_point():
    r_e = math.sqrt(2.0 / 1.44 - 0.65**2)
    sol = solve_two_node(polar(1.0, math.pi / 2), complex(1.0), 0.65, r_e)
    assert abs(sol.i) == pytest.approx(1.2, abs=1e-9)
    assert math.degrees(cmath.phase(sol.i)) == pytest.approx(101.527, abs=1e-3)
    assert sol.p == pytest.approx(-0.2398, abs=1e-4)


def test_solve_two_node_sine_power():
    sol = solve_two_node(polar(1.0, 40.54 * DEG), complex(1.0), 0.65, 0.0)
    assert sol.p == pytest.approx(1.0, abs=1e-4)


@settings(max_examples=200)
@given(
    st.floats(min_value=0.0, max_value=2 * math.pi),
    st.floats(min_value=0.1, max_value=1.5),
    st.floats(min_value=0.0, max_value=2.0),
    st.floats(min_value=0.1, max_value=1.2),
)
def test_two_node_active_power_balance(delta, x_l, r_e, v_ge):
    """Lossless reactance: source-terminal power equals grid-side power
    (the virtual resistance sits upstream of the terminal)."""
    sol = solve_two_node(polar(1.0, delta), complex(v_ge), x_l, r_e)
    p_grid = (complex(v_ge) * sol.i.conjugate()).real
    assert sol.p == pytest.approx(p_grid, abs=1e-9)


def test_nodal_reduces_to_two_node():
    """Machine behind (r_e + j x_a), line j x_b, grid source behind j x_c:
    the 2-bus nodal solve must match the series two-node solution."""
    src = polar(1.0, 70 * DEG)
    v_g = 1.0
    r_e, x_a, x_b, x_c = 0.4, 0.3, 0.2, 0.15
    z_m = complex(r_e, x_a)
    y = np.array(
        [
            [1 / z_m + 1 / complex(0, x_b), -1 / complex(0, x_b)],
            [-1 / complex(0, x_b), 1 / complex(0, x_b) + 1 / complex(0, x_c)],
        ],
        dtype=complex,
    )
    inj = np.array([src / z_m, v_g / complex(0, x_c)], dtype=complex)
    v = solve_nodal(y, inj)
    i_nodal = (src - v[0]) / z_m
    sol = solve_two_node(src, complex(v_g), x_a + x_b + x_c, r_e)
    assert i_nodal == pytest.approx(sol.i, abs=1e-12)


def test_nodal_zero_injection():
    net = wscc9_network()
    y = net.ybus()
    y[0, 0] += 1.0  # ground the reference so the matrix is regular
    v = solve_nodal(y, np.zeros(9, dtype=complex))
    assert np.abs(v).max() == 0.0


def test_nodal_singular_matrix():
    # pure series branch with no shunt anywhere: floating network
    net = MultiMachineNetwork(
        n_bus=2, branches=[type(net_b := wscc9_network().branches[0])("b", 0, 1, 0.0, 0.1, 0.0)]
    )
    with pytest.raises(ConfigurationError):
        solve_nodal(net.ybus(), np.array([1.0, -1.0], dtype=complex))


def test_wscc9_power_flow():
    net = wscc9_network()
    v = newton_power_flow(net, slack_bus=0, pv_buses={1: (1.63, 1.025), 2: (0.85, 1.025)})
    assert np.abs(v).min() > 0.9 and np.abs(v).max() < 1.1
    # scheduled injections reproduced
    s = v * np.conj(net.ybus() @ v)
    assert s[1].real - 0.0 == pytest.approx(1.63, abs=1e-8)
    assert s[4].real == pytest.approx(-1.25, abs=1e-8)


def test_wscc9_connected_and_branch_validation():
    net = wscc9_network()
    assert net.n_bus == 9
    with pytest.raises(ConfigurationError):
        MultiMachineNetwork(n_bus=3, branches=[net.branches[0]])  # disconnected


def test_event_validation():
    with pytest.raises(InvalidInputError):
        ApplyFault(t=-1.0)
    with pytest.raises(InvalidInputError):
        ApplyFault(t=1.0, fraction=1.0)
    with pytest.raises(InvalidInputError):
        SetPoint(t=1.0, name="nonsense", value=1.0)
    assert ClearFault(t=2.0).t == 2.0
