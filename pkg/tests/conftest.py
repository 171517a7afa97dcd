"""Shared simulation fixtures. The heavyweight runs are session-scoped so
unit and acceptance tests reuse one trace each."""

from __future__ import annotations

import pytest

from gfmswing.scenario import parse_scenario
from gfmswing.study import run_scenario


@pytest.fixture(scope="session")
def noninertial_scenario():
    return parse_scenario("table1-noninertial")


@pytest.fixture(scope="session")
def inertial_scenario():
    return parse_scenario("table1-inertial")


@pytest.fixture(scope="session")
def sg_scenario():
    return parse_scenario("sg-smib")


@pytest.fixture(scope="session")
def run_noninertial_014(noninertial_scenario):
    """Severe-swing benchmark run (clearing 0.14 s, past critical)."""
    return run_scenario(noninertial_scenario)


@pytest.fixture(scope="session")
def run_noninertial_010(noninertial_scenario):
    return run_scenario(noninertial_scenario.with_fct(0.10))


@pytest.fixture(scope="session")
def run_inertial_030(inertial_scenario):
    """Loss-of-synchronism benchmark run (clearing 0.30 s)."""
    return run_scenario(inertial_scenario)
