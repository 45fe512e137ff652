import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # test-local oracles

from mavmon.cdriver import find_cc
from mavmon.dialect import load_dialect
from mavmon.pipeline import load_protocol

REPO = Path(__file__).parent.parent
FIXTURES = REPO / "fixtures"
TEST_FIXTURES = Path(__file__).parent / "fixtures"

MISSION_SPEC = FIXTURES / "mission_upload.rmpst"
STATUS_SPEC = FIXTURES / "status_poll.rmpst"
DIALECT_XML = FIXTURES / "common_subset.xml"


def pytest_collection_modifyitems(config, items):
    if find_cc() is not None:
        return
    skip = pytest.mark.skip(reason="no C compiler on PATH")
    for item in items:
        if "ctoolchain" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def dialect():
    return load_dialect(DIALECT_XML)


@pytest.fixture(scope="session")
def mission():
    return load_protocol(MISSION_SPEC, DIALECT_XML)


@pytest.fixture(scope="session")
def status_poll():
    return load_protocol(STATUS_SPEC, DIALECT_XML)


@pytest.fixture(scope="session")
def mission_unit(mission):
    from mavmon.synth import emit_monitor

    return emit_monitor(mission.graph, mission.spec, mission.report)


@pytest.fixture(scope="session")
def mission_driver(mission_unit, tmp_path_factory):
    """Compiled trace driver for the mission monitor (ctoolchain tests)."""
    from mavmon.cdriver import build_driver

    work = tmp_path_factory.mktemp("driver")
    return build_driver(mission_unit, work)
