import os

import pytest
from hypothesis import HealthCheck, settings

from slhflow.component_lib import default_library, load_manifest
from slhflow.netlist import parse_netlist

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
    derandomize=True,
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = os.path.join(os.path.dirname(__file__), os.pardir, "src", "slhflow", "data")


def data_path(name):
    return os.path.normpath(os.path.join(DATA, name))


@pytest.fixture
def lib():
    return default_library()


@pytest.fixture
def fig3_lib():
    return load_manifest(data_path("fig3_library.json"))


@pytest.fixture
def tqp():
    with open(data_path("twoqubitparity.pnl"), encoding="utf-8") as fh:
        return parse_netlist(fh.read())


@pytest.fixture
def fig3():
    with open(data_path("fig3.pnl"), encoding="utf-8") as fh:
        return parse_netlist(fh.read())


@pytest.fixture
def mach_zehnder():
    with open(data_path("mach_zehnder.pnl"), encoding="utf-8") as fh:
        return parse_netlist(fh.read())
