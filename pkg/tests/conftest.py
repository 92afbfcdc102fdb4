import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from distal.fixtures import P2_SADDLE, p2
from distal.oracle import OracleSolution

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def spec2():
    return p2()


@pytest.fixture
def saddle2():
    """Hand-derived P2 saddle point."""
    return OracleSolution(tuple(P2_SADDLE["u"]), P2_SADDLE["v"], P2_SADDLE["lambda"],
                          P2_SADDLE["cost"], 0.0, 0.0, "hand")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance(request):
    """Recorder for one acceptance criterion; prints a single pass/fail line."""
    name = request.node.name.removeprefix("test_").split("_")[0].upper()
    seen = []

    def record(ok, detail):
        line = f"{name} {'PASS' if ok else 'FAIL'}  {detail}"
        seen.append(line)
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    yield record
    if not seen:
        ACCEPTANCE_LINES.append(f"{name} FAIL  raised before reporting")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
