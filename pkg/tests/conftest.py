import pytest

from trainfb import SchemeSpec, SystemConfig


@pytest.fixture
def cfg():
    return SystemConfig(4, 10.0, 1000)


@pytest.fixture
def schemes():
    return {k: SchemeSpec.build(k, 4) for k in ("analog", "tdd", "digital-errorfree", "digital-qam")}


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
