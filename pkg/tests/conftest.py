import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from collapse_interferometer.interferometer import build_standard_interferometer, propagate_full  # noqa: E402

_acceptance_results: dict[str, list[tuple[str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(criterion): exit criterion this test checks")


@pytest.fixture(scope="session")
def unit_spec():
    return build_standard_interferometer(1.0, 1.0, 1.0, 0.0)


@pytest.fixture(scope="session")
def joint(unit_spec):
    return propagate_full(unit_spec)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    _acceptance_results.setdefault(str(marker.args[0]), []).append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_acceptance_results, key=int):
        results = _acceptance_results[crit]
        ok = all(o == "passed" for _, o in results)
        failed = [name for name, o in results if o != "passed"]
        line = f"criterion {crit}: {'PASS' if ok else 'FAIL'} ({len(results)} checks)"
        if failed:
            line += " failing: " + ", ".join(failed)
        terminalreporter.write_line(line)
