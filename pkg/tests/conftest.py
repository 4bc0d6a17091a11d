import numpy as np
import pytest

from qkdvoa import kernels

CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # compile the jitted kernels once so timing budgets measure the analysis
    kernels.attenuation_db(np.zeros(4), 0.5, 0.5)
    kernels.ou_filter(np.zeros(4), 0.5, 0.0)
    yield


@pytest.fixture
def detail(request):
    """Free-text evidence for the acceptance summary line."""
    lines = []
    request.node.user_properties.append(("detail", lines))
    return lines.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        lines = []
        for key, value in item.user_properties:
            if key == "detail":
                lines = value
        ok = rep.outcome == "passed"
        prev = CRITERIA.get(number)
        if prev is not None:
            ok = ok and prev[1]
            lines = prev[2] + lines
        CRITERIA[number] = (title, ok, lines)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(CRITERIA):
        title, ok, lines = CRITERIA[number]
        tr.write_line(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}")
        for line in lines:
            tr.write_line(f"    {line}")
