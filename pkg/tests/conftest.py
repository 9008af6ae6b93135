import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict[int, tuple[str, str]] = {}


def pytest_addoption(parser):
    parser.addoption("--slow", action="store_true", default=False, help="run long acceptance checks at full budget")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k, title): acceptance criterion number and short title")
    config.addinivalue_line("markers", "slow: needs --slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--slow"):
        return
    skip = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def slow(request):
    return request.config.getoption("--slow")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    k, title = m.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        prev = _criteria.get(k, ("PASS", title))[0]
        _criteria[k] = ("FAIL" if "FAIL" in (prev, status) else status, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_criteria):
        status, title = _criteria[k]
        terminalreporter.write_line(f"criterion {k:2d}: {status}  {title}")
