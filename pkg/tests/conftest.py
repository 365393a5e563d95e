import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

_RESULTS: list[tuple[str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): one acceptance criterion; reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call":
        return
    detail = dict(item.user_properties).get("detail", "")
    _RESULTS.append((mark.args[0], "PASS" if rep.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, detail in sorted(_RESULTS):
        line = f"{status} {label}"
        if detail:
            line += f" :: {detail}"
        terminalreporter.write_line(line)
