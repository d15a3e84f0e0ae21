import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    n, title = crit
    row = _criteria.setdefault(n, {"title": title, "outcomes": []})
    if report.when == "call" or report.outcome != "passed":
        row["outcomes"].append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().criterion = tuple(mark.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        row = _criteria[n]
        outs = row["outcomes"]
        if any(o == "failed" for o in outs):
            status = "FAIL"
        elif outs and all(o == "skipped" for o in outs):
            status = "SKIP"
        elif outs:
            skipped = outs.count("skipped")
            status = f"PASS ({skipped} part(s) skipped)" if skipped else "PASS"
        else:
            status = "NOT RUN"
        terminalreporter.write_line(f"criterion {n}: {status}  {row['title']}")
