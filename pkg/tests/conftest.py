import re
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stmqc.spin_model import reference_config  # noqa: E402

_criteria: dict[int, dict] = {}


@pytest.fixture(scope="session")
def ref3():
    return reference_config(3)


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    entry = _criteria.setdefault(n, {"name": m.group(2), "passed": True, "detail": ""})
    if report.failed:
        entry["passed"] = False
    for key, value in report.user_properties:
        if key == "measured":
            entry["detail"] = value


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        e = _criteria[n]
        status = "PASS" if e["passed"] else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} {e['name']:<28} {status}  {e['detail']}")
