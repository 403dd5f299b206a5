import re
from collections import OrderedDict

_CRITERIA = OrderedDict()


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_(a\d+)_", report.nodeid)
    if not m:
        return
    key = m.group(1).upper()
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        _CRITERIA.setdefault(key, [])
        _CRITERIA[key].append((report.nodeid.split("::")[-1], not failed))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: int(k[1:])):
        results = _CRITERIA[key]
        ok = all(passed for _, passed in results)
        bad = [name for name, passed in results if not passed]
        detail = f"  (failed: {', '.join(bad)})" if bad else ""
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'}{detail}")
