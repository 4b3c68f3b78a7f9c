from __future__ import annotations


def pytest_runtest_logreport(report):
    # One visible PASS/FAIL line per acceptance-marked test, even under -q.
    if report.when != "call" or "acceptance" not in report.keywords:
        return
    status = "PASS" if report.passed else "FAIL"
    name = report.nodeid.rsplit("::", 1)[-1]
    print(f"\n[ACCEPTANCE] {status} {name}")
