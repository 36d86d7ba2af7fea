"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""

import collections

_outcomes = collections.defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        _outcomes[marker.args[0]].append(call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        results = _outcomes[n]
        verdict = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {verdict} ({sum(results)}/{len(results)} checks)")
