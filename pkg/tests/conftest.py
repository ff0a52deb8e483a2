import time

import pytest

# (criterion number, title, tolerance, runtime limit or None, outcome, seconds)
_CRITERIA: list[tuple] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


@pytest.fixture()
def criterion(request):
    """Record one acceptance criterion and report it as a single line."""
    marker = request.node.get_closest_marker("criterion")
    number, title, tolerance = marker.args[:3]
    limit = marker.kwargs.get("limit_s")
    t0 = time.perf_counter()
    yield
    elapsed = time.perf_counter() - t0
    rep = getattr(request.node, "rep_call", None)
    passed = rep is not None and rep.passed
    if passed and limit is not None and elapsed >= limit:
        passed = False
    _CRITERIA.append((number, title, tolerance, limit, passed, elapsed))
    if passed is False and rep is not None and rep.passed:
        pytest.fail(f"criterion {number} took {elapsed:.2f} s, limit {limit} s")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title, tolerance, limit_s=None): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number, title, tolerance, limit, passed, elapsed in sorted(_CRITERIA):
        verdict = "PASS" if passed else "FAIL"
        budget = f" (limit {limit:g} s)" if limit is not None else ""
        tr.write_line(f"[{verdict}] {number:>2}. {title} | tolerance: {tolerance} | {elapsed:.2f} s{budget}")
