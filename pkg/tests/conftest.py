"""Shared fixtures and the per-criterion acceptance summary."""
from __future__ import annotations

import time

import pytest

from forrelation.circuit import build_forrelation_circuit, circuit_unitary
from forrelation.core import showcase_instances
from forrelation.grape import GrapeConfig, optimize
from forrelation.nmr import PLACEHOLDER_PARAMS

_outcomes: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker.args
    entry = _outcomes.setdefault(number, {"title": title, "passed": True, "checks": 0})
    if report.failed or report.skipped:
        entry["passed"] = False
    if report.when == "call":
        entry["checks"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        entry = _outcomes[number]
        status = "PASS" if entry["passed"] and entry["checks"] else "FAIL"
        terminalreporter.write_line(f"{status} criterion {number}: {entry['title']} ({entry['checks']} checks)")


@pytest.fixture(scope="session")
def grape_benchmark():
    """Ensemble GRAPE on the 3-spin probe circuit of a Phi = 1 instance."""
    instance = showcase_instances(2)[0]
    target = circuit_unitary(build_forrelation_circuit(instance, with_probe=True))
    start = time.perf_counter()
    result = optimize(PLACEHOLDER_PARAMS, target, GrapeConfig(), segments=500, duration=0.015)
    return {
        "instance": instance,
        "target": target,
        "result": result,
        "seconds": time.perf_counter() - start,
    }
