from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from plateau import corpus  # noqa: E402

_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    num, title = marker.args
    entry = _CRITERIA.setdefault(num, {"title": title, "passed": True, "tests": 0, "seconds": 0.0, "notes": []})
    entry["tests"] += 1
    entry["seconds"] += rep.duration
    entry["passed"] &= rep.passed
    entry["notes"] += getattr(item, "_criterion_notes", [])


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion covered by the test")
    config.addinivalue_line("markers", "slow: long-running relaxation runs")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        verdict = "PASS" if e["passed"] else "FAIL"
        notes = "; ".join(e["notes"])
        terminalreporter.write_line(
            f"criterion {num:>2} {verdict}  {e['title']}  ({e['tests']} tests, {e['seconds']:.2f} s){'  ' + notes if notes else ''}"
        )


@pytest.fixture
def note(request):
    """Attach a measured value to the acceptance summary line of this test."""
    notes = []
    request.node._criterion_notes = notes
    return lambda text: notes.append(text)


@pytest.fixture
def stopwatch():
    class Watch:
        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, *exc):
            self.seconds = time.perf_counter() - self.t0

    return Watch


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# coarse exact meshes shared across modules
@pytest.fixture(scope="session")
def plane_c():
    return corpus.plane(0.2)


@pytest.fixture(scope="session")
def y_c():
    return corpus.y_cone(0.2)


@pytest.fixture(scope="session")
def t_c():
    return corpus.t_cone(0.2)


@pytest.fixture(scope="session")
def double_t_c():
    return corpus.double_t(0.2)


@pytest.fixture(scope="session")
def prism_c():
    return corpus.network_prism(0.2)


@pytest.fixture(scope="session")
def y_golden():
    return corpus.y_cone(0.1)


@pytest.fixture(scope="session")
def t_golden():
    return corpus.t_cone(0.1)
