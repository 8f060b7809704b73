import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS = pytest.StashKey[dict]()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config.stash[_RESULTS] = {}


class Criterion:
    """Records one acceptance criterion's outcome and the numbers behind it."""

    def __init__(self, results):
        self._results = results

    @contextmanager
    def __call__(self, number: int, title: str, budget: float | None = None):
        notes = []
        t0 = time.perf_counter()
        try:
            yield notes
            elapsed = time.perf_counter() - t0
            if budget is not None:
                notes.append(f"{elapsed:.1f}s of {budget:.0f}s budget")
                assert elapsed < budget, f"took {elapsed:.1f}s, budget {budget}s"
        except BaseException as exc:
            self._results[number] = (title, "FAIL", notes + [f"{type(exc).__name__}: {exc}".splitlines()[0]])
            raise
        self._results[number] = (title, "PASS", notes)


@pytest.fixture
def criterion(request):
    return Criterion(request.config.stash[_RESULTS])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, status, notes = results[n]
        detail = f" ({'; '.join(notes)})" if notes else ""
        terminalreporter.write_line(f"criterion {n:>2} {status}: {title}{detail}")
