import contextlib
import os
import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_LINES_KEY = pytest.StashKey[list]()


class _Outcome:
    def __init__(self):
        self.detail = ""


@pytest.fixture
def criterion(request):
    """Context manager that logs one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_LINES_KEY, [])

    @contextlib.contextmanager
    def run(number, title, budget=None):
        out = _Outcome()
        start = time.perf_counter()
        try:
            yield out
        except BaseException as exc:
            elapsed = time.perf_counter() - start
            line = f"criterion {number:>2} FAIL  {title} ({elapsed:.1f} s): {exc}".splitlines()[0]
            lines.append(line)
            print(line)
            raise
        elapsed = time.perf_counter() - start
        note = f", budget {budget:g} s exceeded" if budget is not None and elapsed > budget else ""
        line = f"criterion {number:>2} PASS  {title} ({elapsed:.1f} s{note}): {out.detail}"
        lines.append(line)
        print(line)

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
