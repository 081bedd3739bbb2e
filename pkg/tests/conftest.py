import time
from contextlib import contextmanager

import pytest

_RESULTS = {}


class Criterion:
    """Collects the outcome of one acceptance criterion for the summary."""

    def __init__(self, number, title, budget):
        self.number, self.title, self.budget = number, title, budget
        self.notes = []
        self.elapsed = None
        self.passed = False

    def note(self, text):
        self.notes.append(text)


@pytest.fixture
def criterion(request):
    @contextmanager
    def run(number, title, budget):
        c = Criterion(number, title, budget)
        _RESULTS[number] = c
        t0 = time.perf_counter()
        try:
            yield c
            c.elapsed = time.perf_counter() - t0
            c.passed = c.elapsed < budget
            assert c.elapsed < budget, f"runtime {c.elapsed:.1f}s over budget {budget}s"
        finally:
            if c.elapsed is None:
                c.elapsed = time.perf_counter() - t0
            line = (f"ACCEPTANCE {number:>2} {'PASS' if c.passed else 'FAIL'} "
                    f"[{c.elapsed:6.2f}s / {budget}s] {title}")
            if c.notes:
                line += " | " + "; ".join(c.notes)
            print("\n" + line)
            request.node.user_properties.append(("acceptance", line))

    return run


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_RESULTS):
        c = _RESULTS[k]
        line = f"ACCEPTANCE {k:>2} {'PASS' if c.passed else 'FAIL'} [{c.elapsed:6.2f}s / {c.budget}s] {c.title}"
        if c.notes:
            line += " | " + "; ".join(c.notes)
        terminalreporter.write_line(line)
