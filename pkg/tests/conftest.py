import time

import pytest

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title, budget): acceptance criterion with a runtime budget [s]")


class Criterion:
    def __init__(self, number: int, title: str, budget: float):
        self.number, self.title, self.budget = number, title, budget
        self.start = time.perf_counter()
        self.recorded = False

    def record(self, passed: bool, detail: str) -> bool:
        """Store the verdict; the runtime up to this call counts against the budget."""
        seconds = time.perf_counter() - self.start
        in_time = seconds <= self.budget
        _RESULTS[self.number] = {
            "title": self.title, "passed": bool(passed) and in_time, "detail": detail,
            "seconds": seconds, "budget": self.budget, "in_time": in_time,
        }
        self.recorded = True
        return bool(passed) and in_time


@pytest.fixture
def criterion(request):
    mark = request.node.get_closest_marker("criterion")
    c = Criterion(*mark.args)
    yield c
    if not c.recorded:
        _RESULTS[c.number] = {"title": c.title, "passed": False, "detail": "did not complete",
                              "seconds": time.perf_counter() - c.start, "budget": c.budget, "in_time": True}


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for n in sorted(_RESULTS):
        r = _RESULTS[n]
        verdict = "PASS" if r["passed"] else "FAIL"
        late = "" if r["in_time"] else " OVER BUDGET"
        tr.write_line(f"[{verdict}] {n:>2}. {r['title']}: {r['detail']} "
                      f"({r['seconds']:.1f} s / {r['budget']:g} s{late})")
