from __future__ import annotations

import time

import pytest

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, title)`` returns a
    context manager; set ``.detail`` inside and the outcome is logged even
    if the body raises."""
    results = request.config.stash[_RESULTS]

    class _Run:
        def __init__(self, n, title):
            self.n, self.title, self.detail = n, title, ""

        def __enter__(self):
            self.start = time.perf_counter()
            return self

        def __exit__(self, exc_type, exc, tb):
            elapsed = time.perf_counter() - self.start
            status = "PASS" if exc_type is None else "FAIL"
            detail = self.detail if exc_type is None else f"{self.detail} {exc_type.__name__}: {exc}".strip()
            line = f"[{status}] criterion {self.n:2d} {self.title}: {detail} ({elapsed:.1f}s)"
            results.append((self.n, line))
            print(line)
            return False

    return _Run


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, [])
    if results:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(results):
            terminalreporter.write_line(line)
