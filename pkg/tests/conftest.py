import itertools

import numpy as np
import pytest

from otclt import CostSpec


def brute_force_assignment(C):
    """Minimum of (1/n) sum C[i, s(i)] over all permutations s (uniform weights)."""
    n = C.shape[0]
    best = np.inf
    rows = np.arange(n)
    for perm in itertools.permutations(range(n)):
        best = min(best, C[rows, perm].sum())
    return best / n


@pytest.fixture
def sq():
    return CostSpec.power(2)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance_log():
    """Record one PASS/FAIL line per acceptance criterion."""
    def log(k, title, ok, detail):
        text = ", ".join(f"{key}={val}" for key, val in detail.items())
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {k:2d}: {title} ({text})"
        _ACCEPTANCE[k] = line
        print(line)
    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
