import numpy as np
import pytest

from topk_smoothing.bounds import ProbabilityBounds
from topk_smoothing.tightness import check_feasible

ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def random_feasible_bounds(rng, max_c=10, max_k=3, floor=1e-8):
    """Random (bounds, k) satisfying both feasibility inequalities.

    Competitor uppers are Dirichlet draws scaled to cover the leftover mass,
    with occasional exact ties, floored at ``floor``.
    """
    while True:
        c = int(rng.integers(2, max_c + 1))
        k = int(rng.integers(1, min(max_k, c - 1) + 1))
        label = int(rng.integers(c))
        lower = rng.uniform(0.01, 0.99)
        scale = 1.0 if k == c - 1 else rng.uniform(1.0, 3.0)
        others = rng.dirichlet(np.full(c - 1, rng.choice([0.3, 1.0, 10.0]))) * (1 - lower) * scale
        if rng.random() < 0.2:
            others[:] = others.mean()
        others = np.minimum(np.maximum(others, floor), 1.0)
        upper = np.zeros(c)
        upper[[i for i in range(c) if i != label]] = others
        bounds = ProbabilityBounds(label, lower, upper)
        try:
            check_feasible(bounds, k)
        except ValueError:
            continue
        return bounds, k


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
