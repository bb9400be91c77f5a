import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def random_joint(rng, max_support=16, sparsity=0.0):
    nx, ny = rng.integers(2, max_support + 1, size=2)
    cells = rng.dirichlet(np.full(nx * ny, rng.uniform(0.2, 2.0))).reshape(nx, ny)
    if sparsity:
        cells = cells * (rng.random(cells.shape) > sparsity)
        if cells.sum() == 0:
            cells[0, 0] = 1.0
        cells = cells / cells.sum()
    return cells


def random_prior_channel(rng, max_support=16):
    nx, ny = rng.integers(2, max_support + 1, size=2)
    prior = rng.dirichlet(np.full(nx, rng.uniform(0.2, 2.0)))
    rows = rng.dirichlet(np.full(ny, rng.uniform(0.2, 2.0)), size=nx)
    return prior, rows


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_RESULTS: list[str] = []


def record_acceptance(number, name, passed, detail=""):
    ACCEPTANCE_RESULTS.append(f"criterion {number} [{'PASS' if passed else 'FAIL'}] {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
