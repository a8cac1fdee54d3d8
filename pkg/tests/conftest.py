import itertools

import numpy as np
import pytest
from hypothesis import settings

from svetjoint.qcore import DensityMatrix, Direction, kron_all

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    def log(criterion: str, passed: bool, detail: str) -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


def brute_expectation(rho: DensityMatrix, local_ops) -> float:
    """tr(rho * full Kronecker product), formed explicitly."""
    big = kron_all(local_ops)
    return complex(np.trace(rho.matrix @ big))


def brute_probability(rho: DensityMatrix, effects) -> float:
    return brute_expectation(rho, effects).real


def random_dir(rng) -> Direction:
    v = rng.normal(size=3)
    return Direction.normalized(v)


def all_tuples(n):
    return list(itertools.product((0, 1), repeat=n))
