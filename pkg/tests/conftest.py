import numpy as np
import pytest

from darksol.grid import make_grid
from darksol.kernels import make_kernel


@pytest.fixture(scope="session")
def dirac():
    return make_kernel("dirac")


@pytest.fixture(scope="session")
def exp_pair():
    return make_kernel("exp_pair", {"alpha": 0.05, "beta": 0.15})


@pytest.fixture(scope="session")
def roton():
    return make_kernel("roton", {"a": -36.0, "b": 2687.0, "c": 30.0})


@pytest.fixture(scope="session")
def grid_small():
    return make_grid(1024, 64.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


@pytest.fixture
def acceptance():
    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        if n in ACCEPTANCE:
            ok, detail = ACCEPTANCE[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d}: NOT RUN")
