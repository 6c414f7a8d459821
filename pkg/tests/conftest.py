import numpy as np
import pytest
from hypothesis import settings

from holomap import catalog

settings.register_profile("holomap", max_examples=40, deadline=None)
settings.load_profile("holomap")


@pytest.fixture(scope="session")
def ex1():
    return catalog.example1()


@pytest.fixture(scope="session")
def ex2():
    return catalog.example2()


@pytest.fixture(scope="session")
def ex3():
    return catalog.example3()


@pytest.fixture(scope="session")
def ex4():
    return catalog.example4()


@pytest.fixture(scope="session")
def ex5():
    return catalog.example5()


@pytest.fixture(scope="session")
def sing():
    return catalog.singular()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(number, name, value, tol, ok):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {name} = {value} (tol {tol})"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
