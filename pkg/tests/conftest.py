import numpy as np
import pytest
from hypothesis import settings

from alpha_bundle.expectation import Box, SampleSpace
from alpha_bundle.families import (NORMAL_SOURCE, hint_from_expressions, make_exponential,
                                   make_family_from_expression, make_normal, parse_density)

settings.register_profile("repo", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def normal():
    return make_normal()


@pytest.fixture(scope="session")
def exponential():
    return make_exponential()


@pytest.fixture(scope="session")
def normal_expr():
    return make_family_from_expression(
        parse_density(NORMAL_SOURCE, 2),
        SampleSpace.real_line(),
        Box((-np.inf, 0.0), (np.inf, np.inf)),
        hint_from_expressions("th1", "th2", 2),
        name="normal-expr",
        safe_box=Box((-2.0, 0.5), (2.0, 3.0)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed at the end of every run
CRITERION_LINES = []


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERION_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
