import numpy as np
import pytest

from biomeval.types import Template


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_templates(vectors, prefix="t", subjects=None):
    out = []
    for n, v in enumerate(vectors):
        subject = subjects[n] if subjects is not None else f"S{n}"
        out.append(Template(f"{prefix}{n}", subject, v))
    return out


@pytest.fixture
def templates_factory():
    return make_templates


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
