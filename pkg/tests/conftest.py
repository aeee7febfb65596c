import sys
from fractions import Fraction
from pathlib import Path

import pytest

from farkas_check.checker import CheckerState
from farkas_check.linalg import Backend
from farkas_check.proof_codec import parse_network, parse_property, parse_proof, parse_query

TESTS = Path(__file__).parent
FIXTURES = TESTS / "fixtures"
REPO = TESTS.parent

sys.path.insert(0, str(TESTS))

# Example network variable layout: x1 x2 b1 b2 b3 f1 f2 f3 y
X1, X2, B1, B2, B3, F1, F2, F3, Y = range(9)

EX1_ROWS = [
    [2, 0, -1, 0, 0, 0, 0, 0, 0],
    [0, 1, 0, -1, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, -1, -1, 1, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, -1, 1],
]
EX1_UPPER = [1, 1, 2, 1, 2, 2, 1, 3, 3]
EX1_LOWER = [-1, -1, -2, -1, -2, 0, 0, 0, 2]


def F(*xs):
    return [Fraction(x) for x in xs]


def fig2_bytes() -> bytes:
    return (FIXTURES / "fig2.proof.json").read_bytes()


@pytest.fixture(params=list(Backend), ids=lambda b: b.value)
def backend(request):
    return request.param


@pytest.fixture
def fig2(backend):
    return parse_proof(fig2_bytes(), backend)


@pytest.fixture
def ex1_state(fig2):
    return CheckerState.from_proof(fig2)


@pytest.fixture
def ex1_query():
    return parse_query((FIXTURES / "ex1.query.json").read_bytes())


@pytest.fixture
def fig1_net():
    return parse_network((FIXTURES / "fig1.net.json").read_bytes())


@pytest.fixture
def ex1_prop():
    return parse_property((FIXTURES / "ex1.prop.json").read_bytes())


# acceptance criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
