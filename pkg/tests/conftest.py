import os
import sys

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _ROOT)

import numpy as np
import pytest

from sontag_clf.catalog import get_entry
from sontag_clf.models import ClfCandidate, SystemModel, Weights


@pytest.fixture
def integrator():
    return get_entry("integrator1d")


@pytest.fixture
def cubic():
    return get_entry("cubic1d")


@pytest.fixture
def damped():
    return get_entry("damped1d")


@pytest.fixture
def double_integrator():
    return get_entry("double_integrator")


@pytest.fixture
def unit_weights():
    return Weights(Q=[[1.0]], R=[[1.0]])


@pytest.fixture
def uncontrollable():
    """x' = x with a zero input column: no CLF exists."""
    return SystemModel.from_strings(["x1"], [["0"]], name="uncontrollable")


@pytest.fixture
def half_square():
    return ClfCandidate.from_string("0.5*x1^2", 1)


def random_expression(rng: np.random.Generator, n: int, depth: int = 3) -> str:
    """Random smooth expression text over x1..xn whose value stays in [-1, 1] on the unit box."""
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.7:
            return f"x{rng.integers(1, n + 1)}"
        return f"{rng.uniform(0.1, 1.0):.3f}"
    kind = rng.integers(0, 8)
    a = random_expression(rng, n, depth - 1)
    if kind == 0:
        return f"0.5*(({a}) + ({random_expression(rng, n, depth - 1)}))"
    if kind == 1:
        return f"0.5*(({a}) - ({random_expression(rng, n, depth - 1)}))"
    if kind == 2:
        return f"({a})*({random_expression(rng, n, depth - 1)})"
    if kind == 3:
        return f"({a})/(1 + x{rng.integers(1, n + 1)}^2)"
    if kind == 4:
        return f"({a})^{rng.integers(2, 4)}"
    if kind == 5:
        return f"-({a})"
    return f"{('sin', 'cos', 'tanh')[rng.integers(0, 3)]}({a})"
