import os

import pytest

from chaintorque.graphs import load_graph_map

FIXTURES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "fixtures")


def fixture_path(name):
    return os.path.join(FIXTURES, name)


def load_fixture(name):
    return load_graph_map(fixture_path(name))


@pytest.fixture
def rose3():
    return load_fixture("rose3.gm")


@pytest.fixture
def rose3_fix():
    return load_fixture("rose3_fix.gm")


@pytest.fixture
def theta_id():
    return load_fixture("theta_id.gm")


@pytest.fixture
def theta_fix():
    return load_fixture("theta_fix.gm")


@pytest.fixture
def rose2_poly():
    return load_fixture("rose2_poly.gm")


@pytest.fixture
def rose2_fib():
    return load_fixture("rose2_fib.gm")


@pytest.fixture
def rose1_id():
    return load_fixture("rose1_id.gm")


def read_fixture(name):
    with open(fixture_path(name), encoding="utf-8") as handle:
        return handle.read()
