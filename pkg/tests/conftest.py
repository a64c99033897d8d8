import numpy as np
import pytest

from capflow.graph import from_undirected_edge_list
from capflow.scenario import generate_line, parse_scenario


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def path4():
    # 4-vertex path, 6 directed edges in forward/reverse pairs
    return from_undirected_edge_list([(0, 1), (1, 2), (2, 3)], 4)


@pytest.fixture
def diamond():
    # 0-1, 0-2, 1-3, 2-3, 1-2: small 2-connected graph
    return from_undirected_edge_list([(0, 1), (0, 2), (1, 3), (2, 3), (1, 2)], 4)


@pytest.fixture(scope="session")
def line10_scenario():
    return parse_scenario(generate_line(10, 4))


@pytest.fixture(scope="session")
def line10_nofd_scenario():
    return parse_scenario(generate_line(10, 4, fd_enabled=False))
