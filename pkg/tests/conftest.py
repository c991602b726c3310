import numpy as np
import pytest

from locwp.depgraph import build_from_edge_list
from locwp.rsums import ExactDiscrete, JointModel


@pytest.fixture
def rademacher_vertex():
    g = build_from_edge_list([], vertices=[0])
    return JointModel(g, ExactDiscrete(np.array([0.5, 0.5]), np.array([[-1.0], [1.0]])))


@pytest.fixture
def two_independent():
    g = build_from_edge_list([], vertices=[0, 1])
    x = np.array([[a, b] for a in (-1.0, 1.0) for b in (-1.0, 1.0)])
    return JointModel(g, ExactDiscrete(np.full(4, 0.25), x))
