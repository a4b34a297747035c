"""
Shared desk-scale instances
"""

import numpy as np
import pytest

from src.instance import Instance


def desk1() -> Instance:
    """Facilities a=0, b=1, root 2; optimum r -> a -> b with cost 8"""
    return Instance(
        facility_cost=np.array([5.0, 0.0]),
        connection_cost=np.array([[0.0, 10.0], [10.0, 0.0]]),
        time_metric=np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 2.0], [1.0, 2.0, 0.0]]),
    )


def desk2_metric() -> np.ndarray:
    """Nodes u=0, v=1, root 2 with d(r,u)=1, d(r,v)=2, d(u,v)=1"""
    return np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 2.0], [1.0, 2.0, 0.0]])


def desk_mssc() -> Instance:
    """Sets A={0,1}, B={2} as a zero-cost uniform instance; best latency 4"""
    c = np.full((2, 3), 100.0)
    c[0, 0] = c[0, 1] = 0.0
    c[1, 2] = 0.0
    return Instance(
        facility_cost=np.zeros(2),
        connection_cost=c,
        time_metric=1.0 - np.eye(3),
        tags=("uniform", "zfc"),
    )


@pytest.fixture
def desk1_instance() -> Instance:
    return desk1()


@pytest.fixture
def desk2() -> np.ndarray:
    return desk2_metric()


@pytest.fixture
def mssc_instance() -> Instance:
    return desk_mssc()
