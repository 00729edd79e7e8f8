import math
import time

import numpy as np
import pytest

from rcpomdp import make_ce, make_crs, make_ctiger, make_tunnels, solve, solve_cgcp
from rcpomdp.baseline import CgcpConfig


@pytest.fixture(scope="session")
def ce():
    return make_ce()


@pytest.fixture(scope="session")
def tiger():
    return make_ctiger(c_hat=3.0)


@pytest.fixture(scope="session")
def tunnels():
    return make_tunnels()


@pytest.fixture(scope="session")
def crs44():
    return make_crs(4, 4, seed=11878)


class TimedSolve:
    def __init__(self, result, wall):
        self.result = result
        self.wall = wall


def _timed_arcs(model, **kw):
    start = time.monotonic()
    result = solve(model, **kw)
    return TimedSolve(result, time.monotonic() - start)


@pytest.fixture(scope="session")
def ce_arcs(ce):
    return _timed_arcs(ce, k_target=math.inf, epsilon=0.01, time_budget=60.0)


@pytest.fixture(scope="session")
def tiger_arcs(tiger):
    return _timed_arcs(tiger, k_target=math.inf, epsilon=0.01, time_budget=30.0)


@pytest.fixture(scope="session")
def tunnels_arcs(tunnels):
    return _timed_arcs(tunnels, k_target=math.inf, epsilon=0.01, time_budget=45.0)


@pytest.fixture(scope="session")
def crs_arcs(crs44):
    return _timed_arcs(crs44, k_target=math.inf, epsilon=0.01, time_budget=300.0)


@pytest.fixture(scope="session")
def ce_cgcp(ce):
    history = []
    start = time.monotonic()
    mixed = solve_cgcp(ce, CgcpConfig(time_budget=120.0), history=history)
    wall = time.monotonic() - start
    return mixed, history, wall


def random_stochastic_model(rng, ns=3, na=2, no=2, gamma=0.9, c_hat=1.0):
    """Random dense model for fuzz tests."""
    from rcpomdp.model import TabularCPomdp

    T = rng.random((ns, na, ns)) + 0.05
    T /= T.sum(axis=2, keepdims=True)
    Z = rng.random((ns, na, no)) + 0.05
    Z /= Z.sum(axis=2, keepdims=True)
    R = rng.normal(size=(ns, na))
    C = rng.random((ns, na))
    b0 = rng.random(ns) + 0.05
    b0 /= b0.sum()
    return TabularCPomdp(
        tuple(f"s{i}" for i in range(ns)),
        tuple(f"a{i}" for i in range(na)),
        tuple(f"o{i}" for i in range(no)),
        T,
        Z,
        R,
        C,
        gamma,
        b0,
        c_hat,
    )
