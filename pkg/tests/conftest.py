import numpy as np
import pytest

from consistent_sgd.datagen import standard_instance
from consistent_sgd.problems import build_problem


def make_problem(kind, n=300, seed=0, **kw):
    A, X, truth = standard_instance(kind, n=n, seed=seed, **kw)
    return build_problem(A, X, truth)


@pytest.fixture(scope="session")
def convex300():
    return make_problem("convex")


@pytest.fixture(scope="session")
def nonconvex300():
    return make_problem("nonconvex")


@pytest.fixture(scope="session")
def convex_small():
    return make_problem("convex", n=12, p=0.5)


@pytest.fixture(scope="session")
def nonconvex_small():
    return make_problem("nonconvex", n=12, p=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
