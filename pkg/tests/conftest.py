import numpy as np
import pytest
from hypothesis import strategies as st

from flagopt.signature import FlagSignature


@st.composite
def signatures(draw, n_max=12, d_max=4, d=None):
    n = draw(st.integers(2, n_max))
    if d is None:
        d = draw(st.integers(1, min(d_max, n - 1)))
    dims = draw(st.lists(st.integers(1, n - 1), min_size=d, max_size=d, unique=True))
    return FlagSignature(tuple(sorted(dims)), n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def sig_large():
    return FlagSignature((3, 7, 12), 60)


@pytest.fixture
def sig_small():
    return FlagSignature((2, 3, 5), 8)
