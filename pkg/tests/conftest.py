import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))


def random_digraph(rng, n, density=0.3, weighted=False):
    H = (rng.random((n, n)) < density).astype(float)
    if weighted:
        H *= rng.uniform(0.1, 3.0, size=(n, n))
    np.fill_diagonal(H, 0.0)
    return H


def random_user_edges(rng, n_edges, n_users):
    return [(f"u{rng.integers(n_users)}", f"u{rng.integers(n_users)}", f"t{k:03d}")
            for k in range(n_edges)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
