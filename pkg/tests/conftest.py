"""Shared fixtures: small quadratures and exact transport oracles."""

import os
import tempfile
from pathlib import Path

# Keep test logs out of the working tree; must run before spherepart is imported
os.environ.setdefault('SPHEREPART_LOG_FILE', str(Path(tempfile.gettempdir()) / 'spherepart-tests.log'))

import numpy as np
import pytest
from scipy.optimize import linprog

from spherepart.geometry import sample_uniform


def transport_lp(cost: np.ndarray, source: np.ndarray, target: np.ndarray) -> float:
    """Optimal value of the discrete transport LP with the given cost and marginals."""
    rows, cols = cost.shape
    a_eq = []
    for i in range(rows):
        row = np.zeros((rows, cols))
        row[i, :] = 1.0
        a_eq.append(row.ravel())
    for j in range(cols):
        col = np.zeros((rows, cols))
        col[:, j] = 1.0
        a_eq.append(col.ravel())
    b_eq = np.concatenate([source, target])
    result = linprog(cost.ravel(), A_eq=np.array(a_eq), b_eq=b_eq, bounds=(0, None), method='highs')
    assert result.success, result.message
    return float(result.fun)


@pytest.fixture
def lp_oracle():
    return transport_lp


@pytest.fixture
def quad_s2():
    return sample_uniform(3, 20_000, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
