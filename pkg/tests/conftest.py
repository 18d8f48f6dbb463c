import numpy as np
import pytest

from pnnclr.support_set import SupportSet


def unit_rows(gen, n, d):
    """Random unit-norm rows."""
    m = gen.standard_normal((n, d))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def filled_queue(gen, capacity, n, d, labels=None):
    q = SupportSet(capacity, d)
    q.insert_batch(unit_rows(gen, n, d), labels)
    return q


def central_diff(f, x0, h=1e-5):
    """Central finite-difference gradient of scalar f at x0."""
    g = np.empty_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xp[i] += h
        xm = x0.copy()
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def max_rel_err(a, b):
    return float(np.max(np.abs(a - b) / (np.abs(a) + np.abs(b) + 1e-8)))


@pytest.fixture
def gen():
    return np.random.default_rng(12345)
