import numpy as np
import pytest

from fundforms.chart import Chart


@pytest.fixture
def unit_square():
    return Chart(2, 1, ((0.0, 1.0), (0.0, 1.0)), (17, 17))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def haar_rotation(rng, n):
    A = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(A)
    Q = Q @ np.diag(np.sign(np.diag(R)))
    if np.linalg.det(Q) < 0:
        Q[:, -1] *= -1.0
    return Q


def loglog_slope(xs, ys):
    return np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0]
