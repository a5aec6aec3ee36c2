import numpy as np
import pytest

from bukhgeim.errors import SweepError
from bukhgeim.fits import loglog_slope


def test_power_law():
    x = np.array([4.0, 8.0, 16.0, 32.0])
    assert loglog_slope(x, 3.0 * x ** -0.5) == pytest.approx(-0.5)


def test_first_point_dropped():
    x = [1.0, 2.0, 4.0, 8.0]
    y = [100.0, 2.0 ** -1, 4.0 ** -1, 8.0 ** -1]
    assert loglog_slope(x, y) == pytest.approx(-1.0)
    assert loglog_slope(x, y, drop_first=False) < -2.0


def test_unsorted_input():
    x = [16.0, 4.0, 8.0, 2.0]
    assert loglog_slope(x, [t ** 2 for t in x]) == pytest.approx(2.0)


def test_nonpositive_values_ignored():
    assert loglog_slope([1, 2, 4, 8], [5.0, 0.0, 4.0, 16.0]) == pytest.approx(2.0)


def test_too_few_points():
    with pytest.raises(SweepError):
        loglog_slope([1.0, 2.0], [1.0, 2.0])
