import numpy as np
import pytest
from numpy.testing import assert_allclose

from bukhgeim.cauchy import (
    admissible,
    d,
    d_inv,
    dbar,
    dbar_inv,
    kernel_table,
    operator_norm_probe,
)
from bukhgeim.errors import ExponentError, ProbeError
from bukhgeim.grid import Field, Support, from_function, make_grid
from bukhgeim.potentials import compact_bump


def _indicator_error(N):
    grid = make_grid(1.5, N, 1.0)
    out = dbar_inv(Field(grid, np.ones(grid.shape), Support.X))
    inner = np.abs(grid.z) <= 0.8
    exact = np.conj(grid.z)
    return np.linalg.norm(out.values[inner] - exact[inner]) / np.linalg.norm(exact[inner])


def test_kernel_origin_cell(grid32):
    table = kernel_table(grid32)
    assert table.origin_cell_value == 0
    assert table.kernel_dbar[0, 0] == 0
    assert_allclose(table.kernel_d, np.conj(table.kernel_dbar))


def test_zero_input(grid32):
    out = dbar_inv(Field(grid32, np.zeros(grid32.shape), Support.X))
    assert not np.any(out.values)


@pytest.mark.slow
def test_indicator_of_disk_converges():
    coarse, fine = _indicator_error(64), _indicator_error(128)
    assert fine <= 0.03
    assert fine < coarse


def test_conjugation_identity(grid64, rng):
    g = Field(grid64, rng.standard_normal(grid64.shape) + 1j * rng.standard_normal(grid64.shape), Support.X)
    lhs = d_inv(g).values
    rhs = np.conj(dbar_inv(g.conj()).values)
    assert_allclose(lhs, rhs, atol=1e-12 * np.abs(lhs).max())


def test_wirtinger_derivatives_of_polynomials(grid64):
    zbar = from_function(grid64, lambda x1, x2: x1 - 1j * x2)
    assert_allclose(dbar(zbar).values, 1.0, atol=1e-12)

    z2 = from_function(grid64, lambda x1, x2: (x1 + 1j * x2) ** 2)
    inner = (slice(1, -1), slice(1, -1))
    assert_allclose(d(z2).values[inner], 2 * grid64.z[inner], atol=1e-10)


def test_left_inverse_defect_decreases():
    defects = []
    for N in (32, 64):
        grid = make_grid(1.5, N, 1.0)
        g = Field(grid, compact_bump(grid, (0.1, -0.05), 0.7), Support.X)
        v = dbar(dbar_inv(g)).values
        inner = np.abs(grid.z) <= 0.6
        defects.append(np.linalg.norm(v[inner] - g.values[inner]) / np.linalg.norm(g.values[inner]))
    assert defects[1] < defects[0]
    assert defects[1] < 0.05


@pytest.mark.parametrize(
    "p, gamma, expected",
    [
        (1.5, 5.0, True),
        (1.5, 6.0, False),
        (2.0, 100.0, True),
        (2.0, np.inf, False),
        (1.0, 1.5, True),
        (1.0, 1.0, False),
        (2.5, 3.0, False),
        (1.5, "W1", True),
        (1.0, "W1", False),
    ],
)
def test_admissible(p, gamma, expected):
    assert admissible(p, gamma) is expected


class TestOperatorNormProbe:
    def test_rejects_empty_and_inadmissible(self, grid32):
        with pytest.raises(ProbeError):
            operator_norm_probe(grid32, "dbar_inv", 2.0, 4.0, trials=0)
        with pytest.raises(ExponentError):
            operator_norm_probe(grid32, "dbar_inv", 1.0, 8.0, trials=2)
        with pytest.raises(ProbeError):
            operator_norm_probe(grid32, "dbar_inv", 2.0, 4.0, trials=2, family="flat")

    def test_deterministic_given_seed(self, grid32):
        a = operator_norm_probe(grid32, "d_inv", 2.0, 4.0, trials=4, seed=5)
        b = operator_norm_probe(grid32, "d_inv", 2.0, 4.0, trials=4, seed=5)
        assert a == b
        assert a > 0

    def test_accepts_callables(self, grid32):
        identity = lambda g: Field(g.grid, g.values, Support.WHOLE)  # noqa: E731
        est = operator_norm_probe(grid32, identity, 2.0, 2.0, trials=3)
        assert est == pytest.approx(1.0)

    def test_gradient_surrogate(self, grid32):
        assert operator_norm_probe(grid32, "dbar_inv", 1.5, "W1", trials=3) > 0

    def test_bounded_pair_is_resolution_stable(self):
        estimates = [
            operator_norm_probe(make_grid(1.5, N, 1.0), "dbar_inv", 2.0, 4.0, trials=6, seed=11)
            for N in (64, 128)
        ]
        assert estimates[1] == pytest.approx(estimates[0], rel=0.25)

    @pytest.mark.slow
    def test_inadmissible_pair_grows_under_refinement(self):
        estimates = [
            operator_norm_probe(make_grid(1.5, N, 1.0), "dbar_inv", 1.0, 8.0, trials=6, seed=2,
                                family="singular", allow_inadmissible=True)
            for N in (64, 256)
        ]
        assert estimates[1] >= 2.0 * estimates[0]
