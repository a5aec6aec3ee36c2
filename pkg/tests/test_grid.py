import numpy as np
import pytest
from numpy.testing import assert_allclose

from bukhgeim.errors import FieldError, GridError
from bukhgeim.grid import (
    Domain,
    DomainKind,
    Field,
    Potential,
    Support,
    boundary_sobolev_norm,
    dft,
    extend_zero,
    idft,
    from_function,
    lp_norm,
    make_grid,
    sobolev_norm,
    w12_norm,
    zeros,
)


class TestMakeGrid:
    def test_spacing(self):
        grid = make_grid(2.0, 64, 1.0, R=1.25)
        assert grid.spacing == pytest.approx(0.0625)
        assert grid.shape == (64, 64)

    @pytest.mark.parametrize("N", [63, 100, 8])
    def test_rejects_bad_resolution(self, N):
        with pytest.raises(GridError):
            make_grid(1.5, N, 1.0)

    @pytest.mark.parametrize("L, N, R", [(1.0, 64, 1.0), (1.1, 32, 1.0), (1.5, 16, 1.0)])
    def test_rejects_thin_margin(self, L, N, R):
        with pytest.raises(GridError, match="margin"):
            make_grid(L, N, 1.0, R=R)

    def test_rejects_domain_outside_enclosing_disk(self):
        with pytest.raises(GridError, match="enclosing"):
            make_grid(2.0, 64, 1.0, R=0.9)

    def test_square_domain_extent(self):
        grid = make_grid(1.5, 64, Domain(DomainKind.SQUARE, 1.0))
        assert grid.domain.extent == pytest.approx(1 / np.sqrt(2))
        assert grid.interior_mask.sum() > 0

    def test_origin_is_a_node(self, grid64):
        assert grid64.nearest_node(0j) == (32, 32)
        assert grid64.z[32, 32] == 0

    def test_nearest_node_clamps(self, grid32):
        assert grid32.nearest_node(10 + 10j) == (31, 31)


class TestBoundaryRing:
    def test_ring_is_outside_and_adjacent(self, grid64):
        idx = grid64.boundary_index
        assert not grid64.interior_mask[idx[:, 0], idx[:, 1]].any()
        assert (grid64.boundary_degree >= 1).all()

    def test_angles_sorted(self, grid64):
        assert np.all(np.diff(grid64.boundary_angles) >= 0)

    def test_curve_length(self, grid64):
        assert grid64.curve_length == pytest.approx(2 * np.pi, rel=0.05)

    def test_lowest_curve_modes(self, grid64):
        lam, vecs = grid64.boundary_spectrum
        assert lam[0] == pytest.approx(0.0, abs=1e-8)
        # cos and sin of the polar angle
        assert_allclose(lam[1:3], 1.0, rtol=0.15)
        W = np.diag(grid64.boundary_weights)
        assert_allclose(vecs.T @ W @ vecs, np.eye(len(lam)), atol=1e-8)

    @pytest.mark.parametrize("order", [-0.5, 0.5, 1.0])
    def test_constant_trace_norm(self, grid64, order):
        ## Given
        c = 0.7 - 0.2j
        g = np.full(grid64.boundary_count, c)

        ## When
        norm = boundary_sobolev_norm(grid64, g, order)

        ## Then
        assert norm == pytest.approx(abs(c) * np.sqrt(grid64.curve_length), rel=1e-8)

    @pytest.mark.parametrize("order", [-0.5, 0.5])
    def test_single_circular_mode(self, order):
        ## Given
        grid = make_grid(1.5, 128, 1.0)
        g = np.cos(3 * grid.boundary_angles)
        mass = np.sqrt(np.sum(grid.boundary_weights * g ** 2))

        ## When
        norm = boundary_sobolev_norm(grid, g, order)

        ## Then
        assert norm == pytest.approx(10.0 ** (order / 2) * mass, rel=0.05)

    def test_positive_order_dominates(self, grid64, rng):
        g = rng.standard_normal(grid64.boundary_count)
        assert boundary_sobolev_norm(grid64, g, 0.5) >= boundary_sobolev_norm(grid64, g, -0.5)

    def test_trace_length_checked(self, grid64):
        with pytest.raises(FieldError):
            boundary_sobolev_norm(grid64, np.ones(3), 0.5)


class TestField:
    def test_x_support_zeroes_outside(self, grid32):
        f = Field(grid32, np.ones(grid32.shape), Support.X)
        assert np.all(f.values[~grid32.interior_mask] == 0)
        assert np.all(f.values[grid32.interior_mask] == 1)

    def test_values_are_read_only_copy(self, grid32):
        raw = np.ones(grid32.shape)
        f = Field(grid32, raw)
        with pytest.raises(ValueError):
            f.values[0, 0] = 2.0
        raw[0, 0] = 5.0
        assert f.values[0, 0] == 1.0

    def test_shape_checked(self, grid32):
        with pytest.raises(FieldError):
            Field(grid32, np.ones((4, 4)))

    def test_extend_zero_needs_x_support(self, grid32):
        with pytest.raises(FieldError):
            extend_zero(zeros(grid32))
        ext = extend_zero(Field(grid32, np.ones(grid32.shape), Support.X))
        assert ext.support == Support.WHOLE

    @pytest.mark.parametrize("seed", range(3))
    def test_extend_zero_keeps_l2_norm(self, grid64, seed):
        rng = np.random.default_rng(seed)
        f = Field(grid64, rng.standard_normal(grid64.shape) + 1j * rng.standard_normal(grid64.shape), Support.X)
        assert lp_norm(extend_zero(f), 2.0) == pytest.approx(lp_norm(f, 2.0), rel=1e-12)

    def test_boundary_trace(self, grid32):
        f = from_function(grid32, lambda x1, x2: x1 + 1j * x2)
        assert_allclose(f.boundary_trace(), grid32.boundary_points)


class TestTransformsAndNorms:
    def test_dft_of_gaussian(self, grid64):
        ## Given
        sigma = 0.2
        f = from_function(grid64, lambda x1, x2: np.exp(-(x1 ** 2 + x2 ** 2) / (2 * sigma ** 2)))

        ## When
        F = dft(f)

        ## Then
        xi1 = 2 * np.pi * np.fft.fftfreq(64, d=grid64.spacing)
        k1, k2 = np.meshgrid(xi1, xi1, indexing="ij")
        exact = 2 * np.pi * sigma ** 2 * np.exp(-sigma ** 2 * (k1 ** 2 + k2 ** 2) / 2)
        assert F.support == Support.SPECTRAL
        assert_allclose(F.values, exact, atol=1e-8 * exact.max())

    @pytest.mark.parametrize("seed", range(3))
    def test_idft_inverts_dft(self, grid64, seed):
        rng = np.random.default_rng(seed)
        f = Field(grid64, rng.standard_normal(grid64.shape) + 1j * rng.standard_normal(grid64.shape))
        back = idft(dft(f))
        assert back.support == Support.WHOLE
        assert_allclose(back.values, f.values, atol=1e-12)

    def test_idft_needs_spectral_input(self, grid32):
        with pytest.raises(FieldError):
            idft(zeros(grid32))

    @pytest.mark.parametrize("sigma", [0.15, 0.2, 0.25])
    def test_sobolev_norm_of_gaussian(self, grid64, sigma):
        ## Given
        f = from_function(grid64, lambda x1, x2: np.exp(-(x1 ** 2 + x2 ** 2) / (2 * sigma ** 2)))

        ## When
        norm = sobolev_norm(f, 1.0)

        ## Then
        # ||f||^2 + ||grad f||^2 = pi sigma^2 + pi
        assert norm == pytest.approx(np.sqrt(np.pi * sigma ** 2 + np.pi), rel=1e-6)

    @pytest.mark.parametrize("s", [0.1, 0.25, 0.4])
    def test_rough_index_of_indicator_stays_bounded(self, s):
        ## Given
        grids = [make_grid(1.5, N, 1.0) for N in (64, 128, 256)]

        ## When
        norms = [sobolev_norm(extend_zero(Field(g, np.ones(g.shape), Support.X)), s) for g in grids]

        ## Then
        ratios = np.array(norms[1:]) / np.array(norms[:-1])
        assert np.all((ratios > 0.9) & (ratios < 1.1))

    def test_plancherel(self, grid64, rng):
        f = Field(grid64, rng.standard_normal(grid64.shape) + 1j * rng.standard_normal(grid64.shape))
        assert sobolev_norm(f, 0.0) == pytest.approx(lp_norm(f, 2.0), rel=1e-10)

    def test_sobolev_norm_grows_with_index(self, grid64, rng):
        f = Field(grid64, rng.standard_normal(grid64.shape))
        assert sobolev_norm(f, 0.25) < sobolev_norm(f, 0.75) < sobolev_norm(f, 1.0)

    def test_sobolev_rejects_bad_input(self, grid64):
        f = zeros(grid64)
        with pytest.raises(FieldError):
            sobolev_norm(f, 1.5)
        with pytest.raises(FieldError):
            sobolev_norm(zeros(grid64, Support.X), 1.0)
        with pytest.raises(FieldError):
            sobolev_norm(dft(f), 1.0)

    def test_lp_norm_of_indicator(self):
        grid = make_grid(1.5, 128, 1.0)
        one = Field(grid, np.ones(grid.shape), Support.X)
        assert lp_norm(one, 2.0) == pytest.approx(np.sqrt(np.pi), rel=0.02)
        assert lp_norm(one, np.inf) == 1.0

    @pytest.mark.parametrize("p", [1.0, 2.0, 4.0, np.inf])
    @pytest.mark.parametrize("c", [-2.5, 0.3 + 0.4j, 1e-3])
    def test_lp_norm_is_homogeneous(self, grid32, rng, p, c):
        f = Field(grid32, rng.standard_normal(grid32.shape), Support.X)
        assert lp_norm(f.scaled(c), p) == pytest.approx(abs(c) * lp_norm(f, p), rel=1e-12)

    def test_lp_norm_rejects_small_exponent(self, grid32):
        with pytest.raises(FieldError):
            lp_norm(zeros(grid32), 0.5)

    def test_w12_norm_of_constant(self, grid64):
        one = Field(grid64, np.ones(grid64.shape))
        expected = np.sqrt(grid64.spacing ** 2 * grid64.interior_mask.sum())
        assert w12_norm(one) == pytest.approx(expected, rel=1e-12)


class TestPotential:
    def test_restricts_to_x(self, grid32):
        q = Potential(Field(grid32, np.ones(grid32.shape)))
        assert q.field.support == Support.X
        assert not q.is_zero
        assert q.is_real

    @pytest.mark.parametrize("kwargs", [{"s": 1.5}, {"s": -0.1}, {"p": 2.0}])
    def test_rejects_bad_a_priori_data(self, grid32, kwargs):
        with pytest.raises(FieldError):
            Potential(zeros(grid32, Support.X), **kwargs)

    def test_difference_needs_same_grid(self, grid32, grid64):
        with pytest.raises(FieldError):
            Potential(zeros(grid32, Support.X)) - Potential(zeros(grid64, Support.X))

    def test_check_bound(self, grid32):
        q = Potential(Field(grid32, np.ones(grid32.shape), Support.X), M=1e6)
        assert q.check_bound()
        tight = Potential(q.field, M=1e-6)
        assert not tight.check_bound()
