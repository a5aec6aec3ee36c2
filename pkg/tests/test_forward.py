import numpy as np
import pytest
from numpy.testing import assert_allclose

from bukhgeim.errors import GridMismatchError, SolverError
from bukhgeim.forward import (
    DNMap,
    ForwardSolver,
    assemble_dn,
    boundary_pairing,
    boundary_pairing_many,
    cauchy_distance_data,
    dirichlet_eigenvalue,
    distance_probe_check,
    dn_operator_norm,
    eigenvalue_guard,
    pairing,
    probe_traces,
    q_fingerprint,
    solve_dirichlet,
    trace_constant,
)
from bukhgeim.grid import make_grid, zero_potential
from bukhgeim.potentials import make_potential


def _manufactured_error(N):
    grid = make_grid(1.5, N, 1.0)
    q = make_potential(grid, "constant", amplitude=-1.0)
    exact = np.exp(np.real(grid.z))
    u = solve_dirichlet(q, np.exp(np.real(grid.boundary_points)))
    mask = grid.interior_mask
    return np.abs(u.values[mask] - exact[mask]).max() / np.abs(exact[mask]).max()


@pytest.fixture(scope="module")
def bump32(grid32):
    return make_potential(grid32, "bump", radius=0.9, amplitude=0.2, label="bump")


@pytest.fixture(scope="module")
def dn_pair32(grid32, bump32):
    return assemble_dn(bump32), assemble_dn(zero_potential(grid32))


class TestDirichletSolve:
    def test_manufactured_solution(self):
        assert _manufactured_error(64) < 1e-3

    @pytest.mark.slow
    def test_manufactured_solution_is_second_order(self):
        ratio = _manufactured_error(128) / _manufactured_error(256)
        assert 3.5 <= ratio <= 4.5

    def test_trace_is_kept(self, bump32, rng):
        f = rng.standard_normal(bump32.grid.boundary_count)
        u = ForwardSolver(bump32).solve(f)
        assert_allclose(u.boundary_trace(), f)

    def test_trace_shape_checked(self, bump32):
        with pytest.raises(SolverError):
            ForwardSolver(bump32).solve(np.ones(3))


class TestGuard:
    def test_first_dirichlet_eigenvalue(self, grid64):
        assert dirichlet_eigenvalue(grid64) == pytest.approx(5.783, rel=0.06)

    def test_guard_at_eigenvalue(self, grid64, bump64):
        lam = dirichlet_eigenvalue(grid64)
        resonant = make_potential(grid64, "constant", amplitude=lam)
        assert not eigenvalue_guard(resonant)
        assert eigenvalue_guard(bump64)
        with pytest.raises(SolverError):
            ForwardSolver(resonant)

    @pytest.mark.parametrize("offset", [-1e-10, 1e-10])
    def test_guard_near_eigenvalue(self, grid64, offset):
        lam = dirichlet_eigenvalue(grid64)
        near = make_potential(grid64, "constant", amplitude=lam * (1 + offset))
        assert not eigenvalue_guard(near)


class TestDNMap:
    def test_flux_is_symmetric(self, dn_pair32):
        dn, _ = dn_pair32
        assert dn.symmetry_defect() <= 1e-10

    def test_constants_have_no_flux(self, dn_pair32):
        _, dn0 = dn_pair32
        ones = np.ones(dn0.grid.boundary_count)
        assert np.abs(dn0.apply(ones)).max() <= 1e-10

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_harmonic_modes(self, grid64, k):
        ## Given
        dn0 = assemble_dn(zero_potential(grid64))
        f = np.real(grid64.boundary_points ** k)

        ## When
        w = grid64.boundary_weights
        energy = np.sum(w * f * np.real(dn0.apply(f)))
        rate = energy / np.sum(w * f ** 2)

        ## Then
        # Re z^k is discrete harmonic for k <= 3, so the flux form is its lattice energy
        assert energy == pytest.approx(_lattice_energy(grid64, np.real(grid64.z ** k)), rel=1e-9)
        assert 0.8 * k <= rate <= 1.05 * k

    @pytest.mark.slow
    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_circular_modes_on_the_disk(self, k):
        ## Given
        grid = make_grid(1.5, 128, 1.0)
        dn0 = assemble_dn(zero_potential(grid))
        f = np.cos(k * grid.boundary_angles)

        ## When
        w = grid.boundary_weights
        rate = np.sum(w * f * np.real(dn0.apply(f))) / np.sum(w * f ** 2)

        ## Then
        rho = np.abs(grid.boundary_points).mean()
        assert rate == pytest.approx(k / rho, rel=0.03)

    def test_green_identity_is_exact(self, grid32, bump32, dn_pair32, rng):
        ## Given
        dn1, dn2 = dn_pair32
        q2 = zero_potential(grid32)
        nb = grid32.boundary_count
        f1 = rng.standard_normal(nb) + 1j * rng.standard_normal(nb)
        f2 = rng.standard_normal(nb) + 1j * rng.standard_normal(nb)

        ## When
        interior = pairing(bump32, q2, ForwardSolver(bump32).solve(f1), ForwardSolver(q2).solve(f2))
        boundary = boundary_pairing(dn1, dn2, f1, f2)

        ## Then
        assert abs(interior - boundary) <= 1e-9 * abs(interior)
        many = boundary_pairing_many(dn1, dn2, np.stack([f1, f2], 1), np.stack([f2, f1], 1))
        assert many[0] == pytest.approx(boundary)

    def test_noise_level(self, dn_pair32):
        dn, _ = dn_pair32
        noisy = dn.with_noise(0.01, seed=4)
        rel = np.linalg.norm(noisy.matrix - dn.matrix) / np.linalg.norm(dn.matrix)
        assert rel == pytest.approx(0.01)
        assert np.array_equal(noisy.matrix, dn.with_noise(0.01, seed=4).matrix)
        assert dn.with_noise(0.0) is dn

    def test_grids_must_match(self, dn_pair32, grid64):
        dn, _ = dn_pair32
        other = assemble_dn(zero_potential(grid64))
        with pytest.raises(GridMismatchError):
            dn_operator_norm(dn, other)
        with pytest.raises(GridMismatchError):
            boundary_pairing(dn, other, np.ones(1), np.ones(1))

    def test_fingerprint(self, bump32, dn_pair32):
        dn, dn0 = dn_pair32
        assert dn.q_fingerprint == q_fingerprint(bump32)
        assert len(dn.q_fingerprint) == 64
        assert dn.q_fingerprint != dn0.q_fingerprint


class TestCauchyDistance:
    def test_trace_constant(self, grid32):
        c = trace_constant(grid32)
        assert np.isfinite(c) and c > 0

    def test_zero_for_equal_maps(self, dn_pair32):
        dn, _ = dn_pair32
        assert cauchy_distance_data(dn, DNMap(dn.grid, dn.matrix.copy())) == 0.0

    def test_probe_pairings_below_data_bound(self, grid32, bump32, dn_pair32):
        dn1, dn2 = dn_pair32
        traces = probe_traces(grid32, max_degree=3)
        assert len(traces) == 1 + 2 * 3 + 2 * 2
        check = distance_probe_check(bump32, zero_potential(grid32), traces, dn1, dn2)
        assert 0 < check.sup_pairing <= 1.05 * check.distance
        assert check.ratio <= 1.05

    def test_distance_scales_with_contrast(self, grid32, dn_pair32):
        dn1, dn0 = dn_pair32
        half = assemble_dn(make_potential(grid32, "bump", radius=0.9, amplitude=0.1))
        ratio = cauchy_distance_data(dn1, dn0) / cauchy_distance_data(half, dn0)
        assert ratio == pytest.approx(2.0, rel=0.1)


def _lattice_energy(grid, values):
    """Sum of squared differences over lattice edges with an interior endpoint."""
    mask = grid.interior_mask
    e1 = mask[1:, :] | mask[:-1, :]
    e2 = mask[:, 1:] | mask[:, :-1]
    d1 = (values[1:, :] - values[:-1, :]) ** 2
    d2 = (values[:, 1:] - values[:, :-1]) ** 2
    return np.sum(d1[e1]) + np.sum(d2[e2])
