import numpy as np
import pytest

from bukhgeim.errors import GridMismatchError, ParameterError
from bukhgeim.forward import assemble_dn
from bukhgeim.grid import zero_potential
from bukhgeim.potentials import make_potential
from bukhgeim.recon import (
    TERM_NAMES,
    identity_check,
    reconstruct_from_dn,
    reconstruction_error,
    scan_nodes,
    stability_bound,
    tau_schedule,
)


@pytest.fixture(scope="module")
def bump32(grid32):
    return make_potential(grid32, "bump", radius=0.9, amplitude=0.2, label="bump")


class TestScanNodes:
    def test_collar_and_radius(self, grid32):
        nodes = scan_nodes(grid32, collar=4, scan_radius=0.5)
        z = grid32.z[nodes[:, 0], nodes[:, 1]]
        assert len(nodes) > 0
        assert np.all(np.abs(z) <= 0.5)
        assert grid32.interior_mask[nodes[:, 0], nodes[:, 1]].all()

    def test_stride_thins_the_scan(self, grid32):
        full = scan_nodes(grid32, collar=2)
        thin = scan_nodes(grid32, collar=2, stride=2)
        assert len(thin) < len(full)
        assert np.all(thin % 2 == 0)

    def test_wide_collar_empties_the_scan(self, grid32):
        assert len(scan_nodes(grid32, collar=40)) == 0


class TestIdentity:
    def test_equal_potentials(self, bump32):
        report = identity_check(bump32, bump32, 1.0, collar=4, scan_radius=0.3)
        assert all(v == 0 for v in report.terms.values())
        assert report.identity_defect == 0.0
        assert report.l2_error is None

    def test_holds_to_roundoff(self, bump32, grid32):
        ## Given
        q2 = zero_potential(grid32)

        ## When
        report = identity_check(bump32, q2, 1.0, collar=4, scan_radius=0.3)

        ## Then
        assert set(TERM_NAMES) <= set(report.terms)
        assert report.terms["lhs"] > 0
        assert report.identity_defect <= 1e-8
        assert report.to_json()["scan_points"] == len(report.nodes)

    def test_threads_do_not_change_the_result(self, bump32, grid32):
        q2 = zero_potential(grid32)
        serial = identity_check(bump32, q2, 1.0, collar=4, scan_radius=0.3)
        threaded = identity_check(bump32, q2, 1.0, collar=4, scan_radius=0.3, workers=2)
        assert serial.terms == threaded.terms

    def test_uniqueness_variant(self, bump32, grid32):
        report = identity_check(bump32, zero_potential(grid32), 1.0, collar=4, scan_radius=0.3,
                                uniqueness=True)
        assert report.uniqueness
        assert report.terms["uniqueness_residual"] == pytest.approx(
            report.terms["central_pairing"], rel=1e-8
        )

    def test_grids_must_match(self, bump32, grid64):
        with pytest.raises(GridMismatchError):
            identity_check(bump32, zero_potential(grid64), 1.0)


class TestReconstruction:
    def test_equal_maps_give_zero(self, grid32):
        q0 = zero_potential(grid32)
        dn = assemble_dn(q0)
        recon = reconstruct_from_dn(dn, dn, q0, 1.0, collar=4, scan_radius=0.5)
        assert not np.any(recon.values)

    def test_follows_the_contrast(self, grid32, bump32):
        ## Given
        q0 = zero_potential(grid32)
        dn0, dn_q = assemble_dn(q0), assemble_dn(bump32)
        nodes = scan_nodes(grid32, 4, 1, 0.5)

        ## When
        recon = reconstruct_from_dn(dn_q, dn0, q0, 2.0, collar=4, scan_radius=0.5)

        ## Then
        assert np.all(recon.values[~grid32.interior_mask] == 0)
        assert reconstruction_error(recon, bump32.field, nodes) < 1.0
        centre = grid32.nearest_node(0j)
        assert np.real(recon.values[centre]) > 0

    def test_rejects_bad_input(self, grid32, grid64):
        q0 = zero_potential(grid32)
        dn = assemble_dn(q0)
        with pytest.raises(ParameterError):
            reconstruct_from_dn(dn, dn, q0, 0.0)
        with pytest.raises(GridMismatchError):
            reconstruct_from_dn(dn, dn, zero_potential(grid64), 1.0)

    def test_error_of_truth_is_zero(self, bump32, grid32):
        nodes = scan_nodes(grid32, 4)
        assert reconstruction_error(bump32.field, bump32.field, nodes) == 0.0


class TestSchedules:
    def test_tau_schedule_small_distance(self):
        schedule = tau_schedule(np.exp(-1.0), 1.0, 0.5)
        assert schedule.case == 1
        assert schedule.R0 == 9.0
        assert schedule.tau == pytest.approx(1.0 / 9.0)

    def test_tau_schedule_large_distance(self):
        schedule = tau_schedule(2.0, 1.0, 0.5, M=3.0)
        assert (schedule.case, schedule.tau, schedule.trivial_bound) == (2, None, 12.0)
        assert tau_schedule(2.0, 1.0, 0.5).trivial_bound is None

    def test_tau_schedule_zero_distance(self):
        assert tau_schedule(0.0, 1.0, 0.5).tau == np.inf

    @pytest.mark.parametrize("alpha, d", [(0.0, 0.1), (1.0, 0.1), (0.5, -1.0)])
    def test_tau_schedule_rejects(self, alpha, d):
        with pytest.raises(ParameterError):
            tau_schedule(d, 1.0, alpha)

    def test_stability_bound(self):
        assert stability_bound(np.exp(-1.0), 1.0, 2.0) == pytest.approx(2.0 / np.sqrt(2.0))
        assert stability_bound(3.0, 1.0, 2.0) == 6.0
        assert stability_bound(0.0, 1.0, 2.0) == 0.0

    @pytest.mark.parametrize("s, C", [(1.0, 2.0), (0.25, 7.5), (0.75, 1e-3)])
    def test_stability_bound_vanishes_for_equal_data(self, s, C):
        assert stability_bound(0.0, s, C) == 0.0
        assert stability_bound(1e-300, s, C) > 0.0

    def test_stability_bound_monotone(self):
        values = [stability_bound(d, 0.75, 1.0) for d in (1e-1, 1e-3, 1e-6, 1e-12)]
        assert np.all(np.diff(values) < 0)

    @pytest.mark.parametrize("s", [0.5, 0.0, 1.5])
    def test_stability_bound_rejects_index(self, s):
        with pytest.raises(ParameterError):
            stability_bound(0.1, s, 1.0)
