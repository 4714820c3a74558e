import numpy as np
import pytest

from sphereflow.errors import EmptyIntersection, TooFewScales
from sphereflow.field import InitialData, generate
from sphereflow.flow import SolverConfig, Trajectory, run_projected
from sphereflow.geometry import Domain, build_grid
from sphereflow.singular import (SingularConfig, detect_singular_set,
                                 local_scaled_energy, parabolic_box_count,
                                 small_energy_certificate)


def test_local_energy_constant_zero(disc16):
    f = generate(InitialData(kind="constant"), disc16, 2)
    traj = Trajectory.static(f, [0.0, 0.1, 0.2])
    for R in (0.2, 0.4):
        for t0 in (0.05, 0.15):
            assert local_scaled_energy(traj, (t0, np.zeros(2)), R) == 0.0


def test_local_energy_hedgehog_eight_pi(hedgehog32):
    traj = Trajectory.static(hedgehog32, np.linspace(0.0, 0.25, 6))
    z0 = (0.125, np.zeros(3))
    target = 8 * np.pi
    vals = {}
    for R in (1 / 8, 1 / 4):
        vals[R] = local_scaled_energy(traj, z0, R, mode="dirichlet")
        assert abs(vals[R] - target) / target <= 0.15
    spread = abs(vals[1 / 8] - vals[1 / 4]) / max(vals.values())
    assert spread <= 0.20


def test_local_energy_gl_dominates_dirichlet(cap_run_32):
    z0 = (0.125, np.zeros(2))
    for R in (0.125, 0.25):
        gl = local_scaled_energy(cap_run_32, z0, R, mode="gl")
        dir_half = local_scaled_energy(cap_run_32, z0, R, mode="dirichlet")
        assert gl >= dir_half - 1e-15


def test_local_energy_decreases_with_radius_on_smooth(cap_run_32):
    z0 = (0.125, np.zeros(2))
    v_big = local_scaled_energy(cap_run_32, z0, 0.25, mode="gl")
    v_small = local_scaled_energy(cap_run_32, z0, 0.125, mode="gl")
    assert v_small <= 1.05 * v_big


def test_local_energy_empty_intersection(disc16):
    f = generate(InitialData(kind="constant"), disc16, 2)
    traj = Trajectory.static(f, [0.0, 0.1])
    with pytest.raises(EmptyIntersection):
        local_scaled_energy(traj, (5.0, np.zeros(2)), 0.2)


@pytest.fixture(scope="module")
def hedgehog_run8():
    g = build_grid(Domain.unit_ball(3), 1 / 8)
    u0 = generate(InitialData(kind="equator-hedgehog"), g, 2)
    cfg = SolverConfig(dt=SolverConfig.auto_dt(g), T=0.5, output_stride=8)
    return run_projected(u0, cfg)


def test_detector_huge_threshold_empty(hedgehog_run8):
    cfg = SingularConfig(eps0=1e6, radii=[0.25, 0.5], time_stride=4, space_stride=4)
    rep = detect_singular_set(hedgehog_run8, cfg)
    assert rep.flagged == []
    assert rep.dimension_estimate is None


def test_detector_flags_origin_line(hedgehog_run8):
    cfg = SingularConfig(eps0=1.0, radii=[0.25, 0.5], time_stride=1, space_stride=4)
    rep = detect_singular_set(hedgehog_run8, cfg)
    assert rep.flagged
    xs = np.array([x for _, x in rep.flagged])
    assert np.max(np.linalg.norm(xs, axis=1)) <= 0.5
    assert any(np.linalg.norm(x) == 0.0 for _, x in rep.flagged)
    assert len(rep.values) == len(rep.flagged)
    assert rep.sup_density_checks


def test_detector_threshold_monotone(hedgehog_run8):
    lo = SingularConfig(eps0=0.5, radii=[0.25, 0.5], time_stride=2, space_stride=4)
    hi = SingularConfig(eps0=2.0, radii=[0.25, 0.5], time_stride=2, space_stride=4)
    rep_lo = detect_singular_set(hedgehog_run8, lo)
    rep_hi = detect_singular_set(hedgehog_run8, hi)
    assert set(rep_hi.flagged) <= set(rep_lo.flagged)


def test_box_count_single_point():
    table, dim = parabolic_box_count(np.array([[0.5, 0.1, 0.2]]), [0.4, 0.2, 0.1])
    assert all(n == 1 for _, n in table)
    assert abs(dim) <= 1e-12


def test_box_count_time_line():
    ts = np.arange(0.0, 1.0, 0.005)
    pts = np.stack([ts, np.zeros_like(ts), np.zeros_like(ts)], axis=1)
    table, dim = parabolic_box_count(pts, [0.5, 0.25, 0.125])
    counts = dict(table)
    assert counts[0.5] == pytest.approx(4, abs=1)
    assert abs(dim - 2.0) <= 0.3
    ns = [n for _, n in table]
    assert ns == sorted(ns)        # nonincreasing in delta


def test_box_count_space_line():
    xs = np.arange(0.0, 1.0, 0.005)
    pts = np.stack([np.full_like(xs, 0.5), xs, np.zeros_like(xs)], axis=1)
    _, dim = parabolic_box_count(pts, [0.5, 0.25, 0.125])
    assert abs(dim - 1.0) <= 0.3


def test_box_count_too_few_scales():
    with pytest.raises(TooFewScales):
        parabolic_box_count(np.array([[0.0, 0.0]]), [0.4, 0.2])


def test_certificate_constant_passes(disc16):
    f = generate(InitialData(kind="constant"), disc16, 2)
    traj = Trajectory.static(f, [0.0, 0.2, 0.4])
    ok, table = small_energy_certificate(traj, (0.2, np.zeros(2)),
                                         [0.5, 0.25, 0.125], 1.0)
    assert ok and all(row[3] for row in table)


def test_certificate_hedgehog_fails(hedgehog32):
    traj = Trajectory.static(hedgehog32, np.linspace(0.0, 0.5, 6))
    ok, table = small_energy_certificate(traj, (0.25, np.zeros(3)),
                                         [0.5, 0.25, 0.125], 1.0)
    assert not ok
    assert all(not row[3] for row in table)


def test_certificate_table_structure(onesided_run_32):
    ok, table = small_energy_certificate(onesided_run_32, (0.25, np.zeros(2)),
                                         [0.5, 0.25, 0.125, 0.0625], 1.0)
    radii = [row[0] for row in table]
    assert radii == sorted(radii)
    for r, integral, bound, passed in table:
        assert integral >= 0.0
        assert bound == pytest.approx(r ** 2 / 2.0)
        assert passed == (integral < bound)
