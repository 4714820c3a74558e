import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sphereflow.diagnostics import (CylinderSpec, backward_heat_kernel,
                                    energy_report, hybrid_report, main2_lhs,
                                    monotonicity_report,
                                    reverse_poincare_ratio,
                                    weighted_annulus_energy, weight_d, C_GRID)
from sphereflow.elliptic import solve_harmonic_extension
from sphereflow.errors import (KernelUnderresolved, TimeNotBeforeCenter,
                               WindowOutsideTrajectory)
from sphereflow.field import InitialData, SphereField, generate
from sphereflow.flow import Trajectory


def constant_trajectory(grid, times=(0.0, 0.1, 0.2, 0.3)):
    f = generate(InitialData(kind="constant"), grid, 2)
    return Trajectory.static(f, list(times))


# -- kernel and weights ----------------------------------------------------------

def test_kernel_unit_value_at_center():
    tau = 1.0 / (4.0 * math.pi)
    v = backward_heat_kernel((tau, np.zeros(2)), 0.0, np.zeros(2))
    assert abs(v - 1.0) <= 1e-14


def test_kernel_time_order_error():
    with pytest.raises(TimeNotBeforeCenter):
        backward_heat_kernel((0.1, np.zeros(2)), 0.2, np.zeros(2))


@given(r1=st.floats(min_value=0.0, max_value=5.0),
       r2=st.floats(min_value=0.0, max_value=5.0))
@settings(max_examples=100)
def test_kernel_gaussian_decay(r1, r2):
    lo, hi = sorted((r1, r2))
    z0 = (1.0, np.zeros(3))
    a = backward_heat_kernel(z0, 0.5, np.array([hi, 0.0, 0.0]))
    b = backward_heat_kernel(z0, 0.5, np.array([lo, 0.0, 0.0]))
    assert a <= b


@pytest.mark.parametrize("d", [2, 3])
def test_kernel_normalization(d):
    tau = 0.01
    h = math.sqrt(4 * tau) / 4.0
    half = 8 * math.sqrt(tau)
    n = int(math.ceil(half / h))
    axes = [np.arange(-n, n + 1) * h] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    total = np.sum(backward_heat_kernel((tau, np.zeros(d)), 0.0, pts)) * h ** d
    assert abs(total - 1.0) <= 1e-6


def test_weight_d_spot_values():
    x0 = np.zeros(2)
    assert weight_d(x0, x0, 2.0) == 1.0
    assert weight_d(x0, np.array([2.0, 0.0]), 2.0) == 2.0
    assert weight_d(x0, np.array([1.0, 0.0]), 2.0) == 1.25


@given(x=st.floats(-1, 1), y=st.floats(-1, 1),
       a=st.floats(-1, 1), b=st.floats(-1, 1))
@settings(max_examples=100)
def test_weight_d_range_on_ball(x, y, a, b):
    p, q = np.array([x, y]), np.array([a, b])
    if np.linalg.norm(p) > 1 or np.linalg.norm(q) > 1:
        return
    assert 1.0 <= weight_d(q, p, 2.0) <= 2.0 + 1e-12


# -- energy report ------------------------------------------------------------------

def test_energy_report_consistency(cap_run_32):
    rep = energy_report(cap_run_32, len(cap_run_32.snapshots) - 1)
    assert rep.gl_energy == pytest.approx(rep.dirichlet_part + rep.penalty_part,
                                          rel=1e-12)
    grid = cap_run_32.grid
    assert rep.gl_energy == pytest.approx(float(rep.density.sum()) * grid.cell_volume,
                                          rel=1e-12)
    assert rep.penalty_part >= 0.0


# -- weighted annulus energy ----------------------------------------------------------

def test_annulus_constant_zero(disc16):
    traj = constant_trajectory(disc16)
    assert weighted_annulus_energy(traj, (0.3, np.zeros(2)), 0.2) == 0.0


def test_annulus_window_errors(disc16):
    traj = constant_trajectory(disc16)
    with pytest.raises(WindowOutsideTrajectory):
        weighted_annulus_energy(traj, (0.05, np.zeros(2)), 0.2)
    with pytest.warns(KernelUnderresolved):
        weighted_annulus_energy(traj, (0.3, np.zeros(2)), 1.5 * disc16.h)


def test_annulus_hedgehog_scale_invariance(ball3_32, hedgehog32):
    traj = Trajectory.static(hedgehog32, np.linspace(0.0, 0.3, 31))
    z0 = (0.3, np.zeros(3))
    a1 = weighted_annulus_energy(traj, z0, 1 / 8, mode="gl")
    a2 = weighted_annulus_energy(traj, z0, 1 / 4, mode="gl")
    assert abs(a1 - a2) / max(a1, a2) <= 0.20


def test_annulus_linear_in_density(disc16):
    # non-unit synthetic fields: scaling values by sqrt(2) doubles the
    # gradient density exactly
    coords = disc16.coords()
    vals = np.zeros(disc16.shape + (3,))
    flat = vals.reshape(-1, 3)
    flat[:, 0] = np.sin(2 * coords[:, 0]) * 0.3
    flat[:, 1] = coords[:, 1] * 0.2
    f1 = SphereField(disc16, vals, 2)
    f2 = SphereField(disc16, math.sqrt(2.0) * vals, 2)
    t1 = Trajectory.static(f1, [0.0, 0.2, 0.4])
    t2 = Trajectory.static(f2, [0.0, 0.2, 0.4])
    z0 = (0.4, np.zeros(2))
    v1 = weighted_annulus_energy(t1, z0, 0.2, mode="gl")
    v2 = weighted_annulus_energy(t2, z0, 0.2, mode="gl")
    assert v2 == pytest.approx(2.0 * v1, rel=1e-12)


# -- monotonicity ------------------------------------------------------------------

def test_monotonicity_constant_all_zero(disc16):
    traj = constant_trajectory(disc16, times=np.linspace(0.0, 1.0, 11))
    rep = monotonicity_report(traj, (1.0, np.zeros(2)), 0.2, 0.4)
    assert rep.annulus_energy_inner == 0.0
    assert rep.speed_term == 0.0
    assert rep.outer_energy == 0.0
    assert rep.defect == 0.0


def test_monotonicity_speed_term_nonnegative_frozen(ball3_32, hedgehog32):
    traj = Trajectory.static(hedgehog32, np.linspace(0.0, 1.0, 21))
    rep = monotonicity_report(traj, (1.0, np.zeros(3)), 0.1, 0.3)
    assert rep.speed_term >= 0.0
    assert rep.annulus_energy_inner >= 0.0


def test_monotonicity_cap_run_fit(cap_run_32):
    for rhs_form in ("difference", "exponential"):
        rep = monotonicity_report(cap_run_32, (0.2, np.zeros(2)), 0.07, 0.2,
                                  rhs_form=rhs_form)
        assert rep.defect == 0.0
        assert rep.c in tuple(C_GRID)
        assert 0.1 <= rep.mu0 <= 1.0


def test_monotonicity_preconditions(cap_run_32):
    with pytest.raises(ValueError):
        monotonicity_report(cap_run_32, (0.2, np.zeros(2)), 0.3, 0.2)
    with pytest.raises(ValueError):
        monotonicity_report(cap_run_32, (0.2, np.zeros(2)), 0.1, 0.25)


# -- boundary decay criterion -----------------------------------------------------

def test_main2_constant_is_linear_term(disc16):
    u0 = generate(InitialData(kind="constant"), disc16, 2)
    v = main2_lhs(u0, (1.0, np.array([0.9, 0.0])), 0.1, 0.5, 2.0)
    assert v == pytest.approx(2.0 * 0.1, abs=1e-14)


def test_main2_quadratic_scaling(disc16, rng):
    u0 = generate(InitialData(kind="cap", latitude_deg=60.0), disc16, 2)
    z0, R0, mu0, c = (1.0, np.array([0.9, 0.0])), 0.1, 0.5, 1.0
    base = main2_lhs(u0, z0, R0, mu0, c)
    north = np.array([0.0, 0.0, 1.0])
    shrunk = u0.copy()
    idx = disc16.active_flat
    shrunk.flat()[idx] = north + 0.5 * (shrunk.flat()[idx] - north)
    half = main2_lhs(shrunk, z0, R0, mu0, c)
    assert (half - c * R0) == pytest.approx(0.25 * (base - c * R0), rel=1e-10)
    assert half < base


def test_main2_positive_on_cap(cap60_32):
    v = main2_lhs(cap60_32, (1.0, np.array([0.9, 0.0])), 0.1, 0.5, 1.0)
    assert np.isfinite(v) and v > 0.0


def test_main2_accepts_trajectory(cap_run_32, cap60_32):
    z0, R0 = (1.0, np.array([0.9, 0.0])), 0.1
    from_traj = main2_lhs(cap_run_32, z0, R0, 0.5, 1.0)
    from_field = main2_lhs(cap60_32, z0, R0, 0.5, 1.0)
    assert from_traj == pytest.approx(from_field, rel=1e-12)


# -- comparison ratios ----------------------------------------------------------------

def test_rpi_constant_zero(disc16):
    traj = constant_trajectory(disc16)
    bd = generate(InitialData(kind="constant"), disc16, 2)
    h0 = solve_harmonic_extension(disc16, bd, tol=1e-10)
    lhs, rhs = reverse_poincare_ratio(traj, h0, CylinderSpec(0.2, np.zeros(2), 0.1))
    assert lhs == 0.0 and rhs <= 1e-25


def test_rpi_first_harmonic_finite(disc16):
    bd = generate(InitialData(kind="boundary-wrap", winding=1), disc16, 2)
    h0 = solve_harmonic_extension(disc16, bd, tol=1e-10)
    traj = Trajectory.static(h0.field, np.linspace(0.0, 0.3, 7))
    lhs, rhs = reverse_poincare_ratio(traj, h0, CylinderSpec(0.15, np.zeros(2), 0.1))
    assert lhs > 0.0 and rhs > 0.0 and np.isfinite(lhs / rhs)


def test_rpi_deviation_quadruples(disc16, rng):
    bd = generate(InitialData(kind="constant"), disc16, 2)
    h0 = solve_harmonic_extension(disc16, bd, tol=1e-10)   # constant, zero data terms
    w = rng.standard_normal(disc16.shape + (3,)) * 0.1
    f1 = SphereField(disc16, h0.field.values + w, 2)
    f2 = SphereField(disc16, h0.field.values + 2.0 * w, 2)
    cyl = CylinderSpec(0.2, np.zeros(2), 0.1)
    _, rhs1 = reverse_poincare_ratio(Trajectory.static(f1, [0.0, 0.2, 0.4]), h0, cyl)
    _, rhs2 = reverse_poincare_ratio(Trajectory.static(f2, [0.0, 0.2, 0.4]), h0, cyl)
    assert rhs2 == pytest.approx(4.0 * rhs1, rel=1e-12)


def test_hybrid_constant_zero(disc16):
    traj = constant_trajectory(disc16)
    bd = generate(InitialData(kind="constant"), disc16, 2)
    h0 = solve_harmonic_extension(disc16, bd, tol=1e-10)
    inner, outer, data = hybrid_report(traj, h0, CylinderSpec(0.2, np.zeros(2), 0.1), 0.5)
    assert inner == 0.0 and outer == 0.0 and data <= 1e-25


def test_hybrid_nested_and_fit(cap_run_32, disc32, cap60_32):
    h0 = solve_harmonic_extension(disc32, cap60_32, tol=1e-9)
    cyl = CylinderSpec(0.125, np.zeros(2), 0.1)
    inner, outer, data = hybrid_report(cap_run_32, h0, cyl, 0.5)
    assert inner <= outer + 1e-12
    fits = [c for c in C_GRID if inner <= 0.5 * outer + c * data]
    assert fits, "no constant on the declared grid satisfies the comparison"
