"""Weighted-energy diagnostics: Gaussian-weighted monotonicity quantities,
the boundary decay criterion, and comparison ratios against the harmonic
extension.

All spacetime integrals use a left-endpoint rectangle rule in time with
window clipping and h^d node weights in space.  Fit constants are searched
on declared finite grids; reports expose the fitted pair and the residual
defect instead of asserting universal constants.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .elliptic import HarmonicExtension, derivative_energy_density
from .errors import (EmptyIntersection, KernelUnderresolved, TimeNotBeforeCenter,
                     UnboundedDomainUnsupported, WindowOutsideTrajectory)
from .field import SphereField, gradient_squared_density, norm_squared_flat
from .flow import Trajectory
from .geometry import BoundaryFrame, Grid, boundary_frame

MU_GRID = tuple(round(0.1 * k, 1) for k in range(1, 11))
C_GRID = tuple(np.logspace(-3.0, 3.0, 25))


@dataclass
class CylinderSpec:
    """Parabolic cylinder: time extent R^2 both ways, space radius R."""

    t0: float
    x0: np.ndarray
    R: float

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.R <= 0:
            raise ValueError("cylinder radius must be positive")


@dataclass
class EnergyReport:
    gl_energy: float
    dirichlet_part: float
    penalty_part: float
    density: np.ndarray          # flat lattice array, zero off the interior

    def to_json(self) -> dict:
        return {"gl_energy": self.gl_energy,
                "dirichlet_part": self.dirichlet_part,
                "penalty_part": self.penalty_part}


@dataclass
class MonotonicityReport:
    r1: float
    r2: float
    annulus_energy_inner: float
    speed_term: float
    outer_energy: float
    linear_remainder: float      # R2 - R1, before the fitted constant
    mu0: float
    c: float
    defect: float
    rhs_form: str
    mode: str

    @property
    def lhs(self) -> float:
        return self.annulus_energy_inner + self.speed_term

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in
                ("r1", "r2", "annulus_energy_inner", "speed_term", "outer_energy",
                 "linear_remainder", "mu0", "c", "defect", "rhs_form", "mode")}


# -- kernels and weights ----------------------------------------------------

def backward_heat_kernel(z0, t, x) -> np.ndarray:
    """Backward Gaussian weight centered at a future spacetime point.

    G(t, x) = (4 pi (t0 - t))^(-d/2) exp(-|x - x0|^2 / (4 (t0 - t))).
    """
    t0, x0 = float(z0[0]), np.asarray(z0[1], dtype=float)
    if t >= t0:
        raise TimeNotBeforeCenter(f"kernel needs t < t0, got t = {t}, t0 = {t0}")
    tau = t0 - t
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[1]
    diff = x - x0
    r2 = np.einsum("ij,ij->i", diff, diff)
    vals = (4.0 * math.pi * tau) ** (-d / 2.0) * np.exp(-r2 / (4.0 * tau))
    return vals if vals.size > 1 else float(vals[0])


def weight_d(x0, x, d0: float):
    """Quadratic confinement weight 1 + |x - x0|^2 / d0^2, range [1, 2] on the domain."""
    if d0 <= 0:
        raise ValueError("diameter must be positive")
    x0 = np.asarray(x0, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(1.0 + np.sum((x - x0) ** 2) / d0 ** 2)
    diff = x - x0
    return 1.0 + np.einsum("ij,ij->i", diff, diff) / d0 ** 2


# -- densities ---------------------------------------------------------------

def energy_density(traj: Trajectory, k: int, mode: str = "gl") -> np.ndarray:
    """Flat lattice density of snapshot k: gl density or plain |grad u|^2.

    gl mode:       |grad u|^2 / 2 + Lam (|u|^2 - 1)^2 / 4,
    gradient mode: |grad u|^2.
    Cached per (snapshot, strength, mode); static trajectories sharing one
    field share one density.
    """
    snap = traj.snapshots[k]
    lam_eff = traj.strength_at(traj.times[k]) if mode == "gl" else 0.0
    key = (id(snap), mode, lam_eff)
    cache = traj._density_cache
    if key not in cache:
        grad2 = gradient_squared_density(snap)
        if mode == "gradient":
            cache[key] = grad2
        elif mode == "gl":
            dens = 0.5 * grad2
            if lam_eff > 0.0:
                idx = traj.grid.interior_flat
                w = norm_squared_flat(snap)[idx]
                dens[idx] += lam_eff * (w - 1.0) ** 2 / 4.0
            cache[key] = dens
        else:
            raise ValueError(f"unknown density mode {mode!r}")
    return cache[key]


def energy_report(traj: Trajectory, k: int) -> EnergyReport:
    """Snapshot-level energy decomposition with its node density."""
    g = traj.grid
    snap = traj.snapshots[k]
    grad2 = gradient_squared_density(snap)
    idx = g.interior_flat
    lam_eff = traj.strength_at(traj.times[k])
    w = norm_squared_flat(snap)[idx]
    pen_dens = np.zeros(g.n_lattice)
    pen_dens[idx] = lam_eff * (w - 1.0) ** 2 / 4.0
    density = 0.5 * grad2 + pen_dens
    vol = g.cell_volume
    return EnergyReport(gl_energy=float(density.sum() * vol),
                        dirichlet_part=float(0.5 * grad2.sum() * vol),
                        penalty_part=float(pen_dens.sum() * vol),
                        density=density)


def _window_weights(times, t_final, a: float, b: float):
    """Left-endpoint rectangle weights of snapshot times clipped to [a, b)."""
    ts = np.asarray(times)
    nxt = np.append(ts[1:], max(t_final, ts[-1]))
    return np.clip(np.minimum(nxt, b) - np.maximum(ts, a), 0.0, None)


def _window_eval_times(times, a: float):
    """Left edge of each snapshot's clipped subinterval; kernels in time-
    varying integrands are sampled there rather than at the snapshot time."""
    ts = np.asarray(times)
    return np.maximum(ts, a)


def _spatial_weighted_sum(grid: Grid, density: np.ndarray, z0, t: float,
                          extra_weight=None) -> float:
    idx = grid.interior_flat
    gvals = backward_heat_kernel(z0, t, grid.coords()[idx])
    vals = density[idx] * gvals
    if extra_weight is not None:
        vals = vals * extra_weight
    return float(np.sum(vals) * grid.cell_volume)


def weighted_annulus_energy(traj: Trajectory, z0, R: float, mode: str = "gl") -> float:
    """Gaussian-weighted energy over the annular time window (t0-4R^2, t0-R^2)."""
    t0 = float(z0[0])
    if t0 - 4.0 * R * R < -1e-12:
        raise WindowOutsideTrajectory("window starts before t = 0")
    if R < 2.0 * traj.grid.h:
        warnings.warn("Gaussian weight narrower than 4 cells; values are "
                      "quadrature-limited", KernelUnderresolved)
    a, b = t0 - 4.0 * R * R, t0 - R * R
    ts = np.asarray(traj.times)
    w = _window_weights(ts, traj.t_final, a, b)
    if not np.any(w > 0):
        raise WindowOutsideTrajectory(
            f"no snapshots inside window ({a:g}, {b:g})")
    t_eval = _window_eval_times(ts, a)
    total = 0.0
    for k in np.flatnonzero(w > 0):
        dens = energy_density(traj, int(k), mode)
        total += w[k] * _spatial_weighted_sum(traj.grid, dens, z0, float(t_eval[k]))
    return total


# -- monotonicity ------------------------------------------------------------

def _speed_density(traj: Trajectory, k: int, z0) -> float:
    """Spatial integral of |du/dt - (x-x0)/(2 sqrt(t0-t)) . grad u|^2 G at t_k."""
    g = traj.grid
    t0, x0 = float(z0[0]), np.asarray(z0[1], dtype=float)
    t = traj.times[k]
    dt_loc = traj.times[k + 1] - traj.times[k]
    idx = g.interior_flat
    a_flat = traj.snapshots[k].flat()
    b_flat = traj.snapshots[k + 1].flat()
    du_dt = (b_flat[idx] - a_flat[idx]) / dt_loc

    coords = g.coords()[idx]
    s = g.strides()
    radial = np.zeros_like(du_dt)
    for a in range(g.d):
        deriv = (a_flat[idx + s[a]] - a_flat[idx - s[a]]) / (2.0 * g.h)
        radial += (coords[:, a] - x0[a])[:, None] * deriv
    radial /= 2.0 * math.sqrt(t0 - t)

    diff = du_dt - radial
    vals = np.einsum("ij,ij->i", diff, diff)
    gvals = backward_heat_kernel(z0, t, coords)
    return float(np.sum(vals * gvals) * g.cell_volume)


def monotonicity_report(traj: Trajectory, z0, R1: float, R2: float,
                        mode: str = "gradient", rhs_form: str = "difference",
                        mu_grid=MU_GRID, c_grid=C_GRID,
                        n_r_samples: int = 9) -> MonotonicityReport:
    """Evaluate both sides of the annulus monotonicity inequality and fit
    constants (mu0, C) minimizing the defect over the declared grids.

    rhs_form "difference" uses C (R2^mu - R1^mu); "exponential" uses
    C exp(R2^mu - R1^mu).
    """
    t0 = float(z0[0])
    if not (0 < R1 <= R2):
        raise ValueError("need 0 < R1 <= R2")
    if R2 >= math.sqrt(t0) / 2.0:
        raise ValueError("need R2 < sqrt(t0)/2 so the outer window starts after 0")

    inner = weighted_annulus_energy(traj, z0, R1, mode)
    outer = weighted_annulus_energy(traj, z0, R2, mode)

    # the speed integrand is R-independent; precompute its time profile over
    # the widest window and integrate windows by rectangle, then the R
    # integral by trapezoid
    ts = np.asarray(traj.times)
    profile = {}
    speed_of_R = []
    r_samples = np.linspace(R1, R2, n_r_samples)
    for R in r_samples:
        a, b = t0 - 4.0 * R * R, t0 - R * R
        w = _window_weights(ts, traj.t_final, a, b)
        tot = 0.0
        for k in np.flatnonzero(w > 0):
            k = int(k)
            if k == len(traj.times) - 1:
                continue
            if k not in profile:
                profile[k] = _speed_density(traj, k, z0)
            tot += w[k] * profile[k]
        speed_of_R.append(tot)
    speed = 2.0 * float(np.trapezoid(speed_of_R, r_samples))

    lhs = inner + speed
    best = (float("inf"), mu_grid[0], c_grid[0])
    for mu in mu_grid:
        phi = R2 ** mu - R1 ** mu
        if rhs_form == "exponential":
            phi = math.exp(phi)
        elif rhs_form != "difference":
            raise ValueError(f"unknown rhs form {rhs_form!r}")
        for c in c_grid:
            rhs = c * phi * outer + c * (R2 - R1)
            defect = max(0.0, lhs - rhs)
            if defect < best[0] - 1e-300 or (defect == 0.0 and best[0] > 0.0):
                best = (defect, mu, c)
            if best[0] == 0.0:
                break
        if best[0] == 0.0:
            break

    return MonotonicityReport(r1=R1, r2=R2, annulus_energy_inner=inner,
                              speed_term=speed, outer_energy=outer,
                              linear_remainder=R2 - R1, mu0=best[1],
                              c=float(best[2]), defect=best[0],
                              rhs_form=rhs_form, mode=mode)


# -- boundary decay criterion --------------------------------------------------

def _boundary_tangential_grad_sq(u0: SphereField, frame: BoundaryFrame) -> np.ndarray:
    """|tangential grad u0|^2 at boundary nodes, one-sided stencils as needed."""
    g = u0.grid
    flat = u0.flat()
    cls = g.class_flat()
    s = g.strides()
    bidx = g.boundary_flat
    ncomp = u0.ncomp
    grad = np.zeros((bidx.size, g.d, ncomp))
    for a in range(g.d):
        plus = bidx + s[a]
        minus = bidx - s[a]
        ok_p = cls[plus] != 0
        ok_m = cls[minus] != 0
        both = ok_p & ok_m
        grad[both, a] = (flat[plus[both]] - flat[minus[both]]) / (2.0 * g.h)
        only_p = ok_p & ~ok_m
        grad[only_p, a] = (flat[plus[only_p]] - flat[bidx[only_p]]) / g.h
        only_m = ok_m & ~ok_p
        grad[only_m, a] = (flat[bidx[only_m]] - flat[minus[only_m]]) / g.h
    # remove the normal component per target component
    nu = frame.normals
    normal_part = np.einsum("na,nac->nc", nu, grad)
    tang = grad - np.einsum("na,nc->nac", nu, normal_part)
    return np.einsum("nac,nac->n", tang, tang)


def main2_lhs(traj_or_u0, z0, R0: float, mu0: float, c_mu0: float,
              frame: Optional[BoundaryFrame] = None, n_time: int = 64) -> float:
    """Left side of the boundary energy-decay criterion.

    exp((4 R0)^mu0)/R0^2 [ e^{-4(d-2)/d0^2} t0^{-(d-2)/2} * int |grad u0|^2
      + int_0^{t0-R0^2} int_bdry |grad_tau u0|^2 G (d_{x0} + 4(t0-t)/d0^2) ]
      + C(mu0) R0.
    """
    u0 = traj_or_u0.snapshots[0] if isinstance(traj_or_u0, Trajectory) else traj_or_u0
    g = u0.grid
    t0, x0 = float(z0[0]), np.asarray(z0[1], dtype=float)
    if not math.isfinite(g.domain.diameter):
        raise UnboundedDomainUnsupported("criterion needs a bounded domain")
    if R0 >= math.sqrt(t0) / 2.0:
        raise ValueError("need R0 < sqrt(t0)/2")
    d0 = g.domain.diameter
    d = g.d

    from .field import dirichlet_energy
    interior_term = (math.exp(-4.0 * (d - 2) / d0 ** 2) / t0 ** ((d - 2) / 2.0)
                     * dirichlet_energy(u0))

    if frame is None:
        frame = boundary_frame(g)
    tg2 = _boundary_tangential_grad_sq(u0, frame)
    bpts = g.coords()[g.boundary_flat]
    dw = weight_d(x0, bpts, d0)
    area_w = g.h ** (d - 1)

    t_hi = t0 - R0 * R0
    dt = t_hi / n_time
    surf = 0.0
    for j in range(n_time):
        t = j * dt
        gvals = backward_heat_kernel(z0, t, bpts)
        surf += dt * float(np.sum(tg2 * gvals * (dw + 4.0 * (t0 - t) / d0 ** 2)) * area_w)

    bracket = interior_term + surf
    return math.exp((4.0 * R0) ** mu0) / R0 ** 2 * bracket + c_mu0 * R0


# -- cylinder integrals and comparison ratios ---------------------------------

def cylinder_integral(traj: Trajectory, cyl: CylinderSpec, mode: str = "gl") -> float:
    """Plain integral of the chosen density over the clipped cylinder."""
    g = traj.grid
    ts = np.asarray(traj.times)
    a, b = cyl.t0 - cyl.R ** 2, cyl.t0 + cyl.R ** 2
    w = _window_weights(ts, traj.t_final, a, b)
    nodes = g.nodes_within(cyl.x0, cyl.R)
    if not np.any(w > 0) or nodes.size == 0:
        raise EmptyIntersection("cylinder does not meet the trajectory")
    total = 0.0
    for k in np.flatnonzero(w > 0):
        dens = energy_density(traj, int(k), mode)
        total += w[k] * float(dens[nodes].sum()) * g.cell_volume
    return total


def _deviation_integral(traj: Trajectory, h0: HarmonicExtension,
                        cyl: CylinderSpec) -> tuple[float, float]:
    """(integral of |u - h0|^2 over the cylinder, spacetime volume covered)."""
    g = traj.grid
    ts = np.asarray(traj.times)
    a, b = cyl.t0 - cyl.R ** 2, cyl.t0 + cyl.R ** 2
    w = _window_weights(ts, traj.t_final, a, b)
    nodes = g.nodes_within(cyl.x0, cyl.R)
    if not np.any(w > 0) or nodes.size == 0:
        raise EmptyIntersection("cylinder does not meet the trajectory")
    h0_vals = h0.field.flat()[nodes]
    total = 0.0
    vol = 0.0
    for k in np.flatnonzero(w > 0):
        diff = traj.snapshots[int(k)].flat()[nodes] - h0_vals
        total += w[k] * float(np.einsum("ij,ij->", diff, diff)) * g.cell_volume
        vol += w[k] * nodes.size * g.cell_volume
    return total, vol


def _h0_data_integral(h0: HarmonicExtension, cyl: CylinderSpec,
                      time_extent: float) -> tuple[float, float]:
    """(integral of h0 derivative energies over the cylinder, volume).

    The data field is time-independent; the spacetime integral is the time
    extent times the spatial one.
    """
    g = h0.grid
    d = g.d
    m = (d + 1) // 2 + 1
    dens = derivative_energy_density(h0, 1) + derivative_energy_density(h0, m)
    nodes = g.nodes_within(cyl.x0, cyl.R)
    spatial = float(dens[nodes].sum()) * g.cell_volume
    vol = time_extent * nodes.size * g.cell_volume
    return time_extent * spatial, vol


def _clipped_time_extent(traj: Trajectory, cyl: CylinderSpec) -> float:
    a = max(cyl.t0 - cyl.R ** 2, 0.0)
    b = min(cyl.t0 + cyl.R ** 2, traj.t_final)
    return max(b - a, 0.0)


def reverse_poincare_ratio(traj: Trajectory, h0: HarmonicExtension,
                           cyl: CylinderSpec) -> tuple[float, float]:
    """(lhs, rhs) of the reverse comparison:

    lhs = R^{-d} int_{P_R} |grad u|^2/2,
    rhs = mean over P_{2R} of |u - h0|^2 plus the mean h0-derivative energies.
    The caller asserts lhs <= C rhs for a configured constant.
    """
    g = traj.grid
    lhs = cylinder_integral(traj, cyl, mode="gradient") / 2.0 / cyl.R ** g.d
    big = CylinderSpec(t0=cyl.t0, x0=cyl.x0, R=2.0 * cyl.R)
    dev, vol = _deviation_integral(traj, h0, big)
    data, dvol = _h0_data_integral(h0, big, _clipped_time_extent(traj, big))
    rhs = dev / vol + (data / dvol if dvol > 0 else 0.0)
    return lhs, rhs


def hybrid_report(traj: Trajectory, h0: HarmonicExtension, cyl: CylinderSpec,
                  eps0: float) -> tuple[float, float, float]:
    """(inner, outer, data) for the two-scale energy comparison:

    inner = int_{P_R} e, outer = int_{P_2R} e,
    data  = R^{-2} int_{P_2R} |u - h0|^2 + int_{P_2R} h0-derivative terms.
    The harness fits C(eps0) with inner <= eps0 outer + C data.
    """
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    inner = cylinder_integral(traj, cyl, mode="gl")
    big = CylinderSpec(t0=cyl.t0, x0=cyl.x0, R=2.0 * cyl.R)
    outer = cylinder_integral(traj, big, mode="gl")
    dev, _ = _deviation_integral(traj, h0, big)
    data_int, _ = _h0_data_integral(h0, big, _clipped_time_extent(traj, big))
    data = dev / cyl.R ** 2 + data_int
    return inner, outer, data
