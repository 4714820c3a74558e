"""Domains, masked uniform grids, boundary frames, and the boundary convexity check.

A domain is discretized on the global lattice ``h * Z^d``.  Node classes:

* ``interior`` -- lattice points strictly inside the open domain,
* ``boundary`` -- lattice points outside the domain with at least one
  interior axis neighbor (these carry Dirichlet data, evaluated at the
  nearest point of the true boundary),
* ``exterior`` -- everything else.

With this rule every axis neighbor of an interior node is interior or
boundary, and every boundary node lies within one spacing of the true
boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NoGraphAvailable, SpacingTooCoarse

EXTERIOR, INTERIOR, BOUNDARY = 0, 1, 2


@dataclass
class Domain:
    """A bounded domain in R^d with analytic boundary queries.

    ``kind`` is one of ``unit-ball``, ``box``, ``half-ball`` or
    ``graph-subdomain``.  ``diameter`` is the exact diameter (2 for the
    unit ball, the diagonal length for a box).  Graph subdomains carry a
    height function ``phi`` over the tangent hyperplane at a base point,
    normalized so that phi(0) = 0 and grad phi(0) = 0.
    """

    kind: str
    d: int
    bounds: Optional[np.ndarray] = None          # (d, 2) for boxes
    phi: Optional[Callable] = None               # graph height function
    patch_radius: float = 1.0

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("domain dimension must be >= 2")
        if self.kind == "box":
            if self.bounds is None:
                self.bounds = np.array([[0.0, 1.0]] * self.d)
            self.bounds = np.asarray(self.bounds, dtype=float)
            if self.bounds.shape != (self.d, 2) or np.any(self.bounds[:, 1] <= self.bounds[:, 0]):
                raise ValueError("box bounds must be (d, 2) with lo < hi")
        elif self.kind == "graph-subdomain":
            if self.phi is None:
                raise ValueError("graph-subdomain requires a height function")
            z = np.zeros(self.d - 1)
            if abs(float(self.phi(z))) > 1e-10:
                raise ValueError("graph height must vanish at the base point")
            step = 1e-5
            for i in range(self.d - 1):
                e = np.zeros(self.d - 1)
                e[i] = step
                g = (float(self.phi(e)) - float(self.phi(-e))) / (2 * step)
                if abs(g) > 1e-6:
                    raise ValueError("graph height must have vanishing gradient at the base point")
        elif self.kind not in ("unit-ball", "half-ball"):
            raise ValueError(f"unknown domain kind {self.kind!r}")

    # -- constructors ------------------------------------------------

    @staticmethod
    def unit_ball(d: int) -> "Domain":
        return Domain("unit-ball", d)

    @staticmethod
    def box(bounds) -> "Domain":
        b = np.asarray(bounds, dtype=float)
        return Domain("box", b.shape[0], bounds=b)

    @staticmethod
    def half_ball(d: int) -> "Domain":
        return Domain("half-ball", d)

    @staticmethod
    def graph_subdomain(phi: Callable, d: int, patch_radius: float = 1.0) -> "Domain":
        return Domain("graph-subdomain", d, phi=phi, patch_radius=patch_radius)

    @staticmethod
    def from_config(spec: dict) -> "Domain":
        kind = spec.get("kind")
        if kind == "unit-ball":
            return Domain.unit_ball(int(spec["d"]))
        if kind == "half-ball":
            return Domain.half_ball(int(spec["d"]))
        if kind == "box":
            if "bounds" in spec:
                return Domain.box(spec["bounds"])
            return Domain("box", int(spec["d"]))
        raise ValueError(f"domain kind {kind!r} not constructible from config")

    # -- geometry queries --------------------------------------------

    @property
    def diameter(self) -> float:
        if self.kind in ("unit-ball", "half-ball"):
            return 2.0
        if self.kind == "box":
            return float(np.linalg.norm(self.bounds[:, 1] - self.bounds[:, 0]))
        return 2.0 * self.patch_radius

    def bounding_box(self):
        if self.kind == "unit-ball":
            return -np.ones(self.d), np.ones(self.d)
        if self.kind == "half-ball":
            lo = -np.ones(self.d)
            lo[-1] = 0.0
            return lo, np.ones(self.d)
        if self.kind == "box":
            return self.bounds[:, 0].copy(), self.bounds[:, 1].copy()
        r = self.patch_radius
        return -r * np.ones(self.d), r * np.ones(self.d)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Strict interior membership for an (n, d) array of points."""
        pts = np.atleast_2d(pts)
        if self.kind == "unit-ball":
            return np.einsum("ij,ij->i", pts, pts) < 1.0
        if self.kind == "half-ball":
            return (np.einsum("ij,ij->i", pts, pts) < 1.0) & (pts[:, -1] > 0.0)
        if self.kind == "box":
            lo, hi = self.bounds[:, 0], self.bounds[:, 1]
            return np.all((pts > lo) & (pts < hi), axis=1)
        r2 = np.einsum("ij,ij->i", pts, pts)
        heights = np.array([float(self.phi(p[:-1])) for p in pts])
        return (r2 < self.patch_radius ** 2) & (pts[:, -1] > heights)

    def boundary_project(self, pts: np.ndarray) -> np.ndarray:
        """Nearest point of the true boundary (first-order adequate)."""
        pts = np.atleast_2d(pts).astype(float)
        if self.kind == "unit-ball":
            n = np.linalg.norm(pts, axis=1, keepdims=True)
            n[n == 0] = 1.0
            return pts / n
        if self.kind == "box":
            lo, hi = self.bounds[:, 0], self.bounds[:, 1]
            q = np.clip(pts, lo, hi)
            # points strictly inside the closed box are pushed to the nearest face
            inside = np.all((q > lo) & (q < hi), axis=1)
            for k in np.flatnonzero(inside):
                gaps = np.minimum(q[k] - lo, hi - q[k])
                a = int(np.argmin(gaps))
                q[k, a] = lo[a] if q[k, a] - lo[a] <= hi[a] - q[k, a] else hi[a]
            return q
        if self.kind == "half-ball":
            out = np.empty_like(pts)
            for k, p in enumerate(pts):
                cand = []
                n = np.linalg.norm(p)
                if n > 0 and p[-1] >= 0:
                    cand.append(p / n)                      # spherical cap
                q = p.copy()
                q[-1] = 0.0
                m = np.linalg.norm(q[:-1])
                if m > 1.0:
                    q[:-1] *= 1.0 / m
                cand.append(q)                              # flat face
                dists = [np.linalg.norm(p - c) for c in cand]
                out[k] = cand[int(np.argmin(dists))]
            return out
        # graph subdomain: drop onto the graph surface
        out = pts.copy()
        for k, p in enumerate(pts):
            out[k, -1] = float(self.phi(p[:-1]))
        return out

    def outward_normal(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts).astype(float)
        if self.kind == "unit-ball":
            n = np.linalg.norm(pts, axis=1, keepdims=True)
            n[n == 0] = 1.0
            return pts / n
        if self.kind == "box":
            lo, hi = self.bounds[:, 0], self.bounds[:, 1]
            out = np.zeros_like(pts)
            for k, p in enumerate(pts):
                below, above = p - lo, hi - p
                # outside a slab: normal along the violated axis; on/inside: nearest face
                exc = np.where(p < lo, p - lo, np.where(p > hi, p - hi, 0.0))
                if np.any(exc != 0.0):
                    out[k] = exc / np.linalg.norm(exc)
                else:
                    gaps = np.minimum(below, above)
                    a = int(np.argmin(gaps))
                    out[k, a] = -1.0 if below[a] <= above[a] else 1.0
            return out
        if self.kind == "half-ball":
            out = np.empty_like(pts)
            for k, p in enumerate(pts):
                proj = self.boundary_project(p[None, :])[0]
                if abs(proj[-1]) < 1e-12 and np.linalg.norm(proj) < 1.0 - 1e-12:
                    nu = np.zeros(self.d)
                    nu[-1] = -1.0
                else:
                    nu = proj / np.linalg.norm(proj)
                out[k] = nu
            return out
        out = np.empty_like(pts)
        step = 1e-6
        for k, p in enumerate(pts):
            g = np.empty(self.d - 1)
            for i in range(self.d - 1):
                e = np.zeros(self.d - 1)
                e[i] = step
                g[i] = (float(self.phi(p[:-1] + e)) - float(self.phi(p[:-1] - e))) / (2 * step)
            nu = np.concatenate([g, [-1.0]])
            out[k] = nu / np.linalg.norm(nu)
        return out

    def graph_height(self, base_point: np.ndarray, offsets: np.ndarray) -> np.ndarray:
        """Height of the boundary graph over the tangent plane at a base point.

        Offsets are (m, d-1) tangent coordinates; the height is measured
        along the inward normal.  Only available where the boundary is C^2.
        """
        offsets = np.atleast_2d(offsets)
        if self.kind == "unit-ball":
            s = np.einsum("ij,ij->i", offsets, offsets)
            if np.any(s >= 1.0):
                raise ValueError("tangent offset leaves the chart of the unit sphere")
            return 1.0 - np.sqrt(1.0 - s)
        if self.kind == "graph-subdomain":
            return np.array([float(self.phi(o)) for o in offsets])
        raise NoGraphAvailable(f"domain kind {self.kind!r} has no C^2 boundary graph")

    def to_config(self) -> dict:
        if self.kind == "box":
            return {"kind": "box", "d": self.d, "bounds": self.bounds.tolist()}
        return {"kind": self.kind, "d": self.d}


@dataclass
class Grid:
    """Masked uniform lattice over a domain.

    Node coordinates are implicit: node with multi-index ``k`` sits at
    ``(index_origin + k) * h``.  Immutable after construction; the lazy
    caches below are derived data only.
    """

    domain: Domain
    h: float
    index_origin: np.ndarray          # integer lattice offset of index (0,...,0)
    shape: tuple
    node_class: np.ndarray            # int8 lattice of EXTERIOR/INTERIOR/BOUNDARY

    _cache: dict = field(default_factory=dict, repr=False)

    # -- basic views ---------------------------------------------------

    @property
    def d(self) -> int:
        return self.domain.d

    @property
    def n_lattice(self) -> int:
        return int(np.prod(self.shape))

    def strides(self) -> np.ndarray:
        s = np.ones(self.d, dtype=np.int64)
        for a in range(self.d - 2, -1, -1):
            s[a] = s[a + 1] * self.shape[a + 1]
        return s

    def coords(self) -> np.ndarray:
        """(n_lattice, d) array of node positions, C-order flattened."""
        if "coords" not in self._cache:
            axes = [(self.index_origin[a] + np.arange(self.shape[a])) * self.h
                    for a in range(self.d)]
            mesh = np.meshgrid(*axes, indexing="ij")
            self._cache["coords"] = np.stack([m.ravel() for m in mesh], axis=1)
        return self._cache["coords"]

    def class_flat(self) -> np.ndarray:
        return self.node_class.ravel()

    @property
    def interior_flat(self) -> np.ndarray:
        if "int" not in self._cache:
            self._cache["int"] = np.flatnonzero(self.class_flat() == INTERIOR)
        return self._cache["int"]

    @property
    def boundary_flat(self) -> np.ndarray:
        if "bnd" not in self._cache:
            self._cache["bnd"] = np.flatnonzero(self.class_flat() == BOUNDARY)
        return self._cache["bnd"]

    @property
    def active_flat(self) -> np.ndarray:
        if "act" not in self._cache:
            self._cache["act"] = np.flatnonzero(self.class_flat() != EXTERIOR)
        return self._cache["act"]

    @property
    def n_interior(self) -> int:
        return self.interior_flat.size

    def neighbor_table(self) -> np.ndarray:
        """(n_interior, 2d) flat indices of the axis neighbors of interior nodes."""
        if "nbr" not in self._cache:
            s = self.strides()
            cols = []
            for a in range(self.d):
                cols.append(self.interior_flat - s[a])
                cols.append(self.interior_flat + s[a])
            self._cache["nbr"] = np.stack(cols, axis=1)
        return self._cache["nbr"]

    def axis_links(self):
        """Per axis, flat start indices of links carrying Dirichlet energy.

        A link (x, x + h e_a) counts when both endpoints are active and at
        least one is interior.
        """
        if "links" not in self._cache:
            cls = self.class_flat()
            s = self.strides()
            links = []
            for a in range(self.d):
                start = np.arange(self.n_lattice - s[a])
                # nodes in the last slab along axis a have no +a neighbor
                idx = np.unravel_index(start, self.shape)
                ok = idx[a] < self.shape[a] - 1
                start = start[ok]
                end = start + s[a]
                both_active = (cls[start] != EXTERIOR) & (cls[end] != EXTERIOR)
                one_interior = (cls[start] == INTERIOR) | (cls[end] == INTERIOR)
                links.append(start[both_active & one_interior])
            self._cache["links"] = links
        return self._cache["links"]

    def ball_offsets(self, R: float) -> np.ndarray:
        """Integer index offsets of lattice points with |k| h < R."""
        key = ("ball", round(R / self.h, 9))
        if key not in self._cache:
            m = int(np.ceil(R / self.h))
            rng = np.arange(-m, m + 1)
            mesh = np.meshgrid(*([rng] * self.d), indexing="ij")
            pts = np.stack([g.ravel() for g in mesh], axis=1)
            keep = np.einsum("ij,ij->i", pts, pts) * self.h ** 2 < R ** 2
            self._cache[key] = pts[keep]
        return self._cache[key]

    def nodes_within(self, x0: np.ndarray, R: float, which: str = "interior") -> np.ndarray:
        """Flat indices of nodes of the given class within distance R of x0."""
        pool = self.interior_flat if which == "interior" else self.active_flat
        c = self.coords()[pool]
        diff = c - np.asarray(x0, dtype=float)
        return pool[np.einsum("ij,ij->i", diff, diff) < R ** 2]

    def boundary_projections(self) -> np.ndarray:
        if "bproj" not in self._cache:
            self._cache["bproj"] = self.domain.boundary_project(self.coords()[self.boundary_flat])
        return self._cache["bproj"]

    def compatible(self, other: "Grid") -> bool:
        return (self.d == other.d and self.h == other.h and self.shape == other.shape
                and np.array_equal(self.index_origin, other.index_origin)
                and self.domain.kind == other.domain.kind)

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d


@dataclass
class BoundaryFrame:
    """Outward unit normals and tangential projectors at boundary nodes."""

    grid: Grid
    normals: np.ndarray        # (n_boundary, d)
    projectors: np.ndarray     # (n_boundary, d, d), I - nu nu^T


def build_grid(domain: Domain, h: float) -> Grid:
    """Classify the lattice h*Z^d against the domain.

    Deterministic: classification is a pure function of node coordinates.
    Raises SpacingTooCoarse when the spacing cannot resolve the domain at
    all (no interior nodes, or fewer than two cells across the diameter).
    """
    if h <= 0:
        raise SpacingTooCoarse("spacing must be positive")
    if h > domain.diameter / 2:
        raise SpacingTooCoarse(
            f"h = {h} exceeds half the domain diameter {domain.diameter}")
    lo, hi = domain.bounding_box()
    k_min = np.floor(lo / h).astype(np.int64) - 2
    k_max = np.ceil(hi / h).astype(np.int64) + 2
    shape = tuple((k_max - k_min + 1).tolist())

    axes = [(k_min[a] + np.arange(shape[a])) * h for a in range(domain.d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    inside = domain.contains(pts).reshape(shape)

    cls = np.zeros(shape, dtype=np.int8)
    cls[inside] = INTERIOR
    near = np.zeros(shape, dtype=bool)
    for a in range(domain.d):
        shifted = np.zeros(shape, dtype=bool)
        sl_to = [slice(None)] * domain.d
        sl_from = [slice(None)] * domain.d
        sl_to[a] = slice(0, -1)
        sl_from[a] = slice(1, None)
        shifted[tuple(sl_to)] |= inside[tuple(sl_from)]
        shifted2 = np.zeros(shape, dtype=bool)
        shifted2[tuple(sl_from)] = inside[tuple(sl_to)]
        near |= shifted | shifted2
    cls[near & ~inside] = BOUNDARY

    if not np.any(cls == INTERIOR):
        raise SpacingTooCoarse(f"h = {h} leaves no interior nodes")
    return Grid(domain=domain, h=float(h), index_origin=k_min, shape=shape, node_class=cls)


def boundary_frame(grid: Grid) -> BoundaryFrame:
    """Outward normal and tangential projector I - nu nu^T per boundary node."""
    pts = grid.coords()[grid.boundary_flat]
    normals = grid.domain.outward_normal(pts)
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    eye = np.eye(grid.d)
    projectors = eye[None, :, :] - np.einsum("ni,nj->nij", normals, normals)
    return BoundaryFrame(grid=grid, normals=normals, projectors=projectors)


@dataclass
class ConditionBResult:
    theta0_estimate: float
    passed: bool
    n_base_points: int
    probe_radius: float


def _base_points(domain: Domain, n: int) -> np.ndarray:
    """Deterministic quasi-uniform net on the boundary sphere."""
    d = domain.d
    if d == 2:
        th = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if d == 3:
        # Fibonacci net
        i = np.arange(n) + 0.5
        phi = np.arccos(1 - 2 * i / n)
        gold = np.pi * (1 + 5 ** 0.5)
        th = gold * i
        return np.stack([np.sin(phi) * np.cos(th),
                         np.sin(phi) * np.sin(th),
                         np.cos(phi)], axis=1)
    rng = np.random.default_rng(0)
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def check_condition_B(domain: Domain, probe_radius: float,
                      threshold: float = 0.1) -> ConditionBResult:
    """Uniform convexity estimate for the boundary graph.

    Samples boundary base points, takes the finite-difference Hessian of
    the local height function at each, and returns the infimum of its
    smallest eigenvalue.  Passes when the estimate reaches the threshold.
    """
    if probe_radius <= 0 or probe_radius >= 0.7:
        raise ValueError("probe radius must lie in (0, 0.7)")
    d = domain.d
    m = d - 1
    delta = probe_radius

    if domain.kind == "unit-ball":
        base = _base_points(domain, 64 if d == 2 else 256)
    elif domain.kind == "graph-subdomain":
        base = np.zeros((1, d))
    else:
        raise NoGraphAvailable(
            f"condition check needs a C^2 boundary graph; kind {domain.kind!r} has corners")

    offs = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = delta
        offs += [e, -e]
        for j in range(i + 1, m):
            f = np.zeros(m)
            f[j] = delta
            offs += [e + f, e - f, -e + f, -e - f]
    offs.append(np.zeros(m))
    offs = np.array(offs)

    theta0 = np.inf
    for p in base:
        vals = {tuple(np.round(o / delta).astype(int)): v
                for o, v in zip(offs, domain.graph_height(p, offs))}
        H = np.empty((m, m))
        for i in range(m):
            ei = tuple(1 if k == i else 0 for k in range(m))
            emi = tuple(-1 if k == i else 0 for k in range(m))
            z = tuple([0] * m)
            H[i, i] = (vals[ei] - 2 * vals[z] + vals[emi]) / delta ** 2
            for j in range(i + 1, m):
                pp = tuple((1 if k == i else 0) + (1 if k == j else 0) for k in range(m))
                pm = tuple((1 if k == i else 0) - (1 if k == j else 0) for k in range(m))
                mp = tuple(-(1 if k == i else 0) + (1 if k == j else 0) for k in range(m))
                mm = tuple(-(1 if k == i else 0) - (1 if k == j else 0) for k in range(m))
                H[i, j] = H[j, i] = (vals[pp] - vals[pm] - vals[mp] + vals[mm]) / (4 * delta ** 2)
        theta0 = min(theta0, float(np.min(np.linalg.eigvalsh(H))))

    return ConditionBResult(theta0_estimate=theta0, passed=theta0 >= threshold,
                            n_base_points=base.shape[0], probe_radius=probe_radius)
