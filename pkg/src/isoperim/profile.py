"""
Sampled section functionals on a uniform grid and the symmetrized
solid of revolution built from them.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .geometry import TriangleMesh
from .slicer import DegenerateSliceError, slab_moments, slab_volumes, slice_at

MIN_SLICES = 8
NUDGE = 1e-9
END_DISK_REL = 1e-6
WALL_RATIO = 0.1


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class SlicedProfile:
    x_grid: np.ndarray
    Q: np.ndarray
    U: np.ndarray
    slab: np.ndarray
    Qp: np.ndarray
    x0: float
    x1: float
    slab_U: np.ndarray = None
    slab_dQ: np.ndarray = None
    slab_V: np.ndarray = None
    sections: tuple = field(default=(), repr=False)
    warnings: tuple = ()

    def __post_init__(self):
        # analytic profiles without mesh moments fall back to the samples
        if self.slab_U is None:
            object.__setattr__(self, "slab_U", self.U * self.dx)
        if self.slab_dQ is None:
            object.__setattr__(self, "slab_dQ", self.Qp * self.dx)
        if self.slab_V is None:
            object.__setattr__(self, "slab_V", self.Q * self.dx)

    @property
    def n(self):
        return len(self.x_grid)

    @property
    def dx(self):
        return (self.x1 - self.x0) / self.n

    @property
    def volume(self):
        return math.fsum((self.Q * self.dx).tolist())

    @classmethod
    def from_arrays(cls, x0, x1, Q, U, slab=None):
        """Profile from sampled values at the ``len(Q)`` cell midpoints of [x0, x1]."""
        Q = np.asarray(Q, dtype=float)
        n = len(Q)
        dx = (x1 - x0) / n
        x = x0 + (np.arange(n) + 0.5) * dx
        U = np.asarray(U, dtype=float)
        slab = np.full(n, np.nan) if slab is None else np.asarray(slab, dtype=float)
        return cls(x, Q, U, slab, q_derivative(Q, dx), float(x0), float(x1))

    def integrand(self):
        """sqrt(4 pi Q + Q'^2) at each grid point."""
        return np.sqrt(4.0 * math.pi * self.Q + self.Qp**2)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "Q", "U", "Qp", "slab", "sqrt4piQ_Qp2"])
        for row in zip(self.x_grid, self.Q, self.U, self.Qp, self.slab, self.integrand()):
            w.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()


@dataclass(frozen=True)
class RevolutionBody:
    x_grid: np.ndarray
    r: np.ndarray
    lateral_area: float
    end_disk_area: float
    volume: float


def thread_count():
    raw = os.environ.get("ISOPERIM_THREADS", "0").strip() or "0"
    n = int(raw)
    return n if n > 0 else (os.cpu_count() or 1)


def q_derivative(Q, dx):
    """Second-order finite differences: central inside, one-sided at the ends."""
    Q = np.asarray(Q, dtype=float)
    if len(Q) < 3:
        raise ProfileError("need at least 3 samples to differentiate")
    return np.gradient(Q, dx, edge_order=2)


def _slice_nudged(mesh, x, span):
    nudged = x
    for _ in range(16):
        try:
            return slice_at(mesh, nudged), nudged
        except DegenerateSliceError:
            nudged += NUDGE * span
    raise ProfileError(f"could not find a clear plane near x={x}; try another --at or --slices")


def build_profile(mesh, n, threads=None):
    """Slice ``mesh`` at the ``n`` cell midpoints of its x-extent.

    Planes that hit a vertex are moved by +1e-9 of the extent and the
    move is recorded in ``warnings``. Sections are computed in a thread
    pool (``ISOPERIM_THREADS``) and assembled in grid order.
    """
    if n < MIN_SLICES:
        raise ProfileError(f"need at least {MIN_SLICES} slices, got {n}")
    x0, x1 = geometry.bounds_x(mesh)
    span = x1 - x0
    dx = span / n
    grid = x0 + (np.arange(n) + 0.5) * dx
    edges = x0 + np.arange(n + 1) * dx
    edges[-1] = x1

    workers = thread_count() if threads is None else max(1, threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda x: _slice_nudged(mesh, x, span), grid))
    else:
        results = [_slice_nudged(mesh, x, span) for x in grid]

    warnings = []
    sections = []
    for x, (sec, used) in zip(grid, results):
        if used != x:
            warnings.append(f"plane x={x:.17g} nudged to {used:.17g} (vertex incidence)")
        warnings.extend(sec.warnings)
        sections.append(sec)
    Q = np.array([s.Q for s in sections])
    U = np.array([s.U for s in sections])
    bad = np.nonzero(~(Q > 0))[0]
    if len(bad):
        raise ProfileError(
            f"non-positive section area at x={grid[bad[0]]:.17g} (Q={Q[bad[0]]!r})"
        )
    Qp = q_derivative(Q, dx)
    # ends where Q -> 0 always look steep; only flag walls inside the body
    walls = np.nonzero((np.abs(Qp) * dx > WALL_RATIO * Q) & (Q > WALL_RATIO * Q.max()))[0]
    for i in walls:
        warnings.append(f"steep section change at x={grid[i]:.17g} (|Q'| dx > 0.1 Q)")
    slab, slab_U, slab_dQ = slab_moments(mesh, edges)
    slab_V = slab_volumes(mesh, edges)
    return SlicedProfile(
        grid, Q, U, slab, Qp, x0, x1, slab_U, slab_dQ, slab_V, tuple(sections), tuple(warnings)
    )


def end_disks(profile):
    """Areas of the flat ends of the symmetrized body, (left, right).

    Each is Q extrapolated to the interval end by the quadratic through
    the three outermost samples (exact for spheres, cones and cylinders);
    it is kept when it exceeds 1e-6 of max Q and is zero otherwise, so
    ends where Q tends to 0 contribute nothing.
    """
    Q = profile.Q
    thr = END_DISK_REL * float(Q.max())
    left = max(0.0, (15.0 * Q[0] - 10.0 * Q[1] + 3.0 * Q[2]) / 8.0)
    right = max(0.0, (15.0 * Q[-1] - 10.0 * Q[-2] + 3.0 * Q[-3]) / 8.0)
    return (float(left) if left > thr else 0.0, float(right) if right > thr else 0.0)


def cell_lengths(profile):
    """Weights of the midpoint rule for the lateral area.

    Cells are dx long, except an end cell that carries a flat end: a
    tilted end disk sweeps part of that cell, which the disk area already
    accounts for, so the cell counts only its effective length, exact
    cell volume over sampled section area.
    """
    w = np.full(profile.n, profile.dx)
    left, right = end_disks(profile)
    for i, disk in ((0, left), (-1, right)):
        if disk > 0:
            w[i] = min(profile.dx, profile.slab_V[i] / profile.Q[i])
    return w


def revolution_lateral_area(profile):
    """Midpoint-rule area of the body of revolution: (lateral, end_disks)."""
    lateral = math.fsum((profile.integrand() * cell_lengths(profile)).tolist())
    return lateral, math.fsum(end_disks(profile))


def revolution_body(profile):
    lateral, disks = revolution_lateral_area(profile)
    r = np.sqrt(profile.Q / math.pi)
    return RevolutionBody(profile.x_grid, r, lateral, disks, profile.volume)


def revolve_mesh(profile, segments=128):
    """Mesh of the symmetrized body: one ring of radius sqrt(Q/pi) per grid point.

    Ends with a flat disk get a ring closed by a flat fan, placed where the
    effective end cell (see :func:`cell_lengths`) begins; other ends close
    on an apex on the axis at the interval end.
    """
    if segments < 3:
        raise ValueError("need at least 3 segments")
    left, right = end_disks(profile)
    w = cell_lengths(profile)
    xs = list(profile.x_grid)
    rs = list(np.sqrt(profile.Q / math.pi))
    x_start, x_end = profile.x0, profile.x1
    if left > 0:
        x_start = profile.x0 + (profile.dx - w[0])
        xs.insert(0, x_start)
        rs.insert(0, math.sqrt(left / math.pi))
    if right > 0:
        x_end = profile.x1 - (profile.dx - w[-1])
        xs.append(x_end)
        rs.append(math.sqrt(right / math.pi))
    m = len(xs)
    theta = 2.0 * np.pi * np.arange(segments) / segments
    verts = np.zeros((m * segments + 2, 3))
    for i, (x, r) in enumerate(zip(xs, rs)):
        sl = slice(i * segments, (i + 1) * segments)
        verts[sl, 0] = x
        verts[sl, 1] = r * np.cos(theta)
        verts[sl, 2] = r * np.sin(theta)
    start, end = m * segments, m * segments + 1
    verts[start, 0] = x_start
    verts[end, 0] = x_end

    j = np.arange(segments)
    jn = (j + 1) % segments
    faces = []
    for i in range(m - 1):
        a, b = i * segments + j, i * segments + jn
        c, d = a + segments, b + segments
        faces += [np.stack([a, b, d], 1), np.stack([a, d, c], 1)]
    last = (m - 1) * segments
    faces.append(np.stack([np.full(segments, start), jn, j], 1))
    faces.append(np.stack([np.full(segments, end), last + j, last + jn], 1))
    return TriangleMesh(verts, np.concatenate(faces))
