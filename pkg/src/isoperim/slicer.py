"""
Plane sections x = const of a triangle mesh.

Each section is a set of closed planar loops in (y, z) wound with the
body interior on their left, so outer boundaries are counterclockwise,
holes clockwise, and the summed shoelace area is positive.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import face_areas, face_normals

VERTEX_EPS = 1e-12
POINT_EPS = 1e-12


class DegenerateSliceError(ValueError):
    """The plane passes through a vertex; retry at a nudged x."""

    def __init__(self, x, vertices):
        self.x = x
        self.vertices = list(vertices)
        super().__init__(
            f"plane x={x!r} passes within {VERTEX_EPS} of vertices "
            f"{self.vertices[:8]}; nudge x slightly"
        )


class SliceTopologyError(ValueError):
    """Intersection segments did not close into loops."""


def shoelace(points):
    p = np.asarray(points, dtype=float)
    q = np.roll(p, -1, axis=0)
    return 0.5 * math.fsum((p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]).tolist())


def polyline_length(points, closed=True):
    p = np.asarray(points, dtype=float)
    q = np.roll(p, -1, axis=0) if closed else p[1:]
    p = p if closed else p[:-1]
    return math.fsum(np.hypot(*(q - p).T).tolist())


@dataclass(frozen=True)
class PlanarLoop:
    points: np.ndarray
    signed_area: float
    length: float

    @classmethod
    def from_points(cls, points):
        p = np.array(points, dtype=float).reshape(-1, 2)
        if len(p) < 3:
            raise ValueError("a loop needs at least 3 points")
        p.flags.writeable = False
        return cls(p, shoelace(p), polyline_length(p))

    def reversed(self):
        return PlanarLoop.from_points(self.points[::-1])


@dataclass(frozen=True)
class CrossSection:
    x: float
    loops: tuple
    Q: float
    U: float
    warnings: tuple = field(default=())

    @classmethod
    def from_loops(cls, loops, x=0.0, warnings=()):
        loops = tuple(l if isinstance(l, PlanarLoop) else PlanarLoop.from_points(l) for l in loops)
        Q = math.fsum(l.signed_area for l in loops)
        U = math.fsum(l.length for l in loops)
        return cls(float(x), loops, Q, U, tuple(warnings))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["loop_id", "point_id", "y", "z"])
        for i, loop in enumerate(self.loops):
            for j, (y, z) in enumerate(loop.points.tolist()):
                w.writerow([i, j, f"{y:.17g}", f"{z:.17g}"])
        return buf.getvalue()


@dataclass(frozen=True)
class ChainedCurve:
    points: np.ndarray
    cumulative_s: np.ndarray
    total_length: float
    enclosed_area: float
    junctions: tuple = ()


# ------------------------------------------------------------------ slicing


def _point_in_polygon(pt, poly):
    y, z = pt
    py, pz = poly[:, 0], poly[:, 1]
    qy, qz = np.roll(py, -1), np.roll(pz, -1)
    cond = (pz > z) != (qz > z)
    with np.errstate(divide="ignore", invalid="ignore"):
        cross_y = py + (z - pz) * (qy - py) / (qz - pz)
    return bool(np.count_nonzero(cond & (y < cross_y)) % 2)


def _orient_by_depth(loops):
    """Even-depth loops counterclockwise, odd-depth loops clockwise."""
    out = []
    for i, loop in enumerate(loops):
        depth = sum(
            _point_in_polygon(loop.points[0], other.points)
            for j, other in enumerate(loops)
            if j != i
        )
        want_positive = depth % 2 == 0
        if (loop.signed_area > 0) != want_positive:
            loop = loop.reversed()
        out.append(loop)
    return out


def _dedupe(points):
    keep = [points[0]]
    for p in points[1:]:
        if math.hypot(p[0] - keep[-1][0], p[1] - keep[-1][1]) > POINT_EPS:
            keep.append(p)
    while len(keep) > 1 and math.hypot(keep[0][0] - keep[-1][0], keep[0][1] - keep[-1][1]) <= POINT_EPS:
        keep.pop()
    return keep


def slice_at(mesh, x):
    """Intersect ``mesh`` with the plane at abscissa ``x``.

    Raises
    ------
    DegenerateSliceError
        If any vertex lies within 1e-12 of the plane.
    SliceTopologyError
        If the segments do not close up (mesh not watertight).
    """
    x = float(x)
    verts = mesh.vertices
    d = verts[:, 0] - x
    near = np.nonzero(np.abs(d) <= VERTEX_EPS)[0]
    if len(near):
        raise DegenerateSliceError(x, near.tolist())
    above = d > 0
    faces = mesh.faces
    s = above[faces]
    crossing = s.any(axis=1) & ~s.all(axis=1)
    fc = faces[crossing]
    if len(fc) == 0:
        return CrossSection(x, (), 0.0, 0.0)
    sc = s[crossing]

    # half-edges k: fc[:, k] -> fc[:, (k+1) % 3]
    tail = sc
    head = np.roll(sc, -1, axis=1)
    down = tail & ~head
    up = ~tail & head
    k_down = np.argmax(down, axis=1)
    k_up = np.argmax(up, axis=1)
    rows = np.arange(len(fc))
    nv = len(verts)

    def edge_key(k):
        a = fc[rows, k]
        b = fc[rows, (k + 1) % 3]
        return np.minimum(a, b) * nv + np.maximum(a, b)

    start_key = edge_key(k_down)
    end_key = edge_key(k_up)

    keys = np.unique(np.concatenate([start_key, end_key]))
    lo, hi = keys // nv, keys % nv
    t = d[lo] / (d[lo] - d[hi])
    pts = verts[lo, 1:] + t[:, None] * (verts[hi, 1:] - verts[lo, 1:])
    point_of = dict(zip(keys.tolist(), pts.tolist()))

    successor = {}
    for a, b in zip(start_key.tolist(), end_key.tolist()):
        if a in successor:
            raise SliceTopologyError(f"x={x}: edge {divmod(a, nv)} starts two segments")
        successor[a] = b

    loops = []
    warnings = []
    visited = set()
    for first in sorted(successor):
        if first in visited:
            continue
        chain = []
        key = first
        while key not in visited:
            visited.add(key)
            chain.append(point_of[key])
            if key not in successor:
                raise SliceTopologyError(f"x={x}: open chain at edge {divmod(key, nv)}")
            key = successor[key]
        if key != first:
            raise SliceTopologyError(f"x={x}: chain does not close at edge {divmod(key, nv)}")
        chain = _dedupe(chain)
        if len(chain) < 3:
            warnings.append(f"x={x}: dropped a collapsed loop")
            continue
        loops.append(PlanarLoop.from_points(chain))

    return CrossSection.from_loops(_orient_by_depth(loops), x, warnings)


def chain_loops(section):
    """Join the loops of ``section`` into one closed chain through the origin.

    Loops are taken by descending ``|signed_area|`` (ties broken by the
    first point), each translated so its first vertex sits at (0, 0).
    """
    order = sorted(
        range(len(section.loops)),
        key=lambda i: (
            -abs(section.loops[i].signed_area),
            tuple(section.loops[i].points[0].tolist()),
        ),
    )
    parts = [np.zeros((1, 2))]
    junctions = []
    count = 1
    for i in order:
        p = section.loops[i].points
        rel = p[1:] - p[0]
        parts.append(rel)
        parts.append(np.zeros((1, 2)))
        count += len(rel) + 1
        junctions.append(count - 1)
    pts = np.concatenate(parts)
    pts.flags.writeable = False
    steps = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(steps)])
    s.flags.writeable = False
    area = 0.5 * math.fsum((pts[:-1, 0] * pts[1:, 1] - pts[1:, 0] * pts[:-1, 1]).tolist())
    return ChainedCurve(pts, s, math.fsum(steps.tolist()), area, tuple(junctions[:-1]))


# -------------------------------------------------------------- slab areas


def area_below(mesh, t):
    """Per-face area of the part of each triangle with x <= t."""
    xs = np.sort(mesh.vertices[mesh.faces, 0], axis=1)
    return _area_below(xs, face_areas(mesh), t)


def _area_below(xs, areas, t, strict=False):
    # strict: a face lying in the plane x = t is not yet below it
    x0, x1, x2 = xs[:, 0], xs[:, 1], xs[:, 2]
    full = t >= x2
    if strict:
        full &= ~((x0 == x2) & (x2 == t))
    out = np.where(full, areas, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = areas * (t - x0) ** 2 / ((x2 - x0) * (x1 - x0))
        upper = areas - areas * (x2 - t) ** 2 / ((x2 - x0) * (x2 - x1))
    out = np.where((t > x0) & (t <= x1) & (x1 > x0), lower, out)
    out = np.where((t > x1) & (t < x2), upper, out)
    return out


def _cell_parts(mesh, edges):
    xs = np.sort(mesh.vertices[mesh.faces, 0], axis=1)
    areas = face_areas(mesh)
    cum = [_area_below(xs, areas, float(t), strict=(i == 0)) for i, t in enumerate(edges)]
    return [b - a for a, b in zip(cum[:-1], cum[1:])]


def slab_areas(mesh, edges):
    """Exact mesh area between consecutive planes in ``edges``."""
    return np.array([math.fsum(p.tolist()) for p in _cell_parts(mesh, edges)])


def slab_moments(mesh, edges):
    """Per-cell (area, integral of U dx, increase of Q), all exact for the mesh.

    On a flat face the level lines of x have length density sin(xi) per
    unit area and the projection onto the yz-plane has density cos(xi),
    where xi is the angle between the inward normal and +x. Summed over
    the face pieces in a cell these give the integral of U over the cell
    and Q(b) - Q(a) (divergence theorem on the slab).
    """
    n = face_normals(mesh)
    sin_xi = np.hypot(n[:, 1], n[:, 2]).tolist()
    cos_xi = (-n[:, 0]).tolist()
    area, u_int, dq = [], [], []
    for part in _cell_parts(mesh, edges):
        idx = np.nonzero(part)[0].tolist()
        vals = part.tolist()
        area.append(math.fsum(vals[i] for i in idx))
        u_int.append(math.fsum(vals[i] * sin_xi[i] for i in idx))
        dq.append(math.fsum(vals[i] * cos_xi[i] for i in idx))
    return np.array(area), np.array(u_int), np.array(dq)


def _moment_below(xs, areas, t):
    """Per face, the integral of (x - t) over the part of the face with x <= t."""
    x0, x1, x2 = xs[:, 0], xs[:, 1], xs[:, 2]
    c = (x0 + x1 + x2) / 3.0
    out = np.where(t >= x2, areas * (c - t), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = t - x0
        lower = -areas * s**3 / (3.0 * (x2 - x0) * (x1 - x0))
        w = x2 - t
        upper = areas * (c - t) - areas * w**3 / (3.0 * (x2 - x0) * (x2 - x1))
    out = np.where((t > x0) & (t <= x1) & (x1 > x0), lower, out)
    out = np.where((t > x1) & (t < x2), upper, out)
    return out


def slab_volumes(mesh, edges):
    """Exact enclosed volume between consecutive planes in ``edges``.

    Divergence theorem with the field (x - t, 0, 0): the section at x = t
    contributes nothing, so the volume below t is a sum over the faces
    of n_x times a closed-form moment of the face part below t.
    """
    xs = np.sort(mesh.vertices[mesh.faces, 0], axis=1)
    areas = face_areas(mesh)
    nx = face_normals(mesh)[:, 0]
    below = [math.fsum((nx * _moment_below(xs, areas, float(t))).tolist()) for t in edges]
    return np.diff(below)


def slab_area(mesh, x_a, x_b):
    """Mesh surface area of the band ``x_a <= x <= x_b``."""
    if not x_a < x_b:
        raise ValueError("slab needs x_a < x_b")
    return float(slab_areas(mesh, [x_a, x_b])[0])
