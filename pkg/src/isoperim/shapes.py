"""
Analytic test bodies and their closed-form surface area and volume.

Bodies of revolution (cylinder, cone, capsule) are built around the
x-axis; the torus revolves about z so that a plane x = const through its
centre cuts two circles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import TriangleMesh

KINDS = ("sphere", "ellipsoid", "box", "cylinder", "cone", "capsule", "torus")
THOMSEN_P = 1.6075

_NPARAMS = {
    "sphere": 1,
    "ellipsoid": 3,
    "box": 3,
    "cylinder": 2,
    "cone": 2,
    "capsule": 2,
    "torus": 2,
}

_DEFAULT_RESOLUTION = {
    "sphere": 4,
    "ellipsoid": 4,
    "box": 8,
    "cylinder": 64,
    "cone": 64,
    "capsule": 32,
    "torus": 64,
}


@dataclass(frozen=True)
class ShapeSpec:
    """Shape kind, positive parameters and tessellation resolution.

    For ``sphere`` and ``ellipsoid`` the resolution is the icosphere
    subdivision level (0-7); for the other curved kinds it is the number
    of segments around the axis (at least 8). Boxes ignore it.
    """

    kind: str
    params: tuple
    resolution: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}; expected one of {KINDS}")
        params = tuple(float(p) for p in self.params)
        if len(params) != _NPARAMS[self.kind]:
            raise ValueError(f"{self.kind} takes {_NPARAMS[self.kind]} parameters, got {len(params)}")
        if not all(p > 0 and math.isfinite(p) for p in params):
            raise ValueError(f"shape parameters must be positive, got {params}")
        if self.kind == "torus" and not params[1] < params[0]:
            raise ValueError("torus minor radius must be smaller than the major radius")
        res = self.resolution
        if res is None:
            res = _DEFAULT_RESOLUTION[self.kind]
        res = int(res)
        if self.kind in ("sphere", "ellipsoid"):
            if not 0 <= res <= 7:
                raise ValueError("icosphere subdivision level must be in 0..7")
        elif self.kind != "box" and res < 8:
            raise ValueError("resolution must be at least 8")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "resolution", res)


@dataclass(frozen=True)
class AnalyticReference:
    S_exact: float
    V_exact: float
    quotient_exact: float
    rotational_axis: tuple | None = None
    approximate: bool = False


def quotient(S, V):
    return (S**3 / (36.0 * math.pi * V**2)) ** (1.0 / 3.0)


# ------------------------------------------------------------------ builders


def _icosahedron():
    t = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return v / np.linalg.norm(v, axis=1)[:, None], f


def icosphere(subdivisions=4, radius=1.0):
    verts, faces = _icosahedron()
    verts = [tuple(p) for p in verts]
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                p = np.add(verts[a], verts[b])
                p /= np.linalg.norm(p)
                cache[key] = len(verts)
                verts.append(tuple(p))
            return cache[key]

        for a, b, c in faces.tolist() if isinstance(faces, np.ndarray) else faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces
    return TriangleMesh(np.array(verts) * radius, np.asarray(faces))


def box(a, b, c):
    v = np.array(
        [[x, y, z] for x in (0.0, a) for y in (0.0, b) for z in (0.0, c)], dtype=float
    )
    # vertex index = 4*ix + 2*iy + iz
    f = [
        [0, 1, 3], [0, 3, 2],  # x = 0
        [4, 6, 7], [4, 7, 5],  # x = a
        [0, 4, 5], [0, 5, 1],  # y = 0
        [2, 3, 7], [2, 7, 6],  # y = b
        [0, 2, 6], [0, 6, 4],  # z = 0
        [1, 5, 7], [1, 7, 3],  # z = c
    ]
    return TriangleMesh(v, f)


def _lathe(xs, rs, segments, apex_start=None, apex_end=None):
    """Revolve a meridian polyline about the x-axis.

    ``xs``/``rs`` list ring positions and radii (all radii > 0). The
    ends are closed by a single vertex on the axis at ``apex_start`` /
    ``apex_end`` (defaulting to the first/last ring's x, which gives a
    flat disk fan).
    """
    xs = np.asarray(xs, dtype=float)
    rs = np.asarray(rs, dtype=float)
    m = len(xs)
    theta = 2.0 * np.pi * np.arange(segments) / segments
    ring = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    verts = np.zeros((m * segments + 2, 3))
    for i in range(m):
        sl = slice(i * segments, (i + 1) * segments)
        verts[sl, 0] = xs[i]
        verts[sl, 1:] = rs[i] * ring
    start, end = m * segments, m * segments + 1
    verts[start] = [xs[0] if apex_start is None else apex_start, 0.0, 0.0]
    verts[end] = [xs[-1] if apex_end is None else apex_end, 0.0, 0.0]

    faces = []
    j = np.arange(segments)
    jn = (j + 1) % segments
    for i in range(m - 1):
        a = i * segments + j
        b = i * segments + jn
        c = (i + 1) * segments + j
        d = (i + 1) * segments + jn
        faces.append(np.stack([a, b, d], axis=1))
        faces.append(np.stack([a, d, c], axis=1))
    faces.append(np.stack([np.full(segments, start), jn, j], axis=1))
    last = (m - 1) * segments
    faces.append(np.stack([np.full(segments, end), last + j, last + jn], axis=1))
    return TriangleMesh(verts, np.concatenate(faces))


def cylinder(radius, length, segments=64):
    h = length / 2.0
    return _lathe([-h, h], [radius, radius], segments)


def cone(radius, height, segments=64):
    # apex at the origin, base disk at x = height
    return _lathe([height], [radius], segments, apex_start=0.0)


def capsule(radius, length, segments=32):
    h = length / 2.0
    k = max(2, segments // 4)
    ang = np.pi / 2.0 * np.arange(1, k + 1) / k
    left_x = -h - radius * np.cos(ang)
    left_r = radius * np.sin(ang)
    xs = np.concatenate([left_x, -left_x[::-1]])
    rs = np.concatenate([left_r, left_r[::-1]])
    return _lathe(xs, rs, segments, apex_start=-h - radius, apex_end=h + radius)


def torus(major, minor, segments=64):
    nu = segments
    nv = max(8, segments // 2)
    u = 2.0 * np.pi * np.arange(nu) / nu
    v = 2.0 * np.pi * np.arange(nv) / nv
    uu, vv = np.meshgrid(u, v, indexing="ij")
    rad = major + minor * np.cos(vv)
    verts = np.stack(
        [rad * np.cos(uu), rad * np.sin(uu), minor * np.sin(vv)], axis=-1
    ).reshape(-1, 3)
    i = np.arange(nu)[:, None]
    j = np.arange(nv)[None, :]
    a = i * nv + j
    b = ((i + 1) % nu) * nv + j
    c = ((i + 1) % nu) * nv + (j + 1) % nv
    d = i * nv + (j + 1) % nv
    faces = np.concatenate(
        [np.stack([a, b, c], -1).reshape(-1, 3), np.stack([a, c, d], -1).reshape(-1, 3)]
    )
    return TriangleMesh(verts, faces)


def generate(spec):
    """Tessellate ``spec`` into a watertight, outward-wound mesh."""
    p, res = spec.params, spec.resolution
    if spec.kind == "sphere":
        return icosphere(res, p[0])
    if spec.kind == "ellipsoid":
        unit = icosphere(res, 1.0)
        return TriangleMesh(unit.vertices * np.asarray(p), unit.faces)
    if spec.kind == "box":
        return box(*p)
    if spec.kind == "cylinder":
        return cylinder(p[0], p[1], res)
    if spec.kind == "cone":
        return cone(p[0], p[1], res)
    if spec.kind == "capsule":
        return capsule(p[0], p[1], res)
    return torus(p[0], p[1], res)


def ellipsoid_area_thomsen(a, b, c, p=THOMSEN_P):
    mean = ((a * b) ** p + (a * c) ** p + (b * c) ** p) / 3.0
    return 4.0 * math.pi * mean ** (1.0 / p)


def analytic_reference(spec):
    p = spec.params
    axis_x = (1.0, 0.0, 0.0)
    approximate = False
    rot = None
    if spec.kind == "sphere":
        (R,) = p
        S, V, rot = 4 * math.pi * R**2, 4 * math.pi * R**3 / 3, axis_x
    elif spec.kind == "ellipsoid":
        a, b, c = p
        V = 4 * math.pi * a * b * c / 3
        if a == b == c:
            S = 4 * math.pi * a**2
        else:
            S, approximate = ellipsoid_area_thomsen(a, b, c), True
        if b == c:
            rot = axis_x
        elif a == b:
            rot = (0.0, 0.0, 1.0)
        elif a == c:
            rot = (0.0, 1.0, 0.0)
    elif spec.kind == "box":
        a, b, c = p
        S, V = 2 * (a * b + a * c + b * c), a * b * c
    elif spec.kind == "cylinder":
        r, h = p
        S, V, rot = 2 * math.pi * r * (r + h), math.pi * r**2 * h, axis_x
    elif spec.kind == "cone":
        r, h = p
        S = math.pi * r * (r + math.hypot(r, h))
        V, rot = math.pi * r**2 * h / 3, axis_x
    elif spec.kind == "capsule":
        r, h = p
        S = 4 * math.pi * r**2 + 2 * math.pi * r * h
        V, rot = 4 * math.pi * r**3 / 3 + math.pi * r**2 * h, axis_x
    else:
        R, r = p
        S, V, rot = 4 * math.pi**2 * R * r, 2 * math.pi**2 * R * r**2, (0.0, 0.0, 1.0)
    return AnalyticReference(S, V, quotient(S, V), rot, approximate)


def parse_spec(kind, params, resolution=None):
    """Build a :class:`ShapeSpec` from CLI-style strings (``"2,0.5"``)."""
    if isinstance(params, str):
        params = [float(s) for s in params.split(",") if s.strip()]
    return ShapeSpec(kind, tuple(params), resolution)


# the fixed corpus used by the acceptance and property suites
BUNDLED = {
    "sphere": ShapeSpec("sphere", (1.0,), 4),
    "ellipsoid": ShapeSpec("ellipsoid", (2.0, 1.0, 0.5), 4),
    "cube": ShapeSpec("box", (1.0, 1.0, 1.0)),
    "box": ShapeSpec("box", (1.0, 2.0, 3.0)),
    "cylinder": ShapeSpec("cylinder", (1.0, 2.0), 128),
    "cone": ShapeSpec("cone", (1.0, 1.0), 128),
    "capsule": ShapeSpec("capsule", (0.5, 1.0), 64),
    "torus": ShapeSpec("torus", (2.0, 0.5), 64),
}
