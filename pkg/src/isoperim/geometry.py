"""
Triangle meshes: validation, measurement, file I/O and axis placement.

The slicing axis is always +x after :func:`orient_axis`; every other
module assumes that convention.
"""
from __future__ import annotations

import math
import struct
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

WELD_TOL = 1e-9
PARALLEL_TOL = 1e-12
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
BASE_TILT = 1e-3


class MeshError(ValueError):
    """Raised when a mesh cannot be parsed or fails validation."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 3)
        f = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        v.flags.writeable = False
        f.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def triangles(self):
        """(m, 3, 3) array of face corner coordinates."""
        return self.vertices[self.faces]

    def __len__(self):
        return len(self.faces)


@dataclass(frozen=True)
class AxisFrame:
    rotation: np.ndarray
    tilt_angle: float = 0.0

    def apply(self, points):
        return np.asarray(points, dtype=float) @ self.rotation.T


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    items: tuple = ()


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    def __bool__(self):
        return not self.violations

    @property
    def kinds(self):
        return {v.kind for v in self.violations}

    def first(self, kind):
        for v in self.violations:
            if v.kind == kind:
                return v
        return None


# ---------------------------------------------------------------- measurement


def face_cross(mesh):
    """Unnormalised face normals, (v1 - v0) x (v2 - v0)."""
    tri = mesh.triangles
    return np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])


def face_areas(mesh):
    return 0.5 * np.linalg.norm(face_cross(mesh), axis=1)


def face_normals(mesh):
    c = face_cross(mesh)
    norm = np.linalg.norm(c, axis=1)
    norm[norm == 0] = 1.0
    return c / norm[:, None]


def surface_area(mesh):
    """Sum of triangle areas, accumulated exactly-rounded in face order."""
    return math.fsum(face_areas(mesh).tolist())


def signed_volume(mesh):
    tri = mesh.triangles
    det = np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2]))
    return math.fsum(det.tolist()) / 6.0


def volume(mesh):
    """Enclosed volume by the divergence theorem.

    Raises
    ------
    MeshError
        If the signed volume is not positive (faces wound inward).
    """
    v = signed_volume(mesh)
    if not v > 0:
        raise MeshError(f"non-positive signed volume {v!r}: faces are wound inward")
    return v


def bounds_x(mesh):
    x = mesh.vertices[:, 0]
    x0, x1 = float(x.min()), float(x.max())
    if not x0 < x1:
        raise MeshError(f"mesh is flat in x (x0 = x1 = {x0})")
    return x0, x1


# ----------------------------------------------------------------- validation


def _edge_tables(faces):
    directed = np.concatenate(
        [faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]], axis=0
    )
    owner = np.tile(np.arange(len(faces)), 3)
    return directed, owner


def _flipped_faces(faces, directed, owner):
    """Faces whose winding disagrees with the majority of their component."""
    undirected = np.sort(directed, axis=1)
    order = np.lexsort((undirected[:, 1], undirected[:, 0]))
    u = undirected[order]
    same = np.all(u[1:] == u[:-1], axis=1)
    idx = np.nonzero(same)[0]
    adjacency = [[] for _ in range(len(faces))]
    for i in idx:
        a, b = order[i], order[i + 1]
        fa, fb = owner[a], owner[b]
        # same direction on a shared edge means opposite winding
        flip = bool(np.all(directed[a] == directed[b]))
        adjacency[fa].append((fb, flip))
        adjacency[fb].append((fa, flip))

    parity = np.full(len(faces), -1, dtype=np.int64)
    flipped = []
    for seed in range(len(faces)):
        if parity[seed] >= 0:
            continue
        parity[seed] = 0
        comp = [seed]
        queue = deque([seed])
        while queue:
            f = queue.popleft()
            for g, flip in adjacency[f]:
                want = parity[f] ^ int(flip)
                if parity[g] < 0:
                    parity[g] = want
                    comp.append(g)
                    queue.append(g)
        comp = np.array(comp)
        ones = parity[comp] == 1
        minority = comp[ones] if ones.sum() * 2 <= len(comp) else comp[~ones]
        flipped.extend(minority.tolist())
    return sorted(flipped)


def validate(mesh):
    """Check watertightness, winding, degenerate faces and volume sign.

    Returns a :class:`ValidationReport`; it is truthy when the mesh is valid.
    """
    report = ValidationReport()
    faces = mesh.faces
    if len(faces) == 0:
        report.violations.append(Violation("empty", "mesh has no faces"))
        return report
    if faces.min() < 0 or faces.max() >= len(mesh.vertices):
        report.violations.append(Violation("index", "face index out of range"))
        return report

    directed, owner = _edge_tables(faces)
    undirected = np.sort(directed, axis=1)
    uniq, counts = np.unique(undirected, axis=0, return_counts=True)
    boundary = uniq[counts == 1]
    nonmanifold = uniq[counts > 2]
    if len(boundary):
        report.violations.append(
            Violation(
                "boundary",
                f"{len(boundary)} boundary edges (mesh is not watertight)",
                tuple(map(tuple, boundary.tolist())),
            )
        )
    if len(nonmanifold):
        report.violations.append(
            Violation(
                "nonmanifold",
                f"{len(nonmanifold)} edges shared by more than two faces",
                tuple(map(tuple, nonmanifold.tolist())),
            )
        )

    d_uniq, d_counts = np.unique(directed, axis=0, return_counts=True)
    if np.any(d_counts > 1):
        flipped = _flipped_faces(faces, directed, owner)
        report.violations.append(
            Violation(
                "orientation",
                f"inconsistent winding; flipped faces {flipped}",
                tuple(flipped),
            )
        )

    areas = face_areas(mesh)
    extent = np.ptp(mesh.vertices, axis=0)
    scale = float(np.dot(extent, extent)) or 1.0
    degenerate = np.nonzero(areas <= 1e-14 * scale)[0]
    if len(degenerate):
        report.violations.append(
            Violation(
                "degenerate",
                f"{len(degenerate)} zero-area faces",
                tuple(degenerate.tolist()),
            )
        )

    if not report.violations:
        v = signed_volume(mesh)
        if not v > 0:
            report.violations.append(
                Violation("volume", f"signed volume {v!r} is not positive")
            )
    return report


def require_valid(mesh, kinds=None):
    report = validate(mesh)
    bad = [v for v in report.violations if kinds is None or v.kind in kinds]
    if bad:
        raise MeshError("; ".join(v.message for v in bad), bad)
    return mesh


# ------------------------------------------------------------ axis placement


def rotation_to_x(axis):
    """Proper rotation taking the unit vector along ``axis`` to +x."""
    a = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(a)
    if not norm > 0:
        raise ValueError("axis must be non-zero")
    a = a / norm
    ex = np.array([1.0, 0.0, 0.0])
    c = float(a @ ex)
    v = np.cross(a, ex)
    if c < -1.0 + 1e-15:
        return np.diag([-1.0, -1.0, 1.0])
    k = np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
    return np.eye(3) + k + k @ k / (1.0 + c)


def tilt_rotation(angle):
    """Rotation by ``angle`` about the fixed golden-angle axis in the yz-plane."""
    u = np.array([0.0, math.cos(GOLDEN_ANGLE), math.sin(GOLDEN_ANGLE)])
    k = np.array([[0.0, -u[2], u[1]], [u[2], 0.0, -u[0]], [-u[1], u[0], 0.0]])
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def parallel_faces(mesh, tol=PARALLEL_TOL):
    """Indices of faces lying parallel to the yz-plane."""
    n = face_normals(mesh)
    return np.nonzero(np.hypot(n[:, 1], n[:, 2]) <= tol)[0]


def transform(mesh, rotation):
    return TriangleMesh(mesh.vertices @ np.asarray(rotation).T, mesh.faces)


def orient_axis(mesh, axis=(1.0, 0.0, 0.0), tilt="auto"):
    """Rotate ``mesh`` so that ``axis`` points along +x.

    Parameters
    ----------
    mesh : TriangleMesh
    axis : (3,) float
        Slicing direction in the input coordinates.
    tilt : {"none", "auto"} or float
        ``"auto"`` composes a small deterministic rotation (1e-3 rad,
        doubled until clear) when a facet would be parallel to the
        yz-plane. A float applies exactly that tilt angle.

    Returns
    -------
    (TriangleMesh, AxisFrame)
    """
    base = rotation_to_x(axis)
    angle = 0.0
    if tilt not in ("none", "auto"):
        angle = float(tilt)
    rot = tilt_rotation(angle) @ base if angle else base
    out = transform(mesh, rot)
    bad = parallel_faces(out)
    if len(bad) and tilt == "auto":
        angle = BASE_TILT
        while True:
            rot = tilt_rotation(angle) @ base
            out = transform(mesh, rot)
            bad = parallel_faces(out)
            if not len(bad) or angle > 0.5:
                break
            angle *= 2.0
    if len(bad):
        raise MeshError(
            f"faces {bad.tolist()} are parallel to the yz-plane; use tilt",
            [Violation("parallel", "facet parallel to slicing planes", tuple(bad.tolist()))],
        )
    return out, AxisFrame(rot, angle)


# ----------------------------------------------------------------------- I/O


def _detect_format(path, fmt):
    fmt = (fmt or Path(path).suffix.lstrip(".")).lower()
    if fmt == "stl":
        with open(path, "rb") as fh:
            head = fh.read(512)
        size = Path(path).stat().st_size
        if len(head) >= 84:
            (count,) = struct.unpack("<I", head[80:84])
            if 84 + 50 * count == size:
                return "stl-binary"
        return "stl-ascii" if head.lstrip().lower().startswith(b"solid") else "stl-binary"
    if fmt not in ("obj", "stl-binary", "stl-ascii"):
        raise MeshError(f"unknown mesh format {fmt!r}")
    return fmt


def _read_obj(path):
    verts, faces = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            try:
                if parts[0] == "v":
                    verts.append([float(p) for p in parts[1:4]])
                elif parts[0] == "f":
                    idx = []
                    for p in parts[1:]:
                        i = int(p.split("/")[0])
                        idx.append(i - 1 if i > 0 else len(verts) + i)
                    for k in range(1, len(idx) - 1):
                        faces.append([idx[0], idx[k], idx[k + 1]])
            except (ValueError, IndexError) as exc:
                raise MeshError(f"{path}:{lineno}: cannot parse {line.strip()!r}") from exc
    if not verts or not faces:
        raise MeshError(f"{path}: no vertices or faces")
    return np.array(verts, dtype=float), np.array(faces, dtype=np.int64)


def _read_stl_binary(path):
    data = Path(path).read_bytes()
    if len(data) < 84:
        raise MeshError(f"{path}: truncated binary STL")
    (count,) = struct.unpack("<I", data[80:84])
    if len(data) < 84 + 50 * count:
        raise MeshError(f"{path}: truncated binary STL ({count} facets declared)")
    rec = np.dtype(
        [("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")]
    )
    arr = np.frombuffer(data, dtype=rec, count=count, offset=84)
    return arr["v"].astype(float).reshape(-1, 3)


def _read_stl_ascii(path):
    pts = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for line in fh:
            parts = line.split()
            if parts and parts[0] == "vertex":
                try:
                    pts.append([float(p) for p in parts[1:4]])
                except ValueError as exc:
                    raise MeshError(f"{path}: bad vertex line {line.strip()!r}") from exc
    if not pts or len(pts) % 3:
        raise MeshError(f"{path}: no complete facets")
    return np.array(pts, dtype=float)


def weld(points, tol=WELD_TOL):
    """Merge points closer than ``tol``; returns (unique_points, index_map)."""
    points = np.asarray(points, dtype=float)
    parent = np.arange(len(points))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in cKDTree(points).query_pairs(tol, output_type="ndarray"):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(points))])
    keep, index = np.unique(roots, return_inverse=True)
    return points[keep], index


def load_mesh(path, format=None):
    """Read an OBJ or STL file into a validated :class:`TriangleMesh`.

    STL soups are welded at 1e-9 before validation; OBJ indices are
    trusted as given.
    """
    path = Path(path)
    if not path.is_file():
        raise MeshError(f"{path}: no such file")
    fmt = _detect_format(path, format)
    if fmt == "obj":
        verts, faces = _read_obj(path)
    else:
        soup = _read_stl_binary(path) if fmt == "stl-binary" else _read_stl_ascii(path)
        verts, index = weld(soup)
        faces = index.reshape(-1, 3)
    mesh = TriangleMesh(verts, faces)
    require_valid(mesh, kinds={"empty", "index", "boundary", "nonmanifold", "orientation"})
    return mesh


def save_mesh(mesh, path, format=None):
    """Write ``mesh`` as OBJ (17 significant digits), binary or ASCII STL."""
    if not str(path):
        raise OSError("empty output path")
    fmt = (format or Path(path).suffix.lstrip(".")).lower()
    if fmt == "stl":
        fmt = "stl-binary"
    if fmt == "obj":
        lines = [f"v {x:.17g} {y:.17g} {z:.17g}\n" for x, y, z in mesh.vertices.tolist()]
        lines += [f"f {a + 1} {b + 1} {c + 1}\n" for a, b, c in mesh.faces.tolist()]
        with open(path, "w", encoding="utf-8") as fh:
            fh.writelines(lines)
    elif fmt == "stl-binary":
        rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
        arr = np.zeros(len(mesh.faces), dtype=rec)
        arr["n"] = face_normals(mesh)
        arr["v"] = mesh.triangles
        with open(path, "wb") as fh:
            fh.write(b"isoperim binary STL".ljust(80, b" "))
            fh.write(struct.pack("<I", len(arr)))
            fh.write(arr.tobytes())
    elif fmt == "stl-ascii":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("solid isoperim\n")
            for n, tri in zip(face_normals(mesh).tolist(), mesh.triangles.tolist()):
                fh.write("facet normal {:.9g} {:.9g} {:.9g}\n  outer loop\n".format(*n))
                for p in tri:
                    fh.write("    vertex {:.17g} {:.17g} {:.17g}\n".format(*p))
                fh.write("  endloop\nendfacet\n")
            fh.write("endsolid isoperim\n")
    else:
        raise MeshError(f"unknown mesh format {fmt!r}")
