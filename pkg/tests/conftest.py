import functools

import numpy as np
import pytest

from isoperim import isoperimetric, profile, shapes
from isoperim.geometry import face_normals, orient_axis

# box 1x2x3 is checked along its length-3 side
AXES = {"box": (0.0, 0.0, 1.0)}


@functools.lru_cache(maxsize=None)
def bundled_mesh(name):
    return shapes.generate(shapes.BUNDLED[name])


@functools.lru_cache(maxsize=None)
def oriented(name):
    return orient_axis(bundled_mesh(name), AXES.get(name, (1.0, 0.0, 0.0)), "auto")


@functools.lru_cache(maxsize=None)
def bundled_profile(name, n=256):
    return profile.build_profile(oriented(name)[0], n)


@functools.lru_cache(maxsize=None)
def bundled_report(name, n=256):
    return isoperimetric.verify_chain(
        bundled_mesh(name), n, axis=AXES.get(name, (1.0, 0.0, 0.0)), tilt="auto"
    )


def flat_end_cells(mesh, prof):
    """Cells holding a facet nearly perpendicular to the axis."""
    n = face_normals(mesh)
    flat = np.abs(n[:, 0]) > 1 - 1e-4
    xs = mesh.vertices[mesh.faces[flat], 0]
    edges = prof.x0 + np.arange(prof.n + 1) * prof.dx
    cells = set()
    for lo, hi in zip(xs.min(1), xs.max(1)):
        i0 = max(0, int(np.searchsorted(edges, lo, "right")) - 1)
        i1 = min(prof.n - 1, int(np.searchsorted(edges, hi, "left")))
        cells.update(range(i0, i1 + 1))
    return sorted(cells)


@pytest.fixture(params=sorted(shapes.BUNDLED))
def shape_name(request):
    return request.param


# one PASS/FAIL line per acceptance criterion, echoed after the run
ACCEPTANCE = {}


@pytest.fixture
def accept():
    def record(number, ok, detail):
        ACCEPTANCE[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
