import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isoperim import isoperimetric as iso
from isoperim import profile, shapes
from isoperim.profile import SlicedProfile
from isoperim.slicer import ChainedCurve, CrossSection, chain_loops

from conftest import bundled_profile, bundled_report, flat_end_cells, oriented

PHI_TARGETS = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
PSI_TARGETS = st.floats(min_value=0.0, max_value=1e6, allow_nan=False)


def polygon(n, radius=1.0):
    t = 2 * np.pi * np.arange(n) / n
    return np.stack([radius * np.cos(t), radius * np.sin(t)], 1)


def chain_of(points):
    pts = np.asarray(points, dtype=float)
    steps = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(steps)])
    area = 0.5 * math.fsum((pts[:-1, 0] * pts[1:, 1] - pts[1:, 0] * pts[:-1, 1]).tolist())
    return ChainedCurve(pts, s, float(s[-1]), area)


def circle_chain(n):
    return chain_loops(CrossSection.from_loops([polygon(n)]))


# ------------------------------------------------------------ solvers


def test_tolerance_schedule():
    assert iso.tolerance(256) == pytest.approx(0.01)
    assert iso.tolerance(512) == pytest.approx(0.005)


def test_solve_phi_examples():
    assert iso.solve_phi(0.0) == 0.0
    assert iso.solve_phi(math.pi / 4) == pytest.approx(math.pi / 2, abs=1e-15)
    assert iso.solve_phi(-math.pi / 4) == -iso.solve_phi(math.pi / 4)
    phi, clamped = iso.solve_phi(1e20, return_flag=True)
    assert clamped and phi == pytest.approx(math.pi - 1e-8)
    with pytest.raises(ValueError):
        iso.solve_phi(float("nan"))


def test_solve_psi_examples():
    assert iso.solve_psi(0.0) == 0.0
    assert iso.solve_psi(4.0 / 3.0) == pytest.approx(math.pi / 4, abs=1e-12)
    assert iso.solve_psi(14.0 / 3.0) == pytest.approx(math.atan(2.0), abs=1e-12)
    with pytest.raises(ValueError):
        iso.solve_psi(-1.0)


@settings(max_examples=300, deadline=None)
@given(PHI_TARGETS)
def test_phi_residual_and_symmetry(t):
    phi = iso.solve_phi(t)
    assert abs(float(iso.phi_function(phi)) - t) <= 1e-12 * (1 + abs(t))
    assert iso.solve_phi(-t) == -phi
    assert -math.pi < phi < math.pi


@settings(max_examples=300, deadline=None)
@given(PHI_TARGETS, PHI_TARGETS)
def test_phi_monotone(a, b):
    if a == b:
        return
    lo, hi = min(a, b), max(a, b)
    assert iso.solve_phi(lo) <= iso.solve_phi(hi)
    if hi - lo > 1e-12 * (1 + abs(hi)):
        assert iso.solve_phi(lo) < iso.solve_phi(hi)


@settings(max_examples=300, deadline=None)
@given(PSI_TARGETS)
def test_psi_residual(t):
    psi = iso.solve_psi(t)
    assert 0 <= psi < math.pi / 2
    assert abs(float(iso.psi_function(psi)) - t) <= 1e-12 * (1 + t)


@settings(max_examples=300, deadline=None)
@given(PSI_TARGETS, PSI_TARGETS)
def test_psi_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    if hi - lo > 1e-12 * (1 + hi):
        assert iso.solve_psi(lo) < iso.solve_psi(hi)


def test_phi_function_small_angle_series():
    # f(phi) ~ phi/3 near 0; no cancellation
    p = np.array([1e-8, 1e-4, 0.2, 0.3])
    exact = [1e-8 / 3, 1e-4 / 3 + 2 * 1e-12 / 45]
    assert iso.phi_function(p)[:2] == pytest.approx(exact, rel=1e-12)
    assert np.all(np.diff(iso.phi_function(p)) > 0)


# ------------------------------------------------------------ planar


def test_hexagon_and_two_circles():
    hexagon = CrossSection.from_loops([polygon(6)])
    assert hexagon.U**2 / (4 * math.pi * hexagon.Q) == pytest.approx(6 / math.pi * math.tan(math.pi / 6), abs=1e-9)
    assert iso.check_IIa(hexagon) > 0
    two = CrossSection.from_loops([polygon(20000) + [-3, 0], polygon(20000) + [3, 0]])
    assert iso.check_IIa(chain_loops(two)) == pytest.approx(8 * math.pi**2, rel=1e-6)


# ------------------------------------------------------------ segment trace


@pytest.mark.parametrize("n,bound", [(256, 1e-3), (512, 2.5e-4)])
def test_circle_trace_second_order(n, bound):
    tr = iso.segment_trace(circle_chain(n))
    assert tr.is_monotone()
    assert 0 <= tr.final_defect <= bound
    assert tr.defect.max() <= bound
    assert tr.L[-1] == pytest.approx(2 * math.pi, rel=1e-3)


def test_square_trace_closed_form():
    square = CrossSection.from_loops([[[0, 0], [1, 0], [1, 1], [0, 1]]])
    tr = iso.segment_trace(chain_loops(square))
    assert tr.is_monotone()
    assert tr.final_defect == pytest.approx(4 - 2 * math.sqrt(math.pi), abs=1e-9)


def test_two_circle_chain_does_not_restart():
    # at the junction the swept sector area is pi, not 0, so the trace continues
    two = CrossSection.from_loops([polygon(512) + [-3, 0], polygon(512) + [3, 0]])
    tr = iso.segment_trace(chain_loops(two))
    assert tr.restart_points == ()
    assert tr.is_monotone()
    assert tr.final_defect == pytest.approx(4 * math.pi - math.sqrt(8) * math.pi, rel=1e-3)


def test_restart_when_sector_area_returns_to_zero():
    c = polygon(256) - [1.0, 0.0]
    ccw = np.vstack([c, c[:1]])
    cw = ccw[::-1]
    pts = np.vstack([ccw, cw[1:], ccw[1:]])
    pts = pts - pts[0]
    chain = chain_of(pts)
    tr = iso.segment_trace(chain)
    assert len(tr.restart_points) == 1
    assert tr.restart_points[0] == pytest.approx(2 * chain.total_length / 3, rel=1e-12)
    assert tr.is_monotone()


def test_trace_rejects_non_positive_area():
    cw = CrossSection.from_loops([polygon(8)[::-1]])
    with pytest.raises(ValueError):
        iso.segment_trace(chain_loops(cw))


def test_trace_monotone_on_bundled_slices(shape_name):
    prof = bundled_profile(shape_name)
    for sec in prof.sections[:: max(1, prof.n // 32)]:
        tr = iso.segment_trace(chain_loops(sec))
        assert tr.is_monotone()
        assert tr.final_defect == pytest.approx(sec.U - math.sqrt(4 * math.pi * sec.Q), abs=1e-9 * sec.U)


def test_trace_csv():
    lines = iso.segment_trace(circle_chain(16)).to_csv().splitlines()
    assert lines[0] == "s,rho,F,phi,r,L,defect"
    assert len(lines) == 18


# ------------------------------------------------------------ caps


def analytic_sphere(n):
    dx = 2.0 / n
    x = -1 + (np.arange(n) + 0.5) * dx
    return SlicedProfile.from_arrays(-1.0, 1.0, math.pi * (1 - x**2), 2 * math.pi * np.sqrt(1 - x**2))


def test_cap_identities(shape_name):
    cap = iso.cap_trace(bundled_profile(shape_name))
    s, c = np.sin(cap.psi), np.cos(cap.psi)
    inner = slice(0, -1)
    B = 4 / 3 * cap.R**3 * math.pi * s**4 * (s**2 + 3 * c**2)
    r = 2 * cap.R * s * c
    assert np.allclose(B[inner], cap.B[inner], rtol=1e-9, atol=0)
    assert np.allclose(r[inner], cap.r[inner], rtol=1e-9, atol=0)


def test_cap_terminal_is_ball(shape_name):
    prof = bundled_profile(shape_name)
    cap = iso.cap_trace(prof)
    assert cap.terminal_H == pytest.approx(iso.ball_bound(prof.volume), rel=1e-12)
    assert cap.psi[-1] == pytest.approx(math.pi / 2)
    assert np.all(cap.defect >= -iso.tolerance(prof.n) * cap.terminal_H)


def test_cap_hemisphere_point():
    cap = iso.cap_trace(analytic_sphere(1025))
    mid = 512
    assert cap.x[mid] == pytest.approx(0.0, abs=1e-15)
    assert cap.psi[mid] == pytest.approx(math.pi / 4, abs=1e-6)
    assert cap.H[mid] == pytest.approx(2 * math.pi, rel=1e-5)


def test_cap_unit_volume_terminal():
    # cylinder of unit volume
    L = 1.0 / math.pi
    prof = SlicedProfile.from_arrays(0.0, L, np.full(64, math.pi), np.full(64, 2 * math.pi))
    assert iso.cap_trace(prof).terminal_H == pytest.approx((36 * math.pi) ** (1 / 3), rel=1e-12)


# ------------------------------------------------------------ slab check


def rel_margins(prof):
    return iso.check_slab_Ia(prof) / prof.slab


def test_slab_never_below_integrated_rhs(shape_name):
    assert rel_margins(bundled_profile(shape_name)).min() >= -1e-12


def test_slab_equality_at_sphere_equator():
    prof = bundled_profile("sphere")
    mid = prof.n // 2
    density = prof.slab[mid] / prof.dx
    assert density == pytest.approx(2 * math.pi, rel=0.01)
    assert iso.slab_rhs(prof)[mid] == pytest.approx(density, rel=1e-3)


def test_slab_tilted_cube_positive():
    prof = bundled_profile("cube")
    m = rel_margins(prof)
    assert np.all(m[1:-1] > 0)
    # side faces lean by the tilt: density = 4 sec(tilt) to first order
    mid = prof.n // 2
    assert prof.slab[mid] / prof.dx == pytest.approx(4.0, rel=1e-5)


@pytest.mark.parametrize("name", ["sphere", "capsule", "cylinder", "cone"])
def test_equality_case_detected_for_revolution_bodies(name):
    mesh, frame = oriented(name)
    stats = []
    for n in (256, 512):
        prof = profile.build_profile(mesh, n)
        keep = np.setdiff1d(np.arange(n), flat_end_cells(mesh, prof))
        m = rel_margins(prof)[keep]
        assert m.max() <= 0.02
        stats.append(m.mean())
    floor = frame.tilt_angle**2
    assert stats[1] < stats[0] or stats[0] <= floor, stats


def test_torus_far_from_equality():
    assert rel_margins(bundled_profile("torus")).max() > 0.1


def test_tilted_box_margin_does_not_vanish():
    mesh, frame = oriented("box")
    means = []
    for n in (128, 256, 512):
        prof = profile.build_profile(mesh, n)
        keep = np.setdiff1d(np.arange(n), flat_end_cells(mesh, prof))
        means.append(rel_margins(prof)[keep].mean())
    assert min(means) > 0
    assert means[-1] >= 0.5 * means[0]


# ------------------------------------------------------------ quotient and factor


def test_quotient_examples():
    assert iso.isoperimetric_quotient(4 * math.pi, 4 * math.pi / 3) == pytest.approx(1.0, abs=2.3e-16)
    assert iso.isoperimetric_quotient(6.0, 1.0) == pytest.approx(1.2407, abs=1e-4)
    assert iso.isoperimetric_quotient(16 * math.pi, 32 * math.pi / 3) == pytest.approx(1.0, abs=2.3e-16)
    assert iso.ball_bound(1.0) == pytest.approx(4.83598, abs=1e-5)
    with pytest.raises(ValueError):
        iso.isoperimetric_quotient(0.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 100), st.floats(0.01, 100))
def test_quotient_scale_invariant(S, lam):
    V = (S / 5.0) ** 1.5
    q = iso.isoperimetric_quotient(S, V)
    assert iso.isoperimetric_quotient(lam**2 * S, lam**3 * V) == pytest.approx(q, rel=1e-13)


def test_approximation_factor():
    f, ok = iso.approximation_factor(0.01, 0.01, 1.05)
    assert f == pytest.approx(1.01679, abs=1e-5) and ok
    assert not iso.approximation_factor(0.01, 0.01, 1.01)[1]
    assert iso.approximation_factor(0.0, 1e-12, 2.0)[0] == pytest.approx(1.0, abs=1e-11)
    for bad in [(-0.1, 0.5, 2.0), (0.1, 0.0, 2.0), (0.1, 1.0, 2.0), (0.1, 0.5, 1.0)]:
        with pytest.raises(ValueError):
            iso.approximation_factor(*bad)


# ------------------------------------------------------------ full chain


def test_verify_all_pass(shape_name):
    rep = bundled_report(shape_name)
    assert rep.passed, rep.verdicts
    assert set(rep.verdicts) == set(iso.VERDICT_KEYS)
    assert len(rep.slices) == 256


def test_verify_box_quotient():
    rep = bundled_report("box")
    assert rep.quotient > 1.05
    assert rep.S_mesh >= rep.lateral_total >= rep.ball_bound


def test_report_json_round_trip():
    rep = bundled_report("cube")
    text = rep.to_json()
    data = json.loads(text)
    assert data["S_mesh"] == rep.S_mesh
    assert data["verdicts"]["IIIb"]["status"] == "pass"
    assert rep.summary().startswith("S=6 lateral=")


def test_dump_json_non_finite():
    assert json.loads(iso.dump_json({"a": float("inf"), "b": [0.1, True, None]})) == {
        "a": None,
        "b": [0.1, True, None],
    }


def test_verify_rejects_open_mesh():
    from isoperim.geometry import MeshError, TriangleMesh

    cube = shapes.box(1, 1, 1)
    with pytest.raises(MeshError):
        iso.verify_chain(TriangleMesh(cube.vertices, cube.faces[1:]), 64)
