"""
Numerical certification of the isoperimetric chain

    S  >=  integral of sqrt(4 pi Q + Q'^2) dx  >=  cbrt(36 pi V^2)

on a triangle mesh, step by step: the slab inequality against
sqrt(U^2 + Q'^2), the planar inequality U^2 >= 4 pi Q (traced along the
chained section curve against circular segments of equal sector area),
and the comparison of the symmetrized body with spherical caps of equal
volume.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry, profile as profile_mod
from .slicer import chain_loops

PHI_EDGE = 1e-8
PHI_CLAMP_TARGET = 1e15
SMALL_ANGLE = 1e-6
GEOM_TOL = 1e-9
TOL_CONSTANT = 2.56
DEFECT_STEP_TOL = 1e-12


def tolerance(n):
    """Relative slack for discretisation-bearing checks at ``n`` slices."""
    return TOL_CONSTANT / n


# ------------------------------------------------------------ root solvers


def _sector_excess(phi):
    """phi - sin(phi) cos(phi), with a series near 0 to avoid cancellation."""
    phi = np.asarray(phi, dtype=float)
    out = phi - np.sin(phi) * np.cos(phi)
    small = np.abs(phi) < 0.25
    if np.any(small):
        p = phi[small]
        term = 4.0 * p**3 / 6.0
        acc = term.copy()
        # sum_{k>=1} (-1)^(k+1) 4^k phi^(2k+1) / (2k+1)!
        for k in range(1, 10):
            term = -term * 4.0 * p * p / ((2 * k + 2) * (2 * k + 3))
            acc += term
        out = np.where(small, 0.0, out)
        out[small] = acc
    return out


def phi_function(phi):
    """(phi - sin phi cos phi) / (2 sin^2 phi); odd and increasing on (-pi, pi)."""
    phi = np.asarray(phi, dtype=float)
    s = np.sin(phi)
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        val = _sector_excess(phi) / (2.0 * s * s)
        # below 1e-3 the series is exact to roundoff and avoids underflow
        p2 = phi * phi
        series = phi * (1.0 / 3.0 + p2 * (2.0 / 45.0 + p2 * (2.0 / 315.0)))
    return np.where(np.abs(phi) < 1e-3, series, val)


def _phi_slope(phi, fval):
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = 1.0 - 2.0 * fval * np.cos(phi) / np.sin(phi)
    return np.where(np.abs(phi) < 1e-4, 1.0 / 3.0, slope)


def solve_phi_array(target):
    """Vectorised root of ``phi_function(phi) = target``.

    Returns ``(phi, clamped)``; targets beyond +-1e15 are clamped to
    +-(pi - 1e-8) and flagged.
    """
    target = np.asarray(target, dtype=float)
    shape = target.shape
    target = target.ravel()
    sign = np.where(target < 0, -1.0, 1.0)
    t = np.abs(target)
    clamped = t > PHI_CLAMP_TARGET
    tt = np.where(clamped, 0.0, t)

    lo = np.zeros_like(tt)
    hi = np.full_like(tt, math.pi - PHI_EDGE)
    with np.errstate(divide="ignore"):
        far = math.pi - np.sqrt(math.pi / (2.0 * np.maximum(tt, 1e-300)))
    phi = np.where(tt < 0.5, 3.0 * tt, far)
    phi = np.clip(phi, lo, hi)
    for _ in range(200):
        fv = phi_function(phi) - tt
        hi = np.where(fv > 0, phi, hi)
        lo = np.where(fv <= 0, phi, lo)
        step = fv / _phi_slope(phi, fv + tt)
        newton = phi - step
        ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
        nxt = np.where(ok, newton, 0.5 * (lo + hi))
        done = np.abs(nxt - phi) <= 2e-16 * phi
        phi = nxt
        if np.all(done | (tt < SMALL_ANGLE)):
            break
    # pick the best neighbouring double
    cands = np.stack([np.nextafter(phi, -np.inf), phi, np.nextafter(phi, np.inf)])
    cands = np.clip(cands, 0.0, math.pi - PHI_EDGE)
    res = np.abs(phi_function(cands) - tt)
    phi = cands[np.argmin(res, axis=0), np.arange(phi.size)]
    # f(phi) = phi/3 + 2 phi^3/45 + O(phi^5): invert the series for tiny targets
    tiny = tt < SMALL_ANGLE
    phi = np.where(tiny, 3.0 * tt - 3.6 * tt**3, phi)
    phi = np.where(clamped, math.pi - PHI_EDGE, phi)
    return (sign * phi).reshape(shape), clamped.reshape(shape)


def solve_phi(target, return_flag=False):
    """Half central angle of the circular segment with ``f(phi) = target``."""
    if not math.isfinite(target):
        raise ValueError("target must be finite")
    phi, clamped = solve_phi_array(np.array([target], dtype=float))
    if return_flag:
        return float(phi[0]), bool(clamped[0])
    return float(phi[0])


def psi_function(psi):
    t = np.tan(psi)
    return t + t**3 / 3.0


def _solve_tan_psi(target):
    """Real root t >= 0 of t + t^3/3 = target (cancellation-free Cardano + Newton)."""
    T = np.asarray(target, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        A = np.cbrt(1.5 * T + np.sqrt(2.25 * T * T + 1.0))
        t = 3.0 * T / (A * A + 1.0 + 1.0 / (A * A))
        for _ in range(3):
            t = t - (t + t**3 / 3.0 - T) / (1.0 + t * t)
    return np.where(T == 0, 0.0, t)


def solve_psi_array(target):
    T = np.asarray(target, dtype=float)
    if np.any(T < 0):
        raise ValueError("psi target must be non-negative")
    with np.errstate(invalid="ignore"):
        psi = np.arctan(_solve_tan_psi(T))
        # one Newton step in psi itself
        tp = np.tan(psi)
        psi = psi - (tp + tp**3 / 3.0 - T) / (1.0 + tp * tp) ** 2
    return np.where(np.isinf(T), math.pi / 2, np.where(T == 0, 0.0, psi))


def solve_psi(target):
    """Quarter central angle of the spherical segment with ``f(psi) = target``."""
    if target < 0 or math.isnan(target):
        raise ValueError("psi target must be non-negative")
    return float(solve_psi_array(np.array([target]))[0])


# ------------------------------------------------------------ planar check


def planar_margin(U, Q):
    return U * U - 4.0 * math.pi * Q


def check_IIa(section):
    """U^2 - 4 pi Q for a section or chained curve (never negative for polygons)."""
    U = getattr(section, "U", None)
    Q = getattr(section, "Q", None)
    if U is None:
        U, Q = section.total_length, section.enclosed_area
    return planar_margin(U, Q)


@dataclass(frozen=True)
class SegmentTrace:
    s: np.ndarray
    rho: np.ndarray
    F: np.ndarray
    phi: np.ndarray
    r: np.ndarray
    L: np.ndarray
    defect: np.ndarray
    restart_points: tuple = ()
    clamped: int = 0

    @property
    def final_defect(self):
        return float(self.defect[-1])

    def is_monotone(self, tol=DEFECT_STEP_TOL):
        scale = max(1.0, float(self.s[-1]))
        return bool(np.all(np.diff(self.defect) >= -tol * scale))

    def to_csv(self):
        rows = ["s,rho,F,phi,r,L,defect"]
        for vals in zip(self.s, self.rho, self.F, self.phi, self.r, self.L, self.defect):
            rows.append(",".join(f"{v:.17g}" for v in vals))
        return "\n".join(rows) + "\n"


def segment_trace(chain):
    """Compare the chained section curve with circular segments over its chords.

    At every chain vertex P the circular segment on the chord from the
    origin to P is sized to enclose the same signed sector area F as the
    curve so far; its arc length L never exceeds the curve length s, and
    at the end L = sqrt(4 pi Q).
    """
    pts = np.asarray(chain.points, dtype=float)
    s = np.asarray(chain.cumulative_s, dtype=float)
    U = float(chain.total_length)
    Q = float(chain.enclosed_area)
    if not Q > 0:
        raise ValueError(f"chain encloses non-positive area {Q!r}")

    rho = np.hypot(pts[:, 0], pts[:, 1])
    dF = 0.5 * (pts[:-1, 0] * pts[1:, 1] - pts[1:, 0] * pts[:-1, 1])
    F = np.concatenate([[0.0], np.cumsum(dF)])

    # a restart zeroes the sector accumulator where the chain is back at
    # the origin with no net area swept
    restarts = []
    base = np.zeros_like(F)
    current = 0.0
    for k in np.nonzero(rho[1:-1] < GEOM_TOL * U)[0] + 1:
        if abs(F[k] - current) < 1e-12 * Q:
            restarts.append(float(s[k]))
            current = F[k]
            base[k:] = current
    F = F - base

    with np.errstate(divide="ignore", invalid="ignore"):
        target = 2.0 * F / (rho * rho)
    at_origin = rho == 0.0
    target = np.where(at_origin, 0.0, target)
    phi, clamped = solve_phi_array(target)
    phi = np.where(at_origin & (F != 0), np.sign(F) * math.pi, phi)

    sin_phi = np.sin(phi)
    excess = _sector_excess(phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        # near phi = 0 use the chord; near +-pi use the sector area
        L_chord = np.where(phi == 0, rho, rho * phi / sin_phi)
        L_area = 2.0 * np.abs(phi) * np.sqrt(np.abs(F) / np.abs(excess))
        L = np.where(np.abs(phi) < 1.0, L_chord, L_area)
        r_small = rho / (2.0 * phi)
        r_mid = rho / (2.0 * sin_phi)
        r_big = np.sign(phi) * np.sqrt(np.abs(F) / np.abs(excess))
        r = np.where(np.abs(phi) < SMALL_ANGLE, r_small, np.where(np.abs(phi) < 1.0, r_mid, r_big))
    r = np.where(phi == 0, np.inf, r)
    degenerate = at_origin & (F == 0)
    L = np.where(degenerate, 0.0, L)
    r = np.where(degenerate, 0.0, r)
    return SegmentTrace(s, rho, F, phi, r, L, s - L, tuple(restarts), int(np.count_nonzero(clamped)))


# ---------------------------------------------------------------- caps


@dataclass(frozen=True)
class CapTrace:
    x: np.ndarray
    B: np.ndarray
    r: np.ndarray
    psi: np.ndarray
    R: np.ndarray
    H: np.ndarray
    lateral_cum: np.ndarray
    defect: np.ndarray
    pinches: tuple = ()

    @property
    def terminal_H(self):
        return float(self.H[-1])


def cap_state(B, r):
    """Spherical segment of volume B on a base circle of radius r: (psi, R, H)."""
    B = np.asarray(B, dtype=float)
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        target = np.where(r > 0, 2.0 * B / (r**3 * math.pi), np.inf)
    t = np.where(np.isinf(target), np.inf, _solve_tan_psi(np.where(np.isinf(target), 0.0, target)))
    psi = solve_psi_array(target)
    with np.errstate(divide="ignore", invalid="ignore"):
        sin_p = np.where(np.isinf(t), 1.0, t / np.sqrt(1.0 + t * t))
        cos_p = np.where(np.isinf(t), 0.0, 1.0 / np.sqrt(1.0 + t * t))
        R_base = np.where(psi < SMALL_ANGLE, r / (2.0 * psi), r / (2.0 * sin_p * cos_p))
        shape = sin_p**4 * (sin_p**2 + 3.0 * cos_p**2)
        R_vol = np.cbrt(3.0 * B / (4.0 * math.pi * shape))
    R = np.where(psi < math.pi / 4, R_base, R_vol)
    R = np.where(B == 0, 0.0, R)
    H = 4.0 * math.pi * R**2 * sin_p**2
    return psi, R, H


def cap_trace(prof):
    """Cumulative comparison of the symmetrized body against spherical caps.

    Grid samples use midpoint-rule partial sums (half a cell at the
    sample itself); a final record at x1 closes the body, where the cap
    becomes the whole ball of the same volume.
    """
    Q = prof.Q
    dx = prof.dx
    if not np.all(Q > 0):
        raise ValueError("cap trace needs Q > 0 on the grid")
    left, right = profile_mod.end_disks(prof)
    dens = prof.integrand() * profile_mod.cell_lengths(prof)
    B = np.concatenate([[0.0], np.cumsum(Q * dx)[:-1]]) + 0.5 * Q * dx
    lat = left + np.concatenate([[0.0], np.cumsum(dens)[:-1]]) + 0.5 * dens
    r = np.sqrt(Q / math.pi)
    V = prof.volume
    lateral_total = math.fsum(dens.tolist()) + left + right

    x = np.concatenate([prof.x_grid, [prof.x1]])
    B = np.concatenate([B, [V]])
    r = np.concatenate([r, [0.0]])
    lat = np.concatenate([lat, [lateral_total]])
    psi, R, H = cap_state(B, r)
    pinches = tuple(float(v) for v in x[:-1][r[:-1] == 0])
    return CapTrace(x, B, r, psi, R, H, lat, lat - H, pinches)


# ------------------------------------------------------------ slab check


def slab_rhs(prof):
    """Cell-mean sqrt(U^2 + Q'^2), from the exact cell integrals of U and Q'."""
    return np.hypot(prof.slab_U, prof.slab_dQ) / prof.dx


def check_slab_Ia(prof):
    """Per-cell margins slab_i - sqrt((int U dx)^2 + (Delta Q)^2).

    Each face piece contributes a vector of length equal to its area, so
    the margin is never negative beyond roundoff, and vanishes exactly
    when every face piece in the cell has the same inclination to x.
    """
    return prof.slab - np.hypot(prof.slab_U, prof.slab_dQ)


# -------------------------------------------------------------- quotient


def ball_bound(V):
    return (36.0 * math.pi * V * V) ** (1.0 / 3.0)


def isoperimetric_quotient(S, V):
    """S / cbrt(36 pi V^2); exactly scale invariant under S -> l^2 S, V -> l^3 V."""
    if not (S > 0 and V > 0):
        raise ValueError("surface area and volume must be positive")
    return float(np.cbrt(S**3 / (36.0 * math.pi * V * V)))


def approximation_factor(eps, eta, S_ratio):
    """Polyhedral approximation factor and the admissibility test for (eps, eta).

    Returns ``((1 + eps) * (1 - eta)^(-2/3), (1 + eta)^3 / (1 - eta)^2 < S_ratio^3)``.
    """
    if not eps >= 0:
        raise ValueError("eps must be non-negative")
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if not S_ratio > 1:
        raise ValueError("S_ratio must exceed 1")
    factor = (1.0 + eps) * (1.0 - eta) ** (-2.0 / 3.0)
    return factor, (1.0 + eta) ** 3 / (1.0 - eta) ** 2 < S_ratio**3


# ---------------------------------------------------------------- report


VERDICT_KEYS = ("Ia", "IIa", "IIb", "IIIa", "IIIb")


@dataclass
class InequalityReport:
    S_mesh: float
    V_mesh: float
    lateral: float
    end_disks: float
    ball_bound: float
    quotient: float
    n: int
    tilt_angle: float
    verdicts: dict
    slices: list
    cap_terminal: dict
    warnings: list = field(default_factory=list)

    @property
    def lateral_total(self):
        return self.lateral + self.end_disks

    @property
    def passed(self):
        return all(v["status"] == "pass" for v in self.verdicts.values())

    def to_dict(self):
        return {
            "S_mesh": self.S_mesh,
            "V_mesh": self.V_mesh,
            "lateral": self.lateral,
            "end_disks": self.end_disks,
            "lateral_total": self.lateral_total,
            "ball_bound": self.ball_bound,
            "quotient": self.quotient,
            "n": self.n,
            "tilt_angle": self.tilt_angle,
            "verdicts": self.verdicts,
            "cap_terminal": self.cap_terminal,
            "slices": self.slices,
            "warnings": self.warnings,
        }

    def to_json(self):
        return dump_json(self.to_dict())

    def summary(self):
        return (
            f"S={self.S_mesh:.6g} lateral={self.lateral_total:.6g} "
            f"bound={self.ball_bound:.6g} quotient={self.quotient:.6g}"
        )


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return f"{v:.17g}" if math.isfinite(v) else "null"
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def dump_json(obj, indent=2):
    """JSON text with every float written to 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def _verdict(ok, margin):
    return {"status": "pass" if ok else "fail", "margin": float(margin)}


def verify_chain(mesh, n=256, axis=(1.0, 0.0, 0.0), tilt="auto", threads=None):
    """Run the whole chain on ``mesh`` and collect verdicts and tables."""
    geometry.require_valid(mesh)
    oriented, frame = geometry.orient_axis(mesh, axis, tilt)
    S = geometry.surface_area(oriented)
    V = geometry.volume(oriented)
    prof = profile_mod.build_profile(oriented, n, threads=threads)
    tol = tolerance(n)
    dx = prof.dx
    warnings = list(prof.warnings)
    if frame.tilt_angle:
        warnings.append(f"tilted by {frame.tilt_angle:.17g} rad to clear facets parallel to the slicing planes")

    lateral, disks = profile_mod.revolution_lateral_area(prof)
    if disks > 0:
        warnings.append(f"flat ends: end disk area {disks:.17g} added to the revolution area")
    bound = ball_bound(V)
    quotient = isoperimetric_quotient(S, V)

    # slab inequality, per cell
    margins = check_slab_Ia(prof)
    rel_cell = margins / prof.slab
    rhs = slab_rhs(prof)
    ib_total = math.fsum(np.hypot(prof.slab_U, prof.slab_dQ).tolist())
    ok_ia = bool(np.all(rel_cell >= -tol)) and S >= ib_total * (1.0 - tol)

    # planar inequality per slice, with the segment construction on each chained section
    planar = prof.U**2 - 4.0 * math.pi * prof.Q
    ok_planar = bool(np.all(planar >= -GEOM_TOL * prof.U**2))
    trace_defects = []
    ok_trace = True
    clamped = 0
    for sec in prof.sections:
        tr = segment_trace(chain_loops(sec))
        final_expected = sec.U - math.sqrt(4.0 * math.pi * sec.Q)
        good = tr.is_monotone() and abs(tr.final_defect - final_expected) <= GEOM_TOL * sec.U
        ok_trace &= good
        clamped += tr.clamped
        trace_defects.append((tr.final_defect, good))
    if clamped:
        warnings.append(f"{clamped} segment-angle solves clamped near +-pi")

    lateral_total = lateral + disks
    ok_iib = S >= lateral_total * (1.0 - tol)

    cap = cap_trace(prof)
    ok_cap = bool(np.all(cap.defect >= -tol * bound))
    ok_iiia = ok_cap and lateral_total >= bound * (1.0 - tol)
    if cap.pinches:
        warnings.append(f"pinched sections at x={list(cap.pinches)}")

    ok_iiib = S >= bound * (1.0 - GEOM_TOL)

    verdicts = {
        "Ia": _verdict(ok_ia, float(rel_cell.min())),
        "IIa": _verdict(ok_planar and ok_trace, float((planar / prof.U**2).min())),
        "IIb": _verdict(ok_iib, (S - lateral_total) / S),
        "IIIa": _verdict(ok_iiia, (lateral_total - bound) / bound),
        "IIIb": _verdict(ok_iiib, quotient - 1.0),
    }
    slices = []
    for i in range(prof.n):
        slices.append(
            {
                "x": float(prof.x_grid[i]),
                "U": float(prof.U[i]),
                "Q": float(prof.Q[i]),
                "Qp": float(prof.Qp[i]),
                "loops": len(prof.sections[i].loops),
                "slab_density": float(prof.slab[i] / dx),
                "rhs_Ia": float(rhs[i]),
                "margin_Ia": float(prof.slab[i] / dx - rhs[i]),
                "margin_IIa": float(planar[i]),
                "segment_defect": float(trace_defects[i][0]),
                "segment_ok": bool(trace_defects[i][1]),
            }
        )
    cap_terminal = {
        "B": float(cap.B[-1]),
        "R": float(cap.R[-1]),
        "H": cap.terminal_H,
        "min_defect": float(cap.defect.min()),
    }
    return InequalityReport(
        S, V, lateral, disks, bound, quotient, n, frame.tilt_angle,
        verdicts, slices, cap_terminal, warnings,
    )
