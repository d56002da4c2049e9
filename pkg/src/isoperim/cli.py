"""Command-line front end: ``isoperim {verify,symmetrize,slice,segment2d,shape}``.

Exit codes: 0 success (and every verdict passed, for ``verify``), 1 some
verdict failed, 2 bad input or an invalid mesh.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import geometry, isoperimetric, profile, shapes, slicer
from .isoperimetric import dump_json

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2

COMMANDS = ("verify", "symmetrize", "slice", "segment2d", "shape")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: str | None = None
    format: str | None = None
    kind: str | None = None
    params: str | None = None
    resolution: int | None = None
    axis: tuple = (1.0, 0.0, 0.0)
    tilt: object = "auto"
    slices: int = 256
    segments: int = 128
    report: str | None = None
    csv: str | None = None
    output: str | None = None
    at: float | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.slices < profile.MIN_SLICES:
            raise UsageError(f"--slices must be at least {profile.MIN_SLICES}")
        if self.segments < 3:
            raise UsageError("--segments must be at least 3")
        if (self.input is None) == (self.kind is None):
            raise UsageError("give exactly one of --input or --kind")
        paths = [p for p in (self.input, self.report, self.csv, self.output) if p]
        if len({os.path.abspath(p) for p in paths}) != len(paths):
            raise UsageError("input and output paths must be distinct")


def _parse_axis(text):
    try:
        vals = tuple(float(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"axis must be a,b,c; got {text!r}")
    if len(vals) != 3 or not all(map(math.isfinite, vals)) or not any(vals):
        raise argparse.ArgumentTypeError(f"axis must be a nonzero 3-vector; got {text!r}")
    return vals


def _parse_tilt(text):
    if text in ("none", "auto"):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tilt must be none, auto or an angle in radians; got {text!r}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", metavar="PATH")
    common.add_argument("--format", choices=("obj", "stl"))
    common.add_argument("--kind", choices=shapes.KINDS)
    common.add_argument("--params", metavar="CSV")
    common.add_argument("--resolution", type=int, metavar="N")
    common.add_argument("--axis", type=_parse_axis, default=(1.0, 0.0, 0.0), metavar="a,b,c")
    common.add_argument("--tilt", type=_parse_tilt, default="auto", metavar="{none,auto,RADIANS}")
    common.add_argument("--slices", type=int, default=256, metavar="N")
    common.add_argument("--segments", type=int, default=128, metavar="N")
    common.add_argument("--report", metavar="PATH")
    common.add_argument("--csv", metavar="PATH")
    common.add_argument("--output", metavar="PATH")
    common.add_argument("--at", type=float, metavar="X")

    parser = argparse.ArgumentParser(
        prog="isoperim",
        description="Check the isoperimetric inequality chain on a closed triangle mesh.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "verify": "run the full inequality chain and write a JSON report",
        "symmetrize": "write the solid of revolution with the same section areas",
        "slice": "write the loops of one plane section as CSV",
        "segment2d": "write the circular-segment trace of one plane section as CSV",
        "shape": "tessellate an analytic shape",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def config_from_args(ns):
    fields = RunConfig.__dataclass_fields__
    return RunConfig(**{k: v for k, v in vars(ns).items() if k in fields})


# ------------------------------------------------------------------ helpers


def _load(cfg):
    if cfg.input is not None:
        return geometry.load_mesh(cfg.input, cfg.format)
    if cfg.params is None:
        raise UsageError("--kind needs --params")
    spec = shapes.parse_spec(cfg.kind, cfg.params, cfg.resolution)
    return shapes.generate(spec)


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _emit(path, text):
    if path:
        _write(path, text)
    else:
        sys.stdout.write(text)


def _section(cfg, mesh):
    oriented, _ = geometry.orient_axis(mesh, cfg.axis, cfg.tilt)
    x0, x1 = geometry.bounds_x(oriented)
    x = 0.5 * (x0 + x1) if cfg.at is None else cfg.at
    # same vertex-incidence policy as the profile grid
    sec, used = profile._slice_nudged(oriented, x, x1 - x0)
    if used != x:
        print(f"warning: plane x={x:.17g} nudged to {used:.17g} (vertex incidence)", file=sys.stderr)
    return sec


# ------------------------------------------------------------------ commands


def cmd_verify(cfg):
    mesh = _load(cfg)
    rep = isoperimetric.verify_chain(mesh, cfg.slices, cfg.axis, cfg.tilt)
    if cfg.report:
        _write(cfg.report, rep.to_json())
    if cfg.csv:
        keys = list(rep.slices[0])
        rows = [",".join(keys)]
        for rec in rep.slices:
            rows.append(",".join(_cell(rec[k]) for k in keys))
        _write(cfg.csv, "\n".join(rows) + "\n")
    print(rep.summary())
    for key, v in rep.verdicts.items():
        if v["status"] != "pass":
            print(f"verdict {key} failed (margin {v['margin']:.6g})", file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _cell(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def cmd_symmetrize(cfg):
    mesh = _load(cfg)
    geometry.require_valid(mesh)
    oriented, _ = geometry.orient_axis(mesh, cfg.axis, cfg.tilt)
    prof = profile.build_profile(oriented, cfg.slices)
    body = profile.revolve_mesh(prof, cfg.segments)
    S0, V0 = geometry.surface_area(oriented), geometry.volume(oriented)
    S1, V1 = geometry.surface_area(body), geometry.volume(body)
    if cfg.output:
        geometry.save_mesh(body, cfg.output, cfg.format)
    if cfg.csv:
        _write(cfg.csv, prof.to_csv())
    if cfg.report:
        _write(
            cfg.report,
            dump_json(
                {
                    "S_input": S0,
                    "V_input": V0,
                    "S_output": S1,
                    "V_output": V1,
                    "n": cfg.slices,
                    "segments": cfg.segments,
                    "warnings": list(prof.warnings),
                }
            ),
        )
    print(
        f"volume {V0:.6g} -> {V1:.6g} (delta {V1 - V0:+.3g}, {(V1 - V0) / V0:+.3%}) "
        f"area {S0:.6g} -> {S1:.6g} (delta {S1 - S0:+.3g}, {(S1 - S0) / S0:+.3%})"
    )
    return EXIT_OK


def cmd_slice(cfg):
    mesh = _load(cfg)
    sec = _section(cfg, mesh)
    _emit(cfg.csv or cfg.output, sec.to_csv())
    print(f"x={sec.x:.17g} loops={len(sec.loops)} Q={sec.Q:.17g} U={sec.U:.17g}", file=sys.stderr)
    return EXIT_OK


def cmd_segment2d(cfg):
    mesh = _load(cfg)
    sec = _section(cfg, mesh)
    if not sec.loops:
        raise UsageError(f"plane x={sec.x!r} misses the body")
    tr = isoperimetric.segment_trace(slicer.chain_loops(sec))
    _emit(cfg.csv or cfg.output, tr.to_csv())
    print(f"x={sec.x:.17g} final_defect={tr.final_defect:.17g} monotone={tr.is_monotone()}", file=sys.stderr)
    return EXIT_OK if tr.is_monotone() else EXIT_FAIL


def cmd_shape(cfg):
    if cfg.kind is None or cfg.params is None:
        raise UsageError("shape needs --kind and --params")
    spec = shapes.parse_spec(cfg.kind, cfg.params, cfg.resolution)
    mesh = shapes.generate(spec)
    ref = shapes.analytic_reference(spec)
    if cfg.output:
        geometry.save_mesh(mesh, cfg.output, cfg.format)
    if cfg.report:
        _write(
            cfg.report,
            dump_json(
                {
                    "kind": spec.kind,
                    "params": list(spec.params),
                    "resolution": spec.resolution,
                    "S_mesh": geometry.surface_area(mesh),
                    "V_mesh": geometry.volume(mesh),
                    "S_exact": ref.S_exact,
                    "V_exact": ref.V_exact,
                    "approximate": ref.approximate,
                }
            ),
        )
    print(f"faces={len(mesh)} S={geometry.surface_area(mesh):.6g} V={geometry.volume(mesh):.6g}")
    return EXIT_OK


HANDLERS = {
    "verify": cmd_verify,
    "symmetrize": cmd_symmetrize,
    "slice": cmd_slice,
    "segment2d": cmd_segment2d,
    "shape": cmd_shape,
}


def _error_payload(exc):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    violations = getattr(exc, "violations", None)
    if violations:
        payload["violations"] = [
            {"kind": v.kind, "message": v.message, "items": [np.asarray(i).tolist() for i in v.items]}
            for v in violations
        ]
    return payload


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    report = ns.report
    try:
        cfg = config_from_args(ns)
        return HANDLERS[cfg.command](cfg)
    except (ValueError, OSError) as exc:
        # MeshError, ProfileError, slicer errors and bad specs are all ValueErrors
        payload = _error_payload(exc)
        print(f"error: {payload['message']}", file=sys.stderr)
        if report:
            try:
                _write(report, dump_json(payload))
            except OSError:
                pass
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
