"""Numerical certification of the isoperimetric inequality on triangle meshes.

Slices a watertight mesh into planar sections, checks the slab and planar
inequalities section by section, symmetrizes into a solid of revolution,
and bounds its area from below by the ball of equal volume.
"""
from .geometry import (
    MeshError,
    TriangleMesh,
    load_mesh,
    orient_axis,
    save_mesh,
    surface_area,
    validate,
    volume,
)
from .isoperimetric import (
    InequalityReport,
    approximation_factor,
    ball_bound,
    cap_trace,
    isoperimetric_quotient,
    segment_trace,
    solve_phi,
    solve_psi,
    tolerance,
    verify_chain,
)
from .profile import SlicedProfile, build_profile, revolve_mesh
from .shapes import ShapeSpec, analytic_reference, generate
from .slicer import CrossSection, chain_loops, slab_area, slice_at

__version__ = "0.1.0"

__all__ = [
    "CrossSection",
    "InequalityReport",
    "MeshError",
    "ShapeSpec",
    "SlicedProfile",
    "TriangleMesh",
    "analytic_reference",
    "approximation_factor",
    "ball_bound",
    "build_profile",
    "cap_trace",
    "chain_loops",
    "generate",
    "isoperimetric_quotient",
    "load_mesh",
    "orient_axis",
    "revolve_mesh",
    "save_mesh",
    "segment_trace",
    "slab_area",
    "slice_at",
    "solve_phi",
    "solve_psi",
    "surface_area",
    "tolerance",
    "validate",
    "volume",
    "verify_chain",
]
