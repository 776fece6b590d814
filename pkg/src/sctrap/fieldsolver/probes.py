"""Diagnostics evaluated on solved field maps."""
from __future__ import annotations

import math

import numpy as np

from ..constants import MU0
from ..errors import InvalidCornerError, InvalidLoopError, InvalidProbeError
from .fieldmap import FieldMap
from .mesh import SUPERCONDUCTOR

ARC_SAMPLES = 721


def unit(theta_deg):
    t = math.radians(theta_deg)
    return np.array([math.cos(t), math.sin(t)])


def _in_superconductor(mesh, px, pz):
    px = np.atleast_1d(px)
    pz = np.atleast_1d(pz)
    i = np.clip(np.searchsorted(mesh.x, px, side="right") - 1, 0, len(mesh.x) - 2)
    j = np.clip(np.searchsorted(mesh.z, pz, side="right") - 1, 0, len(mesh.z) - 2)
    return mesh.cell_material[i, j] == SUPERCONDUCTOR


def corner_field(fmap: FieldMap, corner_point, lambda0):
    """Largest |B| on a circle of radius ``lambda0`` around a film corner.

    Only points outside superconductor cells count, so the probe sits one
    penetration depth away from the corner in the exterior wedge.  The
    corner must be a mesh node bordered by both superconductor and
    non-superconductor cells.
    """
    fmap.require("magnetic")
    mesh = fmap.mesh
    cx, cz = corner_point
    i = int(np.argmin(np.abs(mesh.x - cx)))
    j = int(np.argmin(np.abs(mesh.z - cz)))
    tol = 1e-6 * lambda0
    if abs(mesh.x[i] - cx) > tol or abs(mesh.z[j] - cz) > tol:
        raise InvalidCornerError(f"{corner_point} is not a mesh node")
    cells = mesh.cell_material[max(i - 1, 0):i + 1, max(j - 1, 0):j + 1]
    if not (np.any(cells == SUPERCONDUCTOR) and np.any(cells != SUPERCONDUCTOR)):
        raise InvalidCornerError(f"{corner_point} is not on a superconductor boundary")
    ang = np.linspace(0.0, 2 * math.pi, ARC_SAMPLES)
    px = cx + lambda0 * np.cos(ang)
    pz = cz + lambda0 * np.sin(ang)
    keep = ~_in_superconductor(mesh, px, pz)
    keep &= (px >= mesh.x[0]) & (px <= mesh.x[-1]) & (pz >= mesh.z[0]) & (pz <= mesh.z[-1])
    if not keep.any():
        raise InvalidCornerError("no exterior probe points around corner")
    b = fmap.sample(px[keep], pz[keep])
    return float(np.max(np.sqrt(np.sum(np.abs(b) ** 2, axis=-1))))


def field_gradient_at(fmap: FieldMap, point, direction, component):
    """Central difference of one field component along ``direction``.

    The step is the local cell size; the probe must sit at least two cells
    away from the mesh boundary and outside superconductor.
    """
    mesh = fmap.mesh
    px, pz = map(float, point)
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    if not mesh.contains(px, pz):
        raise InvalidProbeError(f"probe {point} outside mesh")
    i, j = mesh.cell_index(px, pz)
    if i < 2 or j < 2 or i > len(mesh.x) - 4 or j > len(mesh.z) - 4:
        raise InvalidProbeError(f"probe {point} within two cells of the boundary")
    if _in_superconductor(mesh, px, pz)[0]:
        raise InvalidProbeError(f"probe {point} inside superconductor")
    h = min(mesh.x[i + 1] - mesh.x[i], mesh.z[j + 1] - mesh.z[j])
    comp = {"x": 0, "z": 1}[component] if not fmap.is_scalar else None
    pts = np.array([[px + h * d[0], pz + h * d[1]], [px - h * d[0], pz - h * d[1]]])
    vals = fmap.sample(pts[:, 0], pts[:, 1])
    if comp is not None:
        vals = vals[:, comp]
    return float(np.real(vals[0] - vals[1]) / (2 * h))


def ampere_loop_integral(fmap: FieldMap, loop):
    """Enclosed current from the counter-clockwise line integral of B / mu0.

    ``loop`` is (x0, x1, z0, z1).  The path is sampled at every mesh line it
    crosses and integrated with the trapezoid rule.
    """
    fmap.require("magnetic")
    mesh = fmap.mesh
    x0, x1, z0, z1 = loop
    if not (mesh.contains(x0, z0) and mesh.contains(x1, z1)) or x1 <= x0 or z1 <= z0:
        raise InvalidLoopError("loop must be a non-empty rectangle inside the mesh")

    def axis_samples(lo, hi, lines):
        inner = lines[(lines > lo) & (lines < hi)]
        mids = 0.5 * (inner[1:] + inner[:-1]) if len(inner) > 1 else np.array([])
        return np.unique(np.concatenate([[lo, hi], inner, mids]))

    xs = axis_samples(x0, x1, mesh.x)
    zs = axis_samples(z0, z1, mesh.z)
    for px, pz in ((xs, np.full_like(xs, z0)), (xs, np.full_like(xs, z1)),
                   (np.full_like(zs, x0), zs), (np.full_like(zs, x1), zs)):
        if _in_superconductor(mesh, px, pz).any():
            raise InvalidLoopError("loop crosses a conductor")
    total = 0.0
    b = fmap.sample(xs, np.full_like(xs, z0))
    total += np.trapezoid(np.real(b[:, 0]), xs)
    b = fmap.sample(np.full_like(zs, x1), zs)
    total += np.trapezoid(np.real(b[:, 1]), zs)
    b = fmap.sample(xs, np.full_like(xs, z1))
    total -= np.trapezoid(np.real(b[:, 0]), xs)
    b = fmap.sample(np.full_like(zs, x0), zs)
    total -= np.trapezoid(np.real(b[:, 1]), zs)
    return float(total / MU0)


def depth_profile(fmap: FieldMap, x_surface, z_line, depths, component=1):
    """|B component| at ``x_surface - depth`` along the line z = ``z_line``."""
    px = x_surface - np.asarray(depths)
    pz = np.full_like(px, z_line)
    return np.abs(fmap.sample(px, pz)[:, component])
