"""Graded rectilinear meshing of a cross-section."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import shapely

from ..errors import BudgetExceededError, InvalidGeometryError
from .geometry import CrossSectionGeometry

VACUUM, SUBSTRATE, SUPERCONDUCTOR = 0, 1, 2
DEFAULT_NODE_BUDGET = 400_000


@dataclass(frozen=True, eq=False)
class Mesh:
    x: np.ndarray
    z: np.ndarray
    cell_material: np.ndarray  # (nx-1, nz-1) material codes
    cell_electrode: np.ndarray  # (nx-1, nz-1) electrode index, -1 for none
    min_cell: float
    growth_ratio: float

    def __post_init__(self):
        for a in (self.x, self.z, self.cell_material, self.cell_electrode):
            a.setflags(write=False)

    @property
    def shape(self):
        return len(self.x), len(self.z)

    @property
    def n_nodes(self):
        return len(self.x) * len(self.z)

    @property
    def dx(self):
        return np.diff(self.x)

    @property
    def dz(self):
        return np.diff(self.z)

    def node_grid(self):
        return np.meshgrid(self.x, self.z, indexing="ij")

    def same_as(self, other):
        return (self is other or (
            np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z)))

    def cell_index(self, px, pz):
        i = int(np.searchsorted(self.x, px, side="right") - 1)
        j = int(np.searchsorted(self.z, pz, side="right") - 1)
        return min(max(i, 0), len(self.x) - 2), min(max(j, 0), len(self.z) - 2)

    def local_cell_size(self, px, pz):
        i, j = self.cell_index(px, pz)
        return max(self.x[i + 1] - self.x[i], self.z[j + 1] - self.z[j])

    def contains(self, px, pz):
        return self.x[0] <= px <= self.x[-1] and self.z[0] <= pz <= self.z[-1]


def _size_function(keys, sizes, growth, h_max):
    # h grows linearly with slope ln(g): equidistributed cells then grow by
    # exactly g per cell and the first cell next to a key is h0 (g-1)/ln g,
    # so key sizes are pre-scaled to make that first cell equal h0
    keys = np.asarray(keys, float)
    slope = math.log(growth)
    scale = slope / (growth - 1.0) if growth > 1.0 else 1.0
    sizes = np.asarray(sizes, float) * scale

    def h(u):
        u = np.asarray(u, float)[..., None]
        return np.minimum(np.min(sizes + slope * np.abs(u - keys), axis=-1), h_max)

    return h


def _merge_keys(keys, sizes, tol):
    order = np.argsort(keys, kind="stable")
    ks, hs = [], []
    for k, hk in zip(np.asarray(keys)[order], np.asarray(sizes)[order]):
        if ks and k - ks[-1] < tol:
            hs[-1] = min(hs[-1], hk)
            continue
        ks.append(float(k))
        hs.append(float(hk))
    return np.array(ks), np.array(hs)


def _graded_lines(lo, hi, keys, sizes, growth, h_max, count_only=False):
    """Coordinates on [lo, hi] that hit every key and follow the size function."""
    inside = (keys >= lo) & (keys <= hi)
    k_all = np.concatenate([[lo, hi], keys[inside]])
    h_all = np.concatenate([[h_max, h_max], sizes[inside]])
    tol = 0.25 * float(np.min(sizes)) if len(sizes) else 0.0
    stops, _ = _merge_keys(k_all, h_all, tol)
    stops[0], stops[-1] = lo, hi
    hfun = _size_function(keys, sizes, growth, h_max) if len(keys) else (
        lambda u: np.full(np.shape(u), h_max))
    u = 0.5 - 0.5 * np.cos(np.linspace(0.0, np.pi, 4001))
    lines = [np.array([lo])]
    total = 0
    for a, b in zip(stops[:-1], stops[1:]):
        xs = a + (b - a) * u
        inv = 1.0 / hfun(xs)
        s = np.concatenate([[0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1]) * np.diff(xs))])
        n = max(1, int(np.ceil(s[-1] - 1e-9)))
        total += n
        if count_only:
            continue
        targets = np.linspace(0.0, s[-1], n + 1)[1:]
        seg = np.interp(targets, s, xs)
        seg[-1] = b
        lines.append(seg)
    if count_only:
        return total + 1
    return np.concatenate(lines)


def build_mesh(geometry: CrossSectionGeometry, target_min_cell, growth_ratio,
               max_cell=None, node_budget=DEFAULT_NODE_BUDGET):
    """Build a graded rectilinear mesh refined at every polygon vertex.

    Cell size is ``target_min_cell`` on every vertex line and grows by at
    most ``growth_ratio`` per cell away from it, capped at ``max_cell``
    (default: 1/40 of the domain span).  ``growth_ratio == 1`` gives a
    uniform grid.
    """
    if not 1.0 <= growth_ratio <= 1.5:
        raise ValueError("growth_ratio must lie in [1, 1.5]")
    if target_min_cell <= 0:
        raise ValueError("target_min_cell must be positive")
    has_sc = any(e.superconducting for e in geometry.electrodes)
    if has_sc and target_min_cell > 0.5 * geometry.lambda0 * (1 + 1e-9):
        raise ValueError("target_min_cell must not exceed lambda0/2")
    geometry.validate()

    x0, x1, z0, z1 = geometry.resolved_domain()
    span = max(x1 - x0, z1 - z0)
    h_max = max_cell if max_cell is not None else span / 40.0
    if growth_ratio == 1.0:
        h_max = target_min_cell

    kx, kz, hk_x, hk_z = [], [], [], []
    for e in geometry.electrodes:
        coords = np.asarray(e.polygon.exterior.coords)[:-1]
        kx.extend(coords[:, 0])
        kz.extend(coords[:, 1])
        hk_x.extend([target_min_cell] * len(coords))
        hk_z.extend([target_min_cell] * len(coords))
    for px, pz, ph in geometry.refine_points:
        kx.append(px)
        kz.append(pz)
        hk_x.append(max(ph, target_min_cell))
        hk_z.append(max(ph, target_min_cell))
    for s in geometry.substrates:
        coords = np.asarray(s.exterior.coords)[:-1]
        kx.extend(coords[:, 0])
        kz.extend(coords[:, 1])
        hk_x.extend([max(target_min_cell, 0.02 * span)] * len(coords))
        hk_z.extend([max(target_min_cell, 0.02 * span)] * len(coords))
    kx, hk_x = _merge_keys(np.array(kx), np.array(hk_x), 1e-3 * target_min_cell)
    kz, hk_z = _merge_keys(np.array(kz), np.array(hk_z), 1e-3 * target_min_cell)
    if len(kx) == 0:
        kx, hk_x = np.array([x0, x1]), np.array([target_min_cell] * 2)
        kz, hk_z = np.array([z0, z1]), np.array([target_min_cell] * 2)

    nx = _graded_lines(x0, x1, kx, hk_x, growth_ratio, h_max, count_only=True)
    nz = _graded_lines(z0, z1, kz, hk_z, growth_ratio, h_max, count_only=True)
    if nx * nz > node_budget:
        raise BudgetExceededError(
            f"mesh needs about {nx * nz} nodes (budget {node_budget})", nx * nz)
    xs = _graded_lines(x0, x1, kx, hk_x, growth_ratio, h_max)
    zs = _graded_lines(z0, z1, kz, hk_z, growth_ratio, h_max)
    if np.any(np.diff(xs) <= 0) or np.any(np.diff(zs) <= 0):
        raise InvalidGeometryError("mesh coordinates not strictly increasing")

    cx = 0.5 * (xs[1:] + xs[:-1])
    cz = 0.5 * (zs[1:] + zs[:-1])
    CX, CZ = np.meshgrid(cx, cz, indexing="ij")
    material = np.full(CX.shape, VACUUM, dtype=np.int8)
    for s in geometry.substrates:
        material[shapely.contains_xy(s, CX, CZ)] = SUBSTRATE
    owner = np.full(CX.shape, -1, dtype=np.int32)
    for k, e in enumerate(geometry.electrodes):
        inside = shapely.contains_xy(e.polygon, CX, CZ)
        owner[inside] = k
        if e.superconducting:
            material[inside] = SUPERCONDUCTOR
    return Mesh(xs, zs, material, owner, float(min(np.diff(xs).min(), np.diff(zs).min())),
                growth_ratio)
