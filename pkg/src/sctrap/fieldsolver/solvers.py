"""Finite-volume solvers on the graded mesh.

Both solvers share the node-centred five-point discretisation assembled by
:func:`_stiffness`: every node owns a control volume made of four quarter
cells, and the flux across each control-volume face uses the material
coefficient of the cells it crosses.
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import shapely

from ..constants import MU0
from ..errors import ConfigError, ConvergenceError
from .fieldmap import FieldMap
from .geometry import CrossSectionGeometry
from .mesh import SUBSTRATE, SUPERCONDUCTOR, Mesh

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8
DRIVEN_ROLES = ("signal", "mw")


def _stiffness(mesh: Mesh, coef):
    """Symmetric graph Laplacian with per-cell coefficient ``coef``."""
    nx, nz = mesh.shape
    dx, dz = mesh.dx, mesh.dz
    idx = np.arange(nx * nz).reshape(nx, nz)
    # x-edges: (i, j) - (i+1, j); the face spans half of the cells below/above
    cz = np.zeros((nx - 1, nz))
    cz[:, :-1] += 0.5 * coef * dz[None, :]
    cz[:, 1:] += 0.5 * coef * dz[None, :]
    wx = cz / dx[:, None]
    cx = np.zeros((nx, nz - 1))
    cx[:-1, :] += 0.5 * coef * dx[:, None]
    cx[1:, :] += 0.5 * coef * dx[:, None]
    wz = cx / dz[None, :]
    rows = np.concatenate([idx[:-1, :].ravel(), idx[:, :-1].ravel()])
    cols = np.concatenate([idx[1:, :].ravel(), idx[:, 1:].ravel()])
    w = np.concatenate([wx.ravel(), wz.ravel()])
    n = nx * nz
    off = sp.coo_matrix((w, (rows, cols)), shape=(n, n))
    off = off + off.T
    diag = np.asarray(off.sum(axis=1)).ravel()
    return (sp.diags(diag) - off).tocsr()


def _quarter_mass(mesh: Mesh, cell_weight):
    """Lump ``cell_weight * area`` onto the four corner nodes of each cell."""
    nx, nz = mesh.shape
    area = np.outer(mesh.dx, mesh.dz) * cell_weight * 0.25
    m = np.zeros((nx, nz))
    m[:-1, :-1] += area
    m[1:, :-1] += area
    m[:-1, 1:] += area
    m[1:, 1:] += area
    return m.ravel()


def _boundary_mask(mesh: Mesh):
    nx, nz = mesh.shape
    b = np.zeros((nx, nz), bool)
    b[0, :] = b[-1, :] = b[:, 0] = b[:, -1] = True
    return b.ravel()


def _solve(matrix, rhs):
    lu = spla.splu(matrix.tocsc(), permc_spec="COLAMD")
    sol = lu.solve(rhs)
    # one step of iterative refinement keeps the residual well below tolerance
    r = rhs - matrix @ sol
    sol = sol + lu.solve(r)
    r = rhs - matrix @ sol
    scale = np.linalg.norm(rhs)
    res = float(np.linalg.norm(r) / scale) if scale > 0 else float(np.linalg.norm(r))
    if not np.isfinite(res) or res > RESIDUAL_TOL:
        raise ConvergenceError(f"linear solve residual {res:.3e} exceeds {RESIDUAL_TOL}", res)
    return sol, res


def _current_groups(geometry: CrossSectionGeometry, total_current):
    """Partition electrodes into constraint groups with their net currents.

    Driven electrodes (signal/mw) each form a group carrying
    ``weight * total_current``; all grounds share one group carrying the
    return current; every other electrode floats with zero net current.
    """
    driven = [k for k, e in enumerate(geometry.electrodes) if e.role in DRIVEN_ROLES]
    if not driven:
        raise ConfigError("magnetic solve needs at least one signal/mw electrode")
    groups, currents = [], []
    net = 0.0
    for k in driven:
        e = geometry.electrodes[k]
        weight = 1.0 if e.value is None else float(e.value)
        groups.append([k])
        currents.append(weight * total_current)
        net += weight * total_current
    grounds = [k for k, e in enumerate(geometry.electrodes) if e.role == "ground"]
    if grounds:
        groups.append(grounds)
        currents.append(-net)
    for k, e in enumerate(geometry.electrodes):
        if k not in driven and k not in grounds:
            groups.append([k])
            currents.append(0.0)
    return groups, currents


def solve_magnetoquasistatic(mesh: Mesh, geometry: CrossSectionGeometry, total_current,
                             frequency=1e9) -> FieldMap:
    """Solve for the out-of-plane vector potential with London screening.

    Inside superconductor cells the supercurrent is ``-(A - C_g)/(mu0
    lambda^2)``; the per-group constant ``C_g`` is an extra unknown fixed by
    the net-current constraint of its group, which keeps the system
    symmetric positive definite.  Outside conductors ``laplace(A) = 0``;
    ``A = 0`` on the outer boundary.  The displacement term of the London
    permittivity is dropped (smaller than 1/lambda^2 by ~1e-12 at GHz).

    Current flows along x_hat cross z_hat, so counter-clockwise loops in the
    (x, z) plane enclose positive current.  The result is linear in
    ``total_current``: the system is solved once and the right-hand side
    carries the currents.
    """
    lam2 = geometry.lambda0 ** 2
    groups, currents = _current_groups(geometry, total_current)
    nx, nz = mesh.shape
    n = nx * nz
    K = _stiffness(mesh, np.ones((nx - 1, nz - 1)))
    sc_cells = mesh.cell_material == SUPERCONDUCTOR

    rhs_nodes = np.zeros(n)
    group_masses = []
    for g, cur in zip(groups, currents):
        in_group = np.isin(mesh.cell_electrode, g)
        m_sc = _quarter_mass(mesh, (in_group & sc_cells) / lam2)
        group_masses.append(m_sc)
        normal = in_group & ~sc_cells
        if normal.any():
            # normal conductor: uniform current density source
            area = float(np.sum(np.outer(mesh.dx, mesh.dz)[normal]))
            rhs_nodes += MU0 * _quarter_mass(mesh, normal * (cur / area))

    M = np.sum(group_masses, axis=0) if group_masses else np.zeros(n)
    free = ~_boundary_mask(mesh)
    fi = np.flatnonzero(free)
    A_ff = (K + sp.diags(M))[fi][:, fi]
    cols, diag, rhs_c = [], [], []
    for m_sc, cur, g in zip(group_masses, currents, groups):
        if m_sc.sum() == 0:
            continue
        cols.append(-m_sc[fi])
        diag.append(m_sc.sum())
        rhs_c.append(MU0 * cur)
    B = sp.csr_matrix(np.column_stack(cols)) if cols else sp.csr_matrix((len(fi), 0))
    system = sp.bmat([[A_ff, B], [B.T, sp.diags(diag) if diag else None]], format="csr")
    rhs = np.concatenate([rhs_nodes[fi], rhs_c])
    sol, res = _solve(system, rhs)
    A = np.zeros(n)
    A[fi] = sol[: len(fi)]
    A = A.reshape(nx, nz)
    consts = sol[len(fi):]

    dAdx, dAdz = np.gradient(A, mesh.x, mesh.z, edge_order=2)
    B_field = np.stack([dAdz, -dAdx], axis=-1).astype(complex)
    log.debug("magnetic solve: %d nodes, residual %.2e", n, res)
    return FieldMap(mesh, "magnetic", B_field, frequency,
                    {"total_current_A": float(total_current),
                     "group_currents_A": [float(c) for c in currents]},
                    res, {"vector_potential": A, "group_constants": consts,
                          "lambda0": geometry.lambda0})


def conductor_node_mask(mesh: Mesh, polygon):
    X, Z = mesh.node_grid()
    return shapely.intersects_xy(polygon, X, Z)


def solve_electrostatic(mesh: Mesh, geometry: CrossSectionGeometry, voltages=None) -> FieldMap:
    """Laplace solve with electrodes as Dirichlet equipotentials.

    ``voltages`` maps electrode label or role to volts and overrides values
    stored on the geometry; every electrode must end up with a voltage.
    The outer boundary is held at 0 V and the substrate carries
    ``eps_substrate``.
    """
    voltages = voltages or {}
    nx, nz = mesh.shape
    fixed = _boundary_mask(mesh).reshape(nx, nz).copy()
    value = np.zeros((nx, nz))
    assigned = {}
    for e in geometry.electrodes:
        v = voltages.get(e.label, voltages.get(e.role, e.value))
        if v is None:
            raise ConfigError(f"electrode {e.label!r} has no assigned voltage")
        mask = conductor_node_mask(mesh, e.polygon)
        fixed |= mask
        value[mask] = v
        assigned[e.label] = float(v)
    eps = np.where(mesh.cell_material == SUBSTRATE, geometry.eps_substrate, 1.0)
    K = _stiffness(mesh, eps)
    f = ~fixed.ravel()
    fi = np.flatnonzero(f)
    ci = np.flatnonzero(~f)
    rhs = -K[fi][:, ci] @ value.ravel()[ci]
    if np.linalg.norm(rhs) == 0:
        phi = value
        res = 0.0
    else:
        sol, res = _solve(K[fi][:, fi], rhs)
        phi = value.ravel().copy()
        phi[fi] = sol
        phi = phi.reshape(nx, nz)
    return FieldMap(mesh, "potential", phi, 0.0, {"voltages_V": assigned}, res,
                    {"fixed_nodes": fixed})
