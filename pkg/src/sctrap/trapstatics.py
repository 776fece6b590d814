"""Trap physics on solved cross-section fields.

Pseudopotential, total potential, secular modes from the local Hessian,
trap depth, and the lowest-order Mathieu parameters.
"""
from __future__ import annotations

import heapq
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .constants import BE9_ION_MASS, E_CHARGE, TWO_PI
from .errors import AlignmentError, NoTrapError, SaddleError
from .fieldsolver.fieldmap import FieldMap
from .fieldsolver.mesh import VACUUM

STENCIL = 5


@dataclass(frozen=True)
class IonSpecies:
    mass: float
    charge: float
    name: str = ""

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("ion mass must be positive")
        if self.charge == 0:
            raise ValueError("ion charge must be non-zero")


BE9 = IonSpecies(BE9_ION_MASS, E_CHARGE, "9Be+")


@dataclass(frozen=True)
class TrapDrive:
    Omega_rf: float
    V_rf: float
    dc_biases: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.Omega_rf > 0:
            raise ValueError("Omega_rf must be positive")


@dataclass
class ModeAnalysis:
    omega_HF: float
    omega_LF: float
    theta_HF: float
    theta_LF: float
    minimum_location: tuple
    minimum_value: float
    trap_depth: float | None = None
    mathieu: dict = field(default_factory=dict)
    stable: bool | None = None
    omega_axial: float | None = None
    warnings: list = field(default_factory=list)

    def to_json(self):
        d = asdict(self)
        out = {
            "omega_HF_rad_s": d["omega_HF"], "omega_LF_rad_s": d["omega_LF"],
            "f_HF_Hz": d["omega_HF"] / TWO_PI, "f_LF_Hz": d["omega_LF"] / TWO_PI,
            "theta_HF_deg": d["theta_HF"], "theta_LF_deg": d["theta_LF"],
            "minimum_location_m": list(d["minimum_location"]),
            "minimum_value_J": d["minimum_value"],
            "trap_depth_eV": d["trap_depth"],
            "mathieu": d["mathieu"], "stable": d["stable"],
            "omega_axial_rad_s": d["omega_axial"] if d["omega_axial"] is not None
            else "not-computed",
            "warnings": d["warnings"],
        }
        return json.dumps(out, indent=2, sort_keys=True)


def pseudopotential_map(e_field: FieldMap, ion: IonSpecies, Omega_rf) -> FieldMap:
    """Ponderomotive energy Q^2 |E|^2 / (4 M Omega^2) at every node (J).

    ``e_field`` holds the zero-to-peak amplitude of the RF field.
    """
    e_field.require("electric")
    e2 = np.sum(np.abs(e_field.values) ** 2, axis=-1)
    phi = ion.charge ** 2 * e2 / (4.0 * ion.mass * Omega_rf ** 2)
    return FieldMap(e_field.mesh, "energy", phi, Omega_rf / TWO_PI,
                    {"Omega_rf_rad_s": float(Omega_rf), "ion": ion.name}, e_field.residual)


def total_potential(pseudo: FieldMap, dc_potential: FieldMap, ion: IonSpecies) -> FieldMap:
    """Pseudopotential plus Q times the DC electric potential (J)."""
    pseudo.require("energy")
    dc_potential.require("potential")
    if not pseudo.mesh.same_as(dc_potential.mesh):
        raise AlignmentError("pseudopotential and DC maps use different meshes")
    vals = pseudo.values + ion.charge * np.real(dc_potential.values)
    return pseudo.replace(vals, dc=dc_potential.source.get("voltages_V", {}))


def _quadratic_fit(x, z, f, x0, z0):
    """Least-squares quadratic about (x0, z0); returns (c, grad, hessian)."""
    u, v = x - x0, z - z0
    scale = max(np.ptp(u), np.ptp(v)) or 1.0
    u, v = u / scale, v / scale
    A = np.column_stack([np.ones_like(u), u, v, u * u, u * v, v * v])
    c = np.linalg.lstsq(A, f, rcond=None)[0]
    grad = np.array([c[1], c[2]]) / scale
    hess = np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]]) / scale ** 2
    return c[0], grad, hess


def _axis_angle(vec):
    ang = math.degrees(math.atan2(vec[1], vec[0]))
    while ang <= -90.0:
        ang += 180.0
    while ang > 90.0:
        ang -= 180.0
    return ang


def _local_min_node(phi, mesh, region):
    x0, x1, z0, z1 = region
    ii = np.flatnonzero((mesh.x >= x0) & (mesh.x <= x1))
    jj = np.flatnonzero((mesh.z >= z0) & (mesh.z <= z1))
    if len(ii) == 0 or len(jj) == 0:
        raise NoTrapError("search region contains no mesh nodes")
    sub = phi[np.ix_(ii, jj)]
    a, b = np.unravel_index(np.argmin(sub), sub.shape)
    i, j = ii[a], jj[b]
    h = STENCIL // 2
    if i in (ii[0], ii[-1]) or j in (jj[0], jj[-1]) or i < h or j < h \
            or i >= len(mesh.x) - h or j >= len(mesh.z) - h:
        raise NoTrapError("potential minimum lies on the search-region boundary")
    return i, j


def hessian_modes(potential: FieldMap, ion: IonSpecies, search_region) -> ModeAnalysis:
    """Secular frequencies and principal axes from a local quadratic fit.

    The lowest node inside ``search_region`` (x0, x1, z0, z1) seeds a
    quadratic fit over a 5x5 node stencil; the stencil is re-centred on the
    node nearest the fitted stationary point until it stops moving.
    """
    potential.require("energy")
    mesh = potential.mesh
    phi = np.real(potential.values)
    i, j = _local_min_node(phi, mesh, search_region)
    h = STENCIL // 2
    for _ in range(10):
        sl = (slice(i - h, i + h + 1), slice(j - h, j + h + 1))
        X, Z = np.meshgrid(mesh.x[sl[0]], mesh.z[sl[1]], indexing="ij")
        c0, grad, hess = _quadratic_fit(X.ravel(), Z.ravel(), phi[sl].ravel(),
                                        mesh.x[i], mesh.z[j])
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise SaddleError("singular Hessian at the potential minimum") from exc
        px, pz = mesh.x[i] + step[0], mesh.z[j] + step[1]
        ni = int(np.argmin(np.abs(mesh.x - px)))
        nj = int(np.argmin(np.abs(mesh.z - pz)))
        ni = min(max(ni, h), len(mesh.x) - h - 1)
        nj = min(max(nj, h), len(mesh.z) - h - 1)
        if (ni, nj) == (i, j):
            break
        i, j = ni, nj
    evals, evecs = np.linalg.eigh(hess)
    if np.any(evals <= 0):
        raise SaddleError(f"Hessian not positive definite (eigenvalues {evals})")
    omegas = np.sqrt(evals / ion.mass)
    vmin = c0 + grad @ step + 0.5 * step @ hess @ step
    return ModeAnalysis(
        omega_HF=float(omegas[1]), omega_LF=float(omegas[0]),
        theta_HF=_axis_angle(evecs[:, 1]), theta_LF=_axis_angle(evecs[:, 0]),
        minimum_location=(float(px), float(pz)), minimum_value=float(vmin))


def _allowed_nodes(mesh):
    """Nodes the ion may visit: every adjacent cell is vacuum."""
    nx, nz = mesh.shape
    solid = (mesh.cell_material != VACUUM) | (mesh.cell_electrode >= 0)
    blocked = np.zeros((nx, nz), bool)
    blocked[:-1, :-1] |= solid
    blocked[1:, :-1] |= solid
    blocked[:-1, 1:] |= solid
    blocked[1:, 1:] |= solid
    return ~blocked


def escape_saddle(potential: FieldMap, minimum_location):
    """Lowest escape barrier from the minimum to the mesh boundary.

    Returns (barrier in J, saddle node coordinates).  The barrier is the
    lowest level at which the sublevel set containing the minimum reaches
    the boundary.  It is found exactly with a priority flood over vacuum
    nodes (minimax path cost), so there is no level quantisation.
    """
    potential.require("energy")
    mesh = potential.mesh
    nx, nz = mesh.shape
    phi = np.real(potential.values)
    i0 = int(np.argmin(np.abs(mesh.x - minimum_location[0])))
    j0 = int(np.argmin(np.abs(mesh.z - minimum_location[1])))
    if i0 in (0, nx - 1) or j0 in (0, nz - 1):
        raise NoTrapError("minimum lies on the mesh boundary")
    allowed = _allowed_nodes(mesh)
    allowed[i0, j0] = True
    best = np.full((nx, nz), np.inf)
    start = phi[i0, j0]
    best[i0, j0] = start
    heap = [(start, i0, j0, i0, j0)]
    while heap:
        cost, i, j, si, sj = heapq.heappop(heap)
        if cost > best[i, j]:
            continue
        if i in (0, nx - 1) or j in (0, nz - 1):
            return float(cost - start), (float(mesh.x[si]), float(mesh.z[sj]))
        for a, b in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
            if allowed[a, b]:
                if phi[a, b] > cost:
                    c, sa, sb = phi[a, b], a, b
                else:
                    c, sa, sb = cost, si, sj
                if c < best[a, b]:
                    best[a, b] = c
                    heapq.heappush(heap, (c, a, b, sa, sb))
    raise NoTrapError("minimum is enclosed: no vacuum path to the boundary")


def trap_depth(potential: FieldMap, minimum_location) -> float:
    """Escape barrier from the minimum to the mesh boundary, in eV."""
    barrier, _ = escape_saddle(potential, minimum_location)
    return barrier / E_CHARGE


def mathieu_q(omega_pseudo_only, Omega_rf):
    """q from the pure-RF secular frequency, omega = q Omega / (2 sqrt 2)."""
    if Omega_rf <= 0:
        raise ValueError("Omega_rf must be positive")
    if omega_pseudo_only < 0:
        raise ValueError("secular frequency must be non-negative")
    return 2.0 * math.sqrt(2.0) * omega_pseudo_only / Omega_rf


def mathieu_a(omega_secular, q, Omega_rf):
    """a from omega = (Omega/2) sqrt(a + q^2/2)."""
    beta = 2.0 * omega_secular / Omega_rf
    if not abs(beta) < 1:
        raise ValueError("|2 omega / Omega| must be below 1")
    return beta ** 2 - 0.5 * q ** 2


def boundary_a0(q):
    """Lower edge of the first stability region (beta = 0), order q^4."""
    return -0.5 * q ** 2 + 7.0 * q ** 4 / 128.0


def boundary_b1(q):
    """Upper edge of the first stability region (beta = 1), order q^4."""
    q = abs(q)
    return 1.0 - q - q ** 2 / 8.0 + q ** 3 / 64.0 - q ** 4 / 1536.0


@dataclass(frozen=True)
class StabilityResult:
    stable: bool
    margin: float
    warning: str | None = None

    def __bool__(self):
        return self.stable


def stability_check(a, q) -> StabilityResult:
    """Membership in the first Mathieu stability region.

    ``margin`` is b1(q) - a for points on or above the lower edge a0(q)
    (positive inside, negative above b1) and a - a0(q) (negative) below it.
    """
    lo, hi = boundary_a0(q), boundary_b1(q)
    stable = lo <= a < hi
    margin = hi - a if a >= lo else a - lo
    warn = None
    if abs(q) >= 0.9:
        warn = f"|q| = {abs(q):.3f} outside the validity of the q^4 boundary series"
        warnings.warn(warn, stacklevel=2)
    return StabilityResult(bool(stable), float(margin), warn)


def axial_defocus(potential: FieldMap, ion: IonSpecies, omega_axial, center=(0.0, 0.0)):
    """Add the radial counterpart of a DC axial confinement.

    A static potential confining along the trap axis with secular
    frequency ``omega_axial`` must, by Laplace's equation, carry a radial
    curvature of total -M omega_axial^2.  The 2D cut cannot see the axial
    electrodes, so that curvature is added here split equally between x
    and z.
    """
    potential.require("energy")
    X, Z = potential.mesh.node_grid()
    r2 = (X - center[0]) ** 2 + (Z - center[1]) ** 2
    k = ion.mass * omega_axial ** 2
    return potential.replace(potential.values - 0.25 * k * r2,
                             omega_axial_rad_s=float(omega_axial))


def trap_potential(rf_potential: FieldMap, dc_potential: FieldMap, ion: IonSpecies,
                   drive: TrapDrive, search_region, omega_axial=None):
    """Total radial potential energy and the RF-only mode analysis.

    The axial defocusing, if requested, is centred on the RF-only minimum.
    """
    pseudo = pseudopotential_map(rf_potential.gradient(), ion, drive.Omega_rf)
    rf_only = hessian_modes(pseudo, ion, search_region)
    total = total_potential(pseudo, dc_potential, ion)
    if omega_axial:
        total = axial_defocus(total, ion, omega_axial, rf_only.minimum_location)
    return total, rf_only


def analyze_trap(rf_potential: FieldMap, dc_potential: FieldMap, ion: IonSpecies,
                 drive: TrapDrive, search_region, omega_axial=None) -> ModeAnalysis:
    """Full radial analysis: modes with DC, q from the RF-only modes, a per axis.

    ``rf_potential`` is the electrostatic solution with the RF electrodes at
    ``drive.V_rf``; ``dc_potential`` carries the static biases.  With
    ``omega_axial`` the radial defocusing of the axial confinement is
    included (see :func:`axial_defocus`).
    """
    total, rf_only = trap_potential(rf_potential, dc_potential, ion, drive, search_region,
                                    omega_axial)
    omega0 = math.sqrt(0.5 * (rf_only.omega_HF ** 2 + rf_only.omega_LF ** 2))
    q = mathieu_q(omega0, drive.Omega_rf)
    modes = hessian_modes(total, ion, search_region)
    depth = trap_depth(total, modes.minimum_location)
    a_hf = mathieu_a(modes.omega_HF, q, drive.Omega_rf)
    a_lf = mathieu_a(modes.omega_LF, q, drive.Omega_rf)
    notes = []
    checks = []
    for a in (a_hf, a_lf):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = stability_check(a, q)
        checks.append(res)
        if res.warning:
            notes.append(res.warning)
    return replace(
        modes, trap_depth=depth,
        mathieu={"q": q, "a_HF": a_hf, "a_LF": a_lf,
                 "omega_rf_only_rad_s": [rf_only.omega_HF, rf_only.omega_LF],
                 "margin_HF": checks[0].margin, "margin_LF": checks[1].margin},
        stable=all(c.stable for c in checks), omega_axial=omega_axial, warnings=notes)


def solve_trap(geometry, drive: TrapDrive, ion: IonSpecies = BE9, search_half=20e-6,
               min_cell=25e-9, growth_ratio=1.3, omega_axial=None):
    """Mesh, solve the RF and DC problems, and run :func:`analyze_trap`.

    RF electrodes sit at ``drive.V_rf`` for the RF solve and at 0 V for the
    DC solve; ``drive.dc_biases`` maps electrode labels or roles to volts
    and everything else is grounded.  Returns (analysis, rf map, dc map).
    """
    from .fieldsolver import build_mesh, solve_electrostatic

    mesh = build_mesh(geometry, min_cell, growth_ratio)
    zero = {e.label: 0.0 for e in geometry.electrodes}
    rf_v = dict(zero)
    rf_v.update({e.label: drive.V_rf for e in geometry.electrodes if e.role == "rf"})
    dc_v = dict(zero)
    for e in geometry.electrodes:
        if e.role == "rf":
            continue
        v = drive.dc_biases.get(e.label, drive.dc_biases.get(e.name.split("_")[0],
                                drive.dc_biases.get(e.role)))
        if v is not None:
            dc_v[e.label] = float(v)
    rf_map = solve_electrostatic(mesh, geometry, rf_v)
    dc_map = solve_electrostatic(mesh, geometry, dc_v)
    region = (-search_half, search_half, -search_half, search_half)
    result = analyze_trap(rf_map, dc_map, ion, drive, region, omega_axial)
    return result, rf_map, dc_map
