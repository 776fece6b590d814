"""Cross-section geometry: electrode polygons, substrate, and coplanar presets."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import Polygon, box

from ..errors import InvalidGeometryError

ROLES = ("signal", "ground", "rf", "dc", "mw", "float")


@dataclass(frozen=True)
class Electrode:
    """One conductor of the cross-section.

    ``value`` is the assigned current in A (signal/mw/float/ground) for the
    magnetic solve or the voltage in V (rf/dc/ground) for the electrostatic
    solve; ``None`` leaves it to the solver call.  ``name`` distinguishes
    electrodes that share a role (``"inner"`` and ``"endcap"`` DC pads).
    """

    polygon: Polygon
    role: str
    value: float | None = None
    name: str = ""
    superconducting: bool = True

    def __post_init__(self):
        if self.role not in ROLES:
            raise InvalidGeometryError(f"unknown electrode role {self.role!r}")

    @property
    def label(self):
        return self.name or self.role


@dataclass(frozen=True)
class CrossSectionGeometry:
    electrodes: tuple[Electrode, ...]
    lambda0: float = 50e-9
    eps_substrate: float = 11.9
    substrates: tuple[Polygon, ...] = ()
    domain: tuple[float, float, float, float] | None = None
    refine_points: tuple[tuple[float, float, float], ...] = ()
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "electrodes", tuple(self.electrodes))
        object.__setattr__(self, "substrates", tuple(self.substrates))
        self.validate()

    def validate(self):
        if not self.lambda0 > 0:
            raise InvalidGeometryError("lambda0 must be positive")
        if not self.eps_substrate >= 1:
            raise InvalidGeometryError("eps_substrate must be >= 1")
        polys = [e.polygon for e in self.electrodes]
        for p in polys + list(self.substrates):
            if not p.is_valid or p.is_empty:
                raise InvalidGeometryError(f"invalid polygon {p.wkt[:60]}")
        for a, b in itertools.combinations(polys, 2):
            if a.intersection(b).area > 1e-6 * min(a.area, b.area):
                raise InvalidGeometryError("electrode polygons overlap")
        for s in self.substrates:
            for a in polys:
                if a.intersection(s).area > 1e-6 * a.area:
                    raise InvalidGeometryError("electrode overlaps substrate")
        if self.domain is not None:
            x0, x1, z0, z1 = self.domain
            if not (x1 > x0 and z1 > z0):
                raise InvalidGeometryError("empty domain")
            outer = box(x0, z0, x1, z1)
            for p in polys:
                if not outer.contains(p):
                    raise InvalidGeometryError("electrode outside domain")

    # convenience accessors for coplanar presets
    @property
    def w(self):
        return self.params.get("w")

    @property
    def s(self):
        return self.params.get("s")

    @property
    def t(self):
        return self.params.get("t")

    def electrodes_with_role(self, role):
        return [e for e in self.electrodes if e.role == role]

    def bounds(self):
        """Bounding box (x0, x1, z0, z1) of all electrodes."""
        if not self.electrodes:
            return self.domain
        b = np.array([e.polygon.bounds for e in self.electrodes])
        return b[:, 0].min(), b[:, 2].max(), b[:, 1].min(), b[:, 3].max()

    def resolved_domain(self, pad_factor=10.0):
        """Simulation box; defaults to ``pad_factor`` electrode spans each side."""
        if self.domain is not None:
            return self.domain
        x0, x1, z0, z1 = self.bounds()
        span = max(x1 - x0, z1 - z0)
        cx, cz = 0.5 * (x0 + x1), 0.5 * (z0 + z1)
        half = (0.5 + pad_factor) * span
        return cx - half, cx + half, cz - half, cz + half

    def corners(self):
        """All vertices of superconducting electrode polygons."""
        pts = []
        for e in self.electrodes:
            if e.superconducting:
                pts.extend(list(e.polygon.exterior.coords)[:-1])
        return pts

    def with_values(self, values):
        """Copy with electrode values replaced, keyed by label or role."""
        new = []
        for e in self.electrodes:
            v = values.get(e.label, values.get(e.role, e.value))
            new.append(Electrode(e.polygon, e.role, v, e.name, e.superconducting))
        return CrossSectionGeometry(
            tuple(new), self.lambda0, self.eps_substrate, self.substrates,
            self.domain, self.refine_points, dict(self.params))


def rect(x0, x1, z0, z1):
    return box(min(x0, x1), min(z0, z1), max(x0, x1), max(z0, z1))


def coplanar_waveguide(w, s, t, lambda0=50e-9, eps_substrate=11.9,
                       ground_width=None, substrate_depth=None, current=1.0):
    """Coplanar waveguide on a substrate: signal strip plus two grounds.

    The signal strip is centred at x = 0 and sits on the substrate surface
    z = 0.  Grounds carry the return current.
    """
    if min(w, s, t) <= 0:
        raise InvalidGeometryError("w, s, t must be positive")
    gw = ground_width if ground_width is not None else 2.0 * w + 4.0 * s
    depth = substrate_depth if substrate_depth is not None else gw + w
    half = 0.5 * w
    electrodes = (
        Electrode(rect(-half, half, 0.0, t), "signal", current, "signal"),
        Electrode(rect(-half - s - gw, -half - s, 0.0, t), "ground", None, "ground_left"),
        Electrode(rect(half + s, half + s + gw, 0.0, t), "ground", None, "ground_right"),
    )
    xs = half + s + gw
    sub = (rect(-xs, xs, -depth, 0.0),)
    return CrossSectionGeometry(
        electrodes, lambda0, eps_substrate, sub,
        params={"w": w, "s": s, "t": t, "preset": "coplanar"})


def round_wire(radius, lambda0=50e-9, n_vertices=64, current=1.0, domain_half=None):
    """Isolated superconducting wire of circular section, no return conductor."""
    ang = np.linspace(0.0, 2 * math.pi, n_vertices, endpoint=False)
    poly = Polygon(np.column_stack([radius * np.cos(ang), radius * np.sin(ang)]))
    dom = None
    if domain_half is not None:
        dom = (-domain_half, domain_half, -domain_half, domain_half)
    return CrossSectionGeometry(
        (Electrode(poly, "signal", current, "wire"),), lambda0, 1.0, (), dom,
        params={"radius": radius, "preset": "round_wire"})


def slab(thickness, height, lambda0=50e-9, gap=None, current=1.0):
    """Wide superconducting slab with a return slab (1D screening problem).

    Two slabs of ``thickness`` along x and ``height`` along z face each other
    across ``gap``; with height much larger than the gap the field between
    them is uniform and tangential to the inner faces.
    """
    gap = gap if gap is not None else 0.2 * height
    sig = rect(-0.5 * gap - thickness, -0.5 * gap, -0.5 * height, 0.5 * height)
    ret = rect(0.5 * gap, 0.5 * gap + thickness, -0.5 * height, 0.5 * height)
    return CrossSectionGeometry(
        (Electrode(sig, "signal", current, "slab"),
         Electrode(ret, "ground", None, "return")),
        lambda0, 1.0, (),
        params={"thickness": thickness, "height": height, "gap": gap, "preset": "slab"})


def point_in_any(polys, x, z):
    """Vectorised containment (boundary counts as inside)."""
    x = np.asarray(x, float)
    z = np.asarray(z, float)
    out = np.zeros(np.broadcast(x, z).shape, bool)
    for p in polys:
        out |= shapely.intersects_xy(p, x, z)
    return out


def _chip_film(x0, x1, half, t, top):
    if top:
        return rect(x0, x1, half - t, half)
    return rect(-x1, -x0, -half, -half + t)


def trap3d_cross_section(gap=100e-6, t=1.2e-6, rf_width=50e-6, rf_dc_gap=5e-6,
                         rf_mw_distance=80e-6, dc_width=5e-6, mw_width=20e-6,
                         ground_gap=5e-6, ground_width=300e-6, substrate_depth=300e-6,
                         lambda0=50e-9, eps_substrate=11.9, v_rf=None, v_inner=None,
                         center_cell=1e-6):
    """Radial cross-section of the flip-chip 3D trap at the ion.

    Each chip face carries, left to right, a ground plane, the microwave
    (MW) conductor, an optical window of width ``rf_mw_distance`` centred on
    the ion, the RF electrode, the inner DC electrode and a second ground
    plane.  The bottom chip is the point inversion of the top chip, so RF,
    DC and MW conductors sit on diagonals and the RF null is at the origin.
    Films hang from the substrate faces at z = +-gap/2 into the gap and the
    substrate is etched through above and below the window.

    MW electrodes are held at 0 V in electrostatic solves (they are DC
    grounded through their inductors).
    """
    if min(gap, t, rf_width, dc_width, mw_width, rf_mw_distance) <= 0 or t >= 0.5 * gap:
        raise InvalidGeometryError("trap dimensions must be positive and t < gap/2")
    half = 0.5 * gap
    x_rf = 0.5 * rf_mw_distance
    rf = (x_rf, x_rf + rf_width)
    dc = (rf[1] + rf_dc_gap, rf[1] + rf_dc_gap + dc_width)
    mw = (-x_rf - mw_width, -x_rf)
    g_right = (dc[1] + ground_gap, dc[1] + ground_gap + ground_width)
    g_left = (mw[0] - ground_gap - ground_width, mw[0] - ground_gap)
    electrodes = []
    for side in ("top", "bottom"):
        top = side == "top"
        electrodes += [
            Electrode(_chip_film(*rf, half, t, top), "rf", v_rf, f"rf_{side}"),
            Electrode(_chip_film(*dc, half, t, top), "dc", v_inner, f"inner_{side}"),
            Electrode(_chip_film(*mw, half, t, top), "mw", 0.0, f"mw_{side}"),
            Electrode(_chip_film(*g_left, half, t, top), "ground", 0.0, f"ground_left_{side}"),
            Electrode(_chip_film(*g_right, half, t, top), "ground", 0.0, f"ground_right_{side}"),
        ]
    subs = []
    for top in (True, False):
        for a, b in ((g_left[0], mw[1]), (rf[0], g_right[1])):
            if top:
                subs.append(rect(a, b, half, half + substrate_depth))
            else:
                subs.append(rect(-b, -a, -half - substrate_depth, -half))
    params = dict(gap=gap, t=t, rf_width=rf_width, rf_dc_gap=rf_dc_gap,
                  rf_mw_distance=rf_mw_distance, dc_width=dc_width, mw_width=mw_width,
                  preset="trap3d")
    return CrossSectionGeometry(tuple(electrodes), lambda0, eps_substrate, tuple(subs),
                                refine_points=((0.0, 0.0, center_cell),), params=params)


def trap3d_microwave_cross_section(gap=100e-6, t=1.2e-6, rf_mw_distance=80e-6,
                                   mw_width=20e-6, lambda0=50e-9, current=1.0,
                                   center_cell=1e-6):
    """Cut through the two microwave inductor legs of the 3D trap.

    The MW conductors occupy the same diagonal positions as in
    :func:`trap3d_cross_section` and carry co-directional currents, which
    is the anti-Helmholtz-like mode seen in this plane: the fields cancel at
    the origin and leave a quadrupole gradient.  Other electrodes lie at a
    different position along the trap axis and are omitted.
    """
    half = 0.5 * gap
    x0 = 0.5 * rf_mw_distance
    mw = (-x0 - mw_width, -x0)
    electrodes = tuple(
        Electrode(_chip_film(*mw, half, t, side == "top"), "mw", current, f"mw_{side}")
        for side in ("top", "bottom"))
    params = dict(gap=gap, t=t, rf_mw_distance=rf_mw_distance, mw_width=mw_width,
                  preset="trap3d_microwave")
    return CrossSectionGeometry(electrodes, lambda0, 1.0, (),
                                refine_points=((0.0, 0.0, center_cell),), params=params)
