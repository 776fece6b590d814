"""Immutable field samples on a rectilinear mesh."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..errors import FieldKindError
from .mesh import Mesh

KINDS = {"magnetic": "T", "electric": "V/m", "potential": "V", "energy": "J"}


@dataclass(frozen=True, eq=False)
class FieldMap:
    """Node samples of a field.

    ``values`` has shape (nx, nz) for scalar kinds (potential, energy) and
    (nx, nz, 2) for vector kinds, the last axis holding (x, z) components.
    ``aux`` keeps solver by-products (the vector potential for magnetic maps).
    """

    mesh: Mesh
    kind: str
    values: np.ndarray
    frequency: float = 0.0
    source: dict = field(default_factory=dict)
    residual: float = 0.0
    aux: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        nx, nz = self.mesh.shape
        expect = (nx, nz) if self.is_scalar else (nx, nz, 2)
        if self.values.shape != expect:
            raise ValueError(f"values shape {self.values.shape} != {expect}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite field samples")
        self.values.setflags(write=False)

    @property
    def is_scalar(self):
        return self.kind in ("potential", "energy")

    @property
    def units(self):
        return KINDS[self.kind]

    def require(self, *kinds):
        if self.kind not in kinds:
            raise FieldKindError(f"expected a {'/'.join(kinds)} map, got {self.kind}")

    def magnitude(self):
        if self.is_scalar:
            return np.abs(self.values)
        return np.sqrt(np.sum(np.abs(self.values) ** 2, axis=-1))

    def replace(self, values, kind=None, **source):
        src = dict(self.source)
        src.update(source)
        return FieldMap(self.mesh, kind or self.kind, np.asarray(values), self.frequency,
                        src, self.residual)

    def scaled(self, factor):
        return self.replace(self.values * factor)

    def interpolator(self, component=None):
        data = self.values if component is None else self.values[..., component]
        return RegularGridInterpolator((self.mesh.x, self.mesh.z), data,
                                       method="linear", bounds_error=True)

    def sample(self, px, pz):
        """Bilinear interpolation at points; vector maps return (..., 2)."""
        pts = np.column_stack([np.ravel(px), np.ravel(pz)])
        shape = np.shape(px)
        if self.is_scalar:
            return self.interpolator()(pts).reshape(shape)
        out = np.stack([self.interpolator(c)(pts) for c in (0, 1)], axis=-1)
        return out.reshape(shape + (2,))

    def gradient(self):
        """Negative nodal gradient of a potential map as an electric map."""
        self.require("potential")
        gx, gz = np.gradient(np.real(self.values), self.mesh.x, self.mesh.z, edge_order=2)
        return FieldMap(self.mesh, "electric", -np.stack([gx, gz], axis=-1), self.frequency,
                        dict(self.source), self.residual)
