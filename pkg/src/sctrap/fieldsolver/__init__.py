"""2D cross-section field solvers (London magnetoquasistatics, electrostatics)."""
from .fieldmap import FieldMap
from .geometry import (CrossSectionGeometry, Electrode, coplanar_waveguide, rect, round_wire,
                       slab, trap3d_cross_section, trap3d_microwave_cross_section)
from .io import write_fieldmap
from .mesh import Mesh, build_mesh
from .probes import ampere_loop_integral, corner_field, field_gradient_at, unit
from .solvers import solve_electrostatic, solve_magnetoquasistatic

__all__ = [
    "CrossSectionGeometry", "Electrode", "FieldMap", "Mesh", "ampere_loop_integral",
    "build_mesh", "coplanar_waveguide", "corner_field", "field_gradient_at", "rect",
    "round_wire", "slab", "solve_electrostatic", "solve_magnetoquasistatic",
    "trap3d_cross_section", "trap3d_microwave_cross_section", "unit", "write_fieldmap",
]
