"""Field-aligned, partially mesh-free B-spline finite elements.

Scalar fields are tensor B-splines whose in-plane arguments are composed
with a field-line mapping, so coarse grids along the periodic direction
still resolve structures aligned with a curved magnetic field.
"""

from .assembly import (AnalyticSource, FilamentSource, assemble_laplacian,
                       assemble_mass, assemble_rhs, make_filament_source)
from .blending import BlendedSpace
from .fields import DivertorField, StraightField, trace_field_line
from .mapping import (ExactMapping, IdentityMapping, StraightMapping,
                      TaylorMapping, build_taylor_mapping,
                      mapping_error_report)
from .quadrature import QuadratureGrid
from .solver import (fourier_oracle_2d, reorder_rcm, solve_cg,
                     solve_direct_banded)
from .space import FcifemSpace
from .splines import DomainError, Spline1D

__version__ = "0.1.0"
