"""Quadrature grids for the Galerkin integrals.

Basis supports from different planes overlap irregularly under a generic
mapping, so Gauss rules lose their advantage; the integrals use evenly
spaced cell-centered points (midpoint rule) on a grid refined relative to
the node spacing, ten times finer by default.  Points are never placed on
cell boundaries, so clamped domain edges and spline knots are avoided.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadratureGrid:
    refine_r: int = 10
    refine_z: int = 10
    refine_zeta: int = 10

    def __post_init__(self):
        if min(self.refine_r, self.refine_z, self.refine_zeta) < 1:
            raise ValueError("refinement factors must be >= 1")

    @classmethod
    def uniform(cls, refine=10):
        return cls(refine, refine, refine)

    @staticmethod
    def axis_points(spline, refine):
        """Cell-centered points and the common weight along one axis."""
        n = spline.n_cells * refine
        step = spline.length / n
        pts = spline.origin + (np.arange(n) + 0.5) * step
        return pts, step

    def plane_points(self, rspline, zspline):
        """Flattened (R, Z) quadrature points and the per-point area."""
        r, wr = self.axis_points(rspline, self.refine_r)
        z, wz = self.axis_points(zspline, self.refine_z)
        rr, zz = np.meshgrid(r, z, indexing="ij")
        return rr.ravel(), zz.ravel(), wr * wz

    def zeta_fractions(self):
        """Cell-fraction offsets of the zeta quadrature points."""
        q = self.refine_zeta
        return (np.arange(q) + 0.5) / q
