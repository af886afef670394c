"""Blended boundary treatment for Dirichlet conditions.

The mapped spline space does not conform to the (R, Z) walls, so a single
cell-width layer of standard first-order FEM (bilinear hats on the same
node positions, hats on the same zeta grid) is blended in:

    phi = B(x) phi_fem + (1 - B(x)) phi_fci

The ramp B is the sum of the hat functions of boundary nodes: with
u(x) = clipped distance to the nearest wall in grid units along one axis,
B = 1 - u_R u_Z.  It equals 1 - x on a band edge away from corners and is
exactly 1 on the wall, so eliminating the boundary-node coefficients
enforces phi = 0 there identically.

Where hat and spline nodes coincide the two representations share one
coefficient, so the blended space has exactly the spline dof count; the
only spline dofs without a hat partner are the quarter-spaced boundary
extras of the clamped quadratic basis.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .mapping import IdentityMapping
from .space import FcifemSpace
from .splines import Spline1D


def _shared_map(spline):
    """FEM node index (0..n_cells) -> spline dof index on one axis."""
    off = -spline._dof_node_offset
    return np.arange(spline.n_cells + 1) + off


class BlendedSpace:
    """FCIFEM space plus conforming boundary layer and ramp function."""

    def __init__(self, space):
        if space.rspline.boundary != "clamped" or space.zspline.boundary != "clamped":
            raise ValueError("blending applies to clamped (R, Z) axes")
        self.fci = space
        rs, zs = space.rspline, space.zspline
        hat_r = Spline1D.clamped(1, rs.spacing, rs.n_cells, rs.origin)
        hat_z = Spline1D.clamped(1, zs.spacing, zs.n_cells, zs.origin)
        hat_zeta = Spline1D.periodic(1, space.zetaspline.spacing,
                                     space.zetaspline.n_cells,
                                     space.zetaspline.origin)
        self.fem = FcifemSpace(hat_r, hat_z, hat_zeta, IdentityMapping())
        map_r = _shared_map(rs)
        map_z = _shared_map(zs)
        # plane-level projection: fem plane dof -> fci plane dof
        fem_cols = (map_r[:, None] * space.n_z + map_z[None, :]).ravel()
        n_femplane = self.fem.n_plane
        self._plane_proj = sp.coo_matrix(
            (np.ones(n_femplane), (np.arange(n_femplane), fem_cols)),
            shape=(n_femplane, space.n_plane)).tocsr()
        self.projection = sp.kron(sp.identity(space.n_zeta, format="csr"),
                                  self._plane_proj, format="csr")

    @property
    def dof_count(self):
        return self.fci.dof_count

    @property
    def domain(self):
        return self.fci.domain

    # -- ramp ----------------------------------------------------------

    def _axis_dist(self, x, spline):
        lo, hi = spline.origin, spline.origin + spline.length
        h = spline.spacing
        d_lo = (np.asarray(x, float) - lo) / h
        d_hi = (hi - np.asarray(x, float)) / h
        u = np.minimum(np.minimum(d_lo, d_hi), 1.0)
        # derivative of u wrt x (zero in the bulk and outside)
        du = np.where(u >= 1.0, 0.0, np.where(d_lo <= d_hi, 1.0, -1.0) / h)
        return u, du

    def ramp(self, r, z, derivs=False):
        ur, dur = self._axis_dist(r, self.fci.rspline)
        uz, duz = self._axis_dist(z, self.fci.zspline)
        b = 1.0 - ur * uz
        if not derivs:
            return b
        return b, -dur * uz, -ur * duz

    # -- dof bookkeeping -------------------------------------------------

    def boundary_mask(self):
        """True for dofs pinned by the homogeneous Dirichlet condition
        (the shared coefficients sitting exactly on the walls)."""
        rs, zs = self.fci.rspline, self.fci.zspline
        r_wall = np.isclose(rs.node_positions, rs.origin) \
            | np.isclose(rs.node_positions, rs.origin + rs.length)
        z_wall = np.isclose(zs.node_positions, zs.origin) \
            | np.isclose(zs.node_positions, zs.origin + zs.length)
        plane = r_wall[:, None] | z_wall[None, :]
        return np.tile(plane.ravel(), self.fci.n_zeta)

    def node_mesh(self):
        return self.fci.node_mesh()

    def interpolate(self, f):
        return self.fci.interpolate(f)

    # -- evaluation ------------------------------------------------------

    def basis_scatter(self, points, derivs=False, check=True):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        fci = self.fci.basis_scatter(pts, derivs=derivs, check=check)
        fem = self.fem.basis_scatter(pts, derivs=derivs, check=False)
        b, br, bz = self.ramp(pts[:, 0], pts[:, 1], derivs=True)
        one_m = (1.0 - b)[:, None]
        bcol = b[:, None]
        P = self.projection
        if not derivs:
            return (fci.multiply(one_m) + (fem @ P).multiply(bcol)).tocsr()
        V0, VR0, VZ0, VZE0 = fci
        F0, FR0, FZ0, FZE0 = (m @ P for m in fem)
        V = V0.multiply(one_m) + F0.multiply(bcol)
        VR = (VR0.multiply(one_m) + V0.multiply(-br[:, None])
              + FR0.multiply(bcol) + F0.multiply(br[:, None]))
        VZ = (VZ0.multiply(one_m) + V0.multiply(-bz[:, None])
              + FZ0.multiply(bcol) + F0.multiply(bz[:, None]))
        VZETA = VZE0.multiply(one_m) + FZE0.multiply(bcol)
        return (V.tocsr(), VR.tocsr(), VZ.tocsr(), VZETA.tocsr())

    def evaluate(self, coeffs, points, chunk=200_000):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(pts.shape[0])
        c = np.asarray(coeffs, float).ravel()
        for lo in range(0, pts.shape[0], chunk):
            sl = slice(lo, min(lo + chunk, pts.shape[0]))
            out[sl] = self.basis_scatter(pts[sl]) @ c
        return out[0] if np.asarray(points).ndim == 1 else out

    def gradient(self, coeffs, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        c = np.asarray(coeffs, float).ravel()
        _, VR, VZ, VZETA = self.basis_scatter(pts, derivs=True)
        g = np.stack([VR @ c, VZ @ c, VZETA @ c], axis=-1)
        return g[0] if np.asarray(points).ndim == 1 else g
