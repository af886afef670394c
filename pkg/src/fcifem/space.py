"""The field-aligned discrete function space.

A scalar field is represented as

    phi(R, Z, zeta) = sum_{i,j,k} c[k,i,j] * B_R(q_R(x, zeta_k) - R_i)
                                   * B_Z(q_Z(x, zeta_k) - Z_j)
                                   * B_zeta(zeta - zeta_k)

where q is the field-line mapping onto plane zeta_k.  Coefficients are
stored flat with plane-major layout: ``dof = (k * n_r + i) * n_z + j``.

The zeta axis is always periodic; a plane index k outside [0, N_zeta)
wraps onto k mod N_zeta while its *unwrapped* position still determines
the mapping argument, which is what lets a single-plane grid represent
functions winding many times around the periodic direction.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .splines import DomainError, Spline1D


class FcifemSpace:
    """Mapped tensor B-spline space on a uniform (R, Z, zeta) node grid."""

    def __init__(self, rspline, zspline, zetaspline, mapping):
        if zetaspline.boundary != "periodic":
            raise ValueError("the zeta axis must be periodic")
        self.rspline = rspline
        self.zspline = zspline
        self.zetaspline = zetaspline
        self.mapping = mapping

    @property
    def n_r(self):
        return self.rspline.n_nodes

    @property
    def n_z(self):
        return self.zspline.n_nodes

    @property
    def n_zeta(self):
        return self.zetaspline.n_nodes

    @property
    def n_plane(self):
        return self.n_r * self.n_z

    @property
    def dof_count(self):
        return self.n_plane * self.n_zeta

    @property
    def domain(self):
        r0 = self.rspline.origin
        z0 = self.zspline.origin
        return (r0, r0 + self.rspline.length, z0, z0 + self.zspline.length)

    @property
    def volume(self):
        return (self.rspline.length * self.zspline.length
                * self.zetaspline.length)

    def node_mesh(self):
        """(R, Z, zeta) positions of every degree of freedom, shaped
        (n_zeta, n_r, n_z)."""
        r = self.rspline.node_positions
        z = self.zspline.node_positions
        zeta = self.zetaspline.node_positions
        kk, rr, zz = np.meshgrid(zeta, r, z, indexing="ij")
        return rr, zz, kk

    def interpolate(self, f):
        """Coefficients set to nodal values c[k,i,j] = f(R_i, Z_j, zeta_k).

        This is the standard smooth-approximant construction, not a true
        interpolant (the basis has no delta property)."""
        rr, zz, kk = self.node_mesh()
        return np.asarray(f(rr, zz, kk), dtype=float).ravel()

    # -- plane-level matrices (assembly and grid evaluation) -----------

    def plane_blocks(self, qdata, which=("v",)):
        """Row-uniform sparse data of mapped 2D basis values at points.

        ``qdata`` is the displacement tuple (qr, qz, qr_r, qr_z, qz_r,
        qz_z, qr_d, qz_d).  ``which`` selects from ``v`` values,
        ``vr``/``vz`` physical R/Z derivatives through the mapping
        Jacobian, ``vd`` the derivative along the plane offset.

        Returns ``(cols, data)`` where every point owns exactly
        (order_r+1)(order_z+1) consecutive entries; entries of basis
        functions outside a clamped family carry value zero against a
        clipped valid column, so contributions fade smoothly as field-line
        images leave the box.  This uniform layout converts to CSR without
        sorting (see ``blocks_to_csr``).
        """
        qr, qz, qr_r, qr_z, qz_r, qz_z, qr_d, qz_d = qdata
        rs, zs = self.rspline, self.zspline
        fr, vr, dvr = rs.basis_rows(qr, check=False)
        fz, vz, dvz = zs.basis_rows(qz, check=False)
        pr = rs.order + 1
        pz = zs.order + 1
        npts = qr.size
        ir = fr[:, None] + np.arange(pr)
        iz = fz[:, None] + np.arange(pz)
        if rs.boundary == "periodic":
            ir %= self.n_r
        else:
            ok = (ir >= 0) & (ir < self.n_r)
            vr = np.where(ok, vr, 0.0)
            dvr = np.where(ok, dvr, 0.0)
            ir = np.clip(ir, 0, self.n_r - 1)
        if zs.boundary == "periodic":
            iz %= self.n_z
        else:
            ok = (iz >= 0) & (iz < self.n_z)
            vz = np.where(ok, vz, 0.0)
            dvz = np.where(ok, dvz, 0.0)
            iz = np.clip(iz, 0, self.n_z - 1)
        cols = (ir[:, :, None] * self.n_z
                + iz[:, None, :]).reshape(npts, -1).astype(np.int32)
        data = {}
        if "v" in which:
            data["v"] = (vr[:, :, None] * vz[:, None, :]).reshape(npts, -1)
        if "vr" in which:
            data["vr"] = (dvr[:, :, None] * vz[:, None, :] * qr_r[:, None, None]
                          + vr[:, :, None] * dvz[:, None, :]
                          * qz_r[:, None, None]).reshape(npts, -1)
        if "vz" in which:
            data["vz"] = (dvr[:, :, None] * vz[:, None, :] * qr_z[:, None, None]
                          + vr[:, :, None] * dvz[:, None, :]
                          * qz_z[:, None, None]).reshape(npts, -1)
        if "vd" in which:
            data["vd"] = (dvr[:, :, None] * vz[:, None, :] * qr_d[:, None, None]
                          + vr[:, :, None] * dvz[:, None, :]
                          * qz_d[:, None, None]).reshape(npts, -1)
        return cols, data

    def blocks_to_csr(self, cols, data_rows):
        """CSR from one or several stacked row-uniform blocks (no sort)."""
        if not isinstance(data_rows, (list, tuple)):
            data_rows = [data_rows]
        npts, width = cols.shape
        n_rows = npts * len(data_rows)
        indptr = np.arange(n_rows + 1, dtype=np.int64) * width
        indices = np.tile(cols.reshape(-1), len(data_rows))
        payload = np.concatenate([d.reshape(-1) for d in data_rows])
        return sp.csr_matrix((payload, indices, indptr),
                             shape=(n_rows, self.n_plane))

    def plane_matrices(self, qdata, which=("v",)):
        """Sparse (n_points x n_plane) matrices of mapped 2D basis data
        (see ``plane_blocks`` for the entry semantics)."""
        cols, data = self.plane_blocks(qdata, which)
        return {name: self.blocks_to_csr(cols, d) for name, d in data.items()}

    # -- point evaluation ----------------------------------------------

    def _check_points(self, pts):
        r0, r1, z0, z1 = self.domain
        eps = 1e-12 * max(r1 - r0, z1 - z0)
        if (np.any(pts[:, 0] < r0 - eps) or np.any(pts[:, 0] > r1 + eps)
                or np.any(pts[:, 1] < z0 - eps) or np.any(pts[:, 1] > z1 + eps)):
            raise DomainError("evaluation point outside the (R, Z) domain")

    def basis_scatter(self, points, derivs=False, check=True):
        """Sparse (n_points x dof_count) matrix of basis values at
        arbitrary 3D points; with ``derivs`` also the three gradient
        component matrices (through the mapping, chain rule)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if check:
            self._check_points(pts)
        n = pts.shape[0]
        r, z, zeta = pts[:, 0], pts[:, 1], pts[:, 2]
        zs = self.zetaspline
        fk, w, dw = zs.basis_rows(zeta)

        def place(mat, k_dof):
            # expand (n x n_plane) columns into the per-point plane block
            coo = mat.tocoo()
            cols = k_dof[coo.row] * self.n_plane + coo.col
            return sp.coo_matrix((coo.data, (coo.row, cols)),
                                 shape=(n, self.dof_count)).tocsr()

        V = sp.csr_matrix((n, self.dof_count))
        VR = sp.csr_matrix((n, self.dof_count))
        VZ = sp.csr_matrix((n, self.dof_count))
        VZETA = sp.csr_matrix((n, self.dof_count))
        for a in range(zs.order + 1):
            k_img = fk + a
            zeta_k = zs.origin + zs.spacing * k_img
            q = self.mapping.map_images(r, z, zeta, zeta_k, derivs=derivs)
            if not derivs:
                q = tuple(q) + (None,) * 6
            mats = self.plane_matrices(
                q, which=("v", "vr", "vz", "vd") if derivs else ("v",))
            k_dof = k_img % self.n_zeta
            wa = w[:, a][:, None]
            V = V + place(mats["v"].multiply(wa).tocsr(), k_dof)
            if derivs:
                dwa = dw[:, a][:, None]
                VR = VR + place(mats["vr"].multiply(wa).tocsr(), k_dof)
                VZ = VZ + place(mats["vz"].multiply(wa).tocsr(), k_dof)
                gz = mats["v"].multiply(dwa) - mats["vd"].multiply(wa)
                VZETA = VZETA + place(gz.tocsr(), k_dof)
        if derivs:
            return V, VR, VZ, VZETA
        return V

    def evaluate(self, coeffs, points, chunk=200_000):
        """phi at arbitrary points (supports large point sets by chunking)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(pts.shape[0])
        c = np.asarray(coeffs, float).ravel()
        for lo in range(0, pts.shape[0], chunk):
            sl = slice(lo, min(lo + chunk, pts.shape[0]))
            out[sl] = self.basis_scatter(pts[sl]) @ c
        return out[0] if np.asarray(points).ndim == 1 else out

    def gradient(self, coeffs, points):
        """grad(phi) in (R, Z, zeta) components at arbitrary points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        c = np.asarray(coeffs, float).ravel()
        _, VR, VZ, VZETA = self.basis_scatter(pts, derivs=True)
        g = np.stack([VR @ c, VZ @ c, VZETA @ c], axis=-1)
        return g[0] if np.asarray(points).ndim == 1 else g
