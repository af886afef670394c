"""Field-line projection mappings Q(x, s).

``Q`` takes a 3D point x = (R, Z, zeta) and a plane coordinate s and
returns the (R, Z) position reached by following the (approximate) field
line through x to the plane zeta = s.  Points on the source plane map to
themselves and the zeta component of the image is s by construction.

All model fields here are independent of zeta, so every mapping reduces
to a displacement form Q(x, s) = q(R, Z, s - zeta); the assembly code
relies on this.  Variants:

* ``IdentityMapping``   -- q = (R, Z); reduces the method to tensor splines.
* ``StraightMapping``   -- uniform field, displacement linear in delta.
* ``TaylorMapping``     -- quadratic-in-delta expansion with the Taylor
  coefficients stored as spline coefficient arrays on the (R, Z) grid.
* ``ExactMapping``      -- RK4 integration of the field-line equation, with
  (R, Z) Jacobians by central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import trace_field_line, trace_variable_span
from .splines import Spline1D


def _as_points(x):
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    return np.atleast_2d(x), squeeze


class Mapping:
    """Base class; concrete mappings implement ``displacement``."""

    autonomous = True

    def displacement(self, r, z, delta, derivs=False):
        """Image (R', Z') of points after advancing ``delta`` in zeta.

        With ``derivs=True`` also returns the (R, Z) Jacobian entries and
        the delta-derivative: (qr, qz, qr_r, qr_z, qz_r, qz_z, qr_d, qz_d).
        """
        raise NotImplementedError

    def map(self, x, s):
        """Q(x, s): project points x = (..., 3) onto the plane zeta = s."""
        pts, squeeze = _as_points(x)
        qr, qz = self.displacement(pts[:, 0], pts[:, 1], s - pts[:, 2])[:2]
        out = np.stack([qr, qz], axis=-1)
        return out[0] if squeeze else out

    def map_images(self, r, z, zeta, zeta_k, derivs=False):
        """Plane images for scattered points with per-point target planes.

        Autonomous mappings reduce to the displacement form; zeta-dependent
        mappings override this instead.
        """
        return self.displacement(r, z, zeta_k - zeta, derivs=derivs)

    def plane_cache(self, r, z, deltas):
        """Displacement data for several deltas at fixed (R, Z) points.

        Returns ``{delta: (qr, qz, qr_r, qr_z, qz_r, qz_z, qr_d, qz_d)}``.
        Subclasses may override to share work between deltas.
        """
        return {d: self.displacement(r, z, d, derivs=True) for d in deltas}


@dataclass
class IdentityMapping(Mapping):
    """No displacement: the plain Cartesian tensor-product spline space."""

    def displacement(self, r, z, delta, derivs=False):
        r = np.asarray(r, float)
        z = np.asarray(z, float)
        if not derivs:
            return r, z
        one = np.ones_like(r)
        zero = np.zeros_like(r)
        return r, z, one, zero, zero, one, zero, zero.copy()


@dataclass
class StraightMapping(Mapping):
    """Uniform-field mapping: displacement linear in delta."""

    slope_r: float = 0.0
    slope_z: float = 1.0

    @classmethod
    def from_field(cls, field):
        fr, fz = field.slope(0.0, 0.0)
        return cls(slope_r=float(fr), slope_z=float(fz))

    def displacement(self, r, z, delta, derivs=False):
        r = np.asarray(r, float)
        z = np.asarray(z, float)
        qr = r + self.slope_r * delta
        qz = z + self.slope_z * delta
        if not derivs:
            return qr, qz
        one = np.ones_like(r)
        zero = np.zeros_like(r)
        return (qr, qz, one, zero, zero, one,
                np.full_like(r, self.slope_r), np.full_like(r, self.slope_z))


class AnalyticMapping(Mapping):
    """Mapping given by an arbitrary closed-form callable.

    ``func(r, z, zeta, s) -> (qr, qz)``; not necessarily autonomous, so
    usable for evaluation (derivatives by central differences) but not for
    the plane-factored assembly path.
    """

    autonomous = False

    def __init__(self, func, fd_step=1e-6):
        self.func = func
        self.fd_step = fd_step

    def map(self, x, s):
        pts, squeeze = _as_points(x)
        qr, qz = self.func(pts[:, 0], pts[:, 1], pts[:, 2], s)
        out = np.stack([np.asarray(qr, float), np.asarray(qz, float)], axis=-1)
        return out[0] if squeeze else out

    def map_images(self, r, z, zeta, zeta_k, derivs=False):
        r = np.asarray(r, float)
        z = np.asarray(z, float)
        qr, qz = (np.asarray(v, float) for v in self.func(r, z, zeta, zeta_k))
        if not derivs:
            return qr, qz
        e = self.fd_step

        def diff(dr, dz, dzeta):
            p = self.func(r + dr, z + dz, zeta + dzeta, zeta_k)
            m = self.func(r - dr, z - dz, zeta - dzeta, zeta_k)
            scale = 2.0 * max(dr, dz, dzeta)
            return ((np.asarray(p[0], float) - np.asarray(m[0], float)) / scale,
                    (np.asarray(p[1], float) - np.asarray(m[1], float)) / scale)

        qr_r, qz_r = diff(e, 0.0, 0.0)
        qr_z, qz_z = diff(0.0, e, 0.0)
        # derivative along the plane offset: d/ds at fixed x equals the
        # negative of the zeta derivative at fixed s for autonomous maps;
        # here we differentiate in zeta and negate to match that slot.
        qr_zeta, qz_zeta = diff(0.0, 0.0, e)
        return (qr, qz, qr_r, qr_z, qz_r, qz_z, -qr_zeta, -qz_zeta)

    def displacement(self, r, z, delta, derivs=False):
        raise NotImplementedError("zeta-dependent mappings have no "
                                  "displacement form")


class ExactMapping(Mapping):
    """Field-line mapping by numerical integration of dRZ/dzeta = f(R, Z).

    Trajectories are integrated inside a bounding box ``margin`` wider than
    the solve domain; once a line leaves that extended box it is frozen
    there (basis contributions of such far-out images vanish anyway).
    (R, Z) Jacobians use central differences with step ``fd_step``.
    """

    def __init__(self, field, domain, *, tol=1e-10, margin=0.2, fd_step=None):
        self.field = field
        self.domain = tuple(float(v) for v in domain)  # (r0, r1, z0, z1)
        self.tol = tol
        r0, r1, z0, z1 = self.domain
        mr = margin * (r1 - r0)
        mz = margin * (z1 - z0)
        self.box = (r0 - mr, r1 + mr, z0 - mz, z1 + mz)
        if fd_step is None:
            fd_step = 1e-5 * min(r1 - r0, z1 - z0)
        self.fd_step = fd_step

    def displacement(self, r, z, delta, derivs=False):
        if np.ndim(delta) == 0:
            out = self.plane_cache(r, z, [float(delta)])[float(delta)]
            return out if derivs else out[:2]
        # per-point spans (scattered evaluation)
        r = np.asarray(r, float)
        z = np.asarray(z, float)
        qr, qz = trace_variable_span(self.field, r, z, delta,
                                     tol=self.tol, box=self.box)
        if not derivs:
            return qr, qz
        e = self.fd_step
        rp = trace_variable_span(self.field, r + e, z, delta, tol=self.tol, box=self.box)
        rm = trace_variable_span(self.field, r - e, z, delta, tol=self.tol, box=self.box)
        zp = trace_variable_span(self.field, r, z + e, delta, tol=self.tol, box=self.box)
        zm = trace_variable_span(self.field, r, z - e, delta, tol=self.tol, box=self.box)
        fr, fz = self.field.slope(qr, qz)
        return (qr, qz,
                (rp[0] - rm[0]) / (2 * e), (zp[0] - zm[0]) / (2 * e),
                (rp[1] - rm[1]) / (2 * e), (zp[1] - zm[1]) / (2 * e),
                fr, fz)

    def _sweep(self, r, z, deltas):
        """Trace one batch of starts through the sorted delta stops."""
        res = {}
        neg = sorted([d for d in deltas if d < 0], reverse=True)
        pos = sorted([d for d in deltas if d > 0])
        start = np.stack(np.broadcast_arrays(np.asarray(r, float),
                                             np.asarray(z, float)), axis=-1)
        if 0.0 in deltas:
            res[0.0] = start.copy()
        for stops in (neg, pos):
            if not stops:
                continue
            tr = trace_field_line(self.field, start, 0.0, stops[-1],
                                  tol=self.tol, box=self.box, record=stops)
            for i, d in enumerate(stops):
                res[d] = tr.rz[i]
        return res

    def plane_cache(self, r, z, deltas):
        deltas = [float(d) for d in deltas]
        e = self.fd_step
        center = self._sweep(r, z, deltas)
        rp = self._sweep(r + e, z, deltas)
        rm = self._sweep(r - e, z, deltas)
        zp = self._sweep(r, z + e, deltas)
        zm = self._sweep(r, z - e, deltas)
        out = {}
        for d in deltas:
            q = center[d]
            jr = (rp[d] - rm[d]) / (2.0 * e)   # d(qr,qz)/dR
            jz = (zp[d] - zm[d]) / (2.0 * e)   # d(qr,qz)/dZ
            fr, fz = self.field.slope(q[..., 0], q[..., 1])
            out[d] = (q[..., 0], q[..., 1], jr[..., 0], jz[..., 0],
                      jr[..., 1], jz[..., 1], fr, fz)
        return out


class TaylorMapping(Mapping):
    """Quadratic-in-delta Taylor expansion of the field-line map.

    The linear coefficient is the field-line slope f = (B_R, B_Z)/B_zeta
    and the quadratic one is (f . grad) f / 2, both evaluated analytically
    at the (R, Z) nodes and stored as coefficients of the same spline
    basis the discretization uses, which keeps the mapping C^1.
    """

    def __init__(self, rspline, zspline, coeff_arrays):
        self.rspline = rspline
        self.zspline = zspline
        # four (n_r, n_z) arrays: a1r, a1z, a2r, a2z
        self.a1r, self.a1z, self.a2r, self.a2z = coeff_arrays

    def _grids(self, r, z, want_derivs):
        rs, zs = self.rspline, self.zspline
        lo_r, hi_r = rs.origin, rs.origin + rs.length
        lo_z, hi_z = zs.origin, zs.origin + zs.length
        # Constant extension just outside the grid: only reached by
        # diagnostics in the extended tracing box, never by quadrature.
        rc = np.clip(np.asarray(r, float), lo_r, hi_r)
        zc = np.clip(np.asarray(z, float), lo_z, hi_z)
        fr, vr, dvr = rs.basis_rows(rc)
        fz, vz, dvz = zs.basis_rows(zc)
        ir = fr[..., None] + np.arange(rs.order + 1)
        iz = fz[..., None] + np.arange(zs.order + 1)
        if rs.boundary == "periodic":
            ir %= rs.n_nodes
        if zs.boundary == "periodic":
            iz %= zs.n_nodes
        vals = {}
        for name, arr in (("a1r", self.a1r), ("a1z", self.a1z),
                          ("a2r", self.a2r), ("a2z", self.a2z)):
            c = arr[ir[..., :, None], iz[..., None, :]]
            vals[name] = np.einsum("...ij,...i,...j->...", c, vr, vz)
            if want_derivs:
                vals[name + "_r"] = np.einsum("...ij,...i,...j->...", c, dvr, vz)
                vals[name + "_z"] = np.einsum("...ij,...i,...j->...", c, vr, dvz)
        return vals

    @staticmethod
    def _poly(r, z, g, delta, derivs):
        d = delta
        qr = r + g["a1r"] * d + g["a2r"] * d * d
        qz = z + g["a1z"] * d + g["a2z"] * d * d
        if not derivs:
            return qr, qz
        qr_r = 1.0 + g["a1r_r"] * d + g["a2r_r"] * d * d
        qr_z = g["a1r_z"] * d + g["a2r_z"] * d * d
        qz_r = g["a1z_r"] * d + g["a2z_r"] * d * d
        qz_z = 1.0 + g["a1z_z"] * d + g["a2z_z"] * d * d
        qr_d = g["a1r"] + 2.0 * g["a2r"] * d
        qz_d = g["a1z"] + 2.0 * g["a2z"] * d
        return qr, qz, qr_r, qr_z, qz_r, qz_z, qr_d, qz_d

    def displacement(self, r, z, delta, derivs=False):
        r = np.asarray(r, float)
        z = np.asarray(z, float)
        g = self._grids(r, z, derivs)
        return self._poly(r, z, g, delta, derivs)

    def plane_cache(self, r, z, deltas):
        # the coefficient-spline evaluation is shared across all deltas
        r = np.asarray(r, float)
        z = np.asarray(z, float)
        g = self._grids(r, z, True)
        return {d: self._poly(r, z, g, d, True) for d in deltas}


def build_taylor_mapping(field, rspline, zspline):
    """Taylor mapping whose coefficients are the exact zeta-derivatives of
    the field-line map at each node of the given (R, Z) spline grid."""
    rpos = rspline.node_positions
    zpos = zspline.node_positions
    rr, zz = np.meshgrid(rpos, zpos, indexing="ij")
    a1r, a1z = field.slope(rr, zz)
    acc_r, acc_z = field.slope_accel(rr, zz)
    return TaylorMapping(rspline, zspline,
                         (np.asarray(a1r, float), np.asarray(a1z, float),
                          0.5 * np.asarray(acc_r, float),
                          0.5 * np.asarray(acc_z, float)))


def mapping_error_report(mapping, exact, seeds, zeta_end, *, domain=None):
    """Final-position (R, Z) error of ``mapping`` against ``exact`` for
    seeds advanced from their own zeta to ``zeta_end``.

    Seeds whose exact trajectory leaves ``domain`` before zeta_end are
    excluded, matching how open field lines hit the wall.
    """
    seeds = np.asarray(seeds, dtype=float)
    if seeds.ndim == 1:
        seeds = seeds[None, :]
    if domain is None and isinstance(exact, ExactMapping):
        domain = exact.domain
    r, z, zeta = seeds[:, 0], seeds[:, 1], seeds[:, 2]
    if isinstance(exact, ExactMapping):
        zeta0 = np.unique(zeta)
        if zeta0.size != 1:
            raise ValueError("seeds must share a starting plane")
        tr = trace_field_line(exact.field, np.stack([r, z], -1),
                              float(zeta0[0]), zeta_end,
                              tol=exact.tol, box=domain)
        exact_rz = tr.rz
        keep = ~tr.exited
    else:
        exact_rz = exact.map(seeds, zeta_end)
        keep = np.ones(len(seeds), dtype=bool)
        if domain is not None:
            r0, r1, z0, z1 = domain
            keep &= ((exact_rz[:, 0] >= r0) & (exact_rz[:, 0] <= r1)
                     & (exact_rz[:, 1] >= z0) & (exact_rz[:, 1] <= z1))
    if not np.any(keep):
        raise ValueError("no seeds survive inside the domain")
    approx_rz = mapping.map(seeds, zeta_end)
    err = np.linalg.norm(approx_rz - exact_rz, axis=-1)
    err = np.where(keep, err, np.nan)
    surv = err[keep]
    return {
        "rms": float(np.sqrt(np.mean(surv ** 2))),
        "max": float(np.max(surv)),
        "per_seed": err,
        "kept": keep,
    }
