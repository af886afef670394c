"""Analytic magnetic-field models and field-line tracing.

Coordinates are (R, Z, zeta) with zeta the fast/periodic direction.  Field
lines advance monotonically in zeta (the zeta component of B never
vanishes), so they are parameterized by zeta and projected onto (R, Z):

    dR/dzeta = B_R / B_zeta,   dZ/dzeta = B_Z / B_zeta.

The divertor model is B = B0 zeta_hat + zeta_hat x grad(A) with flux
function A(R, Z) = (R-1)^2 + Z(Z^2-1); its contours are the projected
field lines and an X-point sits at (1, -1/sqrt(3)).  The orientation is
fixed so that (B_R, B_Z) = (dA/dZ, -dA/dR)/B0: A is conserved along field
lines and a line started at (0.36, -1.0) moves up-right into the domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

X_POINT = (1.0, -1.0 / np.sqrt(3.0))


@dataclass(frozen=True)
class StraightField:
    """Uniform field B = B_Z Z_hat + B_zeta zeta_hat (optionally a B_R)."""

    bz: float = 1.0
    bzeta: float = 1.0
    br: float = 0.0

    def __post_init__(self):
        if self.bzeta == 0.0:
            raise ValueError("B_zeta must be nonzero")

    def slope(self, r, z):
        """(dR/dzeta, dZ/dzeta), broadcast over the inputs."""
        shape = np.broadcast(np.asarray(r), np.asarray(z)).shape
        return (np.full(shape, self.br / self.bzeta),
                np.full(shape, self.bz / self.bzeta))

    def slope_accel(self, r, z):
        """(f . grad) f, the zeta-acceleration of the projected line."""
        shape = np.broadcast(np.asarray(r), np.asarray(z)).shape
        z0 = np.zeros(shape)
        return z0, z0.copy()


@dataclass(frozen=True)
class DivertorField:
    """Diverted-tokamak model field in the large-aspect-ratio limit."""

    b0: float = 1.0

    def __post_init__(self):
        if self.b0 == 0.0:
            raise ValueError("B0 must be nonzero")

    def flux(self, r, z):
        return (r - 1.0) ** 2 + z * (z * z - 1.0)

    def grad_flux(self, r, z):
        return 2.0 * (r - 1.0), 3.0 * z * z - 1.0

    def slope(self, r, z):
        ar, az = self.grad_flux(r, z)
        return az / self.b0, -ar / self.b0

    def slope_accel(self, r, z):
        # f = (A_Z, -A_R)/B0; (f.grad) f with A_RR = 2, A_ZZ = 6Z, A_RZ = 0.
        fr, fz = self.slope(r, z)
        dfr_dz = 6.0 * z / self.b0          # d(A_Z)/dZ / B0
        dfz_dr = -2.0 / self.b0             # d(-A_R)/dR / B0
        return fz * dfr_dz, fr * dfz_dr


def field_from_config(kind, **params):
    if kind == "straight":
        return StraightField(**params)
    if kind == "divertor":
        return DivertorField(**params)
    raise ValueError(f"unknown field model {kind!r}")


def rk4_step_count(span, tol):
    """Fixed-step count giving per-line RK4 error below ``tol`` for the
    smooth model fields (assumes a generous bound on the 4th derivative)."""
    span = abs(float(span))
    if span == 0.0:
        return 1
    h = (max(tol, 1e-14) / 100.0) ** 0.25
    return max(4, int(np.ceil(span / h)))


@dataclass
class TraceResult:
    rz: np.ndarray        # (..., 2) final positions
    exited: np.ndarray    # bool mask: left the bounding box and was frozen
    exit_rz: np.ndarray   # positions at the step where they left


def trace_field_line(field, start, zeta_start, zeta_end, *, tol=1e-10,
                     box=None, n_steps=None, record=None):
    """Integrate projected field lines from zeta_start to zeta_end.

    ``start`` is an (..., 2) array of (R, Z) seeds.  Classical RK4 with a
    fixed step; trajectories leaving ``box`` (r0, r1, z0, z1) are frozen at
    their last in-box position and flagged.  ``record`` may be a list of
    intermediate zeta stops (monotone toward zeta_end); positions at each
    stop are returned instead of the single endpoint.
    """
    start = np.asarray(start, dtype=float)
    r = start[..., 0].copy()
    z = start[..., 1].copy()
    span = zeta_end - zeta_start
    stops = [zeta_end] if record is None else list(record)
    if n_steps is None:
        n_steps = rk4_step_count(span, tol)
    alive = np.ones(r.shape, dtype=bool)
    exit_rz = np.stack([r, z], axis=-1)

    def in_box(rr, zz):
        if box is None:
            return np.ones(rr.shape, dtype=bool)
        r0, r1, z0, z1 = box
        return (rr >= r0) & (rr <= r1) & (zz >= z0) & (zz <= z1)

    out = []
    zeta = zeta_start
    for stop in stops:
        seg = stop - zeta
        n = max(1, int(np.ceil(abs(seg) / abs(span) * n_steps))) if span != 0 else 1
        h = seg / n
        for _ in range(n):
            kr1, kz1 = field.slope(r, z)
            kr2, kz2 = field.slope(r + 0.5 * h * kr1, z + 0.5 * h * kz1)
            kr3, kz3 = field.slope(r + 0.5 * h * kr2, z + 0.5 * h * kz2)
            kr4, kz4 = field.slope(r + h * kr3, z + h * kz3)
            rn = r + (h / 6.0) * (kr1 + 2.0 * kr2 + 2.0 * kr3 + kr4)
            zn = z + (h / 6.0) * (kz1 + 2.0 * kz2 + 2.0 * kz3 + kz4)
            ok = in_box(rn, zn) & alive
            newly_out = alive & ~ok
            if np.any(newly_out):
                exit_rz[newly_out, 0] = rn[newly_out]
                exit_rz[newly_out, 1] = zn[newly_out]
            r = np.where(ok, rn, r)
            z = np.where(ok, zn, z)
            alive = ok
        zeta = stop
        out.append(np.stack([r, z], axis=-1))
    rz = out[-1] if record is None else np.stack(out, axis=0)
    return TraceResult(rz=rz, exited=~alive, exit_rz=exit_rz)


def trace_variable_span(field, r, z, spans, *, tol=1e-10, box=None):
    """RK4 where each seed advances over its own zeta span.

    Used when evaluating the exact mapping at scattered points whose
    contributing planes sit at different distances.  Returns (r, z) end
    positions; out-of-box points freeze like in ``trace_field_line``.
    """
    r = np.array(r, dtype=float, copy=True)
    z = np.array(z, dtype=float, copy=True)
    spans = np.asarray(spans, dtype=float)
    biggest = float(np.max(np.abs(spans))) if spans.size else 0.0
    n = rk4_step_count(biggest, tol)
    h = spans / n
    alive = np.ones(r.shape, dtype=bool)
    for _ in range(n):
        kr1, kz1 = field.slope(r, z)
        kr2, kz2 = field.slope(r + 0.5 * h * kr1, z + 0.5 * h * kz1)
        kr3, kz3 = field.slope(r + 0.5 * h * kr2, z + 0.5 * h * kz2)
        kr4, kz4 = field.slope(r + h * kr3, z + h * kz3)
        rn = r + (h / 6.0) * (kr1 + 2.0 * kr2 + 2.0 * kr3 + kr4)
        zn = z + (h / 6.0) * (kz1 + 2.0 * kz2 + 2.0 * kz3 + kz4)
        if box is None:
            ok = alive
        else:
            r0, r1, z0, z1 = box
            ok = alive & (rn >= r0) & (rn <= r1) & (zn >= z0) & (zn <= z1)
        r = np.where(ok, rn, r)
        z = np.where(ok, zn, z)
        alive = ok
    return r, z
