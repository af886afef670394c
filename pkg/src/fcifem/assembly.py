"""Galerkin assembly of the weak forms.

Basis supports from neighbouring planes overlap irregularly, so there is
no element structure to exploit; integrals are plain sums over the
refined cell-centered quadrature grid.

The fast path below reorganizes that sum.  Both model fields are
independent of zeta, so the mapped 2D factor of a basis function depends
on the quadrature point's zeta only through the offset ``delta`` to the
contributing plane, and the offsets repeat with the plane spacing.  The
assembled operator is therefore block-circulant over planes:

    A = sum_s  C_s  (x)  T_s

with C_s the periodic plane-shift matrix and T_s accumulated from a fixed
set of 2D quadrature jobs (one per zeta-fraction and plane-offset pair),
independent of the number of planes.  Each job reduces to products of
sparse point-by-dof matrices, evaluated chunk-wise over the plane grid.

``assemble_*_reference`` recomputes the same sums point-by-point through
the generic evaluation path; the two must agree to round-off.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .blending import BlendedSpace
from .fields import trace_field_line
from .quadrature import QuadratureGrid
from .space import FcifemSpace

_STIFF_WHICH = ("v", "vr", "vz", "vd")


@dataclass
class AnalyticSource:
    """Charge density given in closed form."""

    rho: Callable


@dataclass
class FilamentSource:
    """Signed field-line delta filaments, sampled along zeta.

    ``curves`` holds (points, sign) pairs with points of shape (L, 3);
    ``dzeta`` is the line-quadrature weight of each sample.
    """

    curves: list
    dzeta: float


def make_filament_source(field, start, zeta_period, n_samples, domain):
    """The §-style filament pair: a field line traced from ``start`` with
    charge +1 and the same curve shifted half a period in zeta with -1."""
    start = np.asarray(start, dtype=float)
    zeta0 = float(start[2])
    zl = zeta0 + zeta_period * np.arange(n_samples) / n_samples
    stops = list(zl[1:]) + [zeta0 + zeta_period]
    r0, r1, z0, z1 = domain
    tr = trace_field_line(field, start[None, :2], zeta0, stops[-1],
                          box=domain, record=stops)
    if np.any(tr.exited):
        raise ValueError("filament field line leaves the domain within one period")
    rz = np.concatenate([start[None, :2], tr.rz[:-1, 0, :]], axis=0)
    base = np.column_stack([rz, zl])
    partner = base.copy()
    partner[:, 2] = zeta0 + (zl - zeta0 + 0.5 * zeta_period) % zeta_period
    return FilamentSource(curves=[(base, 1.0), (partner, -1.0)],
                          dzeta=zeta_period / n_samples)


def _zero_like(n, m):
    return sp.csr_matrix((n, m))


class _SplineGroup:
    """Mapped-spline contribution of a (possibly blended) space."""

    def __init__(self, space, blend=None):
        self.space = space
        self.blend = blend
        self.zeta_spline = space.zetaspline
        self.delta_dependent = True

    def prepare(self, r, z, deltas):
        prep = {"q": self.space.mapping.plane_cache(r, z, deltas)}
        if self.blend is not None:
            b, br, bz = self.blend.ramp(r, z, derivs=True)
            prep["b"] = (b[:, None], br[:, None], bz[:, None])
        return prep

    def matrices(self, prep, delta, with_grads):
        which = _STIFF_WHICH if with_grads else ("v",)
        space = self.space
        cols, data = space.plane_blocks(prep["q"][delta], which=which)
        if self.blend is not None:
            b, br, bz = prep["b"]
            om = 1.0 - b
            if with_grads:
                data["vr"] = om * data["vr"] - br * data["v"]
                data["vz"] = om * data["vz"] - bz * data["v"]
                data["vd"] = om * data["vd"]
            data["v"] = om * data["v"]
        out = {"v": space.blocks_to_csr(cols, data["v"])}
        if with_grads:
            out["vd"] = space.blocks_to_csr(cols, data["vd"])
            out["big"] = space.blocks_to_csr(
                cols, [data["vr"], data["vz"], data["vd"]])
        return out


class _FemGroup:
    """Conforming boundary-layer contribution (identity-mapped hats)."""

    def __init__(self, blend):
        self.blend = blend
        self.zeta_spline = blend.fem.zetaspline
        self.delta_dependent = False

    def prepare(self, r, z, deltas):
        fem = self.blend.fem
        q = fem.mapping.displacement(r, z, 0.0, derivs=True)
        b, br, bz = self.blend.ramp(r, z, derivs=True)
        b, br, bz = b[:, None], br[:, None], bz[:, None]
        P = self.blend._plane_proj
        cols, data = fem.plane_blocks(q, which=_STIFF_WHICH)
        n = r.size
        v = fem.blocks_to_csr(cols, b * data["v"]) @ P
        v.eliminate_zeros()
        vr = fem.blocks_to_csr(cols, b * data["vr"] + br * data["v"]) @ P
        vz = fem.blocks_to_csr(cols, b * data["vz"] + bz * data["v"]) @ P
        vd = _zero_like(n, P.shape[1])
        big = sp.vstack([vr.tocsr(), vz.tocsr(), vd]).tocsr()
        big.eliminate_zeros()
        return {"v": v, "vd": vd, "big": big}

    def matrices(self, prep, delta, with_grads):
        return prep


def _groups_for(space_like):
    if isinstance(space_like, BlendedSpace):
        return (space_like.fci,
                [_SplineGroup(space_like.fci, blend=space_like),
                 _FemGroup(space_like)])
    return space_like, [_SplineGroup(space_like)]


def _zeta_table(groups, quad, zspline):
    """Per zeta-fraction: plane offsets and basis weights per group."""
    table = []
    for f in quad.zeta_fractions():
        x = np.array([zspline.origin + f * zspline.spacing])
        entry = []
        for g in groups:
            first, w, dw = g.zeta_spline.basis_rows(x)
            offs = first[0] + np.arange(g.zeta_spline.order + 1)
            entry.append((offs, w[0], dw[0]))
        table.append((f, entry))
    return table


def _chunks(n, size):
    for lo in range(0, n, size):
        yield slice(lo, min(lo + size, n))


def assemble_operator(space_like, quad, kind="stiffness", *, threads=1,
                      chunk=131_072):
    """Stiffness (grad-grad) or mass (Gram) matrix under the midpoint
    quadrature, over the full dof set (no boundary elimination)."""
    if kind not in ("stiffness", "mass"):
        raise ValueError(f"unknown operator kind {kind!r}")
    space, groups = _groups_for(space_like)
    if not space.mapping.autonomous:
        raise ValueError("plane-factored assembly needs a zeta-independent "
                         "(autonomous) mapping")
    zs = space.zetaspline
    with_grads = kind == "stiffness"
    r_all, z_all, w2 = quad.plane_points(space.rspline, space.zspline)
    wz = zs.spacing / quad.refine_zeta
    table = _zeta_table(groups, quad, zs)
    n2 = space.n_plane
    nzeta = space.n_zeta

    def delta_of(f, o):
        return (o - f) * zs.spacing

    def f_job(args):
        f, entry, preps = args
        mats = []
        for gi, (offs, wv, dwv) in enumerate(entry):
            g = groups[gi]
            for a, o in enumerate(offs):
                d = delta_of(f, int(o)) if g.delta_dependent else None
                m = g.matrices(preps[gi], d, with_grads)
                mats.append((int(o), m, wv[a], dwv[a]))
        for _, m, _, _ in mats:
            if "vT" not in m:  # delta-independent groups share one dict
                m["vT"] = m["v"].T.tocsr()
                if with_grads:
                    m["bigT"] = m["big"].T.tocsr()
                    m["vdT"] = m["vd"].T.tocsr() if m["vd"].nnz else None
        local = {}

        def acc(s, p):
            local[s] = local.get(s, 0) + p

        # (i, j) and (j, i) contributions are exact transposes; compute the
        # upper triangle of the pair set only
        for i, (o, m, w, dw) in enumerate(mats):
            for j in range(i, len(mats)):
                o2, m2, w2_, dw2 = mats[j]
                s = o2 - o
                if kind == "mass":
                    prod = (m["vT"] @ m2["v"]) * (w * w2_)
                else:
                    prod = (m["bigT"] @ m2["big"]) * (w * w2_)
                    prod = prod + (m["vT"] @ m2["v"]) * (dw * dw2)
                    if m2["vd"].nnz:
                        prod = prod - (m["vT"] @ m2["vd"]) * (dw * w2_)
                    if m["vdT"] is not None:
                        prod = prod - (m["vdT"] @ m2["v"]) * (w * dw2)
                acc(s, prod)
                if j > i:
                    acc(-s, prod.T.tocsr())
        return local

    T = {}
    for sl in _chunks(r_all.size, chunk):
        r, z = r_all[sl], z_all[sl]
        preps = []
        for gi, g in enumerate(groups):
            if g.delta_dependent:
                deltas = sorted({delta_of(f, int(o))
                                 for f, entry in table
                                 for o in entry[gi][0]})
                preps.append(g.prepare(r, z, deltas))
            else:
                preps.append(g.prepare(r, z, None))
        jobs = [(f, entry, preps) for f, entry in table]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                results = list(ex.map(f_job, jobs))
        else:
            results = [f_job(j) for j in jobs]
        for local in results:
            for s, m in local.items():
                T[s] = T.get(s, 0) + m

    n = nzeta * n2
    A = sp.csr_matrix((n, n))
    for s, M in sorted(T.items()):
        C = sp.coo_matrix(
            (np.ones(nzeta), (np.arange(nzeta), (np.arange(nzeta) + s) % nzeta)),
            shape=(nzeta, nzeta)).tocsr()
        A = A + sp.kron(C, M, format="csr")
    A = (A * (w2 * wz)).tocsr()
    A.eliminate_zeros()
    return A


def assemble_laplacian(space_like, quad, **kw):
    """Stiffness matrix of the weak Laplacian, int grad(psi).grad(phi)."""
    return assemble_operator(space_like, quad, "stiffness", **kw)


def assemble_mass(space_like, quad, **kw):
    """Gram matrix int psi_a psi_b (symmetric positive definite)."""
    return assemble_operator(space_like, quad, "mass", **kw)


def assemble_rhs(space_like, quad, source, *, chunk=262_144):
    """Load vector b_a = -sum_q w_q psi_a(x_q) rho(x_q) (weak-form sign).

    Filament sources integrate along each curve instead, with the same
    sign convention: b_a = -sum sign * dzeta * psi_a(x_l).
    """
    if isinstance(source, FilamentSource):
        return _assemble_rhs_filament(space_like, source)
    space, groups = _groups_for(space_like)
    zs = space.zetaspline
    r_all, z_all, w2 = quad.plane_points(space.rspline, space.zspline)
    wz = zs.spacing / quad.refine_zeta
    table = _zeta_table(groups, quad, zs)
    n2 = space.n_plane
    nzeta = space.n_zeta
    b = np.zeros(nzeta * n2)
    for sl in _chunks(r_all.size, chunk):
        r, z = r_all[sl], z_all[sl]
        for f, entry in table:
            mats = []
            for gi, g in enumerate(groups):
                offs, wv, dwv = entry[gi]
                if g.delta_dependent:
                    deltas = [(int(o) - f) * zs.spacing for o in offs]
                    prep = g.prepare(r, z, deltas)
                else:
                    prep = g.prepare(r, z, None)
                for a, o in enumerate(offs):
                    d = (int(o) - f) * zs.spacing if g.delta_dependent else None
                    m = g.matrices(prep, d, False)
                    mats.append((int(o), m["v"], wv[a]))
            for mi in range(nzeta):
                zeta_q = zs.origin + (mi + f) * zs.spacing
                rho = np.asarray(source.rho(r, z, np.full_like(r, zeta_q)))
                for o, v, w in mats:
                    k = (mi + o) % nzeta
                    b[k * n2:(k + 1) * n2] -= w * (v.T @ rho)
    return b * (w2 * wz)


def _assemble_rhs_filament(space_like, source):
    b = np.zeros(space_like.dof_count)
    for pts, sign in source.curves:
        V = space_like.basis_scatter(pts)
        b -= sign * source.dzeta * np.asarray(V.sum(axis=0)).ravel()
    return b


# -- reference (point-loop) path ---------------------------------------

def _full_quad_points(space, quad):
    r, z, w2 = quad.plane_points(space.rspline, space.zspline)
    zq, wz = QuadratureGrid.axis_points(space.zetaspline, quad.refine_zeta)
    pts = np.column_stack([
        np.repeat(r[None, :], zq.size, 0).ravel(),
        np.repeat(z[None, :], zq.size, 0).ravel(),
        np.repeat(zq, r.size),
    ])
    return pts, w2 * wz


def assemble_laplacian_reference(space_like, quad):
    """Direct per-point assembly via the generic evaluation machinery.

    Builds the full 3D quadrature set in memory: small problems only."""
    space = space_like.fci if isinstance(space_like, BlendedSpace) else space_like
    pts, w = _full_quad_points(space, quad)
    _, VR, VZ, VZETA = space_like.basis_scatter(pts, derivs=True, check=False)
    A = (VR.T @ VR + VZ.T @ VZ + VZETA.T @ VZETA) * w
    return A.tocsr()


def assemble_mass_reference(space_like, quad):
    space = space_like.fci if isinstance(space_like, BlendedSpace) else space_like
    pts, w = _full_quad_points(space, quad)
    V = space_like.basis_scatter(pts, check=False)
    return ((V.T @ V) * w).tocsr()


def assemble_rhs_reference(space_like, quad, source):
    space = space_like.fci if isinstance(space_like, BlendedSpace) else space_like
    pts, w = _full_quad_points(space, quad)
    V = space_like.basis_scatter(pts, check=False)
    rho = np.asarray(source.rho(pts[:, 0], pts[:, 1], pts[:, 2]))
    return -w * (V.T @ rho)


# -- diagnostics --------------------------------------------------------

def matrix_stats(a):
    """Mean nonzeros per row and the (natural-order) bandwidth."""
    a = a.tocsr()
    a.eliminate_zeros()
    coo = a.tocoo()
    bw = int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0
    return {"n": a.shape[0], "nnz": int(a.nnz),
            "mean_nnz_per_row": a.nnz / a.shape[0], "bandwidth": bw}


def export_system(matrix, rhs, directory, stem="system"):
    """Matrix Market matrix dump plus a CSV right-hand side."""
    from pathlib import Path

    import scipy.io

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    scipy.io.mmwrite(str(d / f"{stem}.mtx"), matrix.tocoo())
    np.savetxt(d / f"{stem}_rhs.csv", np.asarray(rhs), delimiter=",")
    return d / f"{stem}.mtx", d / f"{stem}_rhs.csv"
