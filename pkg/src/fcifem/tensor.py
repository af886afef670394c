"""Tensor-product operators for the unmapped (Cartesian) spline space.

With the identity mapping the method reduces to plain tensor B-splines,
so mass and stiffness matrices factor into Kronecker products of 1D
integrals.  Two quadratures are provided: per-knot-cell Gauss (exact to
machine precision for the piecewise-polynomial integrands, used as the
assembly oracle) and the same cell-centered midpoint rule the mapped
assembly uses (which reproduces the generic path bit-for-bit).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def _axis_quadrature(spline, rule):
    kind, n = rule
    if kind == "midpoint":
        m = spline.n_cells * n
        step = spline.length / m
        x = spline.origin + (np.arange(m) + 0.5) * step
        w = np.full(m, step)
        return x, w
    if kind != "gauss":
        raise ValueError(f"unknown quadrature rule {kind!r}")
    # Gauss points per knot cell: exact for products of splines.
    if spline.boundary == "clamped":
        edges = spline.cell_edges
    else:
        h = spline.spacing
        off = 0.5 * h if spline.order == 2 else 0.0
        edges = spline.origin + off + h * np.arange(spline.n_cells + 1)
    gx, gw = np.polynomial.legendre.leggauss(n)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    w = (half[:, None] * gw[None, :]).ravel()
    return x, w


def operator_1d(spline, kind, rule=("gauss", 4)):
    """1D mass or stiffness matrix of the spline basis under ``rule``."""
    x, w = _axis_quadrature(spline, rule)
    first, vals, dvals = spline.basis_rows(x)
    use = dvals if kind == "stiffness" else vals
    p = spline.order
    n = spline.n_nodes
    idx = first[:, None] + np.arange(p + 1)
    if spline.boundary == "periodic":
        idx = idx % n
    a = np.zeros((n, n))
    for ai in range(p + 1):
        for bi in range(p + 1):
            np.add.at(a, (idx[:, ai], idx[:, bi]),
                      w * use[:, ai] * use[:, bi])
    return sp.csr_matrix(a)


def tensor_operators(rspline, zspline, zetaspline, rule=("gauss", 4)):
    """(mass, stiffness) for the identity-mapped 3D space.

    Dof layout matches the mapped space: plane-major, ``(k*n_r + i)*n_z + j``.
    """
    mr = operator_1d(rspline, "mass", rule)
    mz = operator_1d(zspline, "mass", rule)
    mzeta = operator_1d(zetaspline, "mass", rule)
    sr = operator_1d(rspline, "stiffness", rule)
    szz = operator_1d(zspline, "stiffness", rule)
    szeta = operator_1d(zetaspline, "stiffness", rule)
    plane_m = sp.kron(mr, mz, format="csr")
    mass = sp.kron(mzeta, plane_m, format="csr")
    stiff = (sp.kron(mzeta, sp.kron(sr, mz) + sp.kron(mr, szz), format="csr")
             + sp.kron(szeta, plane_m, format="csr"))
    return mass, stiff


def midpoint_rules(quad):
    """Per-axis midpoint rules matching a ``QuadratureGrid``."""
    return (("midpoint", quad.refine_r), ("midpoint", quad.refine_z),
            ("midpoint", quad.refine_zeta))


def tensor_operators_midpoint(rspline, zspline, zetaspline, quad):
    rr, rz, rzeta = midpoint_rules(quad)
    mr = operator_1d(rspline, "mass", rr)
    mz = operator_1d(zspline, "mass", rz)
    mzeta = operator_1d(zetaspline, "mass", rzeta)
    sr = operator_1d(rspline, "stiffness", rr)
    szz = operator_1d(zspline, "stiffness", rz)
    szeta = operator_1d(zetaspline, "stiffness", rzeta)
    plane_m = sp.kron(mr, mz, format="csr")
    mass = sp.kron(mzeta, plane_m, format="csr")
    stiff = (sp.kron(mzeta, sp.kron(sr, mz) + sp.kron(mr, szz), format="csr")
             + sp.kron(szeta, plane_m, format="csr"))
    return mass, stiff
