"""Uniform 1D B-spline bases, orders 1 (linear) and 2 (quadratic).

Every basis function is the cardinal (translation-invariant) B-spline
centered on a node of a uniform grid.  Periodic axes wrap the family over
the period.  Clamped (non-periodic) axes use the free-end family: nodes
cover the domain, plus one ghost node beyond each wall for quadratic
order so that the partition of unity holds up to the walls.  Because the
cardinal formula defines each function on the whole line, evaluation a
little outside a clamped domain stays smooth; it simply fades to zero as
the last supports end.  Field-line images that leave the box therefore
lose their basis weight continuously rather than being cut off, which is
what keeps the near-wall consistency of the mapped representation.

Conventions: node i sits at ``origin + i*h`` (clamped quadratic dof j
sits at node j-1, so dof positions run from ``-h`` to ``L+h``), and
evaluation at knots is right-continuous.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class DomainError(ValueError):
    """Coordinate outside the domain of a clamped spline axis."""


@dataclass(frozen=True)
class Spline1D:
    """A 1D uniform B-spline basis along one coordinate axis.

    ``ghost_layers`` (clamped axes) is the number of node layers placed
    beyond each wall.  Quadratic bases need at least one so the partition
    of unity reaches the walls; field-line mapped spaces use enough layers
    to cover the largest image excursion, and coefficients whose basis
    never touches the domain are dropped at solve time.
    """

    order: int
    spacing: float
    n_cells: int
    boundary: str  # "periodic" | "clamped"
    origin: float = 0.0
    ghost_layers: int = 0

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        if self.spacing <= 0.0:
            raise ValueError("spacing must be positive")
        if self.boundary not in ("periodic", "clamped"):
            raise ValueError(f"unknown boundary type {self.boundary!r}")
        if self.n_cells < 1:
            raise ValueError("need at least one cell")
        if self.boundary == "periodic":
            if self.ghost_layers:
                raise ValueError("periodic axes take no ghost layers")
        elif self.ghost_layers < self.order - 1:
            raise ValueError("quadratic clamped axes need >= 1 ghost layer")

    @classmethod
    def periodic(cls, order, spacing, n_cells, origin=0.0):
        return cls(order, spacing, n_cells, "periodic", origin)

    @classmethod
    def clamped(cls, order, spacing, n_cells, origin=0.0, ghost_layers=None):
        if ghost_layers is None:
            ghost_layers = order - 1
        return cls(order, spacing, n_cells, "clamped", origin, ghost_layers)

    @property
    def n_nodes(self):
        """Number of degrees of freedom on this axis."""
        if self.boundary == "periodic":
            return self.n_cells
        return self.n_cells + 1 + 2 * self.ghost_layers

    @property
    def length(self):
        return self.n_cells * self.spacing

    @property
    def nnz_per_point(self):
        return self.order + 1

    @property
    def _dof_node_offset(self):
        """Node index of dof 0."""
        return -self.ghost_layers if self.boundary == "clamped" else 0

    @cached_property
    def node_positions(self):
        """Coordinate each coefficient lives at."""
        if self.boundary == "periodic":
            return self.origin + self.spacing * np.arange(self.n_cells)
        off = self._dof_node_offset
        return self.origin + self.spacing * (np.arange(self.n_nodes) + off)

    @cached_property
    def cell_edges(self):
        """Breakpoints of the piecewise-polynomial pieces inside the domain
        (used for exact per-cell Gauss integration)."""
        h, m = self.spacing, self.n_cells
        if self.order == 1:
            return self.origin + h * np.arange(m + 1)
        inner = self.origin + h * (np.arange(m) + 0.5)
        return np.concatenate(([self.origin], inner, [self.origin + m * h]))

    # -- evaluation ---------------------------------------------------

    def _check_domain(self, x):
        if self.boundary != "clamped":
            return
        lo, hi = self.origin, self.origin + self.length
        eps = 1e-12 * max(1.0, abs(hi - lo))
        if np.any(x < lo - eps) or np.any(x > hi + eps):
            raise DomainError(
                f"coordinate outside clamped domain [{lo}, {hi}]")

    def basis_rows(self, x, check=True):
        """All (order+1) basis values and derivatives at each point.

        Returns ``(first, vals, dvals)`` where ``first`` is the lowest
        active dof index per point.  Periodic indices are unwrapped (wrap
        with ``% n_nodes`` and sum duplicate images); clamped indices may
        fall outside [0, n_nodes) when ``x`` is outside the domain, in
        which case those entries refer to basis functions that do not
        exist and must be dropped by the caller.
        """
        x = np.asarray(x, dtype=float)
        if check:
            self._check_domain(x)
        h = self.spacing
        u = (x - self.origin) / h
        if self.order == 1:
            c = np.floor(u)
            t = u - c
            vals = np.stack([1.0 - t, t], axis=-1)
            dvals = np.stack([-np.ones_like(t), np.ones_like(t)], axis=-1) / h
            first = c.astype(np.int64)
        else:
            c = np.floor(u + 0.5)
            t = u - c  # in [-0.5, 0.5)
            vals = np.stack([0.5 * (0.5 - t) ** 2,
                             0.75 - t * t,
                             0.5 * (0.5 + t) ** 2], axis=-1)
            dvals = np.stack([-(0.5 - t), -2.0 * t, 0.5 + t], axis=-1) / h
            first = (c - 1.0).astype(np.int64)
        return first - self._dof_node_offset, vals, dvals

    def _scatter(self, x):
        """(indices, vals, dvals) with periodic wrap applied and duplicate
        images summed; out-of-family indices dropped."""
        first, vals, dvals = self.basis_rows(np.atleast_1d(np.asarray(x, float)))
        first, vals, dvals = first[0], vals[0], dvals[0]
        idx = first + np.arange(self.order + 1)
        if self.boundary == "periodic":
            idx = idx % self.n_nodes
            out_v = np.zeros(self.n_nodes)
            out_d = np.zeros(self.n_nodes)
            np.add.at(out_v, idx, vals)
            np.add.at(out_d, idx, dvals)
            nz = np.flatnonzero((out_v != 0) | (out_d != 0))
            return nz, out_v[nz], out_d[nz]
        ok = (idx >= 0) & (idx < self.n_nodes)
        return idx[ok], vals[ok], dvals[ok]

    def eval_basis(self, node_index, x):
        """Value of basis function ``node_index`` at ``x``."""
        idx, vals, _ = self._scatter(x)
        j = node_index % self.n_nodes if self.boundary == "periodic" else node_index
        hit = np.flatnonzero(idx == j)
        return float(vals[hit[0]]) if hit.size else 0.0

    def eval_basis_deriv(self, node_index, x):
        """Derivative of basis function ``node_index`` at ``x``."""
        idx, _, dvals = self._scatter(x)
        j = node_index % self.n_nodes if self.boundary == "periodic" else node_index
        hit = np.flatnonzero(idx == j)
        return float(dvals[hit[0]]) if hit.size else 0.0

    def nonzero_range(self, x):
        """Contiguous (mod n_nodes when periodic) index range of basis
        functions whose closed support contains ``x``.

        On a knot the closed-support set has one extra member; the range
        keeps the lower end so it always spans order+1 indices (clipped at
        clamped family ends).
        """
        x = float(x)
        self._check_domain(np.asarray(x))
        s = 0.5 * (self.order + 1)
        u = (x - self.origin) / self.spacing
        lo = int(np.ceil(u - s)) - self._dof_node_offset
        hi = int(np.floor(u + s)) - self._dof_node_offset
        if hi - lo + 1 > self.order + 1:
            hi = lo + self.order
        n = self.n_nodes
        if self.boundary == "clamped":
            return (max(lo, 0), min(hi, n - 1))
        if hi - lo + 1 > n:
            hi = lo + n - 1
        return (lo % n, hi % n)
