"""Sparse solves: RCM-banded direct path, preconditioned CG, and the
Fourier oracle for the doubly periodic test problem."""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


def bandwidth(matrix):
    coo = matrix.tocoo()
    return int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0


def reorder_rcm(matrix):
    """Reverse Cuthill-McKee permutation (structurally symmetric input)."""
    return np.asarray(csgraph.reverse_cuthill_mckee(matrix.tocsr(),
                                                    symmetric_mode=True))


def solve_direct_banded(matrix, rhs, permutation=None):
    """Direct solve via banded Cholesky on the (permuted) band.

    Falls back to banded LU if the Cholesky factorization hits a
    non-positive pivot.  The system must have no null space.
    """
    a = matrix.tocsr()
    n = a.shape[0]
    rhs = np.asarray(rhs, dtype=float)
    if permutation is None:
        permutation = np.arange(n)
    perm = np.asarray(permutation)
    ap = a[perm][:, perm].tocoo()
    bw = int(np.max(np.abs(ap.row - ap.col))) if ap.nnz else 0
    bp = rhs[perm]
    upper = ap.row <= ap.col
    try:
        ab = np.zeros((bw + 1, n))
        ab[bw + ap.row[upper] - ap.col[upper], ap.col[upper]] = ap.data[upper]
        xp = scipy.linalg.solveh_banded(ab, bp)
    except np.linalg.LinAlgError as err:
        try:
            ab = np.zeros((2 * bw + 1, n))
            ab[bw + ap.row - ap.col, ap.col] = ap.data
            xp = scipy.linalg.solve_banded((bw, bw), ab, bp)
        except np.linalg.LinAlgError:
            raise SolverError(
                "banded factorization failed; the system is singular - "
                "was the periodic null space projected or pinned?") from err
    x = np.empty_like(xp)
    x[perm] = xp
    nb = np.linalg.norm(rhs)
    rel = np.linalg.norm(a @ x - rhs) / nb if nb > 0 else 0.0
    if not np.isfinite(rel) or rel > 1e-8:
        raise SolverError(f"direct solve residual {rel:.2e} too large; "
                          "suspect an unhandled null space")
    return x


def project_zero_mean(v):
    """Remove the constant component (fully periodic Poisson gauge)."""
    return v - np.mean(v)


def solve_cg(matrix, rhs, *, tol=1e-10, max_iter=5000, project_nullspace=False,
             history=None):
    """Jacobi-preconditioned conjugate gradients.

    With ``project_nullspace`` the constant vector is projected out of the
    operator, preconditioner, and right-hand side (singular periodic
    Poisson systems).  Raises on breakdown or non-convergence, attaching
    the residual history.
    """
    a = matrix.tocsr()
    rhs = np.asarray(rhs, dtype=float)
    diag = a.diagonal()
    if np.any(diag <= 0):
        raise SolverError("matrix has non-positive diagonal entries; "
                          "CG needs a symmetric positive (semi)definite system")
    b = project_zero_mean(rhs) if project_nullspace else rhs
    inv_diag = 1.0 / diag

    def op(v):
        w = a @ (project_zero_mean(v) if project_nullspace else v)
        return project_zero_mean(w) if project_nullspace else w

    def prec(v):
        w = inv_diag * (project_zero_mean(v) if project_nullspace else v)
        return project_zero_mean(w) if project_nullspace else w

    n = a.shape[0]
    lin = spla.LinearOperator((n, n), matvec=op)
    pre = spla.LinearOperator((n, n), matvec=prec)
    res_hist = [] if history is None else history
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)

    def cb(xk):
        res_hist.append(float(np.linalg.norm(b - op(xk)) / bnorm))
        if not np.isfinite(res_hist[-1]):
            raise SolverError(f"CG diverged; residual history: {res_hist[-6:]}")

    x, info = spla.cg(lin, b, rtol=tol, atol=0.0, maxiter=max_iter,
                      M=pre, callback=cb)
    if info != 0:
        raise SolverError(
            f"CG failed to converge in {max_iter} iterations "
            f"(info={info}); last residuals: {res_hist[-5:]}")
    if project_nullspace:
        x = project_zero_mean(x)
    return x


def eliminate_dirichlet(matrix, rhs, pinned_mask):
    """Drop pinned (homogeneous Dirichlet) dofs from the system.

    Returns the reduced system plus a function re-embedding a reduced
    solution into the full coefficient vector (zeros at pinned dofs).
    """
    pinned = np.asarray(pinned_mask, dtype=bool)
    keep = ~pinned
    idx = np.flatnonzero(keep)
    a = matrix.tocsr()[idx][:, idx]
    b = np.asarray(rhs)[idx]

    def expand(x):
        full = np.zeros(pinned.size)
        full[idx] = x
        return full

    return a, b, expand


def fourier_oracle_2d(rho_modes):
    """Analytic periodic Poisson solution from a list of source modes.

    Modes are (k_z, k_zeta, amplitude) with complex amplitude ``a`` and the
    convention rho += Re[a exp(i(k_z Z + k_zeta zeta))]; the returned
    callable evaluates phi(Z, zeta) = Re[-a/|k|^2 exp(...)] summed over
    modes, plus a table of the solution modes.
    """
    modes = [(int(kz), int(kzeta), complex(a)) for kz, kzeta, a in rho_modes]
    if any(kz == 0 and kzeta == 0 for kz, kzeta, _ in modes):
        raise ValueError("zero mode present: periodic Poisson needs a "
                         "zero-mean source")
    sol = [(kz, kzeta, -a / (kz * kz + kzeta * kzeta))
           for kz, kzeta, a in modes]

    def phi(zz, zeta):
        zz = np.asarray(zz, dtype=float)
        zeta = np.asarray(zeta, dtype=float)
        out = np.zeros(np.broadcast(zz, zeta).shape)
        for kz, kzeta, a in sol:
            out = out + np.real(a * np.exp(1j * (kz * zz + kzeta * zeta)))
        return out

    return phi, sol
