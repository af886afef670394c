"""Config-driven experiment runs reproducing the two test problems.

Problems:

* ``periodic2d``          -- doubly periodic straight-field Laplacian with
  the nearly field-aligned source sin[n(Z-zeta)](1+sin Z)/2, scanned over
  resolution and checked against the analytic Fourier solution.
* ``cartesian_compare``   -- the same problem on an unmapped N_zeta = N_Z
  grid (tensor-spline fast path), scanned to find how many dofs the
  Cartesian representation needs to match a field-aligned run.
* ``tokamak_convergence`` -- divertor-field Laplacian on the rectangular
  domain with blended Dirichlet walls, uniformly refined by a factor H
  from the (20, 20, 1) base grid, errors against a self-converged
  reference (and, as a bonus diagnostic, the separable analytic solution
  this source happens to have).
* ``tokamak_filament``    -- signed field-line filament pair near the
  X-point: mass-projected charge, potential solve, slice/voxel exports,
  alignment and displacement diagnostics, optional exact-mapping rerun.
* ``mapping_error``       -- Taylor-vs-integrated field-line endpoint
  errors over the node-grid seed set.

Every run folder gets a byte-reproducible ``result.json`` (see results
module), a config echo, CSV artifacts, and a separate ``timings.json``.
"""

from __future__ import annotations

import copy
import dataclasses
import logging
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import yaml

from . import results
from .assembly import (AnalyticSource, assemble_laplacian, assemble_mass,
                       assemble_rhs, make_filament_source, matrix_stats)
from .blending import BlendedSpace
from .fields import field_from_config, trace_field_line
from .mapping import (ExactMapping, IdentityMapping, StraightMapping,
                      build_taylor_mapping, mapping_error_report)
from .quadrature import QuadratureGrid
from .solver import (SolverError, bandwidth, eliminate_dirichlet,
                     fourier_oracle_2d, reorder_rcm, solve_cg,
                     solve_direct_banded)
from .space import FcifemSpace
from .splines import Spline1D

log = logging.getLogger("fcifem")

TWO_PI = 2.0 * np.pi

TOKAMAK_DOMAIN = {"r0": 0.0, "r1": 2.0, "z0": -1.0, "z1": 1.5,
                  "zeta1": np.pi / 20.0}


@dataclass
class SolverConfig:
    method: str = "auto"  # auto | direct | cg
    tol: float = 1e-11
    max_iter: int = 60000


@dataclass
class QuadConfig:
    refine_r: int = 10
    refine_z: int = 10
    refine_zeta: int = 10

    def grid(self):
        return QuadratureGrid(self.refine_r, self.refine_z, self.refine_zeta)


@dataclass
class ExperimentConfig:
    problem: str
    geometry: dict = dc_field(default_factory=dict)
    grid: dict = dc_field(default_factory=dict)
    scan: list = dc_field(default_factory=list)
    spline_order: int = 2
    mapping: str = "taylor"  # identity | straight | taylor | exact
    field: dict = dc_field(default_factory=lambda: {"kind": "divertor", "b0": 1.0})
    source: dict = dc_field(default_factory=dict)
    quadrature: QuadConfig = dc_field(default_factory=QuadConfig)
    solver: SolverConfig = dc_field(default_factory=SolverConfig)
    ghost_safety: int = 3
    compare_with_exact: bool = False
    identity_stats: bool = False
    seed: int = 0
    threads: int = 1
    out_dir: str = "runs/out"

    @classmethod
    def from_dict(cls, data):
        data = copy.deepcopy(data)
        if "quadrature" in data:
            data["quadrature"] = QuadConfig(**data["quadrature"])
        if "solver" in data:
            data["solver"] = SolverConfig(**data["solver"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return dataclasses.asdict(self)


def load_config(path, overrides=()):
    with open(path) as fh:
        data = yaml.safe_load(fh)
    for ov in overrides:
        key, _, raw = ov.partition("=")
        if not _:
            raise ValueError(f"override {ov!r} needs key=value")
        val = yaml.safe_load(raw)
        if isinstance(val, str):
            # YAML needs a mantissa dot for floats; accept 1e-9 style too
            try:
                val = float(val)
            except ValueError:
                pass
        node = data
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = val
    return ExperimentConfig.from_dict(data)


def run(config):
    runners = {
        "periodic2d": run_periodic2d,
        "cartesian_compare": run_cartesian_compare,
        "tokamak_convergence": run_tokamak_convergence,
        "tokamak_filament": run_tokamak_filament,
        "mapping_error": run_mapping_error,
    }
    if config.problem not in runners:
        raise ValueError(f"unknown problem {config.problem!r}")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config_echo.yaml", "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=True)
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    try:
        return runners[config.problem](config)
    finally:
        log.removeHandler(handler)
        handler.close()


# -- shared pieces ------------------------------------------------------

def periodic2d_source(n):
    def rho(r, z, zeta):
        return np.sin(n * (z - zeta)) * (1.0 + np.sin(z)) / 2.0
    # product-to-sum expansion of sin[n(Z-zeta)](1+sin Z)/2
    modes = [(n, -n, -0.5j), (n - 1, -n, 0.25), (n + 1, -n, -0.25)]
    return rho, modes


def _solve_system(matrix, rhs, pinned, cfg_solver, *, spd=True,
                  project_nullspace=False, log_label=""):
    """Eliminate pinned dofs, pick a solver, return the full vector."""
    t0 = time.time()
    if pinned is None:
        pinned = np.zeros(matrix.shape[0], dtype=bool)
    a, b, expand = eliminate_dirichlet(matrix, rhs, pinned)
    method = cfg_solver.method
    perm = None
    if method == "auto":
        if project_nullspace:
            method = "cg"
        else:
            perm = reorder_rcm(a)
            bw = _permuted_bandwidth(a, perm)
            method = "direct" if a.shape[0] * bw * bw <= 4e10 else "cg"
    history = []
    if method == "direct":
        if perm is None:
            perm = reorder_rcm(a)
        x = solve_direct_banded(a, b, perm)
    elif method == "cg":
        x = solve_cg(a, b, tol=cfg_solver.tol, max_iter=cfg_solver.max_iter,
                     project_nullspace=project_nullspace, history=history)
    else:
        raise ValueError(f"unknown solver method {method!r}")
    log.info("%s: %s solve, %d unknowns, %.1fs, %d recorded residuals",
             log_label, method, a.shape[0], time.time() - t0, len(history))
    return expand(x), method


def _permuted_bandwidth(a, perm):
    coo = a.tocoo()
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return int(np.max(np.abs(inv[coo.row] - inv[coo.col]))) if coo.nnz else 0


def ghost_layers_for(fieldmodel, domain, delta_max, h_r, h_z, safety=3):
    """Node layers beyond each wall needed to cover mapped images."""
    r0, r1, z0, z1 = domain
    rr, zz = np.meshgrid(np.linspace(r0, r1, 101),
                         np.linspace(z0, z1, 101), indexing="ij")
    fr, fz = fieldmodel.slope(rr, zz)
    ar, az = fieldmodel.slope_accel(rr, zz)
    vr = (np.abs(fr) * delta_max + 0.5 * np.abs(ar) * delta_max ** 2).max()
    vz = (np.abs(fz) * delta_max + 0.5 * np.abs(az) * delta_max ** 2).max()
    return (int(np.ceil(vr / h_r)) + safety, int(np.ceil(vz / h_z)) + safety)


def build_tokamak_space(cfg, n_r, n_z, n_zeta):
    geo = dict(TOKAMAK_DOMAIN)
    geo.update(cfg.geometry)
    r0, r1, z0, z1 = geo["r0"], geo["r1"], geo["z0"], geo["z1"]
    zeta1 = geo["zeta1"]
    order = cfg.spline_order
    h_r, h_z = (r1 - r0) / n_r, (z1 - z0) / n_z
    fieldmodel = field_from_config(**cfg.field)
    if cfg.mapping == "identity":
        gr = gz = order - 1
        mapping = IdentityMapping()
    else:
        delta_max = 0.5 * (order + 1) * zeta1 / n_zeta
        gr, gz = ghost_layers_for(fieldmodel, (r0, r1, z0, z1), delta_max,
                                  h_r, h_z, cfg.ghost_safety)
        gr = max(gr, order - 1)
        gz = max(gz, order - 1)
        mapping = None
    rspl = Spline1D.clamped(order, h_r, n_r, r0, ghost_layers=gr)
    zspl = Spline1D.clamped(order, h_z, n_z, z0, ghost_layers=gz)
    zetaspl = Spline1D.periodic(order, zeta1 / n_zeta, n_zeta)
    if mapping is None:
        if cfg.mapping == "taylor":
            mapping = build_taylor_mapping(fieldmodel, rspl, zspl)
        elif cfg.mapping == "exact":
            mapping = ExactMapping(fieldmodel, (r0, r1, z0, z1))
        else:
            raise ValueError(f"mapping {cfg.mapping!r} not valid here")
    space = FcifemSpace(rspl, zspl, zetaspl, mapping)
    return BlendedSpace(space), fieldmodel, geo


def tokamak_sample_points(geo, ns):
    r = np.linspace(geo["r0"], geo["r1"], ns[0] + 1)[:-1] \
        + 0.5 * (geo["r1"] - geo["r0"]) / ns[0]
    z = np.linspace(geo["z0"], geo["z1"], ns[1] + 1)[:-1] \
        + 0.5 * (geo["z1"] - geo["z0"]) / ns[1]
    zeta = geo["zeta1"] * np.arange(ns[2]) / ns[2]
    rr, zz, qq = np.meshgrid(r, z, zeta, indexing="ij")
    pts = np.stack([rr.ravel(), zz.ravel(), qq.ravel()], axis=-1)
    return pts, (r, z, zeta)


def _l2(diff, volume):
    return float(np.sqrt(np.mean(np.asarray(diff) ** 2) * volume))


# -- periodic 2D problem -------------------------------------------------

def _build_periodic2d_space(order, n_z, n_zeta, geo, mapping):
    z0, z1 = geo.get("z0", 0.0), geo.get("z1", TWO_PI)
    zeta1 = geo.get("zeta1", TWO_PI)
    rspl = Spline1D.periodic(order, 1.0, 1)
    zspl = Spline1D.periodic(order, (z1 - z0) / n_z, n_z, z0)
    zetaspl = Spline1D.periodic(order, zeta1 / n_zeta, n_zeta)
    return FcifemSpace(rspl, zspl, zetaspl, mapping)


def _periodic2d_error(space, coeffs, phi_exact, geo, n_sample):
    z0, z1 = geo.get("z0", 0.0), geo.get("z1", TWO_PI)
    zeta1 = geo.get("zeta1", TWO_PI)
    zs = z0 + (z1 - z0) * np.arange(n_sample[0]) / n_sample[0]
    qs = zeta1 * np.arange(n_sample[1]) / n_sample[1]
    zz, qq = np.meshgrid(zs, qs, indexing="ij")
    pts = np.stack([np.full(zz.size, 0.5), zz.ravel(), qq.ravel()], axis=-1)
    vals = space.evaluate(coeffs, pts)
    diff = vals - phi_exact(zz.ravel(), qq.ravel())
    diff -= diff.mean()  # periodic Poisson gauge
    return _l2(diff, (z1 - z0) * zeta1)


def solve_periodic2d_point(cfg, n_z, n_zeta, phi_exact, rho):
    geo = cfg.geometry
    if cfg.mapping == "identity":
        mapping = IdentityMapping()
    else:
        fieldmodel = field_from_config(**cfg.field)
        mapping = StraightMapping.from_field(fieldmodel)
    space = _build_periodic2d_space(cfg.spline_order, n_z, n_zeta, geo, mapping)
    quad = cfg.quadrature.grid()
    K = assemble_laplacian(space, quad, threads=cfg.threads)
    b = assemble_rhs(space, quad, AnalyticSource(rho))
    x, method = _solve_system(
        K, b, None, cfg.solver, project_nullspace=True,
        log_label=f"periodic2d n_z={n_z} n_zeta={n_zeta}")
    ns = (max(3 * n_z, 128), max(3 * n_zeta, 64))
    err = _periodic2d_error(space, x, phi_exact, geo, ns)
    return {"n_z": n_z, "n_zeta": n_zeta, "dofs": space.dof_count,
            "l2_error": err, "solver": method}


def run_periodic2d(cfg):
    t_start = time.time()
    n = int(cfg.source.get("n", 10))
    rho, modes = periodic2d_source(n)
    phi_exact, sol_modes = fourier_oracle_2d(modes)
    if cfg.scan:
        points = [(int(p["n_z"]), int(p["n_zeta"])) for p in cfg.scan]
    else:
        points = [(int(cfg.grid["n_z"]), int(cfg.grid["n_zeta"]))]
    rows = []
    for n_z, n_zeta in points:
        rows.append(solve_periodic2d_point(cfg, n_z, n_zeta, phi_exact, rho))
        log.info("periodic2d point %s", rows[-1])
    out = Path(cfg.out_dir)
    results.write_series(out, "series",
                         ["n_z", "n_zeta", "dofs", "l2_error"],
                         [[r["n_z"], r["n_zeta"], r["dofs"], r["l2_error"]]
                          for r in rows])
    metrics = {"points": rows}
    if len(rows) >= 2:
        slope, _, resid = results.fit_loglog([r["n_z"] for r in rows],
                                             [r["l2_error"] for r in rows])
        metrics.update({"fit_slope": slope, "fit_residual": resid})
    payload = {"problem": cfg.problem, "config": cfg.to_dict(),
               "metrics": metrics,
               "oracle_modes": [[kz, kq, [a.real, a.imag]]
                                for kz, kq, a in sol_modes],
               "artifacts": {"series": "series.csv"}}
    results.write_result(out, payload)
    results.write_timings(out, {"total_s": time.time() - t_start})
    return payload


def run_cartesian_compare(cfg):
    t_start = time.time()
    mode = cfg.source.get("mode", "2d")
    out = Path(cfg.out_dir)
    if mode == "2d":
        payload = _cartesian_compare_2d(cfg)
    elif mode == "3d":
        payload = _cartesian_compare_3d(cfg)
    else:
        raise ValueError(f"unknown cartesian_compare mode {mode!r}")
    results.write_result(out, payload)
    results.write_timings(out, {"total_s": time.time() - t_start})
    return payload


def _cartesian_compare_2d(cfg):
    """Dof cost of matching a field-aligned run with N_zeta = N_Z."""
    n = int(cfg.source.get("n", 10))
    rho, modes = periodic2d_source(n)
    phi_exact, _ = fourier_oracle_2d(modes)
    base = copy.deepcopy(cfg)
    ref = solve_periodic2d_point(base, int(cfg.grid["n_z"]),
                                 int(cfg.grid["n_zeta"]), phi_exact, rho)
    cart_cfg = copy.deepcopy(cfg)
    cart_cfg.mapping = "identity"
    rows = []
    crossing = None
    for p in cfg.scan:
        nn = int(p["n_z"])
        r = solve_periodic2d_point(cart_cfg, nn, nn, phi_exact, rho)
        rows.append(r)
        log.info("cartesian point %s", r)
        if r["l2_error"] <= ref["l2_error"] and crossing is None:
            crossing = r
    # log-log interpolation of the dof count where the error crosses
    ns = np.array([r["n_z"] for r in rows], float)
    es = np.array([r["l2_error"] for r in rows], float)
    n_match = None
    if es.min() <= ref["l2_error"] <= es.max():
        order = np.argsort(es)
        n_match = float(np.exp(np.interp(np.log(ref["l2_error"]),
                                         np.log(es[order]),
                                         np.log(ns[order]))))
    dof_ratio = (n_match ** 2 / ref["dofs"]) if n_match else None
    results.write_series(Path(cfg.out_dir), "series",
                         ["n_z", "n_zeta", "dofs", "l2_error"],
                         [[r["n_z"], r["n_zeta"], r["dofs"], r["l2_error"]]
                          for r in rows])
    return {"problem": cfg.problem, "config": cfg.to_dict(),
            "metrics": {"aligned": ref, "cartesian_points": rows,
                        "matching_n": n_match, "dof_ratio": dof_ratio},
            "artifacts": {"series": "series.csv"}}


def _cartesian_compare_3d(cfg):
    """Unmapped (N, N, N_zeta) solve of the filament problem, for dof and
    smoothness comparison against the aligned single-plane run."""
    gr = cfg.grid
    n_r, n_z, n_zeta = int(gr["n_r"]), int(gr["n_z"]), int(gr["n_zeta"])
    cart = copy.deepcopy(cfg)
    cart.mapping = "identity"
    bl, fieldmodel, geo = build_tokamak_space(cart, n_r, n_z, n_zeta)
    quad = cfg.quadrature.grid()
    source = _filament(cfg, fieldmodel, geo, n_zeta)
    K = assemble_laplacian(bl, quad, threads=cfg.threads)
    b = assemble_rhs(bl, quad, source)
    pinned = bl.boundary_mask() | (K.diagonal() == 0.0)
    x, method = _solve_system(K, b, pinned, cfg.solver,
                              log_label="cartesian3d")
    out = Path(cfg.out_dir)
    arts = _export_fields(out, bl, {"phi": x}, geo,
                          slice_shape=(3 * n_r, 3 * n_z),
                          voxel_shape=(90, 90, 12))
    stats = matrix_stats(K[~pinned][:, ~pinned])
    return {"problem": cfg.problem, "config": cfg.to_dict(),
            "metrics": {"dofs": int((~pinned).sum()), "solver": method},
            "matrix_stats": stats, "artifacts": arts}


# -- tokamak convergence --------------------------------------------------

def _tokamak_rho(cfg):
    def rho(r, z, zeta):
        return np.sin(0.5 * np.pi * r) * np.sin(np.pi * (z + 1.0) / 2.5)
    return rho


def _solve_tokamak(cfg, n_r, n_z, n_zeta, rho):
    bl, fieldmodel, geo = build_tokamak_space(cfg, n_r, n_z, n_zeta)
    quad = cfg.quadrature.grid()
    K = assemble_laplacian(bl, quad, threads=cfg.threads)
    b = assemble_rhs(bl, quad, AnalyticSource(rho))
    pinned = bl.boundary_mask() | (K.diagonal() == 0.0)
    x, method = _solve_system(K, b, pinned, cfg.solver,
                              log_label=f"tokamak ({n_r},{n_z},{n_zeta})")
    return bl, x, geo, int((~pinned).sum())


def run_tokamak_convergence(cfg):
    t_start = time.time()
    rho = _tokamak_rho(cfg)
    base = cfg.grid or {"n_r": 20, "n_z": 20, "n_zeta": 1}
    hs = [int(p["h"]) for p in cfg.scan] if cfg.scan else [1, 2, 3]
    h_ref = int(cfg.source.get("h_ref", 2 * max(hs)))
    sols = {}
    for h in hs + [h_ref]:
        sols[h] = _solve_tokamak(cfg, base["n_r"] * h, base["n_z"] * h,
                                 base["n_zeta"] * h, rho)
        log.info("tokamak H=%d solved (%d unknowns)", h, sols[h][3])
    geo = sols[h_ref][2]
    coarse = (base["n_r"], base["n_z"], base["n_zeta"])
    ns = (3 * coarse[0], 3 * coarse[1], max(3 * coarse[2], 3))
    pts, _ = tokamak_sample_points(geo, ns)
    vol = ((geo["r1"] - geo["r0"]) * (geo["z1"] - geo["z0"]) * geo["zeta1"])
    ref_vals = sols[h_ref][0].evaluate(sols[h_ref][1], pts)
    # the separable source happens to be a Laplacian eigenfunction, which
    # gives a free analytic cross-check of the self-converged reference
    lam = (np.pi / 2) ** 2 + (np.pi / 2.5) ** 2
    ana_vals = -rho(pts[:, 0], pts[:, 1], pts[:, 2]) / lam
    rows = []
    for h in hs:
        vals = sols[h][0].evaluate(sols[h][1], pts)
        rows.append({"h": h,
                     "l2_error": _l2(vals - ref_vals, vol),
                     "l2_error_analytic": _l2(vals - ana_vals, vol),
                     "unknowns": sols[h][3]})
        log.info("tokamak point %s", rows[-1])
    slope, _, resid = results.fit_loglog([r["h"] for r in rows],
                                         [r["l2_error"] for r in rows])
    ref_check = _l2(ref_vals - ana_vals, vol)
    # boundary samples: the blend makes these exactly zero
    tb = np.linspace(0.0, 1.0, 101)
    bpts = np.concatenate([
        np.stack([np.full_like(tb, geo["r0"]),
                  geo["z0"] + (geo["z1"] - geo["z0"]) * tb,
                  np.full_like(tb, 0.3 * geo["zeta1"])], -1),
        np.stack([geo["r0"] + (geo["r1"] - geo["r0"]) * tb,
                  np.full_like(tb, geo["z1"]),
                  np.full_like(tb, 0.77 * geo["zeta1"])], -1),
    ])
    bmax = float(np.max(np.abs(sols[h_ref][0].evaluate(sols[h_ref][1], bpts))))
    out = Path(cfg.out_dir)
    results.write_series(out, "series",
                         ["h", "l2_error", "l2_error_analytic", "unknowns"],
                         [[r["h"], r["l2_error"], r["l2_error_analytic"],
                           r["unknowns"]] for r in rows])
    payload = {"problem": cfg.problem, "config": cfg.to_dict(),
               "metrics": {"points": rows, "fit_exponent": -slope,
                           "fit_residual": resid, "h_ref": h_ref,
                           "reference_vs_analytic": ref_check,
                           "boundary_abs_max": bmax},
               "artifacts": {"series": "series.csv"}}
    results.write_result(out, payload)
    results.write_timings(out, {"total_s": time.time() - t_start})
    return payload


# -- filament problem -----------------------------------------------------

def _filament(cfg, fieldmodel, geo, n_zeta):
    start = cfg.source.get("start", (0.36, -1.0, 0.0))
    n_samples = int(cfg.source.get("line_samples",
                                   cfg.quadrature.refine_zeta * n_zeta))
    return make_filament_source(
        fieldmodel, np.asarray(start, float), geo["zeta1"], n_samples,
        (geo["r0"], geo["r1"], geo["z0"], geo["z1"]))


def _export_fields(out, space_like, fields, geo, slice_shape, voxel_shape):
    """Write zeta=0 slices (oversampled) and coarse 3D voxel arrays."""
    arts = {}
    r0, r1, z0, z1 = geo["r0"], geo["r1"], geo["z0"], geo["z1"]
    zeta1 = geo["zeta1"]
    rs = r0 + (r1 - r0) * (np.arange(slice_shape[0]) + 0.5) / slice_shape[0]
    zs = z0 + (z1 - z0) * (np.arange(slice_shape[1]) + 0.5) / slice_shape[1]
    rr, zz = np.meshgrid(rs, zs, indexing="ij")
    spts = np.stack([rr.ravel(), zz.ravel(), np.zeros(rr.size)], -1)
    vr = r0 + (r1 - r0) * (np.arange(voxel_shape[0]) + 0.5) / voxel_shape[0]
    vz = z0 + (z1 - z0) * (np.arange(voxel_shape[1]) + 0.5) / voxel_shape[1]
    vq = zeta1 * np.arange(voxel_shape[2]) / voxel_shape[2]
    g = np.meshgrid(vr, vz, vq, indexing="ij")
    vpts = np.stack([a.ravel() for a in g], -1)
    for name, coeffs in fields.items():
        sl = space_like.evaluate(coeffs, spts).reshape(slice_shape)
        results.write_array(out, f"{name}_slice", sl,
                            [("R", r0, r1), ("Z", z0, z1)])
        arts[f"{name}_slice"] = f"{name}_slice.csv"
        vox = space_like.evaluate(coeffs, vpts).reshape(voxel_shape)
        results.write_array(out, f"{name}_voxel", vox,
                            [("R", r0, r1), ("Z", z0, z1),
                             ("zeta", 0.0, zeta1)])
        arts[f"{name}_voxel"] = f"{name}_voxel.csv"
    return arts


def run_tokamak_filament(cfg):
    t_start = time.time()
    gr = cfg.grid or {"n_r": 100, "n_z": 100, "n_zeta": 1}
    n_r, n_z, n_zeta = int(gr["n_r"]), int(gr["n_z"]), int(gr["n_zeta"])
    bl, fieldmodel, geo = build_tokamak_space(cfg, n_r, n_z, n_zeta)
    quad = cfg.quadrature.grid()
    source = _filament(cfg, fieldmodel, geo, n_zeta)
    out = Path(cfg.out_dir)

    K = assemble_laplacian(bl, quad, threads=cfg.threads)
    b = assemble_rhs(bl, quad, source)
    pinned = bl.boundary_mask() | (K.diagonal() == 0.0)
    Ki = K[~pinned][:, ~pinned]
    perm = reorder_rcm(Ki)
    stats = matrix_stats(Ki)
    stats["bandwidth_rcm"] = _permuted_bandwidth(Ki, perm)
    phi, method = _solve_system(K, b, pinned, cfg.solver,
                                log_label="filament potential")

    space = bl.fci
    M = assemble_mass(space, quad, threads=cfg.threads)
    bm = assemble_rhs(space, quad, source)
    dead_m = M.diagonal() == 0.0
    rhobar, _ = _solve_system(M, -bm, dead_m, cfg.solver,
                              log_label="filament projection")

    arts = _export_fields(out, bl, {"phi": phi}, geo,
                          (3 * n_r, 3 * n_z), (90, 90, 12))
    arts.update(_export_fields(out, space, {"rhobar": rhobar}, geo,
                               (3 * n_r, 3 * n_z), (90, 90, 12)))

    # field-line displacement and charge alignment diagnostics
    curve = source.curves[0][0]
    fr, fz = fieldmodel.slope(curve[:, 0], curve[:, 1])
    rms_disp = float(geo["zeta1"] * np.sqrt(np.mean(fr ** 2 + fz ** 2)))
    align = _alignment_check(space, rhobar, source, geo,
                             (geo["r1"] - geo["r0"]) / n_r)
    results.write_series(out, "filament_curve",
                         ["r", "z", "zeta"],
                         [[p[0], p[1], p[2]] for p in curve])
    arts["filament_curve"] = "filament_curve.csv"

    metrics = {"unknowns": int((~pinned).sum()), "solver": method,
               "rms_displacement": rms_disp,
               "displacement_cells": rms_disp / ((geo["r1"] - geo["r0"]) / n_r),
               "alignment_max_cells": align}
    if cfg.compare_with_exact:
        exact_cfg = copy.deepcopy(cfg)
        exact_cfg.mapping = "exact"
        ble, _, _ = build_tokamak_space(exact_cfg, n_r, n_z, n_zeta)
        Ke = assemble_laplacian(ble, quad, threads=cfg.threads)
        be = assemble_rhs(ble, quad, source)
        pe = ble.boundary_mask() | (Ke.diagonal() == 0.0)
        phie, _ = _solve_system(Ke, be, pe, cfg.solver,
                                log_label="filament potential (exact map)")
        pts, _ = tokamak_sample_points(geo, (3 * n_r // 2, 3 * n_z // 2, 6))
        va = bl.evaluate(phi, pts)
        vb = ble.evaluate(phie, pts)
        denom = np.sqrt(np.mean(va ** 2))
        metrics["exact_vs_taylor_rel_rms"] = float(
            np.sqrt(np.mean((va - vb) ** 2)) / denom)
    if cfg.identity_stats:
        ident_cfg = copy.deepcopy(cfg)
        ident_cfg.mapping = "identity"
        bli, _, _ = build_tokamak_space(ident_cfg, n_r, n_z, n_zeta)
        Kid = assemble_laplacian(bli, quad, threads=cfg.threads)
        pid = bli.boundary_mask() | (Kid.diagonal() == 0.0)
        metrics["identity_stats"] = matrix_stats(Kid[~pid][:, ~pid])
    payload = {"problem": cfg.problem, "config": cfg.to_dict(),
               "metrics": metrics, "matrix_stats": stats,
               "artifacts": arts}
    results.write_result(out, payload)
    results.write_timings(out, {"total_s": time.time() - t_start})
    return payload


def _alignment_check(space, rhobar, source, geo, cell):
    """Distance (in cells) from each sampled-zeta |rhobar| maximum to the
    filament curves."""
    r0, r1, z0, z1 = geo["r0"], geo["r1"], geo["z0"], geo["z1"]
    nz = 8
    worst = 0.0
    curves = [c[0] for c in source.curves]
    for zeta in geo["zeta1"] * (np.arange(nz) + 0.13) / nz:
        rs = r0 + (r1 - r0) * (np.arange(150) + 0.5) / 150.0
        zs = z0 + (z1 - z0) * (np.arange(150) + 0.5) / 150.0
        rr, zz = np.meshgrid(rs, zs, indexing="ij")
        pts = np.stack([rr.ravel(), zz.ravel(), np.full(rr.size, zeta)], -1)
        vals = np.abs(space.evaluate(rhobar, pts))
        imax = int(np.argmax(vals))
        pos = pts[imax, :2]
        dmin = np.inf
        for c in curves:
            # curve point whose (periodically wrapped) zeta matches
            dz = np.abs((c[:, 2] - zeta + 0.5 * geo["zeta1"]) % geo["zeta1"]
                        - 0.5 * geo["zeta1"])
            near = c[np.argsort(dz)[:3], :2]
            dmin = min(dmin, float(np.min(np.linalg.norm(near - pos, axis=1))))
        worst = max(worst, dmin / cell)
    return worst


# -- mapping error --------------------------------------------------------

def run_mapping_error(cfg):
    t_start = time.time()
    gr = cfg.grid or {"n_r": 100, "n_z": 100, "n_zeta": 1}
    n_r, n_z, n_zeta = int(gr["n_r"]), int(gr["n_z"]), int(gr["n_zeta"])
    bl, fieldmodel, geo = build_tokamak_space(cfg, n_r, n_z, n_zeta)
    space = bl.fci
    domain = (geo["r0"], geo["r1"], geo["z0"], geo["z1"])
    exact = ExactMapping(fieldmodel, domain)
    rr, zz = np.meshgrid(space.rspline.node_positions,
                         space.zspline.node_positions, indexing="ij")
    inside = ((rr >= geo["r0"]) & (rr <= geo["r1"])
              & (zz >= geo["z0"]) & (zz <= geo["z1"]))
    seeds = np.stack([rr[inside], zz[inside],
                      np.zeros(int(inside.sum()))], -1)
    rep = mapping_error_report(space.mapping, exact, seeds, geo["zeta1"],
                               domain=domain)
    out = Path(cfg.out_dir)
    rows = [[s[0], s[1], (0.0 if not k else e), float(k)]
            for s, e, k in zip(seeds,
                               np.nan_to_num(rep["per_seed"]),
                               rep["kept"])]
    results.write_series(out, "per_seed", ["r", "z", "error", "kept"], rows)
    mesh_path = _export_mesh_lines(out, space, geo)
    # where do the largest errors sit?
    kept_err = rep["per_seed"][rep["kept"]]
    kept_seeds = seeds[rep["kept"]]
    thr = float(np.quantile(kept_err, 0.9))
    top = kept_seeds[kept_err >= thr]
    payload = {"problem": cfg.problem, "config": cfg.to_dict(),
               "metrics": {"rms": rep["rms"], "max": rep["max"],
                           "kept": int(rep["kept"].sum()),
                           "total_seeds": int(len(seeds)),
                           "top_decile_mean_abs_z":
                               float(np.mean(np.abs(top[:, 1]))),
                           "all_mean_abs_z":
                               float(np.mean(np.abs(kept_seeds[:, 1])))},
               "artifacts": {"per_seed": "per_seed.csv",
                             "mesh_lines": "mesh_lines.csv"}}
    results.write_result(out, payload)
    results.write_timings(out, {"total_s": time.time() - t_start})
    return payload


def _export_mesh_lines(out, space, geo):
    """Images of the node-grid lines on the neighbouring planes, the raw
    material of a mesh-intersection figure."""
    segs = []
    r = space.rspline.node_positions
    z = space.zspline.node_positions
    r = r[(r >= geo["r0"]) & (r <= geo["r1"])][::5]
    z = z[(z >= geo["z0"]) & (z <= geo["z1"])][::5]
    tr = np.linspace(geo["r0"], geo["r1"], 40)
    tz = np.linspace(geo["z0"], geo["z1"], 40)
    dzeta = space.zetaspline.spacing
    for li, delta in ((0, 0.0), (1, dzeta), (2, -dzeta)):
        for rv in r:
            qr, qz = space.mapping.displacement(np.full_like(tz, rv), tz, delta)
            segs += [[li, i, qr[i], qz[i]] for i in range(len(tz))]
        for zv in z:
            qr, qz = space.mapping.displacement(tr, np.full_like(tr, zv), delta)
            segs += [[li + 10, i, qr[i], qz[i]] for i in range(len(tr))]
    results.write_series(out, "mesh_lines", ["family", "s", "r", "z"], segs)
    return out / "mesh_lines.csv"
