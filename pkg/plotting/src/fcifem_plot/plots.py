"""Figure builders: convergence curves, 2D slices, voxel renders, and
mesh-intersection views of the mapped node grids.

Each builder returns the "render arrays" (the processed data handed to
matplotlib) alongside writing the image, so regression tests can hash the
data without depending on raster bytes.  Styling is fixed and nothing
time-dependent is drawn, keeping output files reproducible.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import io  # noqa: E402


def _fit_slope(x, y):
    coef = np.polyfit(np.log(x), np.log(y), 1)
    return float(coef[0])


def plot_convergence(spec, out_path):
    """Log-log error-vs-resolution curves with fitted slopes annotated."""
    series = []
    missing = [s["path"] for s in spec["inputs"] if not Path(s["path"]).exists()]
    if missing:
        raise FileNotFoundError(f"missing series files: {missing}")
    xcol = spec.get("x_column", "n_z")
    ycol = spec.get("y_column", "l2_error")
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    render = []
    for entry in spec["inputs"]:
        cols, data = io.read_series(entry["path"])
        if xcol not in cols or ycol not in cols:
            raise io.FormatError(
                f"{entry['path']}: need columns {xcol!r}, {ycol!r}; "
                f"found {cols}")
        x = data[:, cols.index(xcol)]
        y = data[:, cols.index(ycol)]
        label = entry.get("label", Path(entry["path"]).stem)
        if len(x) >= 2:
            slope = _fit_slope(x, y)
            label = f"{label} (slope {slope:+.2f})"
        ax.loglog(x, y, "o-", label=label)
        render.append(np.column_stack([x, y]))
    ax.set_xlabel(spec.get("x_label", xcol))
    ax.set_ylabel(spec.get("y_label", "L2 error"))
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return render


def slice_render_array(values):
    """Symmetric-limit normalization used for the 2D field images."""
    lim = float(np.abs(values).max()) or 1.0
    return values / lim


def plot_slice2d(spec, out_path):
    """Oversampled field slice, diverging colors symmetric about zero."""
    values, axes = io.read_array(spec["input"])
    if values.ndim != 2:
        raise io.FormatError(f"{spec['input']}: slice plots need 2D arrays")
    norm = slice_render_array(values)
    fig, ax = plt.subplots(figsize=(4.6, 4.6))
    (_, r0, r1, _), (_, z0, z1, _) = axes
    im = ax.imshow(norm.T, origin="lower", extent=(r0, r1, z0, z1),
                   cmap="RdBu_r", vmin=-1.0, vmax=1.0, aspect="auto")
    if "overlay" in spec:
        cols, data = io.read_series(spec["overlay"])
        ax.plot(data[:, cols.index("r")], data[:, cols.index("z")],
                "k-", lw=1.0)
    ax.set_xlabel(axes[0][0])
    ax.set_ylabel(axes[1][0])
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return norm


def voxel_render_arrays(values, threshold=0.35):
    """Two-sided threshold masks: positive cells red, negative blue."""
    scale = float(np.abs(values).max())
    if scale == 0.0:
        z = np.zeros(values.shape, dtype=bool)
        return z, z
    pos = values > threshold * scale
    neg = values < -threshold * scale
    return pos, neg


def plot_voxel3d(spec, out_path):
    """Thresholded voxel rendering; optionally overlays a field line."""
    values, axes = io.read_array(spec["input"])
    if values.ndim != 3:
        raise io.FormatError(f"{spec['input']}: voxel plots need 3D arrays")
    pos, neg = voxel_render_arrays(values, spec.get("threshold", 0.35))
    fig = plt.figure(figsize=(5.4, 4.6))
    ax = fig.add_subplot(projection="3d")
    if pos.any() or neg.any():
        filled = pos | neg
        colors = np.empty(values.shape, dtype=object)
        colors[pos] = "#d62728"
        colors[neg] = "#1f77b4"
        ax.voxels(filled, facecolors=colors, edgecolor=None)
    if "overlay" in spec:
        cols, data = io.read_series(spec["overlay"])
        r = data[:, cols.index("r")]
        z = data[:, cols.index("z")]
        q = data[:, cols.index("zeta")]
        (_, r0, r1, nr), (_, z0, z1, nz), (_, q0, q1, nq) = axes
        ax.plot((r - r0) / (r1 - r0) * nr, (z - z0) / (z1 - z0) * nz,
                (q - q0) / (q1 - q0) * nq, "k-", lw=1.5)
    ax.set_xlabel(axes[0][0])
    ax.set_ylabel(axes[1][0])
    ax.set_zlabel(axes[2][0])
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return pos, neg


def plot_mesh_intersection(spec, out_path):
    """Images of node-grid lines from neighbouring planes on one plane."""
    cols, data = io.read_series(spec["input"])
    for need in ("family", "s", "r", "z"):
        if need not in cols:
            raise io.FormatError(f"{spec['input']}: need column {need!r}")
    fam = data[:, cols.index("family")].astype(int)
    s = data[:, cols.index("s")].astype(int)
    r = data[:, cols.index("r")]
    z = data[:, cols.index("z")]
    palette = {0: "#d62728", 1: "#1f77b4", 2: "#222222"}
    fig, ax = plt.subplots(figsize=(4.8, 4.8))
    render = []
    for f in np.unique(fam):
        sel = fam == f
        color = palette.get(int(f) % 10, "#999999")
        breaks = np.flatnonzero(np.diff(s[sel]) <= 0) + 1
        for chunk in np.split(np.flatnonzero(sel), breaks):
            ax.plot(r[chunk], z[chunk], "-", color=color, lw=0.7)
            render.append(np.column_stack([r[chunk], z[chunk]]))
    ax.set_xlabel("R")
    ax.set_ylabel("Z")
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return render


KINDS = {
    "convergence": plot_convergence,
    "slice2d": plot_slice2d,
    "voxel3d": plot_voxel3d,
    "mesh_intersection": plot_mesh_intersection,
}


def render(spec):
    kind = spec.get("kind")
    if kind not in KINDS:
        raise ValueError(f"unknown figure kind {kind!r}; "
                         f"choose from {sorted(KINDS)}")
    out_path = Path(spec["output"])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    arrays = KINDS[kind](spec, out_path)
    return out_path, arrays
