"""Run outputs: a deterministic JSON summary plus CSV tables.

Formats (consumed by the plotting tool, so versioned and strict):

* ``result.json``  -- {"schema": "fcifem-result-v1", "problem": ...,
  "config": {...}, "metrics": {...}, "matrix_stats": {...},
  "series": {...}, "artifacts": {name: relative path}}.
  Keys are sorted and floats use shortest round-trip repr, so a rerun of
  the same config byte-matches.  Wall-clock timings go to a separate
  ``timings.json`` precisely to keep ``result.json`` reproducible.
* field arrays  -- ``# fcifem-array-v1`` header lines carrying shape and
  axis ranges, then one CSV row per leading index (2D) or a flattened
  column (3D).
* series tables -- plain CSV with a one-line header.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

RESULT_SCHEMA = "fcifem-result-v1"
ARRAY_SCHEMA = "fcifem-array-v1"


def write_result(out_dir, payload):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {"schema": RESULT_SCHEMA}
    doc.update(payload)
    path = out_dir / "result.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return path


def write_timings(out_dir, timings):
    path = Path(out_dir) / "timings.json"
    with open(path, "w") as fh:
        json.dump(timings, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return path


def write_series(out_dir, name, columns, rows):
    """Plain CSV with a header row; values via repr for round-tripping."""
    path = Path(out_dir) / f"{name}.csv"
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return path


def read_series(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, data


def write_array(out_dir, name, values, axes):
    """Sampled field array with its axis ranges.

    ``axes`` is a list of (label, start, stop) with ``stop`` exclusive for
    periodic axes, matching how the samples were generated; ``values`` has
    one dimension per axis.
    """
    values = np.asarray(values)
    if values.ndim != len(axes):
        raise ValueError("axis list does not match array rank")
    path = Path(out_dir) / f"{name}.csv"
    with open(path, "w") as fh:
        fh.write(f"# {ARRAY_SCHEMA}\n")
        fh.write("# shape: " + " ".join(str(s) for s in values.shape) + "\n")
        for (label, lo, hi), nx in zip(axes, values.shape):
            fh.write(f"# axis: {label} {lo!r} {hi!r} {nx}\n")
        flat = values.reshape(values.shape[0], -1)
        for row in flat:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return path


def read_array(path):
    """Parse a field-array CSV; raises on schema violations."""
    header = []
    with open(path) as fh:
        lines = fh.readlines()
    for ln in lines:
        if ln.startswith("#"):
            header.append(ln[1:].strip())
    if not header or header[0] != ARRAY_SCHEMA:
        raise ValueError(f"{path}: not a {ARRAY_SCHEMA} file")
    shape = None
    axes = []
    for h in header[1:]:
        key, _, rest = h.partition(":")
        key = key.strip()
        if key == "shape":
            shape = tuple(int(v) for v in rest.split())
        elif key == "axis":
            label, lo, hi, nx = rest.split()
            axes.append((label, float(lo), float(hi), int(nx)))
        else:
            raise ValueError(f"{path}: unknown header key {key!r}")
    if shape is None or len(axes) != len(shape):
        raise ValueError(f"{path}: incomplete array header")
    data = np.loadtxt([ln for ln in lines if not ln.startswith("#")],
                      delimiter=",", ndmin=2)
    return data.reshape(shape), axes


def fit_loglog(x, y):
    """Least-squares slope of log(y) vs log(x) plus the fit residual."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    coef = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, lx) - ly) ** 2)))
    return float(coef[0]), float(coef[1]), resid
