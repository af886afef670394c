"""Strict readers for the solver's documented output formats.

Only files written by the experiment CLI are accepted: the versioned
``fcifem-result-v1`` JSON summaries, the ``fcifem-array-v1`` field-array
CSVs, and plain one-header-line series CSVs.  Unknown schema versions,
header keys, or result fields are rejected loudly rather than guessed at.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

RESULT_SCHEMA = "fcifem-result-v1"
ARRAY_SCHEMA = "fcifem-array-v1"
RESULT_KEYS = {"schema", "problem", "config", "metrics", "matrix_stats",
               "series", "artifacts", "oracle_modes"}


class FormatError(ValueError):
    pass


def read_result(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise FormatError(f"{path}: not valid JSON ({err})") from err
    if doc.get("schema") != RESULT_SCHEMA:
        raise FormatError(f"{path}: expected schema {RESULT_SCHEMA}, "
                          f"got {doc.get('schema')!r}")
    unknown = set(doc) - RESULT_KEYS
    if unknown:
        raise FormatError(f"{path}: unknown result fields {sorted(unknown)}")
    for key in ("problem", "config", "metrics", "artifacts"):
        if key not in doc:
            raise FormatError(f"{path}: missing result field {key!r}")
    return doc


def read_series(path):
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
        if not header or any(ch.isdigit() for ch in header.split(",")[0]):
            raise FormatError(f"{path}: series file has no header row")
        columns = header.split(",")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as err:
            raise FormatError(f"{path}: bad series row ({err})") from err
    if data.size and data.shape[1] != len(columns):
        raise FormatError(f"{path}: {data.shape[1]} columns vs "
                          f"{len(columns)} header names")
    return columns, data


def read_array(path):
    path = Path(path)
    lines = path.read_text().splitlines()
    header = [ln[1:].strip() for ln in lines if ln.startswith("#")]
    if not header or header[0] != ARRAY_SCHEMA:
        raise FormatError(f"{path}: not an {ARRAY_SCHEMA} file")
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
            raise FormatError(f"{path}: unknown array header key {key!r}")
    if shape is None or len(axes) != len(shape):
        raise FormatError(f"{path}: incomplete array header")
    for (label, lo, hi, nx), s in zip(axes, shape):
        if nx != s:
            raise FormatError(f"{path}: axis {label} length {nx} != {s}")
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    data = np.loadtxt(body, delimiter=",", ndmin=2)
    try:
        return data.reshape(shape), axes
    except ValueError as err:
        raise FormatError(f"{path}: body does not match shape {shape}") from err
