"""
Reading and writing run artifacts.

Field binary format (little endian):
    12-byte magic | u32 version | u32 n | u32 m | payload
payload is row-major float64 (ScalarField, shape (m,)*2n) or complex128 (Form11, shape (m,)*2n + (n, n)),
i.e. interleaved real/imag pairs. Every field file gets a JSON sidecar '<file>.json'.
---
Torus Monge-Ampere laboratory
"""

import os
import json
import math
import struct

import h5py
import numpy as np
import pandas as pd

from LAB_HELPERS.LAB_constants import (
    CONVENTION_TAG, FIELD_FORMAT_VERSION, FIELD_MAGIC_FORM11, FIELD_MAGIC_SCALAR, IO_INFO,
)
from LAB_HELPERS.LAB_errors import InputError
from MODELS.CALCULUS.complex_calculus import Form11, PeriodicGrid, ScalarField

HEADER = struct.Struct("<12sIII")
CSV_FLOAT_FORMAT = "%.12e"


def _sidecar(path, kind, grid, provenance):
    payload = {
        "convention": CONVENTION_TAG,
        "kind": kind,
        "complex_dim": grid.complex_dim,
        "resolution": grid.resolution,
        "spacing": grid.spacing,
        "stencil": grid.stencil,
        "provenance": provenance or {},
    }
    save_json(payload, path + ".json")
    return path + ".json"


def write_scalar_field(field: ScalarField, path, provenance=None):
    grid = field.grid
    with open(path, "wb") as file:
        file.write(HEADER.pack(FIELD_MAGIC_SCALAR, FIELD_FORMAT_VERSION, grid.complex_dim, grid.resolution))
        file.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C"))
    return path, _sidecar(path, "scalar", grid, provenance)


def write_form11(form: Form11, path, provenance=None):
    grid = form.grid
    n = grid.complex_dim
    coeff = np.ascontiguousarray(np.broadcast_to(form.coeff, grid.shape + (n, n)), dtype="<c16")
    with open(path, "wb") as file:
        file.write(HEADER.pack(FIELD_MAGIC_FORM11, FIELD_FORMAT_VERSION, n, grid.resolution))
        file.write(coeff.tobytes(order="C"))
    return path, _sidecar(path, "form11", grid, provenance)


def _read_header(buffer, expected_magic, path):
    if len(buffer) < HEADER.size:
        raise InputError(f"{path}: truncated field header")
    magic, version, n, m = HEADER.unpack_from(buffer)
    if magic != expected_magic:
        raise InputError(f"{path}: wrong magic {magic!r}")
    if version != FIELD_FORMAT_VERSION:
        raise InputError(f"{path}: unsupported field format version {version}")
    return n, m


def _stencil_from_sidecar(path):
    try:
        with open(path + ".json", "r") as file:
            return json.load(file).get("stencil", "central")
    except FileNotFoundError:
        return "central"


def read_scalar_field(path) -> ScalarField:
    with open(path, "rb") as file:
        buffer = file.read()
    n, m = _read_header(buffer, FIELD_MAGIC_SCALAR, path)
    grid = PeriodicGrid(n, m, _stencil_from_sidecar(path))
    expected = grid.num_points * 8
    if len(buffer) - HEADER.size != expected:
        raise InputError(f"{path}: payload has {len(buffer) - HEADER.size} bytes, expected {expected}")
    values = np.frombuffer(buffer, dtype="<f8", offset=HEADER.size).reshape(grid.shape).astype(float)
    return ScalarField(grid, values)


def read_form11(path) -> Form11:
    with open(path, "rb") as file:
        buffer = file.read()
    n, m = _read_header(buffer, FIELD_MAGIC_FORM11, path)
    grid = PeriodicGrid(n, m, _stencil_from_sidecar(path))
    expected = grid.num_points * n * n * 16
    if len(buffer) - HEADER.size != expected:
        raise InputError(f"{path}: payload has {len(buffer) - HEADER.size} bytes, expected {expected}")
    coeff = np.frombuffer(buffer, dtype="<c16", offset=HEADER.size).reshape(grid.shape + (n, n)).astype(complex)
    return Form11(grid, coeff)


def write_hdf5_bundle(path, fields: dict, attributes=None):
    """All fields of a run in one HDF5 file, one dataset per field."""
    with h5py.File(path, "w") as file:
        for key, value in (attributes or {}).items():
            file.attrs[key] = value
        for name, field in fields.items():
            if isinstance(field, ScalarField):
                data = field.values
            elif isinstance(field, Form11):
                data = np.ascontiguousarray(np.broadcast_to(
                    field.coeff, field.grid.shape + field.coeff.shape[-2:]))
            else:
                data = np.asarray(field)
            dataset = file.create_dataset(name, data=data)
            if hasattr(field, "grid"):
                dataset.attrs["complex_dim"] = field.grid.complex_dim
                dataset.attrs["resolution"] = field.grid.resolution
                dataset.attrs["convention"] = CONVENTION_TAG
    return path


def read_hdf5_bundle(path):
    with h5py.File(path, "r") as file:
        return {name: np.array(file[name]) for name in file.keys()}


def to_builtin(value):
    """JSON-safe copy: numpy scalars and arrays to Python types, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def save_json(payload, path):
    with open(path, "w") as file:
        json.dump(to_builtin(payload), file, sort_keys=True, indent=4, separators=(',', ': '))
        file.write("\n")
    return path


def write_csv(rows, path, columns=None):
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(to_builtin(list(rows)), columns=columns)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return path


def write_plot_data(path, x, y, header):
    """Two-column whitespace text, readable by gnuplot."""
    with open(path, "w") as file:
        file.write(f"# {header}\n")
        for a, b in zip(x, y):
            file.write(f"{float(a):.12e} {float(b):.12e}\n")
    return path


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def announce(path, verbose):
    if verbose:
        print(f"{IO_INFO} wrote {path}")
    return path
