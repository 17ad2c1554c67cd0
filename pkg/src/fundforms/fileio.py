"""Field files, CSV export, and run manifests.

A field file is a JSON header describing the chart and tensor layout plus
a sibling ``.bin`` file holding the raw little-endian float64 payload in
row-major order.  CSV export is available for two-dimensional charts.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .chart import Chart
from .errors import FieldError, ShapeMismatchError
from .fields import (
    ImmersionField,
    MetricField,
    NormalConnectionField,
    SecondFormField,
    TensorField,
    VectorOneFormField,
)

_FIELD_KINDS = {
    "metric": MetricField,
    "second_form": SecondFormField,
    "normal_connection": NormalConnectionField,
    "immersion": ImmersionField,
    "one_form": VectorOneFormField,
    "tensor": TensorField,
}


def _bin_path(path: Path) -> Path:
    return path.with_suffix(".bin")


def save_field(path, field) -> Path:
    """Write a field as JSON header + sibling .bin payload; returns the header path."""
    path = Path(path)
    if path.suffix != ".json":
        path = path.with_suffix(".json")
    chart = field.chart
    values = np.ascontiguousarray(field.values, dtype="<f8")
    header = {
        "dim_d": chart.dim_d,
        "codim_k": chart.codim_k,
        "extent": [list(ab) for ab in chart.extent],
        "resolution": list(chart.resolution),
        "tensor_shape": list(values.shape[chart.dim_d:]),
        "dtype": "f64",
        "order": "row-major",
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(header, indent=2) + "\n")
    _bin_path(path).write_bytes(values.tobytes())
    return path


def load_field(path, kind: str = "tensor"):
    """Load a field file as the requested kind (see _FIELD_KINDS)."""
    path = Path(path)
    if kind not in _FIELD_KINDS:
        raise ValueError(f"unknown field kind '{kind}'; options: {sorted(_FIELD_KINDS)}")
    header = json.loads(path.read_text())
    if header.get("dtype") != "f64" or header.get("order") != "row-major":
        raise FieldError(f"unsupported payload encoding in {path}")
    chart = Chart(
        dim_d=header["dim_d"],
        codim_k=header["codim_k"],
        extent=tuple(tuple(ab) for ab in header["extent"]),
        resolution=tuple(header["resolution"]),
    )
    shape = tuple(chart.resolution) + tuple(header["tensor_shape"])
    raw = np.frombuffer(_bin_path(path).read_bytes(), dtype="<f8")
    if raw.size != int(np.prod(shape)):
        raise ShapeMismatchError(
            f"payload of {path} has {raw.size} numbers, header implies {int(np.prod(shape))}"
        )
    return _FIELD_KINDS[kind](chart, raw.reshape(shape))


def export_csv(path, field) -> Path:
    """CSV export for fields on two-dimensional charts: x1, x2, components."""
    path = Path(path)
    chart = field.chart
    if chart.dim_d != 2:
        raise FieldError("CSV export is only defined for d = 2 charts")
    X, Y = chart.meshgrid()
    flat = field.values.reshape(chart.shape + (-1,))
    ncomp = flat.shape[-1]
    lines = ["x1,x2," + ",".join(f"c{i}" for i in range(ncomp))]
    for i in range(chart.resolution[0]):
        for j in range(chart.resolution[1]):
            comps = ",".join(repr(float(v)) for v in flat[i, j])
            lines.append(f"{X[i, j]!r},{Y[i, j]!r},{comps}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_csv(path, header_cols, rows) -> Path:
    """Plain CSV with full-precision floats (repr), deterministic bytes."""
    path = Path(path)
    lines = [",".join(header_cols)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, (int, float, np.floating)) else str(v) for v in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def sha256_of(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_manifest(out_dir, subcommand: str, params: dict, input_paths, seed: int) -> Path:
    """Run manifest: hashed inputs, parameters, versions, seed.

    Contains no volatile data, so identical runs produce identical
    manifests (and, downstream, bitwise-identical CSV outputs).
    """
    import scipy

    from . import __version__

    inputs = {}
    for p in input_paths:
        p = Path(p)
        inputs[p.name] = sha256_of(p)
        if _bin_path(p).exists() and p.suffix == ".json":
            inputs[_bin_path(p).name] = sha256_of(_bin_path(p))
    manifest = {
        "subcommand": subcommand,
        "parameters": params,
        "inputs": inputs,
        "seed": seed,
        "versions": {
            "fundforms": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
    }
    out = Path(out_dir) / "manifest.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out
