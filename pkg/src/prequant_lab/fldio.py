"""The ``.fld`` container for forms, gauge maps and metrics.

Layout: one line of JSON, a newline, then little-endian float64 values in
lexicographic node order with components outermost.  Complex matrix entries
are split into separate ``.re`` / ``.im`` components, so the header's
``components`` list spells out exactly what every block of the array holds.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import liealg
from .fields import Axis, FormField, GridManifold, multi_indices
from .gauge import GaugeMap
from .metrics import MetricField

FORMAT_VERSION = 1


def _chart(base: GridManifold) -> list[dict]:
    return [{"name": a.name, "lower": a.lower, "upper": a.upper, "n": a.n, "periodic": a.periodic}
            for a in base.axes]


def _base_from(header) -> GridManifold:
    fd = header.get("fd_order", 4)
    axes = tuple(Axis(c["name"], c["lower"], c["upper"], c["n"], c["periodic"], fd) for c in header["chart"])
    return GridManifold(header["model_id"], axes)


def _slot_labels(base, degree):
    names = [a.name for a in base.axes]
    out = []
    for I in multi_indices(base.dim, degree):
        out.append("^".join("d" + names[i] for i in I) if I else "1")
    return out


def _entry_labels(value_shape, complex_parts):
    if not value_shape:
        return ["re", "im"] if complex_parts else [""]
    idx = list(np.ndindex(*value_shape))
    parts = ("re", "im") if complex_parts else ("",)
    return [f"[{','.join(map(str, i))}]" + (f".{p}" if p else "") for i in idx for p in parts]


def _split(values, value_shape, complex_parts):
    """(*grid, *value_shape) -> (n_entries, *grid) in the label order above."""
    nval = len(value_shape)
    grid_ndim = values.ndim - nval
    moved = np.moveaxis(values, tuple(range(grid_ndim, values.ndim)), tuple(range(nval)))
    flat = moved.reshape((-1,) + values.shape[:grid_ndim])
    if not complex_parts:
        return np.real(flat).astype("<f8")
    return np.stack([flat.real, flat.imag], axis=1).reshape((-1,) + flat.shape[1:]).astype("<f8")


def _merge(blocks, value_shape, complex_parts, grid_shape):
    if complex_parts:
        blocks = blocks.reshape((-1, 2) + grid_shape)
        blocks = blocks[:, 0] + 1j * blocks[:, 1]
    moved = blocks.reshape(tuple(value_shape) + grid_shape)
    nval = len(value_shape)
    return np.moveaxis(moved, tuple(range(nval)), tuple(range(moved.ndim - nval, moved.ndim)))


def _write(path, header, data):
    path = Path(path)
    header = dict(header, format="fld", version=FORMAT_VERSION, count=int(data.size))
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
    return path


def read_raw(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype="<f8")
    if header.get("format") != "fld":
        raise ValueError(f"{path} is not a .fld file")
    if data.size != header["count"]:
        raise ValueError(f"{path}: expected {header['count']} values, found {data.size}")
    return header, data


def _common(base, degree, value_kind, components, extra=None):
    h = {"model_id": base.model_id, "resolution": list(base.shape), "chart": _chart(base),
         "fd_order": base.axes[0].fd_order, "degree": degree, "value_kind": value_kind,
         "components": components}
    h.update(extra or {})
    return h


def write_form(path, form: FormField):
    cplx = np.iscomplexobj(form.comps)
    entries = _entry_labels(form.value_shape, cplx)
    labels = [f"{s}{e}" for s in _slot_labels(form.base, form.degree) for e in entries]
    data = np.concatenate([_split(c, form.value_shape, cplx) for c in form.comps])
    kind = "lie" if form.algebra else ("complex" if cplx else "real")
    header = _common(form.base, form.degree, kind, labels,
                     {"algebra_id": form.algebra, "value_shape": list(form.value_shape), "complex": cplx})
    return _write(path, header, data)


def write_gauge(path, g: GaugeMap):
    shape = g.values.shape[g.base.dim:]
    labels = _entry_labels(shape, True)
    header = _common(g.base, 0, "group", labels, {"group_id": g.group_id, "value_shape": list(shape),
                                                   "complex": True, "name": g.name})
    return _write(path, header, _split(g.values, shape, True))


def write_metric(path, g: MetricField):
    n = g.base.dim
    names = [a.name for a in g.base.axes]
    labels = [f"g_{names[i]}{names[j]}" for i in range(n) for j in range(n)]
    header = _common(g.base, 0, "real", labels, {"value_shape": [n, n], "complex": False, "tensor": "symmetric"})
    return _write(path, header, _split(g.values, (n, n), False))


def read(path):
    """Load a .fld file as a FormField, GaugeMap or MetricField according to its value_kind."""
    header, data = read_raw(path)
    base = _base_from(header)
    grid = base.shape
    vshape = tuple(header.get("value_shape", []))
    cplx = header.get("complex", False)
    blocks = data.reshape((-1,) + grid)
    if header["value_kind"] == "group":
        vals = _merge(blocks, vshape, True, grid)
        return GaugeMap(base, header["group_id"], vals, name=header.get("name", "gauge"))
    if header.get("tensor") == "symmetric":
        return MetricField(base, _merge(blocks, vshape, False, grid))
    degree = header["degree"]
    per = int(np.prod(vshape, dtype=int)) * (2 if cplx else 1)
    comps = np.stack([_merge(blocks[k * per:(k + 1) * per], vshape, cplx, grid)
                      for k in range(len(multi_indices(base.dim, degree)))])
    alg = header.get("algebra_id")
    if alg is not None and alg not in liealg.ALGEBRA_OF.values():
        raise ValueError(f"unknown algebra {alg!r} in {path}")
    return FormField(base, degree, comps, alg)
