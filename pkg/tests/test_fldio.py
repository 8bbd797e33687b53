import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prequant_lab import fields, fldio, gauge, metrics, smooth

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=12, deadline=None)
@given(seeds, st.sampled_from(["T2", "T3", "SlabT2", "SolidTorus"]), st.integers(0, 2),
       st.sampled_from([None, "u1", "su2"]))
def test_form_round_trip(tmp_path_factory, seed, model, degree, alg):
    base = fields.make_model(model, 6, fd_order=8)
    rng = np.random.default_rng(seed)
    count = len(fields.multi_indices(base.dim, degree))
    if alg is None:
        comps = rng.standard_normal((count,) + base.shape)
    else:
        comps = smooth.LieOneForm(base, alg, rng).form().comps[:1].repeat(count, axis=0)
    form = fields.FormField(base, degree, comps, alg)
    path = tmp_path_factory.mktemp("fld") / "form.fld"
    fldio.write_form(path, form)
    back = fldio.read(path)
    assert back.base == base and back.degree == degree and back.algebra == alg
    assert np.array_equal(back.comps, form.comps)
    assert back.base.axes[0].fd_order == 8


def test_gauge_map_round_trip(tmp_path):
    base = fields.torus(3, 8)
    g = gauge.su2_degree_map(base, 1)
    fldio.write_gauge(tmp_path / "g.fld", g)
    back = fldio.read(tmp_path / "g.fld")
    assert isinstance(back, gauge.GaugeMap) and back.group_id == "SU2"
    assert np.array_equal(back.values, g.values)


def test_metric_round_trip(tmp_path):
    solid = fields.solid_torus(8)
    h = smooth.CartesianTensor(3, np.random.default_rng(1), periods=(4, 4, 1.0))
    g = metrics.perturbed_metric(solid, h)
    fldio.write_metric(tmp_path / "m.fld", g)
    back = fldio.read(tmp_path / "m.fld")
    assert isinstance(back, metrics.MetricField)
    assert np.array_equal(back.values, g.values)
    header, _ = fldio.read_raw(tmp_path / "m.fld")
    assert header["components"][:3] == ["g_rr", "g_rtheta", "g_rz"]
    assert header["value_kind"] == "real"


def test_layout_is_header_line_then_little_endian_doubles(tmp_path):
    base = fields.torus(2, 5)
    vals = np.arange(2 * 25, dtype=float).reshape(2, 5, 5)
    fldio.write_form(tmp_path / "a.fld", fields.FormField(base, 1, vals))
    raw = (tmp_path / "a.fld").read_bytes()
    line, body = raw.split(b"\n", 1)
    header = json.loads(line)
    assert header["components"] == ["dx", "dy"]
    assert header["count"] == 50 and header["resolution"] == [5, 5]
    # components outermost, then nodes in lexicographic order
    assert np.array_equal(np.frombuffer(body, dtype="<f8"), vals.ravel())


def test_complex_entries_are_split_into_parts(tmp_path):
    base = fields.torus(2, 5)
    form = smooth.LieOneForm(base, "su2", np.random.default_rng(2)).form()
    fldio.write_form(tmp_path / "b.fld", form)
    header, data = fldio.read_raw(tmp_path / "b.fld")
    assert header["components"][:3] == ["dx[0,0].re", "dx[0,0].im", "dx[0,1].re"]
    assert data.size == 2 * 4 * 2 * 25
    assert header["value_kind"] == "lie"


def test_bad_files_are_rejected(tmp_path):
    bad = tmp_path / "bad.fld"
    bad.write_bytes(json.dumps({"format": "csv"}).encode() + b"\n")
    with pytest.raises(ValueError):
        fldio.read(bad)
    base = fields.torus(2, 5)
    good = tmp_path / "good.fld"
    fldio.write_form(good, fields.FormField(base, 0, np.ones((1, 5, 5))))
    truncated = tmp_path / "short.fld"
    truncated.write_bytes(good.read_bytes()[:-8])
    with pytest.raises(ValueError):
        fldio.read(truncated)
    line, body = good.read_bytes().split(b"\n", 1)
    header = json.loads(line)
    header["algebra_id"] = "e8"
    odd = tmp_path / "odd.fld"
    odd.write_bytes(json.dumps(header).encode() + b"\n" + body)
    with pytest.raises(ValueError):
        fldio.read(odd)
