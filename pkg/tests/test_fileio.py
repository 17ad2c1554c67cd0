import json

import numpy as np
import pytest

from fundforms.errors import FieldError, ShapeMismatchError
from fundforms import fields as F
from fundforms import fileio
from fundforms import geometries as G
from fundforms import immersion as I


class TestFieldFiles:
    def test_round_trip_immersion(self, tmp_path):
        f = G.sphere_cap_immersion(17)
        path = fileio.save_field(tmp_path / "f.json", f)
        assert path.exists() and path.with_suffix(".bin").exists()
        loaded = fileio.load_field(path, "immersion")
        assert loaded.chart == f.chart
        assert np.array_equal(loaded.values, f.values)

    def test_round_trip_metric(self, tmp_path):
        g = I.induced_metric(G.graph_xy_immersion(9))
        path = fileio.save_field(tmp_path / "g", g)
        loaded = fileio.load_field(path, "metric")
        assert np.array_equal(loaded.values, g.values)

    def test_header_schema(self, tmp_path):
        f = G.plane_immersion(9)
        path = fileio.save_field(tmp_path / "f.json", f)
        header = json.loads(path.read_text())
        assert set(header) == {
            "dim_d", "codim_k", "extent", "resolution", "tensor_shape", "dtype", "order",
        }
        assert header["dtype"] == "f64"
        assert header["order"] == "row-major"
        assert header["tensor_shape"] == [3]

    def test_payload_little_endian(self, tmp_path):
        f = G.plane_immersion(9)
        path = fileio.save_field(tmp_path / "f.json", f)
        raw = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8")
        assert raw.size == 9 * 9 * 3

    def test_truncated_payload_rejected(self, tmp_path):
        f = G.plane_immersion(9)
        path = fileio.save_field(tmp_path / "f.json", f)
        data = path.with_suffix(".bin").read_bytes()
        path.with_suffix(".bin").write_bytes(data[:-8])
        with pytest.raises(ShapeMismatchError):
            fileio.load_field(path, "immersion")

    def test_unknown_kind(self, tmp_path):
        f = G.plane_immersion(9)
        path = fileio.save_field(tmp_path / "f.json", f)
        with pytest.raises(ValueError):
            fileio.load_field(path, "nonsense")


class TestCsv:
    def test_export_csv_shape(self, tmp_path):
        f = G.plane_immersion(5)
        out = fileio.export_csv(tmp_path / "f.csv", f)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "x1,x2,c0,c1,c2"
        assert len(lines) == 1 + 25

    def test_write_csv_full_precision(self, tmp_path):
        val = 1.0 / 3.0
        out = fileio.write_csv(tmp_path / "t.csv", ["a"], [(val,)])
        assert repr(val) in out.read_text()


class TestManifest:
    def test_deterministic_and_hashes_inputs(self, tmp_path):
        f = G.plane_immersion(5)
        fpath = fileio.save_field(tmp_path / "f.json", f)
        m1 = fileio.write_manifest(tmp_path / "o1", "forms", {"p": 4.0}, [fpath], seed=3)
        m2 = fileio.write_manifest(tmp_path / "o2", "forms", {"p": 4.0}, [fpath], seed=3)
        assert m1.read_bytes() == m2.read_bytes()
        data = json.loads(m1.read_text())
        assert data["seed"] == 3
        assert "f.json" in data["inputs"] and "f.bin" in data["inputs"]
        assert data["versions"]["fundforms"]
