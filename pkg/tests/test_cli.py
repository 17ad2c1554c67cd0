import json

import numpy as np
import pytest

from fundforms import cli, fileio
from fundforms import fields as F
from fundforms import geometries as G
from fundforms import immersion as I


@pytest.fixture
def cylinder_inputs(tmp_path):
    f = G.cylinder_immersion(17)
    g = I.induced_metric(f)
    B, nabE = I.second_form(f)
    paths = {
        "f": fileio.save_field(tmp_path / "f.json", f),
        "g": fileio.save_field(tmp_path / "g.json", g),
        "B": fileio.save_field(tmp_path / "B.json", B),
        "nablaE": fileio.save_field(tmp_path / "nablaE.json", nabE),
    }
    return paths, tmp_path


def run(argv):
    return cli.main(argv)


class TestForms:
    def test_forms_then_check_gcr(self, cylinder_inputs):
        paths, tmp = cylinder_inputs
        assert run(["forms", "-i", str(paths["f"]), "--output-dir", str(tmp / "forms")]) == 0
        code = run([
            "check-gcr",
            "-i", str(tmp / "forms/g.json"),
            "-i", str(tmp / "forms/B.json"),
            "-i", str(tmp / "forms/nablaE.json"),
            "--output-dir", str(tmp / "gcr"),
        ])
        assert code == 0
        rep = json.loads((tmp / "gcr/residual_report.json").read_text())
        assert rep["gauss"] <= rep["compatibility_threshold"]
        assert rep["flags"] == ["codimension-one: Ricci vacuous"]

    def test_missing_input_is_validation_error(self, tmp_path):
        assert run(["forms", "-i", str(tmp_path / "nope.json"), "--output-dir", str(tmp_path)]) == 2


class TestReconstruct:
    def test_reconstruct_and_align(self, cylinder_inputs):
        paths, tmp = cylinder_inputs
        code = run([
            "reconstruct",
            "-i", str(paths["g"]), "-i", str(paths["B"]), "-i", str(paths["nablaE"]),
            "--output-dir", str(tmp / "rec"),
        ])
        assert code == 0
        diag = json.loads((tmp / "rec/reconstruct_diagnostics.json").read_text())
        assert diag["compatible"] is True
        code = run([
            "align",
            "-i", str(tmp / "rec/f.json"), "-i", str(paths["f"]),
            "--output-dir", str(tmp / "al"),
        ])
        assert code == 0
        motion = json.loads((tmp / "al/motion.json").read_text())
        assert motion["quotient_distance_w2"] < 0.05

    def test_corrupted_B_fails_without_force(self, tmp_path):
        # scaling B violates the Gauss equation on curved data (the sphere);
        # cylinder data stays developable under scaling, so it is no use here
        g, B, nabE = G.sphere_cap_forms(17)
        gp = fileio.save_field(tmp_path / "g.json", g)
        np_ = fileio.save_field(tmp_path / "nablaE.json", nabE)
        Bbad = F.SecondFormField(B.chart, 1.5 * B.values)
        bad_path = fileio.save_field(tmp_path / "Bbad.json", Bbad)
        args = [
            "reconstruct",
            "-i", str(gp), "-i", str(bad_path), "-i", str(np_),
            "--output-dir", str(tmp_path / "bad"),
        ]
        assert run(args) == 3
        assert run(args + ["--force"]) == 0
        diag = json.loads((tmp_path / "bad/reconstruct_diagnostics.json").read_text())
        assert diag["compatible"] is False
        assert diag["residuals"]["gauss"] > 0

    def test_p_below_dimension_rejected(self, cylinder_inputs):
        paths, tmp = cylinder_inputs
        code = run([
            "reconstruct",
            "-i", str(paths["g"]), "-i", str(paths["B"]), "-i", str(paths["nablaE"]),
            "--output-dir", str(tmp / "p2"), "--p", "2.0",
        ])
        assert code == 2

    def test_init_file_respected(self, cylinder_inputs):
        paths, tmp = cylinder_inputs
        init = {"f0": [5.0, 6.0, 7.0]}
        (tmp / "init.json").write_text(json.dumps(init))
        code = run([
            "reconstruct",
            "-i", str(paths["g"]), "-i", str(paths["B"]), "-i", str(paths["nablaE"]),
            "-i", str(tmp / "init.json"),
            "--output-dir", str(tmp / "rec2"),
        ])
        assert code == 0
        f = fileio.load_field(tmp / "rec2/f.json", "immersion")
        assert np.allclose(f.values[0, 0], [5.0, 6.0, 7.0])


class TestConfigFile:
    def test_flags_override_config(self, cylinder_inputs):
        paths, tmp = cylinder_inputs
        cfgfile = tmp / "run.cfg"
        cfgfile.write_text("p = 6.0\nseed = 11\n# comment\n")
        code = run([
            "check-gcr",
            "-i", str(paths["g"]), "-i", str(paths["B"]), "-i", str(paths["nablaE"]),
            "--output-dir", str(tmp / "cfg"),
            "--config", str(cfgfile),
            "--p", "4.0",
        ])
        assert code == 0
        manifest = json.loads((tmp / "cfg/manifest.json").read_text())
        assert manifest["parameters"]["p"] == 4.0  # flag wins
        assert manifest["seed"] == 11  # config supplies the rest

    def test_malformed_config_is_validation_error(self, cylinder_inputs):
        paths, tmp = cylinder_inputs
        cfgfile = tmp / "bad.cfg"
        cfgfile.write_text("p four\n")
        code = run([
            "check-gcr",
            "-i", str(paths["g"]), "-i", str(paths["B"]), "-i", str(paths["nablaE"]),
            "--output-dir", str(tmp / "x"), "--config", str(cfgfile),
        ])
        assert code == 2


class TestExperiments:
    def test_depend_smoke(self, tmp_path):
        spec = tmp_path / "dep.json"
        spec.write_text(json.dumps({"s_values": [0.25, 0.125, 0.0625], "resolution": 17}))
        assert run(["depend", "-i", str(spec), "--output-dir", str(tmp_path / "dep")]) == 0
        rows = (tmp_path / "dep/depend.csv").read_text().strip().splitlines()
        assert rows[0].startswith("s,T_dist,V_dist")
        assert len(rows) == 4

    def test_rigidity_smoke_and_determinism(self, tmp_path):
        spec = tmp_path / "rig.json"
        spec.write_text(json.dumps({"t_values": [0.125, 0.0625], "resolution": 17, "random_rotations": 3}))
        for out in ("r1", "r2"):
            assert run([
                "rigidity", "-i", str(spec), "--output-dir", str(tmp_path / out), "--seed", "5",
            ]) == 0
        b1 = (tmp_path / "r1/rigidity.csv").read_bytes()
        b2 = (tmp_path / "r2/rigidity.csv").read_bytes()
        assert b1 == b2
        assert (tmp_path / "r1/manifest.json").read_bytes() == (tmp_path / "r2/manifest.json").read_bytes()

    def test_converge_smoke(self, tmp_path):
        spec = tmp_path / "conv.json"
        spec.write_text(json.dumps({
            "eps_values": [0.25, 0.125, 0.0625],
            "resolution": [257, 9],
        }))
        code = run([
            "converge", "-i", str(spec), "--output-dir", str(tmp_path / "conv"),
            "--dict-size", "3",
        ])
        assert code == 0
        summary = json.loads((tmp_path / "conv/converge_summary.json").read_text())
        assert summary["J_sum_slope"] > 0
        rows = (tmp_path / "conv/converge.csv").read_text().strip().splitlines()
        assert len(rows) == 4

    def test_unknown_generator_rejected(self, tmp_path):
        spec = tmp_path / "conv.json"
        spec.write_text(json.dumps({"generator": "nope"}))
        assert run(["converge", "-i", str(spec), "--output-dir", str(tmp_path / "x")]) == 2
