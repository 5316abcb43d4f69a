import json
import math

from subflow.cli import main


def run(argv):
    return main(argv)


class TestCurve:
    def test_disk_gallery_sidecar(self, tmp_path):
        out = tmp_path / "out"
        seeds = tmp_path / "seeds.json"
        seeds.write_text("[[0.0, 0.0]]")
        rc = run(["curve", "--space", "disk", "--seeds", str(seeds),
                  "--out", str(out)])
        assert rc == 0
        sidecar = json.loads((out / "curve_0.json").read_text())
        assert abs(sidecar["t_min"] + 1.0) <= 1e-7
        assert abs(sidecar["t_max"] - 1.0) <= 1e-7
        assert sidecar["end_reasons"] == {
            "backward": "left_membership", "forward": "left_membership"
        }
        assert sidecar["membership_audit_ok"] is True

    def test_trace_csv(self, tmp_path):
        out = tmp_path / "out"
        seeds = tmp_path / "seeds.json"
        seeds.write_text("[[0.0, 0.0]]")
        rc = run(["curve", "--space", "disk", "--seeds", str(seeds),
                  "--out", str(out), "--dt", "0.25"])
        assert rc == 0
        lines = (out / "curve_0.csv").read_text().strip().splitlines()
        assert lines[0] == "seed_index,t,x0,x1"
        rows = [line.split(",") for line in lines[1:]]
        for _, t, x0, x1 in rows:
            assert abs(float(x0) - float(t)) <= 1e-8
            assert abs(float(x1)) <= 1e-10

    def test_interval_gallery_default_seeds(self, tmp_path):
        out = tmp_path / "out"
        rc = run(["curve", "--space", "interval01", "--out", str(out)])
        assert rc == 0
        sidecar = json.loads((out / "curve_0.json").read_text())
        x = sidecar["seed"][0]
        assert abs(sidecar["t_min"] + x) <= 1e-7
        assert abs(sidecar["t_max"] - (1.0 - x)) <= 1e-7

    def test_bad_seed_exit_2(self, tmp_path):
        out = tmp_path / "out"
        seeds = tmp_path / "seeds.json"
        seeds.write_text("[[5.0, 5.0]]")
        rc = run(["curve", "--space", "disk", "--seeds", str(seeds),
                  "--out", str(out)])
        assert rc == 2
        assert "error" in json.loads((out / "curve_0.json").read_text())

    def test_missing_space_file_exit_1(self, tmp_path):
        rc = run(["curve", "--space", "no-such-space",
                  "--out", str(tmp_path / "out")])
        assert rc == 1

    def test_conflicting_seed_sources_exit_1(self, tmp_path):
        seeds = tmp_path / "seeds.json"
        seeds.write_text("[[0.0, 0.0]]")
        rc = run(["curve", "--space", "disk", "--seeds", str(seeds),
                  "--grid", "5x5", "--out", str(tmp_path / "out")])
        assert rc == 1


class TestFlow:
    def test_grid_intervals(self, tmp_path):
        out = tmp_path / "out"
        rc = run(["flow", "--space", "disk", "--grid", "5x5",
                  "--out", str(out), "--format", "json"])
        assert rc == 0
        records = json.loads((out / "intervals.json").read_text())
        assert records
        for rec in records:
            x, y = rec["seed"]
            root = math.sqrt(max(1.0 - y * y, 0.0))
            assert abs(rec["t_min"] - (-root - x)) <= 1e-7
            assert abs(rec["t_max"] - (root - x)) <= 1e-7

    def test_sampled_seeds(self, tmp_path):
        out = tmp_path / "out"
        rc = run(["flow", "--space", "disk", "--sample", "5", "--seed", "3",
                  "--out", str(out), "--format", "json"])
        assert rc == 0
        assert len(json.loads((out / "intervals.json").read_text())) == 5

    def test_bad_grid_spec_exit_1(self, tmp_path):
        rc = run(["flow", "--space", "disk", "--grid", "5",
                  "--out", str(tmp_path / "out")])
        assert rc == 1

    def test_horizon_override(self, tmp_path):
        out = tmp_path / "out"
        seeds = tmp_path / "seeds.json"
        seeds.write_text("[[1.0, 0.0]]")
        rc = run(["flow", "--space", "circle-rotation", "--seeds", str(seeds),
                  "--horizon", "2.5", "--out", str(out), "--format", "json"])
        assert rc == 0
        rec = json.loads((out / "intervals.json").read_text())[0]
        assert rec["t_min"] == -2.5 and rec["t_max"] == 2.5

    def test_env_horizon_override(self, tmp_path, monkeypatch):
        out = tmp_path / "out"
        seeds = tmp_path / "seeds.json"
        seeds.write_text("[[1.0, 0.0]]")
        monkeypatch.setenv("SUBFLOW_TOL_HORIZON", "1.5")
        rc = run(["flow", "--space", "circle-rotation", "--seeds", str(seeds),
                  "--out", str(out), "--format", "json"])
        assert rc == 0
        rec = json.loads((out / "intervals.json").read_text())[0]
        assert rec["t_max"] == 1.5


class TestCheck:
    def test_all_checks_pass_on_circle(self, tmp_path):
        report = tmp_path / "report.json"
        rc = run(["check", "--space", "circle-rotation", "--checks", "all",
                  "--out", str(report)])
        assert rc == 0
        data = json.loads(report.read_text())
        assert data["all_passed"] is True
        names = {c["check"] for c in data["checks"]}
        assert names == {"leibniz", "chain_rule", "inverse_rule", "hadamard",
                         "tangency", "point_determined"}
        assert all(c["status"] == "PASS" for c in data["checks"])

    def test_unknown_check_exit_1(self):
        rc = run(["check", "--space", "disk", "--checks", "bogus"])
        assert rc == 1

    def test_tangency_warn_tolerated_by_default(self, tmp_path):
        report = tmp_path / "report.json"
        rc = run(["check", "--space", "circle-rotation",
                  "--components", "1,0",
                  "--checks", "tangency", "--out", str(report)])
        assert rc == 0
        data = json.loads(report.read_text())
        assert data["checks"][0]["status"] == "WARN"

    def test_strict_tangency_exit_2(self, tmp_path):
        rc = run(["check", "--space", "circle-rotation",
                  "--components", "1,0",
                  "--checks", "tangency", "--strict-tangency",
                  "--out", str(tmp_path / "report.json")])
        assert rc == 2

    def test_report_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for path in (a, b):
            rc = run(["check", "--space", "disk",
                      "--checks", "leibniz,chain_rule",
                      "--seed", "5", "--out", str(path)])
            assert rc == 0
        assert a.read_bytes() == b.read_bytes()

    def test_bad_components_exit_1(self):
        rc = run(["check", "--space", "disk", "--components", "x0 +,0",
                  "--checks", "leibniz"])
        assert rc == 1


class TestSample:
    def test_disk_sample(self, tmp_path):
        out = tmp_path / "points.json"
        rc = run(["sample", "--space", "disk", "--sample", "25",
                  "--seed", "2", "--out", str(out)])
        assert rc == 0
        points = json.loads(out.read_text())
        assert len(points) == 25
        for x, y in points:
            assert x * x + y * y <= 1.0 + 1e-9

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for path in (a, b):
            assert run(["sample", "--space", "disk", "--sample", "10",
                        "--seed", "9", "--out", str(path)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestSpaceFiles:
    def test_local_toml_space(self, tmp_path):
        space_file = tmp_path / "band.toml"
        space_file.write_text(
            'name = "band"\n'
            "ambient_dim = 1\n"
            'inequalities = ["-x0", "x0 - 2"]\n'
            "sample_box = [[-0.5, 2.5]]\n"
            "horizon = 50.0\n"
            "seeds = [[1.0]]\n"
            "[derivation]\n"
            'components = ["1"]\n'
        )
        out = tmp_path / "out"
        rc = run(["curve", "--space", str(space_file), "--out", str(out)])
        assert rc == 0
        sidecar = json.loads((out / "curve_0.json").read_text())
        assert abs(sidecar["t_min"] + 1.0) <= 1e-7
        assert abs(sidecar["t_max"] - 1.0) <= 1e-7

    def test_missing_derivation_exit_1(self, tmp_path):
        space_file = tmp_path / "bare.json"
        space_file.write_text(json.dumps({
            "ambient_dim": 1,
            "inequalities": ["-x0", "x0 - 1"],
            "sample_box": [[0.0, 1.0]],
            "seeds": [[0.5]],
        }))
        rc = run(["curve", "--space", str(space_file),
                  "--out", str(tmp_path / "out")])
        assert rc == 1
