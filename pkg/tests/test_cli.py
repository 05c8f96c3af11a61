import csv
import json
import xml.etree.ElementTree as ET

import pytest

from hannay_lab import cli
from hannay_lab.errors import SchemaError


def scenario(name):
    return json.loads(cli.example_path(name).read_text())


def write(tmp_path, data, name="s.scenario"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


class TestSchema:
    @pytest.mark.parametrize(
        "name", ["constant_gho", "hannay_loop", "pendulum", "damped", "quadratic_friction", "hirota"]
    )
    def test_shipped_examples_validate(self, name):
        assert cli.load_scenario(cli.example_path(name))["name"] == name

    def test_missing_field_path(self):
        sc = scenario("constant_gho")
        del sc["schedule"]["gamma"]
        with pytest.raises(SchemaError) as exc:
            cli.validate_scenario(sc)
        assert exc.value.path == "schedule.gamma"

    def test_unknown_model(self):
        sc = scenario("constant_gho")
        sc["model"] = "van-der-pol"
        with pytest.raises(SchemaError) as exc:
            cli.validate_scenario(sc)
        assert exc.value.path == "model"

    def test_analysis_not_offered_for_model(self):
        sc = scenario("damped")
        sc["analyses"] = ["phases"]
        with pytest.raises(SchemaError) as exc:
            cli.validate_scenario(sc)
        assert exc.value.path == "analyses"

    def test_wrong_schema_version(self):
        sc = scenario("constant_gho")
        sc["schema_version"] = 2
        with pytest.raises(SchemaError):
            cli.validate_scenario(sc)

    def test_stray_key(self):
        sc = scenario("constant_gho")
        sc["colour"] = "blue"
        with pytest.raises(SchemaError):
            cli.validate_scenario(sc)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "x.scenario"
        path.write_text("{not json")
        with pytest.raises(SchemaError):
            cli.load_scenario(path)

    def test_hash_ignores_key_order(self):
        sc = scenario("constant_gho")
        shuffled = dict(reversed(list(sc.items())))
        assert cli.scenario_hash(sc) == cli.scenario_hash(shuffled)
        sc["tolerance"] = 1e-10
        assert cli.scenario_hash(sc) != cli.scenario_hash(shuffled)


class TestRun:
    def test_constant_parameters(self, tmp_path, capsys):
        code = cli.main(["run", str(cli.example_path("constant_gho")), "--out", str(tmp_path)])
        assert code == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        ph = summary["phases"]
        assert ph["theta_g_line"] == 0.0
        assert ph["invariant_drift"] < 1e-10
        assert summary["errors"] == []
        assert {"timestamp", "wall_time_s"} <= set(summary["metadata"])
        with open(tmp_path / "trajectory.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "t" and len(rows) > 10
        for svg in tmp_path.glob("*.svg"):
            assert ET.parse(svg).getroot().tag.endswith("svg")

    def test_plots_off(self, tmp_path):
        assert cli.main(["run", str(cli.example_path("constant_gho")), "--out", str(tmp_path), "--plots", "off"]) == 0
        assert not list(tmp_path.glob("*.svg"))

    def test_hannay_loop(self, tmp_path):
        assert cli.main(["run", str(cli.example_path("hannay_loop")), "--out", str(tmp_path), "--plots", "off"]) == 0
        ph = json.loads((tmp_path / "summary.json").read_text())["phases"]
        assert abs(ph["residual"]) < 0.05
        assert abs(ph["theta_g_line"] - ph["theta_g_surface"]) < 1e-6

    @pytest.mark.parametrize("name", ["pendulum", "damped", "quadratic_friction", "hirota"])
    def test_other_examples(self, tmp_path, name):
        assert cli.main(["run", str(cli.example_path(name)), "--out", str(tmp_path), "--plots", "off"]) == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["model"] == scenario(name)["model"]

    def test_schema_error_exit_code(self, tmp_path, capsys):
        sc = scenario("constant_gho")
        del sc["schedule"]["gamma"]
        path = write(tmp_path, sc)
        assert cli.main(["run", str(path), "--out", str(tmp_path / "o")]) == 2
        assert "schedule.gamma" in capsys.readouterr().err

    def test_byte_identical_reruns(self, tmp_path):
        outs = []
        for k in range(2):
            out = tmp_path / f"r{k}"
            cli.main(["run", str(cli.example_path("constant_gho")), "--out", str(out)])
            outs.append(out)
        a, b = outs
        assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
        assert cli.strip_metadata((a / "summary.json").read_text()) == cli.strip_metadata((b / "summary.json").read_text())


class TestSweep:
    def test_needs_two_values(self, tmp_path, capsys):
        code = cli.main(["sweep", str(cli.example_path("constant_gho")), "--epsilons", "0.01", "--out", str(tmp_path)])
        assert code == 1
        assert "at least two epsilon values required" in capsys.readouterr().err

    def test_rows_follow_input_order(self):
        eps = [0.02, 0.005, 0.01]
        rows = cli.run_sweep(scenario("constant_gho"), eps, jobs=2)
        assert [r["epsilon"] for r in rows] == eps
        assert all(r["error"] == "" for r in rows)

    def test_failed_row_does_not_stop_sweep(self, tmp_path, capsys):
        code = cli.main(
            ["sweep", str(cli.example_path("constant_gho")), "--epsilons", "0.01", "1.0", "0.02", "--out", str(tmp_path)]
        )
        assert code == 1
        with open(tmp_path / "sweep.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [float(r["epsilon"]) for r in rows] == [0.01, 1.0, 0.02]
        assert rows[1]["error"] and not rows[0]["error"] and not rows[2]["error"]
        assert "epsilon=1.0" in capsys.readouterr().err
        ET.parse(tmp_path / "sweep_drift.svg")

    def test_drift_decays_with_epsilon(self):
        sc = scenario("hannay_loop")
        small = cli.run_sweep(sc, [1e-2, 5e-3], tol=1e-14, jobs=2)
        d = [r["invariant_drift"] for r in small]
        # already at the floating-point floor here
        assert d[0] / d[1] > 4 or max(d) <= 1e-12
        big = cli.run_sweep(sc, [0.1, 0.05], tol=1e-14, jobs=2)
        assert big[0]["invariant_drift"] / big[1]["invariant_drift"] > 4

    def test_sweep_rejects_unscheduled_model(self):
        with pytest.raises(SchemaError):
            cli.run_sweep(scenario("damped"), [0.1, 0.2])


class TestVerify:
    def test_multipliers_suite(self, capsys):
        assert cli.main(["verify", "multipliers"]) == 0
        out = capsys.readouterr().out
        assert "[FAIL]" not in out
        assert out.strip().endswith("checks passed")

    def test_unknown_suite(self):
        with pytest.raises(SystemExit):
            cli.main(["verify", "everything"])

    def test_user_scenario_rows(self, capsys):
        assert cli.main(["verify", "multipliers", "--scenario", str(cli.example_path("constant_gho"))]) == 0
        assert "|residual|" in capsys.readouterr().out


def test_svg_log_axis():
    svg = cli.svg_plot([1, 2, 3], [1e-3, 1e-6, 1e-9], "t", "x", "y", logy=True)
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
