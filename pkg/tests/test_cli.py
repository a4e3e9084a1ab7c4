import csv
import json
from importlib import resources
from pathlib import Path

import pytest

from weaktrans.cli import main, run

SCENARIOS = resources.files("weaktrans") / "scenarios"


def scenario_path(name: str) -> str:
    return str(SCENARIOS / f"{name}.json")


def write_json(tmp_path: Path, payload) -> str:
    path = tmp_path / "scenario.json"
    if isinstance(payload, str):
        path.write_text(payload, encoding="utf-8")
    else:
        path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


class TestExitCodes:
    def test_unknown_subcommand(self, tmp_path, capsys):
        code = run("frobnicate", scenario_path("location"), str(tmp_path))
        assert code == 1
        assert "unknown subcommand" in capsys.readouterr().err

    def test_malformed_json_exits_2_without_output(self, tmp_path, capsys):
        bad = write_json(tmp_path, '{"model": ')
        out = tmp_path / "out"
        code = run("features", bad, str(out))
        assert code == 2
        err = capsys.readouterr().err
        assert "line" in err and "column" in err
        assert not out.exists()

    def test_missing_field_exits_2(self, tmp_path, capsys):
        bad = write_json(tmp_path, {"model": {"family": "cauchy_location"}})
        code = run("features", bad, str(tmp_path / "out"))
        assert code == 2
        assert "kernel" in capsys.readouterr().err

    def test_bad_enumeration_exits_2(self, tmp_path, capsys):
        bad = write_json(
            tmp_path,
            {
                "model": {"family": "weibull"},
                "kernel": {"kind": "gaussian", "s": 1.0},
                "features": {"kind": "moments", "orders": [0]},
                "grids": {"theta": {"points": [[0.0]]}},
            },
        )
        assert run("features", bad, str(tmp_path / "out")) == 2
        assert "model" in capsys.readouterr().err

    def test_grid_outside_model_domain_exits_2(self, tmp_path, capsys):
        bad = write_json(
            tmp_path,
            {
                "model": {"family": "lognormal"},
                "kernel": {"kind": "gaussian", "s": 1.0, "dim": 1, "normalized": True},
                "features": {"kind": "moments", "orders": [0]},
                "grids": {"theta": {"points": [[0.0, -1.0]]}},
            },
        )
        assert run("features", bad, str(tmp_path / "out")) == 2
        assert "sigma" in capsys.readouterr().err

    def test_numerical_failure_exits_3(self, tmp_path, capsys):
        # one refinement level can never satisfy the convergence check
        bad = write_json(
            tmp_path,
            {
                "model": {"family": "cauchy_location"},
                "kernel": {"kind": "gaussian", "s": 1.0, "dim": 1, "normalized": False},
                "features": {"kind": "moments", "orders": [0]},
                "grids": {"theta": {"points": [[0.0]]}},
                "quadrature": {"max_levels": 1},
            },
        )
        code = run("features", bad, str(tmp_path / "out"))
        assert code == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_main_wires_argparse(self, tmp_path):
        code = main(
            [
                "behrens-fisher",
                "--scenario",
                scenario_path("behrens_fisher"),
                "--out",
                str(tmp_path),
                "--seed",
                "7",
            ]
        )
        assert code == 0


class TestReports:
    def test_features_report_round_trip(self, tmp_path):
        assert run("features", scenario_path("location"), str(tmp_path)) == 0
        payload = json.loads((tmp_path / "features.json").read_text())
        assert payload["scenario"]["model"]["family"] == "gaussian_location"
        assert payload["scenario"]["quadrature"]["abs_tol"] == 1e-10  # defaults embedded
        assert len(payload["rows"]) == 9
        with open(tmp_path / "features.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["theta_0", "m0"]
        assert len(rows) == 10

    def test_csv_uses_lf_and_dot_decimal(self, tmp_path):
        assert run("behrens-fisher", scenario_path("behrens_fisher"), str(tmp_path)) == 0
        raw = (tmp_path / "behrens-fisher.csv").read_bytes()
        assert b"\r" not in raw
        assert b"," in raw and b";" not in raw.split(b"\n")[0]
        text = raw.decode("utf-8")
        assert "0.5" in text or "e-" in text

    def test_transversality_report_flags_on_stratum_points(self, tmp_path):
        assert run("transversality", scenario_path("location"), str(tmp_path)) == 0
        payload = json.loads((tmp_path / "transversality.json").read_text())
        on_points = [r for r in payload["rows"] if r["on_stratum"]]
        assert len(on_points) == 2  # the level set is hit at +-mu by symmetry
        assert all(r["transversal"] for r in on_points)
        assert all(r["componentwise"]["joint"] for r in on_points)

    def test_sweep_report_empty_bad_set(self, tmp_path):
        assert run("sweep", scenario_path("location"), str(tmp_path)) == 0
        payload = json.loads((tmp_path / "sweep.json").read_text())
        assert payload["sweep"]["bad_lambdas"] == []
        assert all(r["fraction"] == 0.0 for r in payload["sweep"]["rows"])

    def test_classify_report_cauchy(self, tmp_path):
        assert run("classify", scenario_path("cauchy"), str(tmp_path)) == 0
        payload = json.loads((tmp_path / "classify.json").read_text())
        rep = payload["report"]
        assert rep["type0_representation"]["flagged"]
        assert rep["type0_representation"]["weak_features_finite"]
        assert not rep["type2_information"]["flagged"]

    def test_stein_report(self, tmp_path):
        assert run("stein", scenario_path("stein"), str(tmp_path)) == 0
        payload = json.loads((tmp_path / "stein.json").read_text())
        assert payload["candidates"][0]["discrepancy"] < 1e-8
        assert all(c["discrepancy"] > 1e-3 for c in payload["candidates"][1:])
        assert len(payload["zero_set_checks"]) == 5
        assert not any(c["marginal"] for c in payload["zero_set_checks"])

    def test_graphical_classify(self, tmp_path):
        assert run("classify", scenario_path("graphical"), str(tmp_path)) == 0
        payload = json.loads((tmp_path / "classify.json").read_text())
        profile = payload["report"]["type4_higher_order"]["profile"]
        assert profile and all("rank" in entry for entry in profile)


class TestDeterminism:
    @pytest.mark.parametrize(
        "subcommand,scenario",
        [
            ("jacobian", "location"),
            ("classify", "lognormal"),
            ("behrens-fisher", "behrens_fisher"),
        ],
    )
    def test_reruns_are_byte_identical(self, tmp_path, subcommand, scenario):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run(subcommand, scenario_path(scenario), str(out1)) == 0
        assert run(subcommand, scenario_path(scenario), str(out2)) == 0
        for suffix in (".json", ".csv"):
            f1 = out1 / f"{subcommand}{suffix}"
            f2 = out2 / f"{subcommand}{suffix}"
            assert f1.read_bytes() == f2.read_bytes()
