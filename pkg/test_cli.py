from pathlib import Path

import pytest

from cli import EXIT_DATA_ERROR, EXIT_OK, EXIT_USAGE_ERROR, main
from ingestion import load_profile, parse_report_csv, save_scenario
from simulator import scenario_for_fill
from waste_schema import Scenario

HERE = Path(__file__).parent
GOLDEN = HERE / "golden"
SCENARIOS = HERE / "sample_data" / "scenarios"
SESSIONS = HERE / "sample_data" / "sessions"

GROCERY_SCENARIOS = ["grocery_00_empty", "grocery_17_0", "grocery_30_8", "grocery_43_8"]

LINKBUDGET_5FT = ["linkbudget", "--power", "20", "--freq", "915e6", "--dist", "1.524", "--ant-gain", "2.15", "--sys-gain", "-5"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def grocery_logs(tmp_path, capsys):
    """Simulated calibration logs for the four grocery fills"""
    paths = []
    for name in GROCERY_SCENARIOS:
        path = tmp_path / f"{name}.log"
        code, _, _ = run(capsys, "simulate", "--scenario", SCENARIOS / f"{name}.json", "--out", path)
        assert code == EXIT_OK
        paths.append(path)
    return paths


@pytest.fixture
def grocery_profile(tmp_path, capsys, grocery_logs):
    path = tmp_path / "grocery.json"
    code, _, _ = run(capsys, "calibrate", *grocery_logs, "--out", path)
    assert code == EXIT_OK
    return path


class TestLinkBudget:
    def test_five_foot_link(self, capsys):
        code, out, _ = run(capsys, *LINKBUDGET_5FT)
        assert code == EXIT_OK
        assert out == (GOLDEN / "linkbudget_5ft.txt").read_text()

    def test_zero_distance_is_a_usage_error(self, capsys):
        code, out, err = run(capsys, "linkbudget", "--power", "20", "--dist", "0")
        assert code == EXIT_USAGE_ERROR
        assert out == ""
        assert "distance" in err

    def test_power_above_device_limit_still_reports(self, capsys):
        code, out, _ = run(capsys, "linkbudget", "--power", "21", "--dist", "1.524")
        assert code == EXIT_OK
        assert "device_limits: violated" in out

    def test_missing_required_flag(self, capsys):
        code, _, err = run(capsys, "linkbudget", "--dist", "1.524")
        assert code == EXIT_USAGE_ERROR
        assert "--power" in err

    @pytest.mark.parametrize("flag, value", [("--power", "inf"), ("--dist", "nan")])
    def test_non_finite_flag_is_a_usage_error(self, capsys, flag, value):
        argv = {"--power": "20", "--dist": "1.524", flag: value}
        code, out, _ = run(capsys, "linkbudget", *[x for pair in argv.items() for x in pair])
        assert code == EXIT_USAGE_ERROR
        assert out == ""


class TestStats:
    def test_material_effect_column(self, capsys):
        code, out, _ = run(
            capsys, "stats", SESSIONS / "price_center_90pct.log",
            "--empty", SESSIONS / "price_center_empty.log",
        )
        assert code == EXIT_OK
        assert "effect_db" in out
        assert "-6.0" in out

    def test_constant_session_is_stable(self, capsys, tmp_path):
        path = tmp_path / "flat.log"
        path.write_text("RSSI: -31\n" * 10)
        code, out, _ = run(capsys, "stats", path)
        assert code == EXIT_OK
        assert "stable" in out
        assert "unstable" not in out

    def test_tight_threshold_flags_spread(self, capsys):
        code, out, _ = run(capsys, "stats", SESSIONS / "price_center_empty.log", "--threshold", "0.1")
        assert code == EXIT_OK
        assert "unstable(0.6)" in out

    def test_malformed_file(self, capsys, tmp_path):
        path = tmp_path / "bad.log"
        path.write_text("RSSI: -31\nRSSI: -30\nRSSI: -29\nRSSI: abc\n")
        code, out, err = run(capsys, "stats", path)
        assert code == EXIT_DATA_ERROR
        assert out == ""
        assert "line 4" in err

    @pytest.mark.parametrize("threshold", ["0", "-1"])
    def test_threshold_must_be_positive(self, capsys, threshold):
        code, _, _ = run(capsys, "stats", SESSIONS / "price_center_empty.log", "--threshold", threshold)
        assert code == EXIT_USAGE_ERROR


class TestPipeline:
    def test_grocery_holdout_matches_golden(self, capsys, tmp_path, grocery_profile):
        holdout = tmp_path / "holdout.log"
        code, out, _ = run(capsys, "simulate", "--scenario", SCENARIOS / "grocery_holdout_10_6.json", "--out", holdout)
        assert code == EXIT_OK
        assert "median_rssi_dbm: -27.0" in out

        code, out, _ = run(capsys, "estimate", "--profile", grocery_profile, holdout, "--actual", "10.6")
        assert code == EXIT_OK
        assert out == (GOLDEN / "estimate_grocery.txt").read_text()

    def test_calibrate_writes_consistent_profile(self, grocery_profile):
        profile = load_profile(grocery_profile)
        assert profile.model.degree == 3
        assert profile.model.weight_range == pytest.approx((0.0, 43.8))
        assert profile.model.empty_rssi_dbm == -22.0
        assert [p.median_rssi_dbm for p in profile.points] == [-22.0, -31.0, -33.0, -33.0]

    def test_empty_bin_estimates_zero(self, capsys, grocery_logs, grocery_profile):
        code, out, _ = run(capsys, "estimate", "--profile", grocery_profile, grocery_logs[0])
        assert code == EXIT_OK
        assert "weight_lb: 0.0" in out
        assert "relative_error_percent" not in out

    def test_actual_must_be_positive(self, capsys, grocery_logs, grocery_profile):
        code, _, _ = run(capsys, "estimate", "--profile", grocery_profile, grocery_logs[1], "--actual", "0")
        assert code == EXIT_USAGE_ERROR

    def test_unlabeled_sessions_leave_no_profile(self, capsys, tmp_path):
        out_path = tmp_path / "bin.json"
        code, _, err = run(
            capsys, "calibrate", SESSIONS / "price_center_empty.log", SESSIONS / "price_center_90pct.log",
            "--out", out_path,
        )
        assert code == EXIT_DATA_ERROR
        assert "weight_lb" in err
        assert not out_path.exists()

    def test_missing_profile(self, capsys, tmp_path, grocery_logs):
        code, _, _ = run(capsys, "estimate", "--profile", tmp_path / "nope.json", grocery_logs[0])
        assert code == EXIT_DATA_ERROR

    def test_report_files(self, capsys, tmp_path, grocery_logs, grocery_profile):
        csv_path = tmp_path / "report.csv"
        chart_path = tmp_path / "report.txt"
        code, out, _ = run(
            capsys, "report", "--profile", grocery_profile, *grocery_logs,
            "--csv", csv_path, "--chart", chart_path,
        )
        assert code == EXIT_OK
        assert out == ""

        points = parse_report_csv(csv_path.read_text())
        assert [(p.cumulative_weight_lb, p.median_rssi_dbm) for p in points] == [
            (0.0, -22.0), (17.0, -31.0), (30.8, -33.0), (43.8, -33.0),
        ]
        chart = chart_path.read_text()
        assert chart.count("o") >= 3
        assert "weight (lb) vs median RSSI (dBm)" in chart

    def test_failed_chart_write_leaves_no_csv(self, capsys, tmp_path, grocery_logs, grocery_profile):
        csv_path = tmp_path / "report.csv"
        code, _, _ = run(
            capsys, "report", "--profile", grocery_profile, *grocery_logs,
            "--csv", csv_path, "--chart", tmp_path / "missing" / "chart.txt",
        )
        assert code == EXIT_DATA_ERROR
        assert not csv_path.exists()
        assert not any(p.name.startswith(".report.csv.") for p in tmp_path.iterdir())

    def test_report_to_stdout_estimates_unlabeled_weights(self, capsys, tmp_path, grocery_profile):
        holdout = tmp_path / "holdout.log"
        holdout.write_text("RSSI: -27\n" * 10)
        code, out, _ = run(capsys, "report", "--profile", grocery_profile, holdout)
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == "weight_lb,median_rssi_dbm"
        assert lines[1] == "7.3,-27.0"


class TestSimulate:
    def test_seed_override_and_count(self, capsys, tmp_path):
        a, b = tmp_path / "a.log", tmp_path / "b.log"
        for path, seed in ((a, "1"), (b, "2")):
            code, out, _ = run(
                capsys, "simulate", "--scenario", SCENARIOS / "dining_hall_noisy.json",
                "--n", "25", "--seed", seed, "--out", path,
            )
            assert code == EXIT_OK
            assert "readings: 25" in out
        assert a.read_text() != b.read_text()
        assert "# fill_percent = 45.0" in a.read_text()

    def test_needs_a_reading(self, capsys, tmp_path):
        code, _, _ = run(
            capsys, "simulate", "--scenario", SCENARIOS / "dining_hall_noisy.json",
            "--n", "0", "--out", tmp_path / "x.log",
        )
        assert code == EXIT_USAGE_ERROR
        assert not (tmp_path / "x.log").exists()


def test_noiseless_round_trip_recovers_held_out_weight(capsys, tmp_path, five_foot_budget):
    base = Scenario(budget=five_foot_budget, attenuation_per_lb_db=0.5, seed=3)
    logs = []
    for weight in (0.0, 10.0, 20.0, 30.0, 13.7):
        scenario_path = tmp_path / f"fill_{weight}.json"
        log_path = tmp_path / f"fill_{weight}.log"
        save_scenario(scenario_for_fill(base, weight), scenario_path)
        code, _, _ = run(capsys, "simulate", "--scenario", scenario_path, "--out", log_path)
        assert code == EXIT_OK
        logs.append(log_path)

    *labeled, holdout = logs
    code, out, _ = run(capsys, "stats", *labeled)
    assert code == EXIT_OK
    assert out.count("stable") == 4

    profile = tmp_path / "fill.json"
    assert run(capsys, "calibrate", *labeled, "--out", profile)[0] == EXIT_OK

    code, out, _ = run(capsys, "estimate", "--profile", profile, holdout)
    assert code == EXIT_OK
    assert "weight_lb: 13.7" in out
    assert "extrapolated: no" in out
