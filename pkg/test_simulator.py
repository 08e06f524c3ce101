import numpy as np
import pytest

from calibration import fit_interpolating_polynomial, invert_for_weight, points_from_sessions
from errors import ScenarioError
from signal_model import expected_rssi
from simulator import (
    GaussianSource,
    deterministic_level,
    quantize,
    scenario_for_fill,
    simulate_fill_series,
    simulate_session,
)
from stats import summarize
from waste_schema import EnvironmentKind, MaterialLayer, Scenario, WasteItem

GROCERY_LAYER_TABLE = {0.0: 0.0, 17.0: 9.0, 30.8: 11.0, 43.8: 11.0}


@pytest.fixture
def quiet_scenario(five_foot_budget) -> Scenario:
    return Scenario(budget=five_foot_budget, seed=11)


class TestGaussianSource:
    def test_same_seed_same_stream(self):
        np.testing.assert_array_equal(GaussianSource(5).normal(101), GaussianSource(5).normal(101))

    def test_odd_lengths(self):
        assert GaussianSource(5).normal(7).shape == (7,)

    def test_standard_normal_moments(self):
        deviates = GaussianSource(2019).normal(20000)
        assert abs(deviates.mean()) < 0.05
        assert deviates.std() == pytest.approx(1.0, abs=0.05)


class TestSimulateSession:
    def test_noiseless_readings_sit_on_the_budget(self, quiet_scenario):
        session = simulate_session(quiet_scenario, 12)
        assert len(session) == 12
        assert set(session.values()) == {expected_rssi(quiet_scenario.budget)}

    def test_deterministic(self, quiet_scenario):
        noisy = quiet_scenario.model_copy(update={"noise_sigma_db": 1.0})
        assert simulate_session(noisy, 50) == simulate_session(noisy, 50)

    def test_seed_changes_readings(self, quiet_scenario):
        a = quiet_scenario.model_copy(update={"noise_sigma_db": 1.0, "seed": 1})
        b = quiet_scenario.model_copy(update={"noise_sigma_db": 1.0, "seed": 2})
        assert simulate_session(a, 20).values() != simulate_session(b, 20).values()

    def test_noise_spread(self, quiet_scenario):
        noisy = quiet_scenario.model_copy(update={"noise_sigma_db": 0.8})
        summary = summarize(simulate_session(noisy, 1000))
        assert 0.7 <= summary.std_dbm <= 0.9
        assert summary.mean_dbm == pytest.approx(deterministic_level(noisy), abs=0.1)

    def test_quantized_readings(self, quiet_scenario):
        noisy = quiet_scenario.model_copy(update={"noise_sigma_db": 2.0, "quantize_step_db": 0.5})
        values = np.array(simulate_session(noisy, 200).values())
        np.testing.assert_array_equal(values * 2, np.round(values * 2))

    def test_metadata_follows_scenario(self, quiet_scenario):
        scenario = quiet_scenario.model_copy(update={
            "contents": [WasteItem(weight_lb=4.0, label="food"), WasteItem(weight_lb=1.5, label="paper")],
            "fill_percent": 30.0,
        })
        meta = simulate_session(scenario).meta
        assert meta.weight_lb == 5.5
        assert meta.material == "food+paper"
        assert meta.environment == "indoor_open"
        assert meta.fill_percent == 30.0

    def test_environment_offsets_order_levels(self, quiet_scenario):
        levels = {
            kind: deterministic_level(quiet_scenario.model_copy(update={"environment": kind}))
            for kind in EnvironmentKind
        }
        assert levels[EnvironmentKind.INDOOR_LAB] > levels[EnvironmentKind.INDOOR_OPEN] > levels[EnvironmentKind.OUTDOOR]

    def test_layer_lowers_level(self, quiet_scenario):
        bagged = quiet_scenario.model_copy(update={
            "contents": [WasteItem(weight_lb=2.0, layer=MaterialLayer(label="food", attenuation_db=5.0))],
        })
        assert deterministic_level(bagged) - deterministic_level(quiet_scenario) == pytest.approx(-5.0, abs=1e-12)

    def test_negative_layer_raises_level(self, quiet_scenario):
        reflective = quiet_scenario.model_copy(update={
            "contents": [WasteItem(weight_lb=1.0, layer=MaterialLayer(label="foil", attenuation_db=-2.0))],
        })
        assert deterministic_level(reflective) > deterministic_level(quiet_scenario)

    @pytest.mark.parametrize("n", [0, -3])
    def test_needs_a_reading(self, quiet_scenario, n):
        with pytest.raises(ScenarioError):
            simulate_session(quiet_scenario, n)


def test_quantize_zero_step_is_identity():
    values = np.array([-31.23, -30.77])
    assert quantize(values, 0.0) is values
    np.testing.assert_array_equal(quantize(values, 0.5), [-31.0, -31.0])


class TestFillSeries:
    def test_medians_fall_as_the_bin_fills(self, quiet_scenario, rng):
        for _ in range(100):
            base = quiet_scenario.model_copy(update={
                "attenuation_per_lb_db": float(rng.uniform(0.1, 1.0)),
                "quantize_step_db": float(rng.choice([0.0, 0.5])),
            })
            weights = sorted(rng.uniform(0.0, 50.0, size=int(rng.integers(2, 8))).tolist())
            medians = [summarize(s).median_dbm for _, s in simulate_fill_series(base, weights, 5)]
            assert all(b <= a for a, b in zip(medians, medians[1:]))

    def test_single_empty_weight_matches_one_session(self, quiet_scenario):
        noisy = quiet_scenario.model_copy(update={"noise_sigma_db": 1.0})
        [(weight, session)] = simulate_fill_series(noisy, [0.0])
        assert weight == 0.0
        assert session == simulate_session(noisy)

    def test_grocery_layer_table(self, quiet_scenario):
        base = quiet_scenario.model_copy(update={"ground_coupling_offset_db": -6.0, "quantize_step_db": 0.5})
        series = simulate_fill_series(base, list(GROCERY_LAYER_TABLE), layer_table=GROCERY_LAYER_TABLE)
        assert [summarize(s).median_dbm for _, s in series] == [-22.0, -31.0, -33.0, -33.0]
        assert [s.meta.weight_lb for _, s in series] == list(GROCERY_LAYER_TABLE)

    def test_unsorted_weights(self, quiet_scenario):
        with pytest.raises(ScenarioError, match="ascending"):
            simulate_fill_series(quiet_scenario, [10.0, 5.0])

    def test_layer_table_must_cover_weights(self, quiet_scenario):
        with pytest.raises(ScenarioError, match="no entry"):
            simulate_fill_series(quiet_scenario, [0.0, 5.0], layer_table={0.0: 0.0})

    def test_negative_weight(self, quiet_scenario):
        with pytest.raises(ScenarioError):
            scenario_for_fill(quiet_scenario, -1.0)

    def test_calibrate_then_estimate(self, quiet_scenario):
        base = quiet_scenario.model_copy(update={"attenuation_per_lb_db": 0.5})
        series = simulate_fill_series(base, [0.0, 10.0, 20.0, 30.0])
        model = fit_interpolating_polynomial(points_from_sessions([s for _, s in series]))

        holdout = simulate_session(scenario_for_fill(base, 13.7))
        estimate = invert_for_weight(model, summarize(holdout).median_dbm)
        assert not estimate.extrapolated
        assert estimate.weight_lb == pytest.approx(13.7, abs=0.05)
