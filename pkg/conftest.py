import numpy as np
import pytest

from waste_schema import CalibrationModel, CalibrationPoint, LinkBudget, ReadingSession, SessionMeta

# Published grocery-waste cubic, ascending degree
GROCERY_COEFFICIENTS = (-22.0, -0.82621, 0.0202049, -0.000161541)
GROCERY_WEIGHTS = (0.0, 17.0, 30.8, 43.8)
GROCERY_MEDIANS = (-22.0, -31.0, -33.0, -33.0)


def make_session(values, **meta) -> ReadingSession:
    return ReadingSession.from_values(values, SessionMeta(**meta))


@pytest.fixture
def grocery_model() -> CalibrationModel:
    return CalibrationModel(
        coefficients=GROCERY_COEFFICIENTS,
        weight_range=(0.0, 43.8),
        empty_rssi_dbm=-22.0,
    )


@pytest.fixture
def grocery_points():
    return [
        CalibrationPoint(cumulative_weight_lb=w, median_rssi_dbm=m)
        for w, m in zip(GROCERY_WEIGHTS, GROCERY_MEDIANS)
    ]


@pytest.fixture
def five_foot_budget() -> LinkBudget:
    return LinkBudget(
        tx_power_dbm=20.0,
        tx_antenna_gain_dbi=2.15,
        rx_antenna_gain_dbi=2.15,
        system_gain_db=-5.0,
        frequency_hz=915e6,
        distance_m=1.524,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20190611)
