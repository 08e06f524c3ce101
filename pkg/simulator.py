"""
Deterministic stand-in for the transceiver pair and the bin between them.

Every reading is

    expected_rssi(budget, layers) + multipath offset + ground coupling offset + noise

where noise is N(0, sigma^2) in dB. Noise comes from numpy's PCG64 bit
generator (doubles as (next_uint64 >> 11) * 2**-53) turned into normal
deviates with the Box-Muller transform, two deviates per pair of uniforms:

    z0 = sqrt(-2 ln(1 - u1)) cos(2 pi u2)
    z1 = sqrt(-2 ln(1 - u1)) sin(2 pi u2)

Both steps are fixed here so equal scenarios give bitwise-equal sessions.
"""

import logging
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import DEFAULT_SETTINGS, Settings
from errors import ScenarioError
from signal_model import expected_rssi
from waste_schema import MaterialLayer, ReadingSession, Scenario, SessionMeta, WasteItem

logger = logging.getLogger(__name__)


class GaussianSource:
    """Seeded standard-normal stream: PCG64 uniforms through Box-Muller"""

    def __init__(self, seed: int):
        self.seed = seed
        self._generator = np.random.Generator(np.random.PCG64(seed))

    def normal(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        uniforms = self._generator.random(2 * pairs)
        radius = np.sqrt(-2.0 * np.log1p(-uniforms[0::2]))
        angle = 2.0 * np.pi * uniforms[1::2]

        deviates = np.empty(2 * pairs)
        deviates[0::2] = radius * np.cos(angle)
        deviates[1::2] = radius * np.sin(angle)
        return deviates[:n]


def deterministic_level(scenario: Scenario, settings: Settings = DEFAULT_SETTINGS) -> float:
    """Noise-free reading of a scenario in dBm"""
    return (
        expected_rssi(scenario.budget, scenario.layers(), settings)
        + scenario.environment.multipath_offset_db(settings)
        + scenario.ground_coupling_offset_db
    )


def quantize(values: np.ndarray, step_db: float) -> np.ndarray:
    """Round to the nearest multiple of step_db; a zero step leaves values unchanged"""
    if step_db <= 0:
        return values
    return np.round(values / step_db) * step_db


def _session_meta(scenario: Scenario) -> SessionMeta:
    return SessionMeta(
        environment=scenario.environment.value,
        tx_power_dbm=scenario.budget.tx_power_dbm,
        tx_position=scenario.tx_position,
        material=scenario.material_label,
        weight_lb=scenario.total_weight_lb,
        fill_percent=scenario.fill_percent,
    )


def _simulate(scenario: Scenario, n_readings: int, source: GaussianSource, settings: Settings) -> ReadingSession:
    level = deterministic_level(scenario, settings)
    values = level + scenario.noise_sigma_db * source.normal(n_readings)
    values = quantize(values, scenario.quantize_step_db)
    return ReadingSession.from_values(values.tolist(), _session_meta(scenario))


def simulate_session(
    scenario: Scenario,
    n_readings: Optional[int] = None,
    settings: Settings = DEFAULT_SETTINGS,
) -> ReadingSession:
    """Generate one session of readings from a scenario"""
    n_readings = settings.default_n_readings if n_readings is None else n_readings
    if n_readings < 1:
        raise ScenarioError(f"n_readings must be at least 1, got {n_readings}")

    logger.debug("simulating %d readings, seed %d", n_readings, scenario.seed)
    return _simulate(scenario, n_readings, GaussianSource(scenario.seed), settings)


def scenario_for_fill(base: Scenario, weight_lb: float, attenuation_db: Optional[float] = None) -> Scenario:
    """Base scenario with one more bag of the given cumulative weight"""
    if weight_lb < 0:
        raise ScenarioError(f"weights must be non-negative, got {weight_lb}")

    if attenuation_db is not None:
        item = WasteItem(weight_lb=weight_lb, layer=MaterialLayer(label="food", attenuation_db=attenuation_db))
    elif weight_lb > 0:
        item = WasteItem(weight_lb=weight_lb)
    else:
        return base

    return base.model_copy(update={"contents": list(base.contents) + [item]})


def simulate_fill_series(
    base: Scenario,
    weights_lb: Sequence[float],
    n_readings: Optional[int] = None,
    layer_table: Optional[Mapping[float, float]] = None,
    settings: Settings = DEFAULT_SETTINGS,
) -> List[Tuple[float, ReadingSession]]:
    """One session per cumulative weight, all drawn from the base seed's stream"""
    n_readings = settings.default_n_readings if n_readings is None else n_readings
    if n_readings < 1:
        raise ScenarioError(f"n_readings must be at least 1, got {n_readings}")
    if any(b < a for a, b in zip(weights_lb, weights_lb[1:])):
        raise ScenarioError(f"fill weights must be sorted ascending, got {list(weights_lb)}")

    if layer_table is not None:
        missing = [w for w in weights_lb if w not in layer_table]
        if missing:
            raise ScenarioError(f"layer table has no entry for weight(s) {missing}")

    source = GaussianSource(base.seed)
    series = []
    for weight in weights_lb:
        attenuation = layer_table[weight] if layer_table is not None else None
        scenario = scenario_for_fill(base, weight, attenuation)
        series.append((weight, _simulate(scenario, n_readings, source, settings)))
    return series
