"""
Link-budget arithmetic for a transceiver pair separated by a trash bin.

Received strength is computed as

    P_rx = P_tx + G_tx + G_rx + G_sys - FSPL(d, f) - sum(layer losses)

with the free-space path loss

    FSPL(d, f) = 20 log10(d) + 20 log10(f) + 20 log10(4 pi / c)

Antenna gains are kept apart from the system gain: with the stock 2.15 dBi
antennas, 20 dBm and a -5 dB system gain, a 1.524 m (5 ft) link predicts
about -16 dBm.
"""

import logging
import math
from typing import Iterable, List

from config import DEFAULT_SETTINGS, Settings
from errors import DomainError
from waste_schema import DeviceViolation, LinkBudget, MaterialLayer

logger = logging.getLogger(__name__)


def free_space_path_loss(distance_m: float, frequency_hz: float, settings: Settings = DEFAULT_SETTINGS) -> float:
    """Free-space path loss in dB"""
    if not distance_m > 0:
        raise DomainError(f"distance must be positive, got {distance_m!r} m")
    if not frequency_hz > 0:
        raise DomainError(f"frequency must be positive, got {frequency_hz!r} Hz")

    constant_db = 20 * math.log10(4 * math.pi / settings.speed_of_light_m_s)
    return 20 * math.log10(distance_m) + 20 * math.log10(frequency_hz) + constant_db


def total_attenuation(layers: Iterable[MaterialLayer]) -> float:
    """Sum of layer losses; math.fsum keeps the total independent of layer order"""
    return math.fsum(layer.attenuation_db for layer in layers)


def expected_rssi(budget: LinkBudget, layers: Iterable[MaterialLayer] = (), settings: Settings = DEFAULT_SETTINGS) -> float:
    """Predicted received strength in dBm"""
    path_loss = free_space_path_loss(budget.distance_m, budget.frequency_hz, settings)
    gains = budget.tx_power_dbm + budget.tx_antenna_gain_dbi + budget.rx_antenna_gain_dbi + budget.system_gain_db
    return gains - path_loss - total_attenuation(layers)


def validate_device_config(
    tx_power_dbm: float,
    frequency_hz: float,
    settings: Settings = DEFAULT_SETTINGS,
) -> List[DeviceViolation]:
    """Device limits broken by a configuration; an empty list means ok"""
    violations = []

    if not settings.min_tx_power_dbm <= tx_power_dbm <= settings.max_tx_power_dbm:
        violations.append(DeviceViolation(
            field="tx_power_dbm",
            value=tx_power_dbm,
            minimum=settings.min_tx_power_dbm,
            maximum=settings.max_tx_power_dbm,
        ))

    if not settings.min_frequency_hz <= frequency_hz <= settings.max_frequency_hz:
        violations.append(DeviceViolation(
            field="frequency_hz",
            value=frequency_hz,
            minimum=settings.min_frequency_hz,
            maximum=settings.max_frequency_hz,
        ))

    for violation in violations:
        logger.debug("device limit violated: %s", violation.message)
    return violations
