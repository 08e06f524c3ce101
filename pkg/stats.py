import logging
from collections import OrderedDict
from typing import Dict, List, Optional

import numpy as np

from config import DEFAULT_SETTINGS, Settings
from errors import DomainError, EmptySessionError
from waste_schema import (
    FillTrend,
    MaterialEffectRow,
    PositionComparison,
    PowerStepResult,
    ReadingSession,
    SessionSummary,
    StabilityVerdict,
)

logger = logging.getLogger(__name__)

EMPTY_MATERIAL = "empty"


def summarize(session: ReadingSession, settings: Settings = DEFAULT_SETTINGS) -> SessionSummary:
    """Mean, median, sample std, min and max of a session"""
    if not session.readings:
        raise EmptySessionError("cannot summarize a session without readings")

    values = np.asarray(session.values(), dtype=float)
    n = values.size
    if n < settings.min_readings:
        logger.warning("session holds %d readings, fewer than the %d the protocol asks for", n, settings.min_readings)

    low = float(values.min())
    high = float(values.max())

    # A constant session has exactly zero spread
    if low == high:
        return SessionSummary(n=n, mean_dbm=low, median_dbm=low, std_dbm=0.0, min_dbm=low, max_dbm=high)

    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if n > 1 else 0.0
    return SessionSummary(
        n=n,
        mean_dbm=min(max(mean, low), high),
        median_dbm=float(np.median(values)),
        std_dbm=std,
        min_dbm=low,
        max_dbm=high,
    )


def material_effect(material: SessionSummary, empty: SessionSummary) -> float:
    """Median shift caused by a material; negative is attenuation"""
    return material.median_dbm - empty.median_dbm


def stability_check(
    summary: SessionSummary,
    threshold_dbm: Optional[float] = None,
    settings: Settings = DEFAULT_SETTINGS,
) -> StabilityVerdict:
    """Stable iff the session's std does not exceed the threshold"""
    threshold = settings.stability_threshold_dbm if threshold_dbm is None else threshold_dbm
    if not threshold > 0:
        raise DomainError(f"stability threshold must be positive, got {threshold!r}")
    return StabilityVerdict(stable=summary.std_dbm <= threshold, std_dbm=summary.std_dbm, threshold_dbm=threshold)


def compare_positions(
    above: SessionSummary,
    below: SessionSummary,
    threshold_dbm: Optional[float] = None,
    settings: Settings = DEFAULT_SETTINGS,
) -> PositionComparison:
    """Offsets and stability with the transmitter above vs below the receiver"""
    return PositionComparison(
        mean_offset_db=above.mean_dbm - below.mean_dbm,
        median_offset_db=above.median_dbm - below.median_dbm,
        above=stability_check(above, threshold_dbm, settings),
        below=stability_check(below, threshold_dbm, settings),
    )


def power_step_check(
    low: SessionSummary,
    high: SessionSummary,
    low_power_dbm: float,
    high_power_dbm: float,
    tolerance_db: float = 3.0,
) -> PowerStepResult:
    """Check that the median moves by roughly the change in transmit power"""
    if not tolerance_db >= 0:
        raise DomainError(f"tolerance must be non-negative, got {tolerance_db!r}")

    expected = high_power_dbm - low_power_dbm
    observed = high.median_dbm - low.median_dbm
    deviation = observed - expected
    return PowerStepResult(
        expected_step_db=expected,
        observed_step_db=observed,
        deviation_db=deviation,
        consistent=abs(deviation) <= tolerance_db,
    )


def material_effect_table(sessions: List[ReadingSession], settings: Settings = DEFAULT_SETTINGS) -> List[MaterialEffectRow]:
    """Effect of every material against the empty bin of the same environment"""
    grouped: Dict[str, Dict[str, ReadingSession]] = OrderedDict()
    for session in sessions:
        environment = session.meta.environment or "unspecified"
        material = session.meta.material or "unlabeled"
        grouped.setdefault(environment, OrderedDict())[material] = session

    rows = []
    for environment, by_material in grouped.items():
        if EMPTY_MATERIAL not in by_material:
            logger.warning("no empty-bin session for environment %r; skipping its materials", environment)
            continue

        empty = summarize(by_material[EMPTY_MATERIAL], settings)
        for material, session in by_material.items():
            if material == EMPTY_MATERIAL:
                continue
            summary = summarize(session, settings)
            rows.append(MaterialEffectRow(
                environment=environment,
                material=material,
                material_median_dbm=summary.median_dbm,
                empty_median_dbm=empty.median_dbm,
                effect_db=material_effect(summary, empty),
            ))

    return rows


def fill_trend(sessions: List[ReadingSession], settings: Settings = DEFAULT_SETTINGS) -> FillTrend:
    """Medians ordered by fill level and whether they fall as the bin fills"""
    filled = [s for s in sessions if s.meta.fill_percent is not None]
    if not filled:
        raise EmptySessionError("no session carries a fill_percent header")

    filled.sort(key=lambda s: s.meta.fill_percent)
    points = [(s.meta.fill_percent, summarize(s, settings).median_dbm) for s in filled]
    medians = [median for _, median in points]

    return FillTrend(
        points=points,
        total_drop_db=medians[0] - medians[-1],
        non_increasing=all(b <= a for a, b in zip(medians, medians[1:])),
    )
