"""
Weight -> median RSSI calibration.

A bin is calibrated by recording the median RSSI at a few known cumulative
weights. Up to four points are interpolated exactly (Newton divided
differences, expanded to ascending monomial coefficients); more points get a
least-squares cubic. An unknown load is estimated by solving
p(x) = observed median over the calibrated weight range.
"""

import logging
import math
from typing import List, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from config import DEFAULT_SETTINGS, Settings
from errors import CalibrationError, DomainError
from stats import summarize
from waste_schema import (
    CalibrationModel,
    CalibrationPoint,
    HoldoutResult,
    ReadingSession,
    WeightEstimate,
)

logger = logging.getLogger(__name__)

# Grid values closer than this to the target count as roots (dB)
ZERO_TOLERANCE_DB = 1e-9
MAX_BISECTION_ITERATIONS = 200


def divided_differences(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Newton coefficients [y0], [y0, y1], ..., [y0, ..., yn]"""
    table = np.array(y, dtype=float)
    n = table.size
    for order in range(1, n):
        table[order:] = (table[order:] - table[order - 1:-1]) / (x[order:] - x[:n - order])
    return table


def newton_to_monomial(x: np.ndarray, newton: np.ndarray) -> np.ndarray:
    """Expand a Newton-form polynomial into ascending monomial coefficients"""
    poly = np.array([newton[-1]], dtype=float)
    for k in range(newton.size - 2, -1, -1):
        # poly <- poly * (t - x_k) + newton_k
        expanded = np.zeros(poly.size + 1)
        expanded[1:] += poly
        expanded[:-1] -= x[k] * poly
        expanded[0] += newton[k]
        poly = expanded
    return poly


def _trim_leading_zeros(coefficients: np.ndarray) -> Tuple[float, ...]:
    coefficients = list(map(float, coefficients))
    while len(coefficients) > 1 and coefficients[-1] == 0.0:
        coefficients.pop()
    return tuple(coefficients)


def fit_interpolating_polynomial(
    points: Sequence[CalibrationPoint],
    settings: Settings = DEFAULT_SETTINGS,
) -> CalibrationModel:
    """Fit the weight -> RSSI polynomial through calibration points"""
    if len(points) < 2:
        raise CalibrationError(f"need at least 2 calibration points, got {len(points)}")

    ordered = sorted(points, key=lambda p: p.cumulative_weight_lb)
    weights = np.array([p.cumulative_weight_lb for p in ordered], dtype=float)
    rssi = np.array([p.median_rssi_dbm for p in ordered], dtype=float)

    duplicates = sorted({w for w in weights.tolist() if (weights == w).sum() > 1})
    if duplicates:
        raise CalibrationError(f"calibration weights must be distinct; repeated: {duplicates}")

    if len(ordered) <= settings.max_interpolation_points:
        coefficients = newton_to_monomial(weights, divided_differences(weights, rssi))
        logger.debug("interpolated degree-%d polynomial through %d points", len(ordered) - 1, len(ordered))
    else:
        coefficients = P.polyfit(weights, rssi, settings.least_squares_degree)
        logger.debug("least-squares degree-%d fit over %d points", settings.least_squares_degree, len(ordered))

    coefficients = _trim_leading_zeros(coefficients)
    return CalibrationModel(
        coefficients=coefficients,
        weight_range=(float(weights[0]), float(weights[-1])),
        empty_rssi_dbm=coefficients[0],
    )


def evaluate_polynomial(model: CalibrationModel, weight_lb):
    """Model RSSI at a weight (Horner); accepts scalars or arrays"""
    value = P.polyval(weight_lb, model.coefficients)
    return float(value) if np.ndim(value) == 0 else value


def _bisect(model: CalibrationModel, target: float, low: float, high: float, tolerance: float) -> float:
    f_low = evaluate_polynomial(model, low) - target

    for _ in range(MAX_BISECTION_ITERATIONS):
        mid = 0.5 * (low + high)
        f_mid = evaluate_polynomial(model, mid) - target
        if f_mid == 0.0 or (high - low) <= tolerance:
            return mid
        if (f_mid < 0) == (f_low < 0):
            low, f_low = mid, f_mid
        else:
            high = mid

    return 0.5 * (low + high)


def _scan_grid(low: float, high: float, step: float) -> np.ndarray:
    steps = int(math.ceil((high - low) / step - 1e-9))
    grid = low + step * np.arange(steps + 1)
    grid[-1] = high
    return np.minimum(grid, high)


def find_roots(model: CalibrationModel, target_rssi_dbm: float, settings: Settings = DEFAULT_SETTINGS) -> List[float]:
    """Every weight in the model's range where p(x) equals the target"""
    low, high = model.weight_range
    if high == low:
        value = evaluate_polynomial(model, low) - target_rssi_dbm
        return [low] if abs(value) <= ZERO_TOLERANCE_DB else []

    grid = _scan_grid(low, high, settings.root_scan_step_lb)
    f = P.polyval(grid, model.coefficients) - target_rssi_dbm

    near_zero = np.abs(f) <= ZERO_TOLERANCE_DB
    # One root per run of grid points sitting on the target
    zero_runs = near_zero & ~np.concatenate(([False], near_zero[:-1]))
    crossings = ~near_zero[:-1] & ~near_zero[1:] & (np.sign(f[:-1]) * np.sign(f[1:]) < 0)

    roots = [float(grid[i]) for i in np.flatnonzero(zero_runs)]
    roots.extend(
        _bisect(model, target_rssi_dbm, float(grid[i]), float(grid[i + 1]), settings.root_tolerance_lb)
        for i in np.flatnonzero(crossings)
    )
    return sorted(roots)


def invert_for_weight(
    model: CalibrationModel,
    target_rssi_dbm: float,
    settings: Settings = DEFAULT_SETTINGS,
) -> WeightEstimate:
    """Solve the model for weight; falls back to the nearest endpoint, flagged"""
    roots = find_roots(model, target_rssi_dbm, settings)

    if roots:
        if len(roots) > 1:
            logger.debug("%d roots for %.3f dBm: %s; taking the smallest", len(roots), target_rssi_dbm, roots)
        return WeightEstimate(
            weight_lb=roots[0],
            observed_median_dbm=target_rssi_dbm,
            extrapolated=False,
            all_roots_in_range=roots,
        )

    low, high = model.weight_range
    low_gap = abs(evaluate_polynomial(model, low) - target_rssi_dbm)
    high_gap = abs(evaluate_polynomial(model, high) - target_rssi_dbm)
    endpoint = low if low_gap <= high_gap else high
    logger.warning(
        "%.3f dBm is outside what the model reaches on [%g, %g] lb; clamping to %g lb",
        target_rssi_dbm, low, high, endpoint,
    )
    return WeightEstimate(
        weight_lb=endpoint,
        observed_median_dbm=target_rssi_dbm,
        extrapolated=True,
        all_roots_in_range=[],
    )


def estimate_weight(
    model: CalibrationModel,
    session: ReadingSession,
    settings: Settings = DEFAULT_SETTINGS,
) -> WeightEstimate:
    """Estimate the weight in the bin from a session's median reading"""
    median = summarize(session, settings).median_dbm
    return invert_for_weight(model, median, settings)


def relative_error_percent(predicted_lb: float, actual_lb: float) -> float:
    """Percent error of a prediction against the weighed amount"""
    if not actual_lb > 0:
        raise DomainError(f"actual weight must be positive, got {actual_lb!r} lb")
    return 100.0 * abs(predicted_lb - actual_lb) / actual_lb


def evaluate_holdout(
    model: CalibrationModel,
    session: ReadingSession,
    actual_lb: float,
    settings: Settings = DEFAULT_SETTINGS,
) -> HoldoutResult:
    """Estimate a bag left out of calibration and score it"""
    estimate = estimate_weight(model, session, settings)
    return HoldoutResult(
        estimate=estimate,
        actual_lb=actual_lb,
        relative_error_percent=relative_error_percent(estimate.weight_lb, actual_lb),
    )


def points_from_sessions(
    sessions: Sequence[ReadingSession],
    settings: Settings = DEFAULT_SETTINGS,
) -> List[CalibrationPoint]:
    """Pair each labeled session's median with its weight header"""
    points = []
    for index, session in enumerate(sessions):
        if session.meta.weight_lb is None:
            raise CalibrationError(f"session #{index + 1} has no weight_lb header")
        points.append(CalibrationPoint(
            cumulative_weight_lb=session.meta.weight_lb,
            median_rssi_dbm=summarize(session, settings).median_dbm,
        ))
    return points


def residuals(model: CalibrationModel, points: Sequence[CalibrationPoint]) -> List[float]:
    """Model value minus observed median at each calibration point"""
    return [evaluate_polynomial(model, p.cumulative_weight_lb) - p.median_rssi_dbm for p in points]


def coefficients_match(a: Sequence[float], b: Sequence[float], relative: float, absolute: float = 1e-12) -> bool:
    """Element-wise agreement of two coefficient vectors"""
    if len(a) != len(b):
        return False
    return all(math.isclose(x, y, rel_tol=relative, abs_tol=absolute) for x, y in zip(a, b))
