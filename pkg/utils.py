from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from calibration import evaluate_polynomial
from waste_schema import (
    CalibrationModel,
    CalibrationPoint,
    DeviceViolation,
    SessionSummary,
    StabilityVerdict,
    WeightEstimate,
)

CHART_WIDTH = 60
CHART_HEIGHT = 20


def format_one_decimal(value: float) -> str:
    """Fixed one-decimal text; never prints '-0.0'"""
    text = f"{value:.1f}"
    return "0.0" if text == "-0.0" else text


def format_key_values(rows: Sequence[Tuple[str, str]]) -> str:
    """'key: value' lines, one per row"""
    return "\n".join(f"{key}: {value}" for key, value in rows)


def format_budget(path_loss_db: float, rssi_dbm: float, violations: List[DeviceViolation]) -> str:
    """Link budget result block"""
    verdict = "ok" if not violations else "violated (" + "; ".join(v.message for v in violations) + ")"
    return format_key_values([
        ("free_space_path_loss_db", format_one_decimal(path_loss_db)),
        ("expected_rssi_dbm", format_one_decimal(rssi_dbm)),
        ("device_limits", verdict),
    ])


def format_estimate(estimate: WeightEstimate, relative_error: Optional[float] = None) -> str:
    """Weight estimate block; extra roots and error only when present"""
    rows = [
        ("median_rssi_dbm", format_one_decimal(estimate.observed_median_dbm)),
        ("weight_lb", format_one_decimal(estimate.weight_lb)),
        ("extrapolated", "yes" if estimate.extrapolated else "no"),
    ]
    if len(estimate.all_roots_in_range) > 1:
        rows.append(("roots_in_range_lb", ", ".join(format_one_decimal(r) for r in estimate.all_roots_in_range)))
    if relative_error is not None:
        rows.append(("relative_error_percent", format_one_decimal(relative_error)))
    return format_key_values(rows)


def create_summary_dataframe(
    names: Sequence[str],
    summaries: Sequence[SessionSummary],
    verdicts: Sequence[StabilityVerdict],
    effects: Optional[Sequence[float]] = None,
) -> pd.DataFrame:
    """Create a DataFrame of per-session statistics for display"""
    rows = []
    for i, (name, summary, verdict) in enumerate(zip(names, summaries, verdicts)):
        row = {
            "file": name,
            "n": summary.n,
            "mean_dbm": summary.mean_dbm,
            "median_dbm": summary.median_dbm,
            "std_dbm": summary.std_dbm,
            "stability": str(verdict),
        }
        if effects is not None:
            row["effect_db"] = effects[i]
        rows.append(row)
    return pd.DataFrame(rows)


def format_dataframe(df: pd.DataFrame) -> str:
    """Fixed-width table with one decimal for every float column"""
    return df.to_string(index=False, float_format=format_one_decimal)


def create_report_dataframe(points: Sequence[CalibrationPoint]) -> pd.DataFrame:
    """(weight, median) pairs sorted by weight"""
    df = pd.DataFrame(
        [(p.cumulative_weight_lb, p.median_rssi_dbm) for p in points],
        columns=["weight_lb", "median_rssi_dbm"],
    )
    return df.sort_values("weight_lb", kind="stable").reset_index(drop=True)


def report_to_csv(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, float_format="%.1f", lineterminator="\n")


def render_ascii_chart(
    model: CalibrationModel,
    points: Sequence[CalibrationPoint] = (),
    width: int = CHART_WIDTH,
    height: int = CHART_HEIGHT,
) -> str:
    """Fixed-size text plot of the model curve ('.') and observed points ('o')"""
    low, high = model.weight_range
    weights = [p.cumulative_weight_lb for p in points]
    x_min = min([low] + weights)
    x_max = max([high] + weights)
    if x_max == x_min:
        x_max = x_min + 1.0

    xs = np.linspace(x_min, x_max, width)
    curve = np.asarray(evaluate_polynomial(model, xs), dtype=float)
    observed = [p.median_rssi_dbm for p in points]
    y_min = float(min(curve.min(), *observed)) if observed else float(curve.min())
    y_max = float(max(curve.max(), *observed)) if observed else float(curve.max())
    if y_max == y_min:
        y_min, y_max = y_min - 1.0, y_max + 1.0

    def column(x: float) -> int:
        return int(round((x - x_min) / (x_max - x_min) * (width - 1)))

    def row(y: float) -> int:
        return int(round((y_max - y) / (y_max - y_min) * (height - 1)))

    grid = [[" "] * width for _ in range(height)]
    for col, y in enumerate(curve):
        grid[row(y)][col] = "."
    for p in points:
        grid[row(p.median_rssi_dbm)][column(p.cumulative_weight_lb)] = "o"

    top_label = format_one_decimal(y_max)
    bottom_label = format_one_decimal(y_min)
    label_width = max(len(top_label), len(bottom_label))

    lines = []
    for r, cells in enumerate(grid):
        label = top_label if r == 0 else bottom_label if r == height - 1 else ""
        lines.append(f"{label:>{label_width}} |{''.join(cells)}")
    lines.append(" " * label_width + " +" + "-" * width)

    left = format_one_decimal(x_min)
    right = format_one_decimal(x_max)
    lines.append(" " * (label_width + 2) + left + right.rjust(width - len(left)))
    lines.append(" " * (label_width + 2) + "weight (lb) vs median RSSI (dBm)")
    return "\n".join(lines)
