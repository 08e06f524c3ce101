import math
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config import DEFAULT_SETTINGS, Settings


class FrozenModel(BaseModel):
    """Immutable value type shared by every schema below"""

    model_config = ConfigDict(frozen=True, extra="forbid")


def _require_finite(value: float, name: str) -> float:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


class EnvironmentKind(str, Enum):
    """Where the bin stands; each kind carries a multipath offset"""

    INDOOR_LAB = "indoor_lab"
    INDOOR_OPEN = "indoor_open"
    OUTDOOR = "outdoor"

    def multipath_offset_db(self, settings: Settings = DEFAULT_SETTINGS) -> float:
        return settings.environment_offsets_db[self.value]


class TxPosition(str, Enum):
    """Transmitter placement relative to the receiver"""

    ABOVE = "above"
    BELOW = "below"


# ---------------------------------------------------------------------------
# Link budget
# ---------------------------------------------------------------------------

class LinkBudget(FrozenModel):
    """Gains and losses between the two transceivers"""

    tx_power_dbm: float = Field(description="Transmit power in dBm")
    tx_antenna_gain_dbi: float = Field(default=DEFAULT_SETTINGS.default_antenna_gain_dbi, description="Transmit antenna gain")
    rx_antenna_gain_dbi: float = Field(default=DEFAULT_SETTINGS.default_antenna_gain_dbi, description="Receive antenna gain")
    system_gain_db: float = Field(default=0.0, description="Remaining system gain, negative for loss")
    frequency_hz: float = Field(description="Carrier frequency in Hz")
    distance_m: float = Field(description="Transceiver separation in meters")

    @field_validator("*")
    @classmethod
    def _finite(cls, value: float, info) -> float:
        return _require_finite(value, info.field_name)


class MaterialLayer(FrozenModel):
    """A slab of bin contents; negative attenuation models multipath gain"""

    label: str = Field(description="What the layer is made of")
    attenuation_db: float = Field(description="Loss through the layer in dB")

    @field_validator("attenuation_db")
    @classmethod
    def _finite(cls, value: float) -> float:
        return _require_finite(value, "attenuation_db")


class DeviceViolation(FrozenModel):
    """One device limit broken by a configuration"""

    field: str = Field(description="Offending setting")
    value: float = Field(description="Configured value")
    minimum: float = Field(description="Lowest allowed value")
    maximum: float = Field(description="Highest allowed value")

    @property
    def message(self) -> str:
        return f"{self.field}={self.value:g} outside device range [{self.minimum:g}, {self.maximum:g}]"


# ---------------------------------------------------------------------------
# Sessions
# ---------------------------------------------------------------------------

class RssiReading(FrozenModel):
    """A single received-strength sample"""

    sequence_index: int = Field(ge=0, description="Position of the reading within its session")
    rssi_dbm: float = Field(description="Received strength in dBm")

    @field_validator("rssi_dbm")
    @classmethod
    def _finite(cls, value: float) -> float:
        return _require_finite(value, "rssi_dbm")


class SessionMeta(FrozenModel):
    """Capture conditions of a session, taken from log headers"""

    environment: Optional[str] = Field(default=None, description="Environment label, e.g. indoor_lab")
    tx_power_dbm: Optional[float] = Field(default=None, description="Transmit power during capture")
    tx_position: Optional[TxPosition] = Field(default=None, description="Transmitter above or below the receiver")
    material: Optional[str] = Field(default=None, description="Bin contents label; 'empty' for the baseline")
    weight_lb: Optional[float] = Field(default=None, ge=0, description="Cumulative weight of the contents")
    fill_percent: Optional[float] = Field(default=None, ge=0, le=100, description="Visual fill level")


class ReadingSession(FrozenModel):
    """Ordered readings plus capture metadata"""

    readings: List[RssiReading] = Field(default_factory=list, description="Readings in capture order")
    meta: SessionMeta = Field(default_factory=SessionMeta, description="Capture metadata")

    @field_validator("readings")
    @classmethod
    def _strictly_increasing(cls, readings: List[RssiReading]) -> List[RssiReading]:
        for previous, current in zip(readings, readings[1:]):
            if current.sequence_index <= previous.sequence_index:
                raise ValueError(
                    f"sequence_index must strictly increase ({previous.sequence_index} then {current.sequence_index})"
                )
        return readings

    @classmethod
    def from_values(cls, values: Sequence[float], meta: Optional[SessionMeta] = None) -> "ReadingSession":
        """Build a session numbering readings from zero"""
        readings = [RssiReading(sequence_index=i, rssi_dbm=float(v)) for i, v in enumerate(values)]
        return cls(readings=readings, meta=meta or SessionMeta())

    def values(self) -> List[float]:
        return [reading.rssi_dbm for reading in self.readings]

    def __len__(self) -> int:
        return len(self.readings)


class SessionSummary(FrozenModel):
    """Descriptive statistics of one session"""

    n: int = Field(ge=1, description="Number of readings")
    mean_dbm: float = Field(description="Arithmetic mean")
    median_dbm: float = Field(description="Median")
    std_dbm: float = Field(ge=0, description="Sample standard deviation")
    min_dbm: float = Field(description="Smallest reading")
    max_dbm: float = Field(description="Largest reading")

    @model_validator(mode="after")
    def _ordered(self) -> "SessionSummary":
        if not self.min_dbm <= self.median_dbm <= self.max_dbm:
            raise ValueError("expected min_dbm <= median_dbm <= max_dbm")
        return self


class StabilityVerdict(FrozenModel):
    """Outcome of comparing a session's spread with a threshold"""

    stable: bool = Field(description="True when std does not exceed the threshold")
    std_dbm: float = Field(description="Observed standard deviation")
    threshold_dbm: float = Field(description="Threshold applied")

    def __str__(self) -> str:
        return "stable" if self.stable else f"unstable({self.std_dbm:.1f})"


class PositionComparison(FrozenModel):
    """Transmitter above vs below the receiver"""

    mean_offset_db: float = Field(description="above.mean - below.mean")
    median_offset_db: float = Field(description="above.median - below.median")
    above: StabilityVerdict = Field(description="Stability with the transmitter above")
    below: StabilityVerdict = Field(description="Stability with the transmitter below")


class PowerStepResult(FrozenModel):
    """Observed median change against the commanded power change"""

    expected_step_db: float = Field(description="high_power - low_power")
    observed_step_db: float = Field(description="high.median - low.median")
    deviation_db: float = Field(description="observed - expected")
    consistent: bool = Field(description="True when |deviation| is within tolerance")


class MaterialEffectRow(FrozenModel):
    """Median shift of one material against its environment's empty bin"""

    environment: str = Field(description="Environment label")
    material: str = Field(description="Material label")
    material_median_dbm: float = Field(description="Median with the material present")
    empty_median_dbm: float = Field(description="Median of the empty bin")
    effect_db: float = Field(description="material - empty; negative means attenuation")


class FillTrend(FrozenModel):
    """Median readings ordered by fill level"""

    points: List[Tuple[float, float]] = Field(description="(fill_percent, median_dbm), ascending fill")
    total_drop_db: float = Field(description="First median minus last median")
    non_increasing: bool = Field(description="True when no median rises as fill increases")


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

class CalibrationPoint(FrozenModel):
    """Median reading observed at a known cumulative weight"""

    cumulative_weight_lb: float = Field(ge=0, description="Weight in the bin, pounds")
    median_rssi_dbm: float = Field(description="Median RSSI at that weight")

    @field_validator("cumulative_weight_lb", "median_rssi_dbm")
    @classmethod
    def _finite(cls, value: float, info) -> float:
        return _require_finite(value, info.field_name)


class CalibrationModel(FrozenModel):
    """Polynomial weight -> median RSSI, coefficients in ascending degree"""

    coefficients: Tuple[float, ...] = Field(description="c0 + c1*x + c2*x^2 + ...")
    weight_range: Tuple[float, float] = Field(description="Weights the model was fitted on, pounds")
    empty_rssi_dbm: float = Field(description="Model value at zero weight")

    @model_validator(mode="after")
    def _consistent(self) -> "CalibrationModel":
        if not self.coefficients:
            raise ValueError("coefficients must not be empty")
        if any(not math.isfinite(c) for c in self.coefficients):
            raise ValueError("coefficients must be finite")
        if len(self.coefficients) > 1 and self.coefficients[-1] == 0.0:
            raise ValueError("leading coefficient must be nonzero unless degree 0")
        low, high = self.weight_range
        if not low <= high:
            raise ValueError(f"invalid weight_range {self.weight_range}")
        if abs(self.empty_rssi_dbm - self.coefficients[0]) > 1e-9:
            raise ValueError("empty_rssi_dbm must equal the constant coefficient")
        return self

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1


class WeightEstimate(FrozenModel):
    """Weight recovered from an observed median reading"""

    weight_lb: float = Field(description="Estimated weight, pounds")
    observed_median_dbm: float = Field(description="Median reading that was inverted")
    extrapolated: bool = Field(default=False, description="True when no in-range root exists")
    all_roots_in_range: List[float] = Field(default_factory=list, description="Every root found in the weight range")


class HoldoutResult(FrozenModel):
    """Estimate for a bag of known weight that was left out of calibration"""

    estimate: WeightEstimate = Field(description="Model estimate")
    actual_lb: float = Field(description="Weighed amount")
    relative_error_percent: float = Field(description="100 * |predicted - actual| / actual")


class DeviceConfig(FrozenModel):
    """Transceiver settings a profile was calibrated with"""

    tx_power_dbm: float = Field(description="Transmit power")
    frequency_hz: float = Field(description="Carrier frequency")
    tx_position: TxPosition = Field(default=TxPosition.ABOVE, description="Transmitter placement")


class CalibrationProfile(FrozenModel):
    """A fitted model together with the data and device it came from"""

    model: CalibrationModel = Field(description="Fitted polynomial")
    created_at: str = Field(description="ISO-8601 creation timestamp")
    device: DeviceConfig = Field(description="Device configuration during calibration")
    points: List[CalibrationPoint] = Field(default_factory=list, description="Points the model was fitted on")


# ---------------------------------------------------------------------------
# Simulator
# ---------------------------------------------------------------------------

class WasteItem(FrozenModel):
    """A bag of waste; without an explicit layer its loss follows the per-pound rate"""

    weight_lb: float = Field(ge=0, description="Bag weight, pounds")
    layer: Optional[MaterialLayer] = Field(default=None, description="Explicit attenuation of the bag")
    label: str = Field(default="food", description="Material label used for derived layers")


class Scenario(FrozenModel):
    """Physical description the simulator turns into readings"""

    budget: LinkBudget = Field(description="Link between the transceivers")
    environment: EnvironmentKind = Field(default=EnvironmentKind.INDOOR_OPEN, description="Where the bin stands")
    contents: List[WasteItem] = Field(default_factory=list, description="Bags in the bin")
    attenuation_per_lb_db: float = Field(default=0.0, description="Loss per pound for bags without a layer")
    noise_sigma_db: float = Field(default=0.0, ge=0, description="Std of additive Gaussian noise")
    ground_coupling_offset_db: float = Field(default=0.0, description="Offset from objects around the ground transceiver")
    quantize_step_db: float = Field(default=0.0, ge=0, description="Round readings to this step; 0 disables")
    seed: int = Field(default=0, ge=0, lt=2**64, description="Generator seed")
    tx_position: TxPosition = Field(default=TxPosition.ABOVE, description="Transmitter placement")
    fill_percent: Optional[float] = Field(default=None, ge=0, le=100, description="Fill level copied to metadata")

    @field_validator("attenuation_per_lb_db", "noise_sigma_db", "ground_coupling_offset_db", "quantize_step_db")
    @classmethod
    def _finite(cls, value: float, info) -> float:
        return _require_finite(value, info.field_name)

    @property
    def total_weight_lb(self) -> float:
        return sum(item.weight_lb for item in self.contents)

    @property
    def material_label(self) -> str:
        labels = []
        for item in self.contents:
            label = item.layer.label if item.layer is not None else item.label
            if label not in labels:
                labels.append(label)
        return "+".join(labels) if labels else "empty"

    def layers(self) -> List[MaterialLayer]:
        """Layer stack seen by the link, deriving loss from weight where no layer is given"""
        stack = []
        for item in self.contents:
            if item.layer is not None:
                stack.append(item.layer)
            else:
                stack.append(MaterialLayer(label=item.label, attenuation_db=self.attenuation_per_lb_db * item.weight_lb))
        return stack
