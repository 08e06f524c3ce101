from typing import Dict

from pydantic import BaseModel, ConfigDict, Field


class Settings(BaseModel):
    """Tunable defaults shared by the library and the command line"""

    model_config = ConfigDict(frozen=True)

    # Transceiver limits (RFM22B class)
    min_tx_power_dbm: float = Field(default=1.0, description="Lowest configurable transmit power")
    max_tx_power_dbm: float = Field(default=20.0, description="Highest configurable transmit power")
    min_frequency_hz: float = Field(default=433e6, description="Lowest configurable carrier frequency")
    max_frequency_hz: float = Field(default=915e6, description="Highest configurable carrier frequency")
    default_antenna_gain_dbi: float = Field(default=2.15, description="Gain of the stock whip antenna")

    speed_of_light_m_s: float = Field(default=299_792_458.0, description="Propagation speed used by path loss")

    # Reading protocol
    stability_threshold_dbm: float = Field(default=1.0, gt=0, description="Largest std still considered stable")
    min_readings: int = Field(default=10, ge=1, description="Readings a session should hold")
    default_n_readings: int = Field(default=10, ge=1, description="Readings produced per simulated session")

    # Calibration
    max_interpolation_points: int = Field(default=4, ge=2, description="Above this, fit least-squares cubic")
    least_squares_degree: int = Field(default=3, ge=1, description="Degree used for least-squares fits")
    root_scan_step_lb: float = Field(default=0.01, gt=0, description="Grid step of the sign-change scan")
    root_tolerance_lb: float = Field(default=1e-9, gt=0, description="Bisection stops below this bracket width")
    refit_tolerance: float = Field(default=1e-6, gt=0, description="Relative tolerance for profile refit checks")

    # Simulator
    environment_offsets_db: Dict[str, float] = Field(
        default_factory=lambda: {"indoor_lab": 3.0, "indoor_open": 0.0, "outdoor": -2.0},
        description="Multipath offset added to every reading, per environment",
    )

    profile_version: int = Field(default=1, description="Version written into profile and scenario files")


DEFAULT_SETTINGS = Settings()
