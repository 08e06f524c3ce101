import json
import logging
import math
import os
import re
import tempfile
from pathlib import Path
from typing import IO, Any, Callable, Dict, List, Optional, Tuple, Union

from pydantic import ValidationError

from calibration import coefficients_match, fit_interpolating_polynomial
from config import DEFAULT_SETTINGS, Settings
from errors import (
    EmptySessionError,
    LineDiagnostic,
    ProfileFormatError,
    SessionParseError,
)
from waste_schema import (
    CalibrationModel,
    CalibrationPoint,
    CalibrationProfile,
    DeviceConfig,
    ReadingSession,
    RssiReading,
    Scenario,
    SessionMeta,
    TxPosition,
)

logger = logging.getLogger(__name__)

PathOrStream = Union[str, os.PathLike, IO[str]]

# Plain decimal or scientific notation, '.' as the only decimal separator
NUMBER_PATTERN = r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_NUMBER_RE = re.compile(rf"^{NUMBER_PATTERN}$")

REPORT_HEADER = "weight_lb,median_rssi_dbm"


def parse_number(text: str) -> float:
    """Locale-independent float parsing that rejects nan, inf and ',' decimals"""
    text = text.strip()
    if not _NUMBER_RE.match(text):
        raise ValueError(f"not a number: {text!r}")
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"not a finite number: {text!r}")
    return value


def _parse_weight(text: str) -> float:
    value = parse_number(text)
    if value < 0:
        raise ValueError("weight_lb must be non-negative")
    return value


def _parse_fill(text: str) -> float:
    value = parse_number(text)
    if not 0 <= value <= 100:
        raise ValueError("fill_percent must lie in [0, 100]")
    return value


def _parse_position(text: str) -> TxPosition:
    try:
        return TxPosition(text.strip().lower())
    except ValueError:
        raise ValueError(f"tx_position must be 'above' or 'below', got {text.strip()!r}")


class SessionLogParser:
    """Parser for serial-monitor and CSV session logs"""

    def __init__(self):
        self.header_pattern = re.compile(r"^#\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")
        self.serial_pattern = re.compile(r"^RSSI:\s*(\S+)\s*$")
        self.csv_pattern = re.compile(r"^\s*(\d+)\s*,\s*(\S+)\s*$")

        # Header key -> converter
        self.header_fields: Dict[str, Callable[[str], Any]] = {
            "environment": lambda v: v.strip(),
            "material": lambda v: v.strip(),
            "weight_lb": _parse_weight,
            "tx_power_dbm": parse_number,
            "tx_position": _parse_position,
            "fill_percent": _parse_fill,
        }

    def parse(self, text: str, source: str = "<session>") -> ReadingSession:
        """Parse a whole log; any malformed line rejects the file"""
        meta: Dict[str, Any] = {}
        readings: List[RssiReading] = []
        diagnostics: List[LineDiagnostic] = []
        last_index = -1

        for line_number, raw in enumerate(_split_lines(text), start=1):
            line = raw.strip()
            if not line:
                continue

            if line.startswith("#"):
                error = self._parse_header(line, meta)
                if error:
                    diagnostics.append(LineDiagnostic(line_number, raw, error))
                continue

            serial_match = self.serial_pattern.match(line)
            csv_match = None if serial_match else self.csv_pattern.match(line)

            if serial_match:
                index, value_text = last_index + 1, serial_match.group(1)
            elif csv_match:
                index, value_text = int(csv_match.group(1)), csv_match.group(2)
            else:
                diagnostics.append(LineDiagnostic(line_number, raw, "expected 'RSSI: <number>' or '<seq>,<rssi_dbm>'"))
                continue

            try:
                value = parse_number(value_text)
            except ValueError as e:
                diagnostics.append(LineDiagnostic(line_number, raw, str(e)))
                continue

            if index <= last_index:
                diagnostics.append(LineDiagnostic(line_number, raw, f"sequence index {index} does not increase"))
                continue

            readings.append(RssiReading(sequence_index=index, rssi_dbm=value))
            last_index = index

        if diagnostics:
            raise SessionParseError(diagnostics, source)
        if not readings:
            raise EmptySessionError(f"{source}: no readings found")

        logger.debug("parsed %d readings from %s", len(readings), source)
        return ReadingSession(readings=readings, meta=SessionMeta(**meta))

    def _parse_header(self, line: str, meta: Dict[str, Any]) -> Optional[str]:
        match = self.header_pattern.match(line)
        if not match:
            # Free-form comment
            return None

        key, value = match.group(1).lower(), match.group(2)
        converter = self.header_fields.get(key)
        if converter is None:
            logger.debug("ignoring unknown header %r", key)
            return None

        try:
            meta[key] = converter(value)
        except ValueError as e:
            return f"bad {key} header: {e}"
        return None

    def parse_file(self, path: Union[str, os.PathLike]) -> ReadingSession:
        """Read and parse a UTF-8 session log"""
        with open(path, "r", encoding="utf-8-sig", newline="") as file:
            text = file.read()
        return self.parse(text, source=str(path))


def _split_lines(text: str) -> List[str]:
    # LF or CRLF only; str.splitlines would also break on form feeds and the like
    text = text.lstrip("\ufeff")
    return [line[:-1] if line.endswith("\r") else line for line in text.split("\n")]


def parse_session_log(text: str, source: str = "<session>") -> ReadingSession:
    """Parse session log text into a ReadingSession"""
    return SessionLogParser().parse(text, source)


def render_session_log(session: ReadingSession) -> str:
    """Write a session in the log format: '# key = value' headers then a CSV body"""
    lines = []
    for key, value in session.meta.model_dump(mode="json").items():
        if value is None:
            continue
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"# {key} = {value}")
    lines.extend(f"{r.sequence_index},{r.rssi_dbm!r}" for r in session.readings)
    return "\n".join(lines) + "\n"


def parse_report_csv(text: str, source: str = "<report>") -> List[CalibrationPoint]:
    """Read (weight, median) rows written by the report command"""
    points: List[CalibrationPoint] = []
    diagnostics: List[LineDiagnostic] = []
    header_seen = False

    for line_number, raw in enumerate(_split_lines(text), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            header_seen = True
            if line.replace(" ", "") != REPORT_HEADER:
                diagnostics.append(LineDiagnostic(line_number, raw, f"expected header {REPORT_HEADER!r}"))
            continue

        fields = line.split(",")
        try:
            if len(fields) != 2:
                raise ValueError(f"expected 2 fields, got {len(fields)}")
            points.append(CalibrationPoint(
                cumulative_weight_lb=parse_number(fields[0]),
                median_rssi_dbm=parse_number(fields[1]),
            ))
        except (ValueError, ValidationError) as e:
            diagnostics.append(LineDiagnostic(line_number, raw, str(e).splitlines()[0]))

    if diagnostics:
        raise SessionParseError(diagnostics, source)
    return points


# ---------------------------------------------------------------------------
# Profiles and scenarios
# ---------------------------------------------------------------------------

PROFILE_FIELDS = {
    "version", "created_at", "device", "points", "degree",
    "coefficients", "weight_range", "empty_rssi_dbm",
}
DEVICE_FIELDS = {"tx_power_dbm", "frequency_hz", "tx_position"}
POINT_FIELDS = {"weight_lb", "median_rssi_dbm"}


def format_exact(value: float) -> str:
    """Decimal text with 17 significant digits; float() of it is bit-identical"""
    return format(float(value), ".17g")


def write_text_atomic(path: Union[str, os.PathLike], text: str) -> None:
    """Write a file via a temporary sibling so readers never see partial output"""
    write_texts_atomic([(path, text)])


def write_texts_atomic(outputs: List[Tuple[Union[str, os.PathLike], str]]) -> None:
    """Stage every output beside its target, then rename; a failed write leaves no target touched"""
    staged: List[Tuple[str, Path]] = []
    try:
        for path, text in outputs:
            path = Path(path)
            fd, temp_path = tempfile.mkstemp(prefix=f".{path.name}.", dir=str(path.parent) or ".")
            staged.append((temp_path, path))
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as file:
                file.write(text)
    except BaseException:
        for temp_path, _ in staged:
            if os.path.exists(temp_path):
                os.remove(temp_path)
        raise

    for temp_path, path in staged:
        os.replace(temp_path, path)


def _write(destination: PathOrStream, text: str) -> None:
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        write_text_atomic(destination, text)


def _read(source: PathOrStream) -> Tuple[str, str]:
    if hasattr(source, "read"):
        return source.read(), getattr(source, "name", "<stream>")
    with open(source, "r", encoding="utf-8-sig") as file:
        return file.read(), str(source)


def profile_to_dict(profile: CalibrationProfile, settings: Settings = DEFAULT_SETTINGS) -> Dict[str, Any]:
    model = profile.model
    return {
        "version": settings.profile_version,
        "created_at": profile.created_at,
        "device": {
            "tx_power_dbm": profile.device.tx_power_dbm,
            "frequency_hz": profile.device.frequency_hz,
            "tx_position": profile.device.tx_position.value,
        },
        "points": [
            {"weight_lb": p.cumulative_weight_lb, "median_rssi_dbm": p.median_rssi_dbm}
            for p in profile.points
        ],
        "degree": model.degree,
        "coefficients": [format_exact(c) for c in model.coefficients],
        "weight_range": list(model.weight_range),
        "empty_rssi_dbm": format_exact(model.empty_rssi_dbm),
    }


def save_profile(profile: CalibrationProfile, destination: PathOrStream, settings: Settings = DEFAULT_SETTINGS) -> None:
    """Persist a calibration profile as a version-1 JSON document"""
    text = json.dumps(profile_to_dict(profile, settings), indent=2) + "\n"
    _write(destination, text)
    logger.debug("saved degree-%d profile", profile.model.degree)


def _check_fields(document: Any, expected: set, where: str) -> None:
    if not isinstance(document, dict):
        raise ProfileFormatError(f"{where} must be an object")
    missing = expected - document.keys()
    unknown = document.keys() - expected
    if missing:
        raise ProfileFormatError(f"{where} is missing field(s): {', '.join(sorted(missing))}")
    if unknown:
        raise ProfileFormatError(f"{where} has unknown field(s): {', '.join(sorted(unknown))}")


def _decimal(value: Any, where: str) -> float:
    if isinstance(value, bool):
        raise ProfileFormatError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return parse_number(value)
        except ValueError:
            pass
    raise ProfileFormatError(f"{where}: expected a number, got {value!r}")


def profile_from_dict(document: Any, settings: Settings = DEFAULT_SETTINGS) -> CalibrationProfile:
    """Validate a profile document and build the profile"""
    _check_fields(document, PROFILE_FIELDS, "profile")
    if document["version"] != settings.profile_version:
        raise ProfileFormatError(
            f"unsupported profile version {document['version']!r} (expected {settings.profile_version})"
        )

    device = document["device"]
    _check_fields(device, DEVICE_FIELDS, "profile.device")

    if not isinstance(document["points"], list):
        raise ProfileFormatError("profile.points must be a list")
    for i, point in enumerate(document["points"]):
        _check_fields(point, POINT_FIELDS, f"profile.points[{i}]")

    coefficients = document["coefficients"]
    degree = document["degree"]
    if not isinstance(coefficients, list) or not isinstance(degree, int) or isinstance(degree, bool):
        raise ProfileFormatError("profile.coefficients must be a list and profile.degree an integer")
    if len(coefficients) != degree + 1:
        raise ProfileFormatError(
            f"degree {degree} needs {degree + 1} coefficients, found {len(coefficients)}"
        )

    weight_range = document["weight_range"]
    if not isinstance(weight_range, list) or len(weight_range) != 2:
        raise ProfileFormatError("profile.weight_range must be [min, max]")

    try:
        model = CalibrationModel(
            coefficients=tuple(_decimal(c, f"coefficients[{i}]") for i, c in enumerate(coefficients)),
            weight_range=(_decimal(weight_range[0], "weight_range[0]"), _decimal(weight_range[1], "weight_range[1]")),
            empty_rssi_dbm=_decimal(document["empty_rssi_dbm"], "empty_rssi_dbm"),
        )
        return CalibrationProfile(
            model=model,
            created_at=str(document["created_at"]),
            device=DeviceConfig(
                tx_power_dbm=_decimal(device["tx_power_dbm"], "device.tx_power_dbm"),
                frequency_hz=_decimal(device["frequency_hz"], "device.frequency_hz"),
                tx_position=device["tx_position"],
            ),
            points=[
                CalibrationPoint(
                    cumulative_weight_lb=_decimal(p["weight_lb"], f"points[{i}].weight_lb"),
                    median_rssi_dbm=_decimal(p["median_rssi_dbm"], f"points[{i}].median_rssi_dbm"),
                )
                for i, p in enumerate(document["points"])
            ],
        )
    except ValidationError as e:
        raise ProfileFormatError(f"invalid profile: {e}") from e


def check_profile_consistency(profile: CalibrationProfile, settings: Settings = DEFAULT_SETTINGS) -> bool:
    """Refit the stored points and compare with the stored coefficients"""
    if len(profile.points) < 2:
        return True

    refit = fit_interpolating_polynomial(profile.points, settings)
    if coefficients_match(refit.coefficients, profile.model.coefficients, relative=settings.refit_tolerance):
        return True

    logger.warning(
        "profile coefficients %s differ from a refit of its points %s beyond %g relative",
        list(profile.model.coefficients), list(refit.coefficients), settings.refit_tolerance,
    )
    return False


def load_profile(source: PathOrStream, settings: Settings = DEFAULT_SETTINGS) -> CalibrationProfile:
    """Load and validate a calibration profile; refit inconsistencies are logged"""
    text, name = _read(source)
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProfileFormatError(f"{name}: not a JSON document ({e})") from e

    profile = profile_from_dict(document, settings)
    check_profile_consistency(profile, settings)
    return profile


def save_scenario(scenario: Scenario, destination: PathOrStream, settings: Settings = DEFAULT_SETTINGS) -> None:
    """Persist a scenario with the same conventions as profiles"""
    document = {"version": settings.profile_version}
    document.update(scenario.model_dump(mode="json"))
    _write(destination, json.dumps(document, indent=2) + "\n")


def load_scenario(source: PathOrStream, settings: Settings = DEFAULT_SETTINGS) -> Scenario:
    """Load a scenario document; unknown fields are rejected"""
    text, name = _read(source)
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProfileFormatError(f"{name}: not a JSON document ({e})") from e

    if not isinstance(document, dict):
        raise ProfileFormatError(f"{name}: scenario must be an object")
    version = document.pop("version", None)
    if version != settings.profile_version:
        raise ProfileFormatError(f"{name}: unsupported scenario version {version!r}")

    try:
        return Scenario.model_validate(document)
    except ValidationError as e:
        raise ProfileFormatError(f"{name}: invalid scenario: {e}") from e
