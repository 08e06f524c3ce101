#!/usr/bin/env python3
#
# Food-waste weight estimation from RSSI readings.
#
# Reproduce the 5 ft link budget:
#
# ./cli.py linkbudget --power 20 --freq 915e6 --dist 1.524 --ant-gain 2.15 --sys-gain -5
#
# Calibrate a bin and estimate a new load:
#
# ./cli.py calibrate empty.log bag1.log bag2.log bag3.log --out bin.json
# ./cli.py estimate --profile bin.json unknown.log --actual 10.6
#
# Exit codes: 0 success, 1 data error, 2 usage error.
#
import argparse
import logging
import sys
from datetime import datetime, timezone
from typing import List, Optional

from pydantic import ValidationError

import calibration
import ingestion
import signal_model
import simulator
import stats
import utils
from config import DEFAULT_SETTINGS, Settings
from errors import DomainError, WasteSensingError
from waste_schema import CalibrationPoint, CalibrationProfile, DeviceConfig, LinkBudget, TxPosition

logger = logging.getLogger("cli")

EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_USAGE_ERROR = 2


class UsageError(Exception):
    """Flag values that parse but make no sense"""


def _read_sessions(paths: List[str]):
    """Parse every file before anything is written; all diagnostics are reported"""
    parser = ingestion.SessionLogParser()
    sessions, failures = [], []
    for path in paths:
        try:
            sessions.append(parser.parse_file(path))
        except WasteSensingError as e:
            failures.append(str(e))
    if failures:
        raise WasteSensingError("\n".join(failures))
    return sessions


def cmd_linkbudget(args, settings: Settings) -> int:
    try:
        budget = LinkBudget(
            tx_power_dbm=args.power,
            tx_antenna_gain_dbi=args.ant_gain,
            rx_antenna_gain_dbi=args.ant_gain if args.rx_ant_gain is None else args.rx_ant_gain,
            system_gain_db=args.sys_gain,
            frequency_hz=args.freq,
            distance_m=args.dist,
        )
    except ValidationError as e:
        raise UsageError(f"invalid link flags: {e}") from e

    try:
        path_loss = signal_model.free_space_path_loss(budget.distance_m, budget.frequency_hz, settings)
        rssi = signal_model.expected_rssi(budget, (), settings)
    except DomainError as e:
        raise UsageError(str(e)) from e

    violations = signal_model.validate_device_config(budget.tx_power_dbm, budget.frequency_hz, settings)
    for violation in violations:
        logger.warning("device limit: %s", violation.message)

    print(utils.format_budget(path_loss, rssi, violations))
    return EXIT_OK


def cmd_stats(args, settings: Settings) -> int:
    if not args.threshold > 0:
        raise UsageError(f"--threshold must be positive, got {args.threshold}")
    sessions = _read_sessions(args.files)
    empty_summary = stats.summarize(_read_sessions([args.empty])[0], settings) if args.empty else None

    summaries = [stats.summarize(s, settings) for s in sessions]
    verdicts = [stats.stability_check(s, args.threshold, settings) for s in summaries]
    effects = [stats.material_effect(s, empty_summary) for s in summaries] if empty_summary else None

    df = utils.create_summary_dataframe(args.files, summaries, verdicts, effects)
    print(utils.format_dataframe(df))
    return EXIT_OK


def cmd_calibrate(args, settings: Settings) -> int:
    sessions = _read_sessions(args.files)
    points = calibration.points_from_sessions(sessions, settings)
    model = calibration.fit_interpolating_polynomial(points, settings)

    first = sessions[0].meta
    power = args.power if args.power is not None else first.tx_power_dbm
    if power is None:
        power = settings.max_tx_power_dbm
    position = args.position or first.tx_position or TxPosition.ABOVE

    profile = CalibrationProfile(
        model=model,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        device=DeviceConfig(tx_power_dbm=power, frequency_hz=args.freq, tx_position=position),
        points=points,
    )
    ingestion.save_profile(profile, args.out, settings)
    logger.info("wrote degree-%d profile to %s", model.degree, args.out)

    worst = max(abs(r) for r in calibration.residuals(model, points))
    print(utils.format_key_values([
        ("points", str(len(points))),
        ("degree", str(model.degree)),
        ("coefficients", ", ".join(f"{c:.6g}" for c in model.coefficients)),
        ("weight_range_lb", f"{utils.format_one_decimal(model.weight_range[0])} - {utils.format_one_decimal(model.weight_range[1])}"),
        ("empty_rssi_dbm", utils.format_one_decimal(model.empty_rssi_dbm)),
        ("max_residual_db", utils.format_one_decimal(worst)),
    ]))
    return EXIT_OK


def cmd_estimate(args, settings: Settings) -> int:
    if args.actual is not None and not args.actual > 0:
        raise UsageError(f"--actual must be positive, got {args.actual}")

    profile = ingestion.load_profile(args.profile, settings)
    session = _read_sessions([args.file])[0]

    estimate = calibration.estimate_weight(profile.model, session, settings)
    error = None
    if args.actual is not None:
        error = calibration.relative_error_percent(estimate.weight_lb, args.actual)

    print(utils.format_estimate(estimate, error))
    return EXIT_OK


def cmd_simulate(args, settings: Settings) -> int:
    if args.n is not None and args.n < 1:
        raise UsageError(f"--n must be at least 1, got {args.n}")

    scenario = ingestion.load_scenario(args.scenario, settings)
    if args.seed is not None:
        scenario = scenario.model_copy(update={"seed": args.seed})

    session = simulator.simulate_session(scenario, args.n, settings)
    ingestion.write_text_atomic(args.out, ingestion.render_session_log(session))
    logger.info("wrote %d readings to %s", len(session), args.out)

    summary = stats.summarize(session, settings)
    print(utils.format_key_values([
        ("readings", str(summary.n)),
        ("weight_lb", utils.format_one_decimal(scenario.total_weight_lb)),
        ("median_rssi_dbm", utils.format_one_decimal(summary.median_dbm)),
    ]))
    return EXIT_OK


def cmd_report(args, settings: Settings) -> int:
    profile = ingestion.load_profile(args.profile, settings)
    sessions = _read_sessions(args.files)

    points = []
    for session in sessions:
        median = stats.summarize(session, settings).median_dbm
        weight = session.meta.weight_lb
        if weight is None:
            weight = calibration.invert_for_weight(profile.model, median, settings).weight_lb
        points.append(CalibrationPoint(cumulative_weight_lb=weight, median_rssi_dbm=median))

    csv_text = utils.report_to_csv(utils.create_report_dataframe(points))
    chart_text = utils.render_ascii_chart(profile.model, points) + "\n"

    outputs = [(path, text) for path, text in ((args.csv, csv_text), (args.chart, chart_text)) if path]
    ingestion.write_texts_atomic(outputs)
    if not args.csv:
        sys.stdout.write(csv_text)
    if not args.chart:
        sys.stdout.write(chart_text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cli.py",
        description="Estimate food waste weight in a bin from RSSI between two transceivers.",
    )
    parser.add_argument("--verbose", action="store_true", help="Log debug detail to standard error")
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser("linkbudget", help="Free-space path loss and expected RSSI")
    p.add_argument("--power", type=float, required=True, help="Transmit power in dBm")
    p.add_argument("--freq", type=float, default=915e6, help="Carrier frequency in Hz")
    p.add_argument("--dist", type=float, required=True, help="Transceiver separation in m")
    p.add_argument("--ant-gain", type=float, default=DEFAULT_SETTINGS.default_antenna_gain_dbi,
                   help="Antenna gain in dBi (both ends unless --rx-ant-gain is given)")
    p.add_argument("--rx-ant-gain", type=float, help="Receive antenna gain in dBi")
    p.add_argument("--sys-gain", type=float, default=0.0, help="System gain in dB, negative for loss")
    p.set_defaults(handler=cmd_linkbudget)

    p = subparsers.add_parser("stats", help="Per-file session statistics")
    p.add_argument("files", nargs="+", help="Session logs")
    p.add_argument("--empty", help="Empty-bin session log; adds a material effect column")
    p.add_argument("--threshold", type=float, default=DEFAULT_SETTINGS.stability_threshold_dbm,
                   help="Largest std (dBm) still reported as stable")
    p.set_defaults(handler=cmd_stats)

    p = subparsers.add_parser("calibrate", help="Fit a profile from sessions with weight_lb headers")
    p.add_argument("files", nargs="+", help="Labeled session logs")
    p.add_argument("--out", required=True, help="Profile file to write")
    p.add_argument("--power", type=float, help="Transmit power recorded in the profile")
    p.add_argument("--freq", type=float, default=915e6, help="Carrier frequency recorded in the profile")
    p.add_argument("--position", type=TxPosition, choices=list(TxPosition), help="Transmitter placement")
    p.set_defaults(handler=cmd_calibrate)

    p = subparsers.add_parser("estimate", help="Estimate the weight behind a session")
    p.add_argument("--profile", required=True, help="Calibration profile")
    p.add_argument("file", help="Session log")
    p.add_argument("--actual", type=float, help="Weighed amount in lb; prints the relative error")
    p.set_defaults(handler=cmd_estimate)

    p = subparsers.add_parser("simulate", help="Write a session log from a scenario file")
    p.add_argument("--scenario", required=True, help="Scenario file")
    p.add_argument("--n", type=int, help="Number of readings")
    p.add_argument("--out", required=True, help="Session log to write")
    p.add_argument("--seed", type=int, help="Override the scenario seed")
    p.set_defaults(handler=cmd_simulate)

    p = subparsers.add_parser("report", help="CSV of (weight, median) pairs and an ASCII chart")
    p.add_argument("--profile", required=True, help="Calibration profile")
    p.add_argument("files", nargs="+", help="Session logs")
    p.add_argument("--csv", help="Write the CSV here instead of standard output")
    p.add_argument("--chart", help="Write the chart here instead of standard output")
    p.set_defaults(handler=cmd_report)

    return parser


def main(argv: Optional[List[str]] = None, settings: Settings = DEFAULT_SETTINGS) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        return args.handler(args, settings)
    except UsageError as e:
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE_ERROR
    except (WasteSensingError, ValidationError, OSError) as e:
        print(f"{parser.prog} {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
