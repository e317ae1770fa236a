"""
Command-line interface for the ArduECO fleet pipeline.

Runs simulations, serves the broker with ingestion, replays device logs,
exports maps and validates device configuration files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

# Add parent directory to path to allow imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from cli.output import write_output
from firmware import Reading, ReadingFormatError, validate_params
from fleet import ScenarioError, default_scenario, load_scenario, run_sim
from ingest import (
    DEFAULT_PRECISION,
    IngestService,
    JsonlReadingStore,
    StoreError,
    aggregate_grid,
    export_geojson,
    utc_to_ms,
)
from mqttwire import Broker, MqttServer

logger = logging.getLogger(__name__)

STORE_ENV = "ARDUECO_STORE"

EXIT_OK = 0
EXIT_DOMAIN_ERROR = 1


class CliError(Exception):
    """A failure reported to the user with exit code 1."""


def _error(message: str) -> int:
    print(f"Error: {message}", file=sys.stderr)
    return EXIT_DOMAIN_ERROR


def _open_existing_store(path: str) -> JsonlReadingStore:
    if not Path(path).exists():
        raise CliError(f"store not found: {path}")
    return JsonlReadingStore(path)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_scenario(args.scenario) if args.scenario else default_scenario()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    report = run_sim(cfg)
    write_output(args.out, report.to_json())
    if args.geojson:
        write_output(args.geojson, export_geojson(report.records, style_seed=args.style_seed))
    totals = report.totals
    print(
        f"generated {totals['generated']}, stored {totals['stored']}, "
        f"complete rides {totals['complete_rides']}/{totals['rides']}"
    )
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    store = JsonlReadingStore(args.store)
    service = IngestService(store)
    authenticator = None
    if args.auth_token:
        token = args.auth_token
        authenticator = lambda _client_id, offered: offered == token  # noqa: E731
    broker = Broker(authenticator)
    service.attach(broker)
    server = MqttServer(broker, host=args.host, port=args.port)
    try:
        server.start()
    except OSError as e:
        raise CliError(f"cannot listen on {args.host}:{args.port}: {e}") from e

    host, port = server.address
    print(f"Serving MQTT on {host}:{port}, store {args.store}", flush=True)
    try:
        server.serve_forever(args.duration)
    except KeyboardInterrupt:
        print("Interrupted, shutting down")
    finally:
        store.close()
    print(f"{len(store)} records stored, {service.quarantined} quarantined")
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    path = Path(args.perm_log)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise CliError(f"cannot read {path}: {e}") from e

    store = JsonlReadingStore(args.store)
    service = IngestService(store)
    topic = f"ardueco/{args.device_id}/data"
    before, quarantined_before = len(store), service.quarantined
    for line in lines:
        if not line.strip():
            continue
        try:
            received_at = utc_to_ms(Reading.from_line(line).utc)
        except (ReadingFormatError, ValueError):
            received_at = 0
        service.on_message(topic, line.encode("utf-8"), received_at=received_at)
    store.close()

    for summary in service.summaries():
        if summary.device_id != args.device_id:
            continue
        expected = "?" if summary.expected_count is None else summary.expected_count
        print(
            f"{summary.ride_id}  {summary.device_id}  "
            f"{summary.received_count}/{expected}  {summary.status.value}"
        )
    print(
        f"{len(store) - before} ingested, {service.duplicates} duplicates, "
        f"{service.quarantined - quarantined_before} quarantined"
    )
    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    store = _open_existing_store(args.store)
    records = store.query()
    grid = aggregate_grid(records, args.precision) if args.precision is not None else None
    text = export_geojson(records, style_seed=args.style_seed, tracks=args.tracks, grid=grid)
    write_output(args.geojson, text)
    fixed = sum(1 for r in records if r.reading.fix_valid)
    if args.geojson != "-":
        print(f"{fixed} points exported to {args.geojson}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    store = _open_existing_store(args.store)
    service = IngestService(store)
    summaries = service.summaries()
    print(f"{'ride':<10}{'device':<14}{'received':>10}{'expected':>10}  status")
    for s in summaries:
        expected = "-" if s.expected_count is None else str(s.expected_count)
        print(
            f"{s.ride_id:<10}{s.device_id:<14}{s.received_count:>10}{expected:>10}"
            f"  {s.status.value}"
        )
    print(f"{len(summaries)} rides, {len(store)} readings")
    print()

    cells = aggregate_grid(store.query(), args.precision)
    print(f"{'cell':<14}{'count':>8}{'mean':>10}{'min':>10}{'max':>10}")
    for c in cells:
        print(
            f"{c.cell_id:<14}{c.count:>8}"
            f"{c.mean_ppm:>10.2f}{c.min_ppm:>10.2f}{c.max_ppm:>10.2f}"
        )
    print(f"{len(cells)} cells at precision {args.precision}")
    return EXIT_OK


def cmd_validate_config(args: argparse.Namespace) -> int:
    path = Path(args.params)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise CliError(f"cannot read {path}: {e}") from e
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        print(f"params.json: not valid JSON: {e}")
        return EXIT_DOMAIN_ERROR

    problems = validate_params(document)
    if not problems:
        print(f"{path}: OK, the device would boot")
        return EXIT_OK
    for problem in problems:
        print(str(problem))
    print(f"{path}: {len(problems)} problem(s), the device would not boot")
    return EXIT_DOMAIN_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ardueco",
        description="ArduECO fleet pipeline",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Simulate the default fleet and write a map
  python cli/cli.py simulate --out report.json --geojson map.geojson

  # Run the broker with ingestion
  python cli/cli.py serve --port 1883 --store readings.jsonl

  # Ingest a device's perm_log.txt and print per-cell statistics
  python cli/cli.py replay --perm-log perm_log.txt --store readings.jsonl --device-id bike-001
  python cli/cli.py stats --store readings.jsonl --precision 6
        """,
    )
    parser.add_argument('-v', '--verbose', action='store_true', help='Enable debug logging')
    sub = parser.add_subparsers(dest='command', required=True)
    default_store = os.environ.get(STORE_ENV)

    def store_arg(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            '--store',
            default=default_store,
            required=default_store is None,
            help=f'JSON-lines reading store (default: ${STORE_ENV})',
        )

    p = sub.add_parser('simulate', help='Run a fleet simulation')
    p.add_argument('--scenario', help='Scenario JSON (default: built-in scenario)')
    p.add_argument('--out', required=True, help='Report JSON path, or - for stdout')
    p.add_argument('--geojson', help='Also write the stored readings as GeoJSON')
    p.add_argument('--seed', type=int, help='Override the scenario seed')
    p.add_argument('--style-seed', type=int, default=0, help='Ride color assignment seed')
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('serve', help='Run the MQTT broker with ingestion')
    p.add_argument('--host', default='0.0.0.0', help='Interface to bind (default: 0.0.0.0)')
    p.add_argument('--port', type=int, default=1883, help='Port (default: 1883)')
    p.add_argument('--auth-token', help='Refuse clients that do not send this token')
    p.add_argument('--duration', type=float, help='Stop after this many seconds')
    store_arg(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser('replay', help='Ingest a perm_log.txt')
    p.add_argument('--perm-log', required=True, help='Device log, one reading per line')
    p.add_argument('--device-id', default='replay', help='Device the log came from')
    store_arg(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser('export', help='Write stored readings as GeoJSON')
    p.add_argument('--geojson', required=True, help='Output path, or - for stdout')
    p.add_argument('--precision', type=int, help='Add a grid layer at this geohash precision')
    p.add_argument('--tracks', action='store_true', help='Add one line per ride')
    p.add_argument('--style-seed', type=int, default=0, help='Ride color assignment seed')
    store_arg(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser('stats', help='Print per-ride and per-cell tables')
    p.add_argument(
        '--precision', type=int, default=DEFAULT_PRECISION, help='Geohash precision (default: 7)'
    )
    store_arg(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser('validate-config', help='Check a params.json')
    p.add_argument('--params', required=True, help='Path to params.json')
    p.set_defaults(func=cmd_validate_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Main CLI entry point; returns the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, 'precision', None) is not None and not 1 <= args.precision <= 12:
        parser.error("--precision must be in 1..12")

    try:
        return args.func(args)
    except CliError as e:
        return _error(str(e))
    except ScenarioError as e:
        return _error(f"invalid scenario: {e}")
    except StoreError as e:
        return _error(str(e))
    except OSError as e:
        return _error(str(e))


if __name__ == '__main__':
    sys.exit(main())
