#!/usr/bin/env python3
"""
sndef-bms command line: readout, update, attack, bench and keygen
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from .bench import DEFAULT_SUITES, MAX_BENCH_PAYLOAD, BenchReport, run_benchmark
from .codec import SUITE_CLI_NAMES, CipherSuiteId
from .config import Settings, load_settings
from .crypto import SystemEntropy
from .device import ConfigKey, Scenario
from .endpoints import Outcome, Stage
from .errors import ConfigError, FixtureError, LivelockDetected
from .fixtures import generate_identity, load_identity_fixture, load_pack_fixture, write_identity_fixture
from .logs import setup_logging
from .scenarios import ATTACKS, ScenarioReport, run_attack, run_readout, run_update
from .transport import AdversaryConfig, AdversaryKind

LOGGER = logging.getLogger(__name__)

console = Console()

EXIT_OK = 0
EXIT_AUTH_FAILURE = 2
EXIT_CHANNEL_REJECTED = 3
EXIT_TIMEOUT = 4
EXIT_ATTACK_NOT_CONTAINED = 5
EXIT_USAGE = 64
EXIT_BAD_FIXTURE = 65
EXIT_IO = 74

DEFAULT_PACK_FIXTURE = "fixtures/default_pack.txt"
DEFAULT_IDENTITY_FIXTURE = "fixtures/default_identity.txt"


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 64"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def hex_serial(value: str) -> bytes:
    try:
        serial = bytes.fromhex(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"serial '{value}' is not hex") from None
    if len(serial) != 8:
        raise argparse.ArgumentTypeError(f"serial must be 8 bytes, got {len(serial)}")
    return serial


def config_assignment(value: str) -> tuple[int, bytes]:
    """KEY=HEX where KEY is a number (0x0001) or a key name (over_temp_threshold)"""
    if "=" not in value:
        raise argparse.ArgumentTypeError(f"expected KEY=HEX, got '{value}'")
    key_text, hex_text = value.split("=", 1)
    try:
        key = int(key_text, 0)
    except ValueError:
        try:
            key = int(ConfigKey[key_text.strip().upper()])
        except KeyError:
            raise argparse.ArgumentTypeError(f"unknown config key '{key_text}'") from None
    if not 0 <= key <= 0xFFFF:
        raise argparse.ArgumentTypeError("config key must fit in 2 bytes")
    try:
        return key, bytes.fromhex(hex_text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value '{hex_text}' is not hex") from None


def non_negative(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{value}' is not an integer") from None
    if number < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return number


def positive(value: str) -> int:
    number = non_negative(value)
    if number < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return number


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Settings file (default: bms_config.json)")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    parser.add_argument("--json-out", help="Write the JSON report to this path")


def _add_session_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--fixture", default=DEFAULT_PACK_FIXTURE, help="Pack scenario fixture")
    parser.add_argument("--identity", default=DEFAULT_IDENTITY_FIXTURE, help="Device identity fixture")
    parser.add_argument("--suite", choices=list(SUITE_CLI_NAMES.values()), default="cbc-cmac")
    parser.add_argument("--scenario", choices=[item.value for item in Scenario],
                        help="Override the fixture's scenario")
    parser.add_argument("--seed", type=int, default=0, help="Seed for nonces, IVs and the link")
    parser.add_argument("--reads", type=positive, help="READ_STATUS requests per session")


def build_parser() -> CliParser:
    parser = CliParser(prog="sndef-bms", description="Secure NFC readout of a simulated BMS")
    commands = parser.add_subparsers(dest="command", required=True)

    readout = commands.add_parser("readout", help="Authenticate and read the pack status")
    _add_common(readout)
    _add_session_args(readout)
    readout.add_argument("--adversary", choices=[kind.value for kind in AdversaryKind], default="none")
    readout.add_argument("--wrong-key", action="store_true", help="Reader uses a different master key")
    readout.add_argument("--no-field", action="store_true", help="Never raise the reader's RF field")

    update = commands.add_parser("update", help="Write configuration values, then read back")
    _add_common(update)
    _add_session_args(update)
    update.add_argument("--set", dest="updates", action="append", type=config_assignment, required=True,
                        metavar="KEY=HEX", help="Configuration write, repeatable")

    attack = commands.add_parser("attack", help="Run an adversary scenario")
    _add_common(attack)
    _add_session_args(attack)
    attack.add_argument("name", choices=list(ATTACKS), help="Attack scenario")
    attack.add_argument("--bit-offset", type=non_negative, help="tamper: bit to flip in the SNDEF record")
    attack.add_argument("--frame-index", type=positive, help="tamper/replay: which DATA frame to hit")
    attack.add_argument("--drop-probability", type=float, help="drop: probability per frame")

    bench = commands.add_parser("bench", help="Time the handshake and seal + unseal per suite")
    _add_common(bench)
    bench.add_argument("--payload", type=non_negative, help=f"Payload bytes, at most {MAX_BENCH_PAYLOAD}")
    bench.add_argument("--iterations", type=positive)
    bench.add_argument("--warmup", type=non_negative)
    bench.add_argument("--workers", type=positive)
    bench.add_argument("--suites", default="default",
                       help="'default' (cbc-cmac,gcm), 'all', or a comma-separated list")

    keygen = commands.add_parser("keygen", help="Provision a device identity fixture")
    keygen.add_argument("--serial", type=hex_serial, required=True, help="8-byte device serial as hex")
    keygen.add_argument("--out", help="Output path (default: fixtures/identity_<serial>.txt)")
    keygen.add_argument("--verbose", "-v", action="store_true")
    return parser


# Rendering

def render_banner(title: str, subtitle: str) -> None:
    console.print(Panel.fit(f"[bold blue]🔋 {title}[/bold blue]\n{subtitle}", border_style="blue"))


def render_report(report: ScenarioReport) -> None:
    style = {"success": "green", "rejected": "red", "timeout": "yellow"}[report.outcome.value]
    detail = f" ({report.stage.value}: {report.reason})" if report.reason else ""
    console.print(f"[bold {style}]Outcome: {report.outcome.value}{detail}[/bold {style}]")

    timing = Table(title="Phase Timing")
    timing.add_column("Phase", style="cyan")
    timing.add_column("Simulated (ms)", justify="right")
    timing.add_column("Wall clock (ms)", justify="right")
    for phase, label in (("auth_ms", "Authentication"), ("transmission_ms", "Secure transmission")):
        simulated = report.simulated_timing.get(phase)
        wall = report.wall_clock_timing.get(phase)
        timing.add_row(label, "-" if simulated is None else str(simulated), "-" if wall is None else f"{wall:.3f}")
    console.print(timing)

    if report.telemetry:
        telemetry = Table(title=f"Pack Status ({report.device_scenario.value})")
        telemetry.add_column("Field", style="cyan")
        telemetry.add_column("Value", style="bold")
        for key, value in report.telemetry.items():
            telemetry.add_row(key, ", ".join(map(str, value)) if isinstance(value, list) else str(value))
        console.print(telemetry)

    if report.updates:
        updates = Table(title="Configuration Writes")
        updates.add_column("Key", style="cyan")
        updates.add_column("Result")
        for update in report.updates:
            result = (f"[green]ACK version {update['version']}[/green]" if update["accepted"]
                      else f"[red]ERROR {update['error']}[/red]")
            updates.add_row(update["key"], result)
        console.print(updates)

    if report.attack:
        attack = report.attack
        table = Table(title=f"Attack: {attack['name']}")
        table.add_column("Item", style="cyan")
        table.add_column("Value")
        table.add_row("Threat", attack["threat"])
        table.add_row("Countermeasure", attack["countermeasure"])
        table.add_row("Rejections", ", ".join(attack["rejections"]) or "none")
        table.add_row("Adversary actions", str(len(attack["adversary_actions"])))
        table.add_row("Accepted modified", str(attack["accepted_modified"]))
        table.add_row("Accepted duplicates", str(attack["accepted_duplicates"]))
        if attack["plaintext_leak_hits"] is not None:
            table.add_row("Plaintext leak scan", "none" if attack["plaintext_leak_hits"] == 0
                          else f"{attack['plaintext_leak_hits']} hits")
        verdict = "[green]✓ CONTAINED[/green]" if attack["contained"] else "[red]✗ NOT CONTAINED[/red]"
        table.add_row("Verdict", verdict)
        console.print(table)


def render_bench(report: BenchReport) -> None:
    table = Table(title=f"Crypto Benchmark ({report.payload_bytes}-byte payload, {report.iterations} iterations)")
    table.add_column("Phase", style="cyan")
    table.add_column("Suite")
    table.add_column("Mean (ms)", justify="right")
    table.add_column("Std dev (ms)", justify="right")
    table.add_column("Reference (ms)", justify="right", style="dim")
    for row in report.rows:
        reference = row.reference_ms
        table.add_row(
            row.phase,
            row.suite or "-",
            f"{row.mean_ms:.4f}",
            "-" if row.stdev_ms is None else f"{row.stdev_ms:.4f}",
            "-" if reference is None else f"{reference[0]} ± {reference[1]}",
        )
    console.print(table)
    console.print(f"Memory RSS: {report.rss_before_mb:.1f} MB → {report.rss_after_mb:.1f} MB")
    console.print(f"[dim]{report.note}[/dim]")


# Commands

def exit_code_for(report: ScenarioReport) -> int:
    if report.attack is not None:
        return EXIT_OK if report.attack["contained"] else EXIT_ATTACK_NOT_CONTAINED
    if report.outcome is Outcome.SUCCESS:
        return EXIT_OK
    if report.outcome is Outcome.TIMEOUT:
        return EXIT_TIMEOUT
    return EXIT_AUTH_FAILURE if report.stage is Stage.AUTH else EXIT_CHANNEL_REJECTED


def _write_json(path: str, payload: dict) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    console.print(f"[green]Report written to {target}[/green]")


def _session_kwargs(args, settings: Settings) -> tuple[dict, Settings]:
    if args.reads is not None:
        settings = replace(settings, reader=replace(settings.reader, reads=args.reads))
    kwargs = {
        "suite": CipherSuiteId.from_cli_name(args.suite),
        "scenario": Scenario(args.scenario) if args.scenario else None,
        "seed": args.seed,
        "settings": settings,
    }
    return kwargs, settings


def cmd_session(args, settings: Settings) -> int:
    pack = load_pack_fixture(args.fixture)
    identity = load_identity_fixture(args.identity)
    kwargs, settings = _session_kwargs(args, settings)

    if args.command == "readout":
        adversaries = []
        if args.adversary != AdversaryKind.NONE.value:
            adversaries.append(AdversaryConfig(AdversaryKind(args.adversary)))
        run = run_readout(pack, identity, adversaries=adversaries, wrong_key=args.wrong_key,
                          field_on=not args.no_field, **kwargs)
    elif args.command == "update":
        run = run_update(pack, identity, args.updates, **kwargs)
    else:
        params = {}
        if args.bit_offset is not None:
            params["bit_offset"] = args.bit_offset
        if args.frame_index is not None:
            params["frame_index"] = args.frame_index
        if args.drop_probability is not None:
            if not 0.0 <= args.drop_probability <= 1.0:
                console.print("[red]--drop-probability must be within 0..1[/red]")
                return EXIT_USAGE
            params["probability"] = args.drop_probability
        run = run_attack(args.name, pack, identity, params=params, **kwargs)

    report = run.report
    render_banner(f"sndef-bms {report.scenario}", f"suite {report.suite.cli_name}, seed {report.seed}")
    render_report(report)
    if args.json_out:
        _write_json(args.json_out, report.to_dict())
    return exit_code_for(report)


def _parse_suites(value: str) -> tuple[CipherSuiteId, ...]:
    if value == "default":
        return DEFAULT_SUITES
    if value == "all":
        return tuple(CipherSuiteId)
    return tuple(CipherSuiteId.from_cli_name(name.strip()) for name in value.split(","))


def cmd_bench(args, settings: Settings) -> int:
    overrides = {
        name: value
        for name, value in (("payload_bytes", args.payload), ("iterations", args.iterations),
                            ("warmup", args.warmup), ("workers", args.workers))
        if value is not None
    }
    bench_settings = replace(settings.bench, **overrides)
    if bench_settings.payload_bytes > MAX_BENCH_PAYLOAD:
        console.print(f"[red]Payload must be at most {MAX_BENCH_PAYLOAD} bytes[/red]")
        return EXIT_USAGE
    try:
        suites = _parse_suites(args.suites)
    except ValueError as exc:
        console.print(f"[red]{exc}[/red]")
        return EXIT_USAGE

    render_banner("sndef-bms bench", f"{bench_settings.workers} worker(s)")
    report = run_benchmark(bench_settings, suites)
    render_bench(report)
    if args.json_out:
        _write_json(args.json_out, report.to_dict())
    return EXIT_OK


def cmd_keygen(args) -> int:
    identity = generate_identity(args.serial, SystemEntropy())
    out = args.out or f"fixtures/identity_{identity.serial_hex}.txt"
    path = write_identity_fixture(out, identity)
    console.print(f"[green]✓ Identity for serial {identity.serial_hex} written to {path}[/green]")
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        if args.command == "keygen":
            setup_logging(logging.DEBUG if args.verbose else logging.WARNING)
            return cmd_keygen(args)

        settings = load_settings(args.config)
        setup_logging(logging.DEBUG if args.verbose else settings.log_level)
        if args.command == "bench":
            return cmd_bench(args, settings)
        return cmd_session(args, settings)
    except (FixtureError, ConfigError) as exc:
        console.print(f"[red]❌ {exc}[/red]")
        return EXIT_BAD_FIXTURE
    except LivelockDetected as exc:
        console.print(f"[red]❌ {exc}[/red]")
        return EXIT_TIMEOUT
    except OSError as exc:
        console.print(f"[red]❌ I/O error: {exc}[/red]")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
