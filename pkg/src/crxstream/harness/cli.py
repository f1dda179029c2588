"""crx command line: emulator server, experiment runs, analysis, calibration.

Exit codes: 0 ok, 2 bad config/arguments/input, 3 bind failure,
4 handshake or connection failure, 5 precondition (trajectory start) failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from pathlib import Path

from ..emulator import ConfigError, CrxEmulator, EmulatorConfig
from ..explog import ExperimentLog, LogFormatError
from ..metrics import MetricsError
from ..regproto import DEFAULT_PORT, RegisterServer, TransportError
from ..stream import HandshakeError, PreconditionError
from ..trajectory import TrajectoryError
from . import calibrate as calib
from .analysis import DEFAULT_MAX_LAG_S, analyze_log, dumps
from .experiments import (
    ExperimentSpec, embedded_session, parse_endpoint, run_experiment, socket_session,
)
from .report import write_metrics, write_plot_csvs, write_run

log = logging.getLogger("crx")

EXIT_CONFIG = 2
EXIT_BIND = 3
EXIT_HANDSHAKE = 4
EXIT_PRECONDITION = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        self.code = code
        super().__init__(message)


def _load_config(path) -> EmulatorConfig:
    try:
        return EmulatorConfig.load(path) if path else EmulatorConfig.default()
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None


def cmd_emu_serve(args) -> int:
    config = _load_config(args.config)
    emulator = CrxEmulator(config, record_trace=bool(args.trace))
    if args.virtual:
        if args.steps is None:
            raise CliError("--virtual needs --steps N", EXIT_CONFIG)
        emulator.run("virtual")
        state = emulator.step(args.steps)
        if args.trace:
            emulator.write_trace(args.trace)
        print(json.dumps({"t": state.t, "q": list(state.q), "phase": emulator.phase.value}))
        return 0

    host, port = parse_endpoint(args.endpoint)
    if args.port is not None:
        port = args.port
    try:
        server = RegisterServer(emulator.registers, emulator.feedback, (host, port))
    except OSError as exc:
        raise CliError(f"cannot bind {host}:{port}: {exc}", EXIT_BIND) from None
    done = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: done.set())
    with server:
        emulator.run("realtime")
        server.start()
        log.info("emulator serving on %s:%d", *server.address)
        print(f"listening on {server.address[0]}:{server.address[1]}", flush=True)
        done.wait(args.duration)
        emulator.stop()
    if args.trace:
        emulator.write_trace(args.trace)
    return 0


def _spec_from_args(args) -> ExperimentSpec:
    try:
        return ExperimentSpec(
            kind=args.kind, joint=args.joint, setpoint=getattr(args, "setpoint", None),
            amplitude=getattr(args, "amp", None), frequency=getattr(args, "freq", None),
            traj=getattr(args, "traj", None), schedule=getattr(args, "schedule", None),
            override=getattr(args, "override", None), duration=args.duration,
            stream_rate=args.rate, approach=not getattr(args, "no_approach", False),
            hold=getattr(args, "hold", 0.0),
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None


def cmd_run(args) -> int:
    spec = _spec_from_args(args)
    try:
        if spec.kind in ("traj", "override"):
            spec.trajectory()
            spec.override_schedule()
    except TrajectoryError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    try:
        if args.embedded:
            session = embedded_session(_load_config(args.config), spec.stream_rate)
        else:
            session = socket_session(parse_endpoint(args.endpoint), spec.stream_rate)
        with session as (client, _):
            run = run_experiment(client, spec)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    except (HandshakeError, TransportError) as exc:
        raise CliError(str(exc), EXIT_HANDSHAKE) from None
    except PreconditionError as exc:
        raise CliError(str(exc), EXIT_PRECONDITION) from None

    out = Path(args.out or f"{spec.kind}.csv")
    if run.error:
        write_run(run, None, out)
        raise CliError(f"run aborted, partial log in {out}: {run.error}", EXIT_HANDSHAKE)
    report = analyze_log(run, joint=args.joint if spec.kind in ("step", "sine") else None)
    written = write_run(run, report, out, figures=not args.no_figures)
    sys.stdout.write(dumps(report))
    for path in written:
        log.info("wrote %s", path)
    return 0


def cmd_analyze(args) -> int:
    try:
        run = ExperimentLog.from_csv(args.log)
        report = analyze_log(run, joint=args.joint, max_lag_s=args.max_lag_s)
    except (OSError, LogFormatError, MetricsError) as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    if args.out:
        write_metrics(report, args.out)
        write_plot_csvs(run, report, args.out)
        if args.figures:
            from .. import plotting

            plotting.render_report(run, report, args.out)
    sys.stdout.write(dumps(report))
    return 0


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_calibrate(args) -> int:
    grid = dict(calib.DEFAULT_GRID)
    for name in calib.PARAMS:
        values = getattr(args, f"grid_{name}")
        if values is not None:
            grid[name] = values
    if any(not v for v in grid.values()):
        raise CliError("every grid axis needs at least one value", EXIT_CONFIG)
    base = _load_config(args.config) if args.config else EmulatorConfig()
    result = calib.calibrate(grid, base, method=args.method, sine_duration=args.sine_duration)
    if args.out:
        calib.apply_params(base, result.params).save(args.out)
    sys.stdout.write(json.dumps(result.to_dict(), indent=2, sort_keys=True, default=str) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crx", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    emu = sub.add_parser("emu", help="controller emulator")
    emu_sub = emu.add_subparsers(dest="emu_command", required=True)
    serve = emu_sub.add_parser("serve", help="serve the register protocol")
    serve.add_argument("--config", help="emulator config JSON (default: shipped)")
    serve.add_argument("--endpoint", help=f"host:port (default $CRX_ENDPOINT or :{DEFAULT_PORT})")
    serve.add_argument("--port", type=int)
    serve.add_argument("--virtual", action="store_true", help="step a virtual clock, no server")
    serve.add_argument("--steps", type=int, help="ticks to run with --virtual")
    serve.add_argument("--duration", type=float, help="stop after this many seconds")
    serve.add_argument("--trace", help="write state trace CSV here on exit")
    serve.set_defaults(func=cmd_emu_serve)

    run = sub.add_parser("run", help="run one experiment")
    kinds = run.add_subparsers(dest="kind", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--joint", type=int, default=1)
    common.add_argument("--duration", type=float)
    common.add_argument("--rate", type=float, default=25.0, help="stream rate, Hz")
    common.add_argument("--embedded", action="store_true",
                        help="in-process virtual-clock emulator (deterministic)")
    common.add_argument("--config", help="emulator config for --embedded")
    common.add_argument("--endpoint", help="host:port of a running emulator")
    common.add_argument("--out", help="log CSV path; metrics JSON goes alongside")
    common.add_argument("--no-figures", action="store_true")
    step = kinds.add_parser("step", parents=[common])
    step.add_argument("--setpoint", type=float, required=True, help="deg")
    sine = kinds.add_parser("sine", parents=[common])
    sine.add_argument("--amp", type=float, default=30.0, help="deg")
    sine.add_argument("--freq", type=float, required=True, help="Hz")
    for name in ("traj", "override"):
        p = kinds.add_parser(name, parents=[common])
        p.add_argument("--traj", help="trajectory JSON (default: bundled)")
        p.add_argument("--schedule", help="override schedule JSON")
        p.add_argument("--override", type=float, help="constant override in (0, 1]")
        p.add_argument("--hold", type=float, default=0.0, help="seconds at the end pose")
        p.add_argument("--no-approach", action="store_true",
                       help="do not move to the trajectory start first")
    run.set_defaults(func=cmd_run)

    analyze = sub.add_parser("analyze", help="recompute metrics from a log CSV")
    analyze.add_argument("log")
    analyze.add_argument("--joint", type=int)
    analyze.add_argument("--max-lag-s", type=float, default=DEFAULT_MAX_LAG_S)
    analyze.add_argument("--out", help="metrics JSON path; plot CSVs go alongside")
    analyze.add_argument("--figures", action="store_true", help="also render PNG figures")
    analyze.set_defaults(func=cmd_analyze)

    cal = sub.add_parser("calibrate", help="fit emulator parameters to reference step and tracking results")
    cal.add_argument("--config", help="base config (other fields kept)")
    cal.add_argument("--method", choices=("coordinate", "grid"), default="coordinate")
    for name in calib.PARAMS:
        cal.add_argument(f"--grid-{name.replace('_', '-')}", dest=f"grid_{name}", type=_floats,
                         help="comma-separated values")
    cal.add_argument("--sine-duration", type=float, default=30.0)
    cal.add_argument("--out", help="write the calibrated config JSON here")
    cal.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"crx: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
