"""Sessions against an emulator and the four experiment drivers."""

from __future__ import annotations

import contextlib
import os
from dataclasses import dataclass
from importlib import resources

from ..clock import RealClock, VirtualClock
from ..emulator import CrxEmulator, EmulatorConfig
from ..explog import ExperimentLog
from ..regproto import DEFAULT_PORT, LocalLink, RegisterClient, serve
from ..stream import DEFAULT_STREAM_RATE, PreconditionError, StreamClient
from ..trajectory import OverrideSchedule, Trajectory

KINDS = ("step", "sine", "traj", "override")
ENDPOINT_ENV = "CRX_ENDPOINT"


def asset_path(name: str):
    return resources.files("crxstream.data").joinpath(name)


def parse_endpoint(text: str | None) -> tuple[str, int]:
    """``host:port`` (or ``host``) from the argument, $CRX_ENDPOINT, or the default."""
    text = text or os.environ.get(ENDPOINT_ENV) or f"127.0.0.1:{DEFAULT_PORT}"
    host, sep, port = text.rpartition(":")
    if not sep:
        return text, DEFAULT_PORT
    host = host or "127.0.0.1"
    try:
        return host, int(port)
    except ValueError:
        raise ValueError(f"bad endpoint {text!r}; expected host:port") from None


KIND_FIELDS = {
    "step": {"setpoint"},
    "sine": {"amplitude", "frequency"},
    "traj": {"traj", "schedule", "override"},
    "override": {"traj", "schedule", "override"},
}
ALL_KIND_FIELDS = set().union(*KIND_FIELDS.values())


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    joint: int = 1
    setpoint: float | None = None
    amplitude: float | None = None
    frequency: float | None = None
    traj: str | None = None
    schedule: str | None = None
    override: float | None = None
    duration: float | None = None
    stream_rate: float = DEFAULT_STREAM_RATE
    approach: bool = True
    hold: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not 1 <= self.joint <= 6:
            raise ValueError("joint must be in 1..6")
        if self.stream_rate <= 0:
            raise ValueError("stream_rate must be > 0")
        allowed = KIND_FIELDS[self.kind]
        extra = [f for f in ALL_KIND_FIELDS - allowed if getattr(self, f) is not None]
        if extra:
            raise ValueError(f"{self.kind} experiments do not take {', '.join(sorted(extra))}")
        if self.kind == "step" and self.setpoint is None:
            raise ValueError("step experiments need a setpoint")
        if self.kind == "sine":
            if self.amplitude is None or self.amplitude <= 0:
                raise ValueError("sine experiments need an amplitude > 0")
            if self.frequency is None or self.frequency <= 0:
                raise ValueError("sine experiments need a frequency > 0")
        if self.override is not None and self.schedule is not None:
            raise ValueError("give either a constant override or a schedule, not both")
        if self.duration is not None and self.duration <= 0:
            raise ValueError("duration must be > 0")
        if self.hold < 0:
            raise ValueError("hold must be >= 0")

    @property
    def run_duration(self) -> float:
        if self.duration is not None:
            return self.duration
        return 5.0 if self.kind == "step" else 30.0

    def trajectory(self) -> Trajectory:
        default = "j1_swing.json" if self.kind == "override" else "collision_free.json"
        return Trajectory.load(self.traj or asset_path(default))

    def override_schedule(self) -> OverrideSchedule | None:
        if self.override is not None:
            return OverrideSchedule.constant(self.override)
        if self.schedule:
            return OverrideSchedule.load(self.schedule)
        if self.kind == "override":
            return OverrideSchedule.load(asset_path("ovr_10_50_100.json"))
        return None


@contextlib.contextmanager
def embedded_session(config: EmulatorConfig | None = None, stream_rate=DEFAULT_STREAM_RATE,
                     over_tcp: bool = False):
    """In-process virtual-clock emulator plus a client bound to it.

    With ``over_tcp`` requests travel through a loopback server instead of
    a direct link; results are identical either way.
    """
    emulator = CrxEmulator(config or EmulatorConfig.default())
    emulator.run("virtual")
    clock = VirtualClock(emulator)
    if over_tcp:
        server = serve(emulator.registers, emulator.feedback, ("127.0.0.1", 0))
        link = RegisterClient(*server.address)
    else:
        server = None
        link = LocalLink(emulator.registers, emulator.feedback)
    try:
        yield StreamClient(link, clock, stream_rate), emulator
    finally:
        link.close()
        if server is not None:
            server.close()


@contextlib.contextmanager
def socket_session(endpoint: tuple[str, int], stream_rate=DEFAULT_STREAM_RATE,
                   timeout: float = 1.0):
    link = RegisterClient(*endpoint, timeout=timeout)
    try:
        yield StreamClient(link, RealClock(), stream_rate), None
    finally:
        link.close()


def run_experiment(client: StreamClient, spec: ExperimentSpec) -> ExperimentLog:
    """Handshake, then drive one experiment and return its log."""
    origin = client.handshake()
    if spec.kind == "step":
        target = list(origin)
        target[spec.joint - 1] = spec.setpoint
        return client.stream_setpoint(target, spec.run_duration)
    if spec.kind == "sine":
        return client.stream_sine(spec.joint, spec.amplitude, spec.frequency,
                                  spec.run_duration, origin=origin)
    traj = spec.trajectory()
    schedule = spec.override_schedule()
    if spec.approach:
        approach = client.move_to(traj.poses[0])
        if approach.error:
            return approach
    try:
        return client.execute_trajectory(traj, schedule, hold=spec.hold)
    finally:
        client.set_override(1.0)


__all__ = [
    "ExperimentSpec", "PreconditionError", "asset_path", "embedded_session", "parse_endpoint",
    "run_experiment", "socket_session",
]
