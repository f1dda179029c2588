"""Emulated robot controller: the TP program state machine and a joint servo.

The TP program resets R[1], waits for the client to set R[1]=1, and from
then on servoes every joint toward the latest PR[1]. R[2] drives the
gripper output DI[1]. Commands reach the servo through a fixed transport
delay, and READ_STATE can lag the true state by a second delay.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
import threading
import time
from collections import deque
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .regproto import N_JOINTS, JointState, RegisterFile, make_pose

log = logging.getLogger(__name__)

GRIPPER_R = 2
GRIPPER_DI = 1
ENABLE_R = 1
TARGET_PR = 1
EPS = 1e-9


class ConfigError(ValueError):
    pass


def _per_joint(name, value) -> tuple:
    if isinstance(value, (int, float)):
        value = [value] * N_JOINTS
    try:
        values = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number or a list of {N_JOINTS} numbers") from None
    if len(values) != N_JOINTS:
        raise ConfigError(f"{name} needs {N_JOINTS} values, got {len(values)}")
    if not all(math.isfinite(v) and v > 0 for v in values):
        raise ConfigError(f"{name} values must be finite and > 0")
    return values


@dataclass(frozen=True)
class EmulatorConfig:
    """Servo gains and limits (per joint), transport delays, tick rate.

    Units: kp in 1/s, vmax in deg/s, amax in deg/s^2, latencies in s,
    tick_rate in Hz, home_pose in deg.
    """

    kp: tuple = (4.3,) * N_JOINTS
    vmax: tuple = (60.0,) * N_JOINTS
    amax: tuple = (400.0,) * N_JOINTS
    command_latency: float = 0.25
    feedback_latency: float = 0.0
    tick_rate: float = 250.0
    home_pose: tuple = (0.0,) * N_JOINTS
    clock_mode: str = "virtual"

    def __post_init__(self):
        for name in ("kp", "vmax", "amax"):
            object.__setattr__(self, name, _per_joint(name, getattr(self, name)))
        for name in ("command_latency", "feedback_latency"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be a finite number >= 0")
            object.__setattr__(self, name, float(value))
        if (not isinstance(self.tick_rate, (int, float)) or not math.isfinite(self.tick_rate)
                or self.tick_rate <= 0):
            raise ConfigError("tick_rate must be > 0")
        object.__setattr__(self, "tick_rate", float(self.tick_rate))
        try:
            object.__setattr__(self, "home_pose", make_pose(self.home_pose))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"home_pose: {exc}") from None
        if self.clock_mode not in ("virtual", "realtime"):
            raise ConfigError("clock_mode must be 'virtual' or 'realtime'")

    @classmethod
    def from_dict(cls, data: dict) -> "EmulatorConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "EmulatorConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def default(cls) -> "EmulatorConfig":
        """The shipped, calibrated configuration."""
        text = resources.files("crxstream.data").joinpath("default_config.json").read_text()
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "kp": list(self.kp),
            "vmax": list(self.vmax),
            "amax": list(self.amax),
            "command_latency": self.command_latency,
            "feedback_latency": self.feedback_latency,
            "tick_rate": self.tick_rate,
            "home_pose": list(self.home_pose),
            "clock_mode": self.clock_mode,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


class TpPhase(enum.Enum):
    INIT = "INIT"
    WAIT = "WAIT"
    TRACK = "TRACK"


class LatencyQueue:
    """FIFO of ``(visible_at, value)`` released once simulation time catches up."""

    def __init__(self):
        self._entries: deque = deque()

    def __len__(self):
        return len(self._entries)

    def push(self, visible_at: float, value) -> None:
        if self._entries and visible_at < self._entries[-1][0]:
            raise ValueError("visible_at must be nondecreasing")
        self._entries.append((visible_at, value))

    def pop_ready(self, now: float) -> list:
        ready = []
        entries = self._entries
        while entries and entries[0][0] <= now + EPS:
            ready.append(entries.popleft()[1])
        return ready

    def clear(self) -> None:
        self._entries.clear()


@dataclass
class _Command:
    sampled_at: float
    target: tuple
    gripper: int


class CrxEmulator:
    """Controller emulator over a shared register file.

    Virtual mode: the caller advances time with :meth:`step`. Realtime
    mode: :meth:`run` starts a thread ticking at ``tick_rate`` against the
    wall clock.
    """

    def __init__(self, config: EmulatorConfig | None = None,
                 registers: RegisterFile | None = None, record_trace: bool = False):
        self.config = config or EmulatorConfig()
        self.registers = registers if registers is not None else RegisterFile()
        self.phase = TpPhase.INIT
        self.ticks = 0
        self.trace: list | None = [] if record_trace else None
        self._dt = 1.0 / self.config.tick_rate
        self._q = list(self.config.home_pose)
        self._qd = [0.0] * N_JOINTS
        self._target: tuple | None = None
        self._track_start = math.inf
        self._commands = LatencyQueue()
        self._feedback_queue = LatencyQueue()
        self._feedback = JointState(0.0, tuple(self._q), tuple(self._qd))
        self._lock = threading.Lock()
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()

    @property
    def time(self) -> float:
        return self.ticks / self.config.tick_rate

    def state(self) -> JointState:
        """True, undelayed joint state."""
        return JointState(self.time, tuple(self._q), tuple(self._qd))

    def feedback(self) -> JointState:
        """State as reported over READ_STATE, ``feedback_latency`` old."""
        with self._lock:
            return self._feedback

    def tp_reset(self) -> None:
        with self._lock:
            self.registers.set_r(ENABLE_R, 0)
            self.registers.set_pr(TARGET_PR, self.config.home_pose)
            self.phase = TpPhase.WAIT
            self._q = list(self.config.home_pose)
            self._qd = [0.0] * N_JOINTS
            self._target = None
            self._track_start = math.inf
            self._commands.clear()
            self._feedback_queue.clear()
            self._feedback = self.state()

    def tick(self) -> JointState:
        if self.phase is TpPhase.INIT:
            raise RuntimeError("tp_reset() must run before the first tick")
        regs = self.registers
        cfg = self.config
        now = self.time
        enabled = regs.get_r(ENABLE_R) == 1
        self._commands.push(now + cfg.command_latency,
                            _Command(now, regs.get_pr(TARGET_PR), regs.get_r(GRIPPER_R)))

        if self.phase is TpPhase.WAIT and enabled:
            self.phase = TpPhase.TRACK
            self._track_start = now
        elif self.phase is TpPhase.TRACK and not enabled:
            # R[1] cleared: controlled stop, handshake needed again
            self.phase = TpPhase.WAIT
            self._target = None
            self._track_start = math.inf

        for cmd in self._commands.pop_ready(now):
            self._gripper_logic(cmd.gripper)
            if self.phase is TpPhase.TRACK and cmd.sampled_at >= self._track_start:
                self._target = cmd.target

        self._servo()
        with self._lock:
            self.ticks += 1
            state = self.state()
            self._feedback_queue.push(state.t + cfg.feedback_latency, state)
            ready = self._feedback_queue.pop_ready(state.t)
            if ready:
                self._feedback = ready[-1]
        if self.trace is not None:
            self.trace.append((state, self.phase))
        return state

    def _gripper_logic(self, value: int) -> None:
        if value == 1:
            self.registers.set_di(GRIPPER_DI, True)
        elif value == 0:
            self.registers.set_di(GRIPPER_DI, False)

    def _servo(self) -> None:
        cfg = self.config
        dt = self._dt
        q, qd, target = self._q, self._qd, self._target
        for j in range(N_JOINTS):
            vmax = cfg.vmax[j]
            if target is None:
                v_des = 0.0
            else:
                v_des = cfg.kp[j] * (target[j] - q[j])
                v_des = min(vmax, max(-vmax, v_des))
            dv_max = cfg.amax[j] * dt
            v = qd[j] + min(dv_max, max(-dv_max, v_des - qd[j]))
            qd[j] = v
            q[j] += v * dt

    def step(self, n: int = 1) -> JointState:
        state = None
        for _ in range(n):
            state = self.tick()
        return state if state is not None else self.state()

    def run(self, clock_mode: str | None = None) -> "CrxEmulator":
        """Reset the TP program and, in realtime mode, start self-ticking."""
        mode = clock_mode or self.config.clock_mode
        self.tp_reset()
        if mode == "realtime":
            self._stop.clear()
            self._thread = threading.Thread(target=self._realtime_loop, name="crx-motion",
                                            daemon=True)
            self._thread.start()
        return self

    def _realtime_loop(self) -> None:
        start = time.monotonic()
        k = 0
        while not self._stop.is_set():
            k += 1
            delay = start + k * self._dt - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            self.tick()

    def stop(self) -> None:
        if self._thread is not None:
            self._stop.set()
            self._thread.join()
            self._thread = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()

    def write_trace(self, path) -> None:
        """Write the recorded state trace as ``t,q1..q6,qd1..qd6,phase``."""
        if self.trace is None:
            raise RuntimeError("emulator was created without record_trace=True")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"q{j}" for j in range(1, 7)]
                            + [f"qd{j}" for j in range(1, 7)] + ["phase"])
            for state, phase in self.trace:
                writer.writerow([repr(state.t), *map(repr, state.q), *map(repr, state.qd),
                                 phase.value])
