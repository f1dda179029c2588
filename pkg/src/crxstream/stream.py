"""Client-side hardware interface: handshake, fixed-rate streaming, scaled execution.

The client never clamps commands to joint limits; whatever the controller
does with an infeasible command shows up only in the feedback.
"""

from __future__ import annotations

import logging
import math
from typing import Callable

from .explog import ExperimentLog, LogRow
from .regproto import JointState, StatusError, TransportError, make_pose
from .trajectory import OverrideSchedule, ScaledClock, Trajectory, check_override, sample_trajectory

log = logging.getLogger(__name__)

ENABLE_R = 1
TARGET_PR = 1
DEFAULT_STREAM_RATE = 25.0
START_TOLERANCE = 0.5


class HandshakeError(RuntimeError):
    pass


class PreconditionError(RuntimeError):
    pass


class StreamClient:
    """Drives one controller session.

    ``link`` is a :class:`~crxstream.regproto.RegisterClient` or
    :class:`~crxstream.regproto.LocalLink`; ``clock`` provides ``now()`` and
    ``sleep_until(t)``. Cycles run on fixed deadlines; a late cycle runs at
    once and is counted in ``late_cycles``, never skipped.
    """

    def __init__(self, link, clock, stream_rate: float = DEFAULT_STREAM_RATE):
        if stream_rate <= 0:
            raise ValueError("stream_rate must be > 0")
        self.link = link
        self.clock = clock
        self.stream_rate = float(stream_rate)
        self.period = 1.0 / self.stream_rate
        self.late_cycles = 0
        self.ready = False
        self._override = 1.0

    def handshake(self) -> tuple:
        """Seed PR[1] with the current pose, then raise R[1]."""
        try:
            state = self.link.read_state()
            self.link.write_pr(TARGET_PR, state.q)
            self.link.write_r(ENABLE_R, 1)
        except (TransportError, StatusError) as exc:
            raise HandshakeError(f"handshake failed: {exc}") from exc
        self.ready = True
        return state.q

    @property
    def override(self) -> float:
        return self._override

    def set_override(self, value: float) -> None:
        # single attribute store: safe to call from another thread
        self._override = check_override(value)

    def _require_ready(self):
        if not self.ready:
            raise PreconditionError("handshake() has not completed")

    def _loop(self, step: Callable[[int, float, JointState], tuple | None]) -> ExperimentLog:
        """Run control cycles until ``step`` returns None.

        ``step(k, t, state)`` returns ``(command, override)`` for cycle ``k``.
        """
        result = ExperimentLog()
        t0 = self.clock.now()
        k = 0
        while True:
            deadline = k * self.period
            self.clock.sleep_until(t0 + deadline)
            t = self.clock.now() - t0
            if t > deadline + self.period:
                self.late_cycles += 1
                log.debug("cycle %d late by %.4f s", k, t - deadline)
            try:
                state = self.link.read_state()
                decision = step(k, t, state)
                if decision is None:
                    break
                cmd, ovr = decision
                self.link.write_pr(TARGET_PR, cmd)
            except (TransportError, StatusError) as exc:
                result.error = f"cycle {k}: {exc}"
                log.warning("run aborted: %s", result.error)
                break
            result.append(LogRow(t, self.clock.now() - t0, tuple(cmd), state.q, state.qd, ovr))
            k += 1
        return result

    def stream(self, command: Callable[[float], tuple], duration: float) -> ExperimentLog:
        """Stream ``command(t)`` for ``duration`` seconds, one row per cycle."""
        self._require_ready()
        n = int(round(duration * self.stream_rate))

        def step(k, t, state):
            if k >= n:
                return None
            return make_pose(command(t)), 1.0

        return self._loop(step)

    def stream_setpoint(self, target, duration: float) -> ExperimentLog:
        target = make_pose(target)
        return self.stream(lambda t: target, duration)

    def stream_sine(self, joint: int, amplitude: float, frequency: float, duration: float,
                    origin=None) -> ExperimentLog:
        """Stream ``origin + A sin(2 pi f t)`` on one joint (1-based)."""
        self._require_ready()
        if origin is None:
            origin = self.link.read_state().q
        base = list(origin)

        def command(t):
            q = list(base)
            q[joint - 1] = base[joint - 1] + amplitude * math.sin(2.0 * math.pi * frequency * t)
            return q

        return self.stream(command, duration)

    def move_to(self, target, tolerance: float = 0.05, timeout: float = 20.0) -> ExperimentLog:
        """Stream ``target`` until every joint is within ``tolerance`` of it.

        Stops after ``timeout`` seconds even if the pose was not reached; the
        caller checks the last feedback row.
        """
        self._require_ready()
        target = make_pose(target)
        n_max = int(round(timeout * self.stream_rate))
        arrived = False

        def step(k, t, state):
            nonlocal arrived
            if arrived or k >= n_max:
                return None
            arrived = max(abs(a - b) for a, b in zip(state.q, target)) <= tolerance
            return target, 1.0

        return self._loop(step)

    def execute_trajectory(self, traj: Trajectory, schedule: OverrideSchedule | None = None,
                           hold: float = 0.0) -> ExperimentLog:
        """Execute ``traj`` in scaled time; optional ``hold`` seconds at the end pose.

        Each cycle advances scaled time by the override active during the
        previous cycle, so an override change lands on the next cycle.
        """
        self._require_ready()
        current = self.link.read_state().q
        mismatch = max(abs(a - b) for a, b in zip(current, traj.poses[0]))
        if mismatch > START_TOLERANCE:
            raise PreconditionError(
                f"trajectory starts {mismatch:.3f} deg from the current pose "
                f"(tolerance {START_TOLERANCE})")
        pending = list(schedule.entries) if schedule is not None else []
        scaled = ScaledClock()
        t_end = traj.duration
        n_hold = int(round(hold * self.stream_rate))
        finished_at = None

        def step(k, t, state):
            nonlocal finished_at
            if finished_at is not None and k - finished_at > n_hold:
                return None
            ovr_prev = self._override
            while pending and pending[0][0] <= t + 1e-9:
                self.set_override(pending.pop(0)[1])
            s = scaled.advance(t, ovr_prev) if k else 0.0
            if finished_at is None and s >= t_end - 1e-9:
                finished_at = k
            return sample_trajectory(traj, s), self._override

        result = self._loop(step)
        result.completed_at = (result.rows[finished_at].t
                               if finished_at is not None and finished_at < len(result) else None)
        return result

    def release(self) -> None:
        """Clear R[1]; the controller stops and waits for a new handshake."""
        self.link.write_r(ENABLE_R, 0)
        self.ready = False
