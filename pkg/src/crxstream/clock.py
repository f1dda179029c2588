"""Clocks driving the control loop: caller-stepped simulation time or wall time."""

from __future__ import annotations

import math
import time


class VirtualClock:
    """Simulation time owned by an emulator.

    ``sleep_until`` advances the emulator tick by tick instead of waiting,
    so a whole run is single-threaded and replayable.
    """

    def __init__(self, emulator):
        self.emulator = emulator

    def now(self) -> float:
        return self.emulator.time

    def sleep_until(self, t: float) -> None:
        target = math.ceil(t * self.emulator.config.tick_rate - 1e-9)
        if target > self.emulator.ticks:
            self.emulator.step(target - self.emulator.ticks)


class RealClock:
    def __init__(self):
        self._t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._t0

    def sleep_until(self, t: float) -> None:
        remaining = t - self.now()
        if remaining > 0:
            time.sleep(remaining)
