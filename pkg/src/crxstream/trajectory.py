"""Timestamped joint trajectories, speed-override schedules, and scaled time."""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .regproto import make_pose


class TrajectoryError(ValueError):
    pass


@dataclass(frozen=True)
class Trajectory:
    times: tuple
    poses: tuple
    velocities: tuple | None = None

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if len(times) < 2:
            raise TrajectoryError("a trajectory needs at least 2 points")
        if len(self.poses) != len(times):
            raise TrajectoryError("times and poses differ in length")
        if times[0] != 0.0:
            raise TrajectoryError("first point must be at t=0")
        if any(b <= a for a, b in zip(times, times[1:])) or not all(map(math.isfinite, times)):
            raise TrajectoryError("point times must be finite and strictly increasing")
        try:
            poses = tuple(make_pose(p) for p in self.poses)
            velocities = (None if self.velocities is None
                          else tuple(make_pose(v) for v in self.velocities))
        except ValueError as exc:
            raise TrajectoryError(str(exc)) from None
        if velocities is not None and len(velocities) != len(times):
            raise TrajectoryError("velocities and points differ in length")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "velocities", velocities)

    @property
    def duration(self) -> float:
        return self.times[-1]

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        try:
            points = data["points"]
            times = [p["t"] for p in points]
            poses = [p["q"] for p in points]
            if any("qd" in p for p in points):
                velocities = [p["qd"] for p in points]
            else:
                velocities = None
        except (KeyError, TypeError) as exc:
            raise TrajectoryError(f"bad trajectory document: {exc!r}") from None
        return cls(times, poses, velocities)

    @classmethod
    def load(cls, path) -> "Trajectory":
        return cls.from_dict(_read_json(path))

    def to_dict(self) -> dict:
        points = []
        for i, (t, q) in enumerate(zip(self.times, self.poses)):
            point = {"t": t, "q": list(q)}
            if self.velocities is not None:
                point["qd"] = list(self.velocities[i])
            points.append(point)
        return {"points": points}


def sample_trajectory(traj: Trajectory, s: float) -> tuple:
    """Linearly interpolated pose at scaled time ``s``, clamped to the ends."""
    times = traj.times
    if s <= times[0]:
        return traj.poses[0]
    if s >= times[-1]:
        return traj.poses[-1]
    i = bisect.bisect_right(times, s) - 1
    a, b = traj.poses[i], traj.poses[i + 1]
    alpha = (s - times[i]) / (times[i + 1] - times[i])
    return tuple(qa + alpha * (qb - qa) for qa, qb in zip(a, b))


def check_override(value: float) -> float:
    value = float(value)
    if not 0.0 < value <= 1.0:
        raise ValueError(f"override must be in (0, 1], got {value}")
    return value


@dataclass(frozen=True)
class OverrideSchedule:
    entries: tuple  # ((t, override), ...)

    def __post_init__(self):
        entries = tuple((float(t), float(v)) for t, v in self.entries)
        if not entries or entries[0][0] != 0.0:
            raise TrajectoryError("override schedule must start at t=0")
        if any(b[0] < a[0] for a, b in zip(entries, entries[1:])):
            raise TrajectoryError("override schedule times must be nondecreasing")
        try:
            for _, v in entries:
                check_override(v)
        except ValueError as exc:
            raise TrajectoryError(str(exc)) from None
        object.__setattr__(self, "entries", entries)

    @classmethod
    def constant(cls, value: float) -> "OverrideSchedule":
        return cls(((0.0, value),))

    def value_at(self, t: float) -> float:
        i = bisect.bisect_right([e[0] for e in self.entries], t) - 1
        return self.entries[max(i, 0)][1]

    @classmethod
    def from_dict(cls, data: dict) -> "OverrideSchedule":
        try:
            return cls(tuple((e["t"], e["ovr"]) for e in data["entries"]))
        except (KeyError, TypeError) as exc:
            raise TrajectoryError(f"bad override schedule document: {exc!r}") from None

    @classmethod
    def load(cls, path) -> "OverrideSchedule":
        return cls.from_dict(_read_json(path))

    def to_dict(self) -> dict:
        return {"entries": [{"t": t, "ovr": v} for t, v in self.entries]}


class ScaledClock:
    """Trajectory time advanced by ``override * dt`` every control cycle."""

    def __init__(self, start: float = 0.0):
        self.s = 0.0
        self.last_update = start

    def advance(self, t: float, override: float) -> float:
        if t < self.last_update:
            raise ValueError("scaled clock cannot run backwards")
        self.s += override * (t - self.last_update)
        self.last_update = t
        return self.s


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise TrajectoryError(f"cannot read {path}: {exc}") from None
