"""Register banks shared between the protocol server and the motion loop."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

N_JOINTS = 6

R_RANGE = (1, 200)
PR_RANGE = (1, 100)
DI_RANGE = (1, 200)

INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1

JointPose = tuple  # 6 floats, degrees

ZERO_POSE: JointPose = (0.0,) * N_JOINTS


def make_pose(values: Iterable[float]) -> JointPose:
    """Validate and freeze a 6-axis joint pose."""
    pose = tuple(float(v) for v in values)
    if len(pose) != N_JOINTS:
        raise ValueError(f"joint pose needs {N_JOINTS} values, got {len(pose)}")
    if not all(math.isfinite(v) for v in pose):
        raise ValueError(f"joint pose has non-finite values: {pose}")
    return pose


@dataclass(frozen=True)
class JointState:
    t: float
    q: JointPose
    qd: tuple

    def __post_init__(self):
        if len(self.q) != N_JOINTS or len(self.qd) != N_JOINTS:
            raise ValueError("joint state needs 6 positions and 6 velocities")


class RegisterIndexError(IndexError):
    def __init__(self, bank: str, index: int):
        self.bank = bank
        self.index = index
        super().__init__(f"{bank}[{index}] out of range")


def _check(bank: str, index: int, bounds: Sequence[int]) -> None:
    if not bounds[0] <= index <= bounds[1]:
        raise RegisterIndexError(bank, index)


class RegisterFile:
    """R (int32), PR (joint pose) and DI (bool) banks.

    Every bank is total over its index range: unwritten slots read as 0,
    the zero pose, or False. Each get/set is atomic under one lock, so a
    reader never sees a partially written PR.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._r: dict[int, int] = {}
        self._pr: dict[int, JointPose] = {}
        self._di: dict[int, bool] = {}

    def get_r(self, index: int) -> int:
        _check("R", index, R_RANGE)
        with self._lock:
            return self._r.get(index, 0)

    def set_r(self, index: int, value: int) -> None:
        _check("R", index, R_RANGE)
        value = int(value)
        if not INT32_MIN <= value <= INT32_MAX:
            raise ValueError(f"R value {value} does not fit in int32")
        with self._lock:
            self._r[index] = value

    def get_pr(self, index: int) -> JointPose:
        _check("PR", index, PR_RANGE)
        with self._lock:
            return self._pr.get(index, ZERO_POSE)

    def set_pr(self, index: int, pose: Iterable[float]) -> None:
        _check("PR", index, PR_RANGE)
        pose = make_pose(pose)
        with self._lock:
            self._pr[index] = pose

    def get_di(self, index: int) -> bool:
        _check("DI", index, DI_RANGE)
        with self._lock:
            return self._di.get(index, False)

    def set_di(self, index: int, value: bool) -> None:
        _check("DI", index, DI_RANGE)
        with self._lock:
            self._di[index] = bool(value)

    def snapshot(self) -> dict:
        with self._lock:
            return {"r": dict(self._r), "pr": dict(self._pr), "di": dict(self._di)}
