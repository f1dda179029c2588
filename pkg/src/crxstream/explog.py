"""Per-cycle experiment log and its CSV form."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .regproto import N_JOINTS

JOINTS = range(1, N_JOINTS + 1)
HEADER = (["t", "t_cmd"] + [f"cmd_j{j}" for j in JOINTS] + [f"fb_j{j}" for j in JOINTS]
          + [f"vel_j{j}" for j in JOINTS] + ["ovr"])


class LogFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LogRow:
    t: float
    t_cmd: float
    cmd: tuple
    fb: tuple
    vel: tuple
    ovr: float


@dataclass
class ExperimentLog:
    """One row per control cycle. ``error`` is set when a run was cut short."""

    rows: list = field(default_factory=list)
    error: str | None = None
    completed_at: float | None = None

    def __len__(self):
        return len(self.rows)

    def append(self, row: LogRow) -> None:
        if self.rows and row.t < self.rows[-1].t:
            raise ValueError("log rows must be time-ordered")
        self.rows.append(row)

    @property
    def t(self) -> np.ndarray:
        return np.array([r.t for r in self.rows], dtype=float)

    @property
    def ovr(self) -> np.ndarray:
        return np.array([r.ovr for r in self.rows], dtype=float)

    def _matrix(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float).reshape(-1, N_JOINTS)

    @property
    def cmd(self) -> np.ndarray:
        return self._matrix("cmd")

    @property
    def fb(self) -> np.ndarray:
        return self._matrix("fb")

    @property
    def vel(self) -> np.ndarray:
        return self._matrix("vel")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(HEADER)
            for r in self.rows:
                writer.writerow([repr(float(v)) for v in
                                 (r.t, r.t_cmd, *r.cmd, *r.fb, *r.vel, r.ovr)])

    @classmethod
    def from_csv(cls, path) -> "ExperimentLog":
        log = cls()
        try:
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header != HEADER:
                    raise LogFormatError(f"{path}: missing or unexpected header")
                for lineno, rec in enumerate(reader, start=2):
                    if len(rec) != len(HEADER):
                        raise LogFormatError(f"{path}:{lineno}: expected {len(HEADER)} fields")
                    v = [float(x) for x in rec]
                    log.append(LogRow(v[0], v[1], tuple(v[2:8]), tuple(v[8:14]),
                                      tuple(v[14:20]), v[20]))
        except ValueError as exc:
            if isinstance(exc, LogFormatError):
                raise
            raise LogFormatError(f"{path}: {exc}") from None
        if not log.rows:
            raise LogFormatError(f"{path}: no data rows")
        return log
