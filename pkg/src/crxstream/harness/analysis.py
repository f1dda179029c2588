"""Offline analysis of an experiment log; a pure function of the log rows."""

from __future__ import annotations

import json
import math

import numpy as np

from .. import metrics
from ..explog import ExperimentLog

DEFAULT_MAX_LAG_S = 1.0


def active_joint(log: ExperimentLog) -> int:
    """1-based index of the joint with the widest command+feedback excursion."""
    cmd, fb = log.cmd, log.fb
    spread = np.ptp(cmd, axis=0) + np.ptp(fb, axis=0)
    return int(np.argmax(spread)) + 1


def is_step(log: ExperimentLog, joint: int) -> bool:
    c = log.cmd[:, joint - 1]
    return bool(np.all(c == c[0])) and log.fb[0, joint - 1] != c[0]


def analyze_log(log: ExperimentLog, joint: int | None = None,
                max_lag_s: float = DEFAULT_MAX_LAG_S) -> dict:
    """Every metric that applies to ``log``.

    A log whose command on the active joint never changes is a step
    response; anything else gets tracking, lag and path-following errors.
    """
    if len(log) == 0:
        raise metrics.MetricsError("empty log")
    joint = joint or active_joint(log)
    t = log.t
    cmd = log.cmd[:, joint - 1]
    fb = log.fb[:, joint - 1]
    report: dict = {"rows": len(log), "joint": joint}

    if len(log) >= 2:
        report["cycle"] = metrics.control_frequency(t).to_dict()
        speed = np.abs(metrics.differentiate(t, fb))
        report["max_speed_derived"] = float(np.max(speed))
    report["max_speed_reported"] = float(np.max(np.abs(log.vel[:, joint - 1])))

    if is_step(log, joint):
        report["kind"] = "step"
        report["setpoint"] = float(cmd[0])
        try:
            report["step"] = metrics.step_metrics(t, fb, float(cmd[0])).to_dict()
        except metrics.UnsettledError as exc:
            report["step"] = None
            report["unsettled"] = {"reason": str(exc), **exc.partial}
        return report

    report["kind"] = "tracking"
    report["tracking"] = metrics.tracking_errors(cmd, fb).to_dict()
    n = len(log)
    rate = report["cycle"]["frequency"] if "cycle" in report else 1.0
    max_lag = min(int(round(max_lag_s * rate)), math.ceil(n / 2) - 1)
    try:
        lag = metrics.xcorr_lag(cmd, fb, max_lag, t=t)
    except metrics.MetricsError:
        report["lag"] = None
        report["path_following"] = None
        return report
    report["lag"] = lag.to_dict()
    report["path_following"] = metrics.path_following_errors(
        cmd, fb, lag=lag.tau_samples).to_dict()
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
