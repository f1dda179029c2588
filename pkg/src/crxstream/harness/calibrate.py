"""Fit emulator servo parameters to reference step and tracking results.

The objective is the sum of squared residuals, each relative to its
target: rise and settling time for three steps, tracking MAE for three
sine frequencies, and the command-to-feedback lag. Overshoot and
steady-state error (both reported as zero) enter as absolute residuals in
percentage points and degrees.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace

from .. import metrics
from ..emulator import EmulatorConfig
from .analysis import DEFAULT_MAX_LAG_S
from .experiments import ExperimentSpec, embedded_session, run_experiment

log = logging.getLogger(__name__)

PARAMS = ("kp", "vmax", "amax", "command_latency")


@dataclass(frozen=True)
class Targets:
    step: dict = field(default_factory=lambda: {30.0: (0.51, 0.90), 45.0: (0.64, 1.10),
                                                90.0: (1.22, 1.79)})
    mae: dict = field(default_factory=lambda: {0.1: 3.72, 0.25: 7.77, 0.5: 18.26})
    lag: float = 0.31
    lag_freqs: tuple = (0.1, 0.25)


REFERENCE_TARGETS = Targets()

DEFAULT_GRID = {
    "kp": [4.3, 6.0, 8.0, 10.0, 11.0, 12.0, 13.0, 14.0, 16.0],
    "vmax": [55.0, 57.5, 60.0, 62.5, 65.0],
    "amax": [400.0, 500.0, 600.0, 650.0, 700.0, 720.0, 750.0, 800.0, 900.0, 1000.0],
    "command_latency": [round(0.15 + 0.01 * i, 2) for i in range(16)],
}

UNCALIBRATED = {"kp": 4.3, "vmax": 60.0, "amax": 400.0, "command_latency": 0.25}


@dataclass
class CalibrationResult:
    params: dict
    objective: float
    residuals: dict
    measured: dict
    start_params: dict
    start_objective: float
    evaluations: int

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "objective": self.objective,
            "residuals": self.residuals,
            "measured": self.measured,
            "start_params": self.start_params,
            "start_objective": self.start_objective,
            "evaluations": self.evaluations,
        }


def apply_params(base: EmulatorConfig, params: dict) -> EmulatorConfig:
    return replace(base, clock_mode="virtual", **params)


def measure(config: EmulatorConfig, targets: Targets = REFERENCE_TARGETS,
            step_duration: float = 5.0, sine_duration: float = 30.0) -> dict:
    """Run every target experiment on J1 of an embedded emulator."""
    out: dict = {"step": {}, "mae": {}, "lag": {}}
    for sp in targets.step:
        spec = ExperimentSpec("step", joint=1, setpoint=sp, duration=step_duration)
        with embedded_session(config) as (client, _):
            run = run_experiment(client, spec)
        try:
            m = metrics.step_metrics(run.t, run.fb[:, 0], sp)
            out["step"][sp] = m.to_dict()
        except metrics.UnsettledError:
            out["step"][sp] = None
    lag_freqs = set(targets.lag_freqs)
    for f in sorted(set(targets.mae) | lag_freqs):
        spec = ExperimentSpec("sine", joint=1, amplitude=30.0, frequency=f,
                              duration=sine_duration)
        with embedded_session(config) as (client, _):
            run = run_experiment(client, spec)
        cmd, fb = run.cmd[:, 0], run.fb[:, 0]
        if f in targets.mae:
            out["mae"][f] = metrics.tracking_errors(cmd, fb).mae
        if f in lag_freqs:
            max_lag = min(int(round(DEFAULT_MAX_LAG_S * client.stream_rate)), len(run) // 2 - 1)
            out["lag"][f] = metrics.xcorr_lag(cmd, fb, max_lag, t=run.t).tau_seconds
    return out


def residuals(measured: dict, targets: Targets = REFERENCE_TARGETS) -> dict:
    res = {}
    for sp, (t_r, T_s) in targets.step.items():
        m = measured["step"].get(sp)
        if m is None:
            return {"unsettled": math.inf}
        res[f"t_r@{sp:g}"] = (m["t_r"] - t_r) / t_r
        res[f"T_s@{sp:g}"] = (m["T_s"] - T_s) / T_s
        res[f"os_pct@{sp:g}"] = m["os_pct"]
        res[f"err_ss@{sp:g}"] = m["err_ss"]
    for f, mae in targets.mae.items():
        res[f"mae@{f:g}"] = (measured["mae"][f] - mae) / mae
    for f in targets.lag_freqs:
        res[f"lag@{f:g}"] = (measured["lag"][f] - targets.lag) / targets.lag
    return res


def objective(res: dict) -> float:
    return float(sum(r * r for r in res.values()))


class _Evaluator:
    def __init__(self, base, targets, step_duration, sine_duration):
        self.base = base
        self.targets = targets
        self.kwargs = {"step_duration": step_duration, "sine_duration": sine_duration}
        self.cache: dict = {}

    def __call__(self, params: dict):
        key = tuple(params[p] for p in PARAMS)
        if key not in self.cache:
            measured = measure(apply_params(self.base, params), self.targets, **self.kwargs)
            res = residuals(measured, self.targets)
            self.cache[key] = (objective(res), res, measured)
            log.info("%s -> %.6g", params, self.cache[key][0])
        return self.cache[key]


def _nearest(values, x):
    return min(values, key=lambda v: (abs(v - x), v))


def calibrate(grid: dict | None = None, base: EmulatorConfig | None = None,
              targets: Targets = REFERENCE_TARGETS, start: dict | None = None,
              method: str = "coordinate", max_rounds: int = 6,
              step_duration: float = 5.0, sine_duration: float = 30.0) -> CalibrationResult:
    """Sweep (kp, vmax, amax, command_latency) over ``grid``.

    ``method="grid"`` evaluates the full product; ``"coordinate"`` starts at
    the grid point nearest ``start`` and sweeps one parameter at a time
    until a full round brings no improvement. Deterministic for a given grid.
    """
    grid = {k: sorted(set(v)) for k, v in (grid or DEFAULT_GRID).items()}
    if set(grid) != set(PARAMS) or any(not v for v in grid.values()):
        raise ValueError(f"grid needs nonempty value lists for {PARAMS}")
    base = base or EmulatorConfig()
    start = dict(start or UNCALIBRATED)
    evaluate = _Evaluator(base, targets, step_duration, sine_duration)
    start_objective = evaluate(start)[0]

    if method == "grid":
        candidates = (dict(zip(PARAMS, combo))
                      for combo in itertools.product(*(grid[p] for p in PARAMS)))
        best = min(candidates, key=lambda p: (evaluate(p)[0], tuple(p[k] for k in PARAMS)))
    elif method == "coordinate":
        best = {p: _nearest(grid[p], start[p]) for p in PARAMS}
        for _ in range(max_rounds):
            before = dict(best)
            for name in PARAMS:
                best = min(({**best, name: v} for v in grid[name]),
                           key=lambda p: (evaluate(p)[0], p[name]))
            if best == before:
                break
    else:
        raise ValueError(f"unknown method {method!r}")

    value, res, measured = evaluate(best)
    return CalibrationResult(best, value, res, measured, start, start_objective,
                             len(evaluate.cache))
