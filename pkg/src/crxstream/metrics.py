"""Step-response, tracking, lag and cycle-rate analysis of experiment signals.

All angles are in degrees and all times in seconds.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


class MetricsError(ValueError):
    pass


class UnsettledError(MetricsError):
    """The response never met a threshold; ``partial`` holds what was computable."""

    def __init__(self, message: str, partial: dict):
        self.partial = partial
        super().__init__(message)


class LagError(MetricsError):
    pass


@dataclass(frozen=True)
class StepMetrics:
    t_r: float
    T_s: float
    os_pct: float
    err_ss: float
    t_p: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrackingMetrics:
    mae: float
    rmse: float
    max_err: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LagEstimate:
    tau_samples: int
    tau_seconds: float
    mean_cycle: float
    control_freq: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CycleStats:
    frequency: float
    mean_cycle: float
    std_cycle: float

    def to_dict(self) -> dict:
        return asdict(self)


def _as_series(x, name) -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise MetricsError(f"{name} contains non-finite values")
    return arr


def _first_at_or_above(t, x, level):
    """Interpolated time at which ``x`` first reaches ``level``, or None."""
    hits = np.nonzero(x >= level)[0]
    if hits.size == 0:
        return None
    i = hits[0]
    if i == 0:
        return t[0]
    return t[i - 1] + (level - x[i - 1]) / (x[i] - x[i - 1]) * (t[i] - t[i - 1])


def _first_within(t, dev, band):
    """Interpolated time at which ``dev`` first drops to ``band`` or below."""
    hits = np.nonzero(dev <= band)[0]
    if hits.size == 0:
        return None
    i = hits[0]
    if i == 0:
        return t[0]
    return t[i - 1] + (dev[i - 1] - band) / (dev[i - 1] - dev[i]) * (t[i] - t[i - 1])


def step_metrics(t, fb, setpoint: float, *, rise=(0.1, 0.9), settle_band: float = 0.02,
                 ss_window: float = 0.1, peak_band: float = 0.001) -> StepMetrics:
    """Rise time, settling time, overshoot, steady-state error and peak time.

    The step starts at ``fb[0]`` and times are measured from ``t[0]``.
    ``rise`` gives the rise-time fractions of the amplitude, ``settle_band``
    the settling band, ``ss_window`` the trailing fraction of samples
    averaged for the steady-state error. Without overshoot the peak time is
    the first entry into the ``peak_band`` band around the setpoint.
    Threshold crossings are linearly interpolated between samples.
    """
    t = _as_series(t, "t")
    y = _as_series(fb, "fb")
    if y.size == 0 or y.size != t.size:
        raise MetricsError("t and fb must be nonempty and of equal length")
    tt = t - t[0]
    n_ss = max(1, int(round(ss_window * y.size)))
    err_ss = float(np.mean(np.abs(y[-n_ss:] - setpoint)))
    amplitude = setpoint - y[0]
    if amplitude == 0.0:
        return StepMetrics(0.0, 0.0, 0.0, err_ss, 0.0)

    x = (y - y[0]) / amplitude  # normalized progress, 1 at the setpoint
    dev = np.abs(x - 1.0)
    os_pct = max(0.0, float(np.max(x)) - 1.0) * 100.0
    partial = {"os_pct": os_pct, "err_ss": err_ss}

    t_lo = _first_at_or_above(tt, x, rise[0])
    t_hi = _first_at_or_above(tt, x, rise[1])
    if t_lo is None or t_hi is None:
        raise UnsettledError(f"response never reached {rise[1]:.0%} of the step", partial)
    t_r = float(t_hi - t_lo)
    partial["t_r"] = t_r

    outside = np.nonzero(dev > settle_band)[0]
    if outside.size == 0:
        T_s = 0.0
    elif outside[-1] == y.size - 1:
        raise UnsettledError("response ends outside the settling band", partial)
    else:
        j = outside[-1]
        T_s = float(tt[j] + (dev[j] - settle_band) / (dev[j] - dev[j + 1]) * (tt[j + 1] - tt[j]))
    partial["T_s"] = T_s

    if os_pct > 0.0:
        t_p = float(tt[int(np.argmax(x))])
    else:
        t_p = _first_within(tt, dev, peak_band)
        if t_p is None:
            raise UnsettledError("response never entered the peak band", partial)
        t_p = float(t_p)
    return StepMetrics(t_r, T_s, os_pct, err_ss, t_p)


def tracking_errors(cmd, fb) -> TrackingMetrics:
    """MAE, RMSE and maximum absolute error between command and feedback."""
    cmd = _as_series(cmd, "cmd")
    fb = _as_series(fb, "fb")
    if cmd.size != fb.size:
        raise MetricsError(f"length mismatch: {cmd.size} commands, {fb.size} feedback")
    if cmd.size == 0:
        raise MetricsError("need at least one sample")
    err = np.abs(fb - cmd)
    return TrackingMetrics(float(np.mean(err)), float(np.sqrt(np.mean(err**2))),
                           float(np.max(err)))


def _cycle(t, n):
    if t is None:
        return 1.0
    t = _as_series(t, "t")
    if t.size != n:
        raise MetricsError("timestamps and samples differ in length")
    return float(np.mean(np.diff(t)))


def xcorr_scores(cmd, fb, max_lag: int, normalize: bool = True) -> np.ndarray:
    """Cross-correlation of ``fb`` against ``cmd`` for lags ``0..max_lag``.

    Each lag uses only the overlapping samples ``cmd[i]``, ``fb[i + lag]``.
    With ``normalize`` the score is the correlation coefficient of the two
    overlap windows (each mean-removed); otherwise it is the plain sum of
    products of the globally mean-removed signals.
    """
    cmd = _as_series(cmd, "cmd")
    fb = _as_series(fb, "fb")
    n = cmd.size
    if fb.size != n:
        raise MetricsError(f"length mismatch: {n} commands, {fb.size} feedback")
    if not 0 <= max_lag < n / 2:
        raise MetricsError(f"max_lag must be in [0, n/2), got {max_lag} for n={n}")
    c0 = cmd - cmd.mean()
    f0 = fb - fb.mean()
    if not np.any(c0) or not np.any(f0):
        raise LagError("lag is undefined for a constant signal")
    scores = np.full(max_lag + 1, -np.inf)
    for lag in range(max_lag + 1):
        if normalize:
            a = cmd[: n - lag] - cmd[: n - lag].mean()
            b = fb[lag:] - fb[lag:].mean()
            denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
            if denom > 0:
                scores[lag] = np.dot(a, b) / denom
        else:
            scores[lag] = np.dot(c0[: n - lag], f0[lag:])
    return scores


def xcorr_lag(cmd, fb, max_lag: int, t=None, normalize: bool = True) -> LagEstimate:
    """Lag (feedback behind command) maximizing the cross-correlation.

    Ties go to the smallest lag. With timestamps ``t`` the lag is also
    converted to seconds through the mean cycle time.
    """
    scores = xcorr_scores(cmd, fb, max_lag, normalize)
    best = np.max(scores)
    if not np.isfinite(best):
        raise LagError("no lag has a defined correlation")
    tol = 1e-12 * max(1.0, abs(best))
    tau = int(np.nonzero(scores >= best - tol)[0][0])
    mean_cycle = _cycle(t, np.asarray(cmd).size)
    return LagEstimate(tau, tau * mean_cycle, mean_cycle, 1.0 / mean_cycle)


def align(cmd, fb, tau: int):
    """Pairs ``cmd[i]`` with ``fb[i + tau]`` over the overlap."""
    cmd = _as_series(cmd, "cmd")
    fb = _as_series(fb, "fb")
    n = cmd.size
    return cmd[: n - tau], fb[tau:]


def path_following_errors(cmd, fb, max_lag: int | None = None, lag: int | None = None,
                          normalize: bool = True) -> TrackingMetrics:
    """Tracking errors after shifting feedback back by the best lag."""
    if lag is None:
        if max_lag is None:
            raise MetricsError("give max_lag or a precomputed lag")
        lag = xcorr_lag(cmd, fb, max_lag, normalize=normalize).tau_samples
    return tracking_errors(*align(cmd, fb, lag))


def control_frequency(t) -> CycleStats:
    t = _as_series(t, "t")
    if t.size < 2:
        raise MetricsError("need at least 2 timestamps")
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise MetricsError("timestamps must be strictly increasing")
    mean = float(np.mean(dt))
    return CycleStats(1.0 / mean, mean, float(np.std(dt)))


def differentiate(t, q) -> np.ndarray:
    """Velocity by central differences (one-sided at the ends)."""
    t = _as_series(t, "t")
    q = _as_series(q, "q")
    if t.size < 2:
        return np.zeros_like(q)
    return np.gradient(q, t)
