"""Writes a run's artifacts: log CSV, metrics JSON, plot-ready CSVs, figures."""

from __future__ import annotations

import csv
import os
from pathlib import Path


from .. import metrics
from ..explog import ExperimentLog
from .analysis import dumps


def sidecar(path, suffix: str, ext: str) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}{suffix}{ext}")


def write_metrics(report: dict, path) -> None:
    """Atomic write so a failed run never leaves a partial metrics file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(dumps(report))
    os.replace(tmp, path)


def write_plot_csvs(log: ExperimentLog, report: dict, base) -> list[Path]:
    j = report["joint"] - 1
    t, cmd, fb = log.t, log.cmd[:, j], log.fb[:, j]
    vel = metrics.differentiate(t, fb)
    out = [sidecar(base, "_plot", ".csv")]
    with open(out[0], "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "cmd", "fb", "vel"])
        writer.writerows(zip(map(repr, t), map(repr, cmd), map(repr, fb), map(repr, vel)))
    lag = report.get("lag")
    if lag:
        a_cmd, a_fb = metrics.align(cmd, fb, lag["tau_samples"])
        path = sidecar(base, "_aligned", ".csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "cmd", "fb"])
            writer.writerows(zip(map(repr, t[: len(a_cmd)]), map(repr, a_cmd), map(repr, a_fb)))
        out.append(path)
    return out


def write_run(log: ExperimentLog, report: dict | None, log_path, figures: bool = True) -> list[Path]:
    """Log first, then metrics and plot data. ``report=None`` writes the log only."""
    log_path = Path(log_path)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    log.to_csv(log_path)
    written = [log_path]
    if report is None:
        return written
    written += write_plot_csvs(log, report, log_path)
    if figures:
        from .. import plotting

        written += plotting.render_report(log, report, log_path)
    metrics_path = log_path.with_suffix(".json")
    write_metrics(report, metrics_path)
    written.append(metrics_path)
    return written


__all__ = ["sidecar", "write_metrics", "write_plot_csvs", "write_run"]
