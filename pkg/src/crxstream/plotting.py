"""Figures for experiment logs: command vs feedback with velocity on a twin axis."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import metrics  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.4,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.dpi": 120,
}

COLORS = {"cmd": "#377eb8", "fb": "#e41a1c", "vel": "#000000", "ovr": "#4daf4a"}


def _sidecar(path, suffix):
    path = Path(path)
    return path.with_name(f"{path.stem}{suffix}.png")


def plot_tracking(t, cmd, fb, vel=None, ovr=None, title="", path=None):
    """Command (solid), feedback (dashed), velocity (dotted, right axis)."""
    with plt.rc_context(STYLE):
        nrows = 2 if ovr is not None else 1
        fig, axes = plt.subplots(nrows, 1, figsize=(6.0, 3.2 * nrows), sharex=True,
                                 squeeze=False)
        ax = axes[0, 0]
        ax.plot(t, cmd, color=COLORS["cmd"], label="command")
        ax.plot(t, fb, "--", color=COLORS["fb"], label="feedback")
        ax.set_ylabel("position [deg]")
        handles, labels = ax.get_legend_handles_labels()
        if vel is not None:
            ax2 = ax.twinx()
            ax2.plot(t, vel, ":", color=COLORS["vel"], label="velocity")
            ax2.set_ylabel("velocity [deg/s]")
            ax2.grid(False)
            h2, l2 = ax2.get_legend_handles_labels()
            handles, labels = handles + h2, labels + l2
        ax.legend(handles, labels, loc="best")
        if title:
            ax.set_title(title)
        if ovr is not None:
            axes[1, 0].step(t, ovr, where="post", color=COLORS["ovr"])
            axes[1, 0].set_ylabel("override")
            axes[1, 0].set_ylim(0, 1.05)
        axes[-1, 0].set_xlabel("time [s]")
        fig.tight_layout()
        if path is not None:
            fig.savefig(path)
            plt.close(fig)
        return fig


def render_report(log, report: dict, base) -> list[Path]:
    """Write ``<base>.png`` and, when a lag was found, ``<base>_aligned.png``."""
    j = report["joint"] - 1
    t, cmd, fb = log.t, log.cmd[:, j], log.fb[:, j]
    vel = metrics.differentiate(t, fb)
    ovr = log.ovr
    show_ovr = ovr if ovr.size and (ovr.min() != ovr.max() or ovr[0] != 1.0) else None
    kind = report.get("kind", "")
    title = f"J{j + 1} {kind}"
    if kind == "step":
        title += f", setpoint {report['setpoint']:g} deg"
    out = [_sidecar(base, "")]
    plot_tracking(t, cmd, fb, vel, show_ovr, title, out[0])
    lag = report.get("lag")
    if lag:
        a_cmd, a_fb = metrics.align(cmd, fb, lag["tau_samples"])
        path = _sidecar(base, "_aligned")
        plot_tracking(t[: a_cmd.size], a_cmd, a_fb,
                      title=f"J{j + 1} aligned by {lag['tau_seconds']:.2f} s", path=path)
        out.append(path)
    return out
