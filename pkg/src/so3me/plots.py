"""Static plot emission: attitude error and rate error versus time.

Renders two vector-image line charts from a trajectory file using the
non-interactive matplotlib backend. Filenames are fixed
(``phi_vs_time.svg``, ``omega_error_vs_time.svg``) so downstream tooling
can find them.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .config import IoError  # noqa: E402
from .harness import read_trajectory  # noqa: E402


@dataclass(frozen=True)
class PlotInfo:
    """Emitted file plus the axis ranges actually rendered."""
    path: str
    xlim: tuple
    ylim: tuple


def emit_plots(trajectory_path, out_dir=None):
    """Render phi-vs-time and omega-error-vs-time charts as SVG files.

    Returns a list of two :class:`PlotInfo`. Raises :class:`IoError` for an
    empty trajectory or an unwritable destination.
    """
    rows = read_trajectory(trajectory_path)
    if not rows:
        raise IoError(f"empty trajectory {trajectory_path!r}: nothing to plot")
    if out_dir is None:
        out_dir = os.path.dirname(os.path.abspath(trajectory_path))
    t = [row[1] for row in rows]
    phi = [row[2] for row in rows]
    omega = [(row[3], row[4], row[5]) for row in rows]

    infos = []

    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    ax.plot(t, phi, color="tab:blue", linewidth=1.0)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("principal angle [rad]")
    ax.set_title("Attitude estimation error")
    ax.grid(True, alpha=0.3)
    infos.append(_save(fig, ax, os.path.join(out_dir, "phi_vs_time.svg")))

    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    for idx, label in enumerate(("x", "y", "z")):
        ax.plot(t, [w[idx] for w in omega], linewidth=1.0, label=label)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("rate estimation error [rad/s]")
    ax.set_title("Angular velocity estimation error")
    ax.legend(loc="upper right")
    ax.grid(True, alpha=0.3)
    infos.append(_save(fig, ax,
                       os.path.join(out_dir, "omega_error_vs_time.svg")))
    return infos


def _save(fig, ax, path):
    xlim = tuple(float(v) for v in ax.get_xlim())
    ylim = tuple(float(v) for v in ax.get_ylim())
    try:
        fig.savefig(path, format="svg", bbox_inches="tight")
    except OSError as exc:
        plt.close(fig)
        raise IoError(f"cannot write plot {path!r}: {exc}") from None
    plt.close(fig)
    return PlotInfo(path=path, xlim=xlim, ylim=ylim)
