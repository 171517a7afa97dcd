"""Static SVG diagnostics: impedance trajectory with blinder overlay and
the swing time series."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .engine import TraceRecord
from .relay import BlinderSet


def _draw_blinders(ax, blinders: BlinderSet) -> None:
    colors = {"outer": "tab:blue", "middle": "tab:orange", "inner": "tab:red"}
    for name, zone in blinders.zones():
        lo = zone.x_bottom if zone.x_bottom is not None else -1e3
        hi = zone.x_top if zone.x_top is not None else 1e3
        for r in (zone.left, zone.right):
            ax.plot([r, r], [lo, hi], color=colors[name], lw=0.9, ls="--", label=None)
        ax.plot([], [], color=colors[name], lw=0.9, ls="--", label=f"{name} blinder")


def impedance_plot(trace: list[TraceRecord], blinders: BlinderSet | None, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 6))
    xs = [r.z_ohm.real for r in trace if r.z_ohm is not None]
    ys = [r.z_ohm.imag for r in trace if r.z_ohm is not None]
    ax.plot(xs, ys, lw=0.8, color="black")
    if xs:
        ax.plot(xs[0], ys[0], "go", ms=5, label="start")
        ax.plot(xs[-1], ys[-1], "ks", ms=5, label="end")
    if blinders is not None:
        _draw_blinders(ax, blinders)
    span = max((abs(v) for v in xs + ys), default=1.0)
    ax.set_xlim(-1.2 * span, 1.2 * span)
    ax.set_ylim(-1.2 * span, 1.2 * span)
    ax.set_xlabel("R (ohm)")
    ax.set_ylabel("X (ohm)")
    ax.set_title("relay impedance trajectory")
    ax.grid(alpha=0.3)
    ax.legend(loc="upper right", fontsize=8)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)


def timeseries_plot(trace: list[TraceRecord], path: str | Path) -> None:
    deg = 180.0 / math.pi
    t = [r.t for r in trace]
    fig, axes = plt.subplots(4, 1, figsize=(8, 9), sharex=True)
    axes[0].plot(t, [r.delta_ctrl * deg for r in trace], lw=0.9, label="control/rotor angle")
    axes[0].plot(t, [r.delta_pcc * deg for r in trace], lw=0.9, label="terminal-bus angle")
    axes[0].set_ylabel("deg")
    axes[0].legend(fontsize=8)
    axes[1].plot(t, [r.p_e for r in trace], lw=0.9, label="P")
    axes[1].plot(t, [r.q_e for r in trace], lw=0.9, label="Q")
    axes[1].set_ylabel("pu")
    axes[1].legend(fontsize=8)
    axes[2].plot(t, [abs(r.i_g) for r in trace], lw=0.9)
    axes[2].set_ylabel("|i| pu")
    axes[3].plot(t, [r.r_e for r in trace], lw=0.9)
    axes[3].set_ylabel("limiter R (pu)")
    axes[3].set_xlabel("t (s)")
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
