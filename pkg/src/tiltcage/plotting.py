"""Optional PNG figures rendered from telemetry and sweep results."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_tracking(telemetry, out_dir: Path) -> list[Path]:
    """Per-axis position error over time and the flown/driven ground track."""
    t = telemetry.column("t")
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for name in ("e_x", "e_y", "e_z"):
        ax.plot(t, telemetry.column(name), label=name, lw=1)
    ax.set_xlabel("t (s)")
    ax.set_ylabel("position error (m)")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    err_png = out_dir / "errors.png"
    fig.savefig(err_png, dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 5))
    ax.plot(telemetry.column("ref_x"), telemetry.column("ref_y"), "k--", lw=1, label="reference")
    ax.plot(telemetry.column("x"), telemetry.column("y"), lw=1.2, label="vehicle")
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    track_png = out_dir / "track.png"
    fig.savefig(track_png, dpi=120)
    plt.close(fig)
    return [err_png, track_png]


def plot_sweep(sweep, out_dir: Path) -> list[Path]:
    """Tilt, motor pitch, thrust and power against demanded acceleration."""
    pts = [p for p in sweep.points if p.result is not None]
    a = [p.acceleration for p in pts]
    series = (("theta (deg)", [math.degrees(p.result.theta) for p in pts]),
              ("beta (deg)", [math.degrees(p.result.beta) for p in pts]),
              ("F (N)", [p.result.thrust for p in pts]),
              ("P (W)", [p.result.power.total for p in pts]))
    fig, axes = plt.subplots(4, 1, figsize=(6, 8), sharex=True)
    for ax, (label, ys) in zip(axes, series):
        ax.plot(a, ys, marker=".", lw=1)
        for _, _, ab in sweep.boundaries:
            ax.axvline(ab, color="grey", ls=":", lw=1)
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[-1].set_xlabel("desired acceleration (m/s^2)")
    fig.tight_layout()
    png = out_dir / "sweep.png"
    fig.savefig(png, dpi=120)
    plt.close(fig)
    return [png]
