"""Figure rendering for run artifacts.

Every plot function takes data already on disk or in memory and writes a
PNG next to the delimited output; nothing here feeds back into the
computation, so skipping the figures never changes a result.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

CHANNELS = ["x", "y", "z", "theta_x", "theta_y", "theta_z"]


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_run(result, out_dir: Path, spectrum=None):
    """Time series and (optionally) transmissibility of a scenario run."""
    out_dir = Path(out_dir)
    t = result.time
    axis = result.axis

    fig, axes = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    axes[0].plot(t, result.stator_accel[:, axis], lw=0.4, label="stator")
    axes[0].plot(t, result.floater_accel[:, axis], lw=0.4, label="floater")
    axes[0].set_ylabel("acceleration [m/s$^2$]")
    axes[0].legend(loc="upper right")
    axes[0].set_title(f"Axis {CHANNELS[axis]}: vibration level")
    axes[1].plot(t, result.rel_pose[:, axis], lw=0.6)
    axes[1].set_ylabel("relative position [m]")
    axes[1].set_xlabel("time [s]")
    _save(fig, out_dir / "timeseries.png")

    if spectrum is not None:
        freqs, db = spectrum
        fig, ax = plt.subplots(figsize=(7, 4.5))
        ax.semilogx(freqs, db, lw=1.0)
        ax.set_xlabel("frequency [Hz]")
        ax.set_ylabel("floater/stator [dB]")
        ax.grid(True, which="both", alpha=0.3)
        ax.set_title("Acceleration transmissibility")
        _save(fig, out_dir / "spectrum.png")


def plot_decoupling(result, out_dir: Path, ideal=None):
    """Six pose channels of a step scenario, with the ideal overlay."""
    out_dir = Path(out_dir)
    t = result.time
    fig, axes = plt.subplots(3, 2, figsize=(10, 7), sharex=True)
    for ch, ax in enumerate(axes.ravel()):
        ax.plot(t, result.rel_pose[:, ch], lw=0.8, label="measured")
        ax.plot(t, result.r_d[:, ch], lw=0.7, ls="--", label="reference")
        if ideal is not None and np.any(ideal[:, ch]):
            ax.plot(t, ideal[:, ch], lw=0.7, ls=":", label="ideal channel")
        ax.set_ylabel(CHANNELS[ch])
        if ch == 0:
            ax.legend(loc="lower right", fontsize=8)
    for ax in axes[-1]:
        ax.set_xlabel("time [s]")
    fig.suptitle("Pose channels under step commands")
    _save(fig, out_dir / "decoupling.png")


def plot_training(report, out_dir: Path):
    """Dataset error against network size during self-construction."""
    out_dir = Path(out_dir)
    if not report.rmse_per_insertion:
        return
    neurons, errors = zip(*report.rmse_per_insertion)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(neurons, errors, "o-", ms=4)
    ax.set_xlabel("neurons")
    ax.set_ylabel("training RMSE (normalized)")
    ax.grid(True, alpha=0.3)
    _save(fig, out_dir / "training.png")


def plot_compare(table: list, out_dir: Path):
    """Bar chart of per-tone attenuation for two controller modes."""
    out_dir = Path(out_dir)
    freqs = sorted(set(row["frequency"] for row in table))
    modes = sorted(set(row["controller"] for row in table))
    width = 0.8 / len(modes)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for k, mode in enumerate(modes):
        vals = [next(r["attenuation_db"] for r in table
                     if r["controller"] == mode and r["frequency"] == f)
                for f in freqs]
        ax.bar(np.arange(len(freqs)) + k * width, vals, width, label=mode)
    ax.set_xticks(np.arange(len(freqs)) + width / 2)
    ax.set_xticklabels([f"{f:g} Hz" for f in freqs])
    ax.set_ylabel("attenuation [dB]")
    ax.legend()
    ax.grid(True, axis="y", alpha=0.3)
    _save(fig, out_dir / "compare.png")
