"""Matplotlib renderers for the CLI report paths.

Every function writes a PNG next to the delimited data it visualizes.
Rendering is deterministic (Agg backend, fixed geometry, no timestamps),
so repeated runs with identical data produce identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .monitor.session import PostureStats
from .postures import POSTURES
from .sensing import CushionLayout

_DPI = 110


def _save(fig, path) -> None:
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_posture_pressure_maps(mean_forces: dict[str, np.ndarray], path,
                                 layout: CushionLayout | None = None) -> None:
    """Grid of per-posture cushion heat maps (mean force per sensor)."""
    layout = layout or CushionLayout()
    postures = [p for p in POSTURES if p in mean_forces]
    cols = 4
    rows = (len(postures) + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 3.6 * rows))
    axes = np.atleast_2d(axes)
    xs = [p[0] for p in layout.sensor_positions]
    ys = [p[1] for p in layout.sensor_positions]
    vmax = max(1e-9, max(float(np.max(v)) for v in mean_forces.values()))
    for ax, posture in zip(axes.flat, postures):
        sc = ax.scatter(xs, ys, c=mean_forces[posture], s=420, cmap="YlOrRd",
                        vmin=0.0, vmax=vmax, edgecolors="k")
        for i, (x, y) in enumerate(layout.sensor_positions):
            ax.annotate(f"S{i + 1}", (x, y), ha="center", va="center", fontsize=7)
        ax.set_xlim(0, layout.width_cm)
        ax.set_ylim(layout.depth_cm, 0)  # front of the seat at the top
        ax.set_title(posture, fontsize=10)
        ax.set_aspect("equal")
        ax.set_xticks([])
        ax.set_yticks([])
    for ax in axes.flat[len(postures):]:
        ax.axis("off")
    fig.colorbar(sc, ax=axes, shrink=0.7, label="mean force (kg)")
    _save(fig, path)


def render_confusion_heatmaps(reports, class_names, path) -> None:
    """One confusion-matrix panel per evaluated model."""
    n = len(reports)
    cols = min(2, n)
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(6.0 * cols, 5.0 * rows))
    axes = np.atleast_1d(axes).ravel()
    for ax, rep in zip(axes, reports):
        cm = rep.confusion
        ax.imshow(cm, cmap="Blues")
        for i in range(cm.shape[0]):
            for j in range(cm.shape[1]):
                if cm[i, j]:
                    ax.text(j, i, str(int(cm[i, j])), ha="center", va="center",
                            fontsize=7)
        ax.set_title(f"{rep.model_kind}  acc={rep.accuracy:.4f}", fontsize=10)
        ax.set_xticks(range(len(class_names)))
        ax.set_yticks(range(len(class_names)))
        ax.set_xticklabels(class_names, rotation=45, ha="right", fontsize=7)
        ax.set_yticklabels(class_names, fontsize=7)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
    for ax in axes[n:]:
        ax.axis("off")
    fig.tight_layout()
    _save(fig, path)


def render_accuracy_bars(reports, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    kinds = [r.model_kind for r in reports]
    accs = [r.accuracy for r in reports]
    ax.bar(kinds, accs, color="#4878a8")
    ax.set_ylim(0.0, 1.0)
    ax.set_ylabel("test accuracy")
    for i, a in enumerate(accs):
        ax.text(i, a, f"{a:.4f}", ha="center", va="bottom", fontsize=9)
    fig.tight_layout()
    _save(fig, path)


def render_embedding(emb, path) -> None:
    """2-D or 3-D scatter colored by posture label."""
    d = emb.coords.shape[1]
    fig = plt.figure(figsize=(7, 6))
    ax = fig.add_subplot(111, projection="3d" if d == 3 else None)
    labels = emb.labels if emb.labels is not None else [""] * emb.coords.shape[0]
    for li, name in enumerate(sorted(set(labels))):
        mask = np.array([l == name for l in labels])
        pts = emb.coords[mask]
        args = (pts[:, 0], pts[:, 1]) if d == 2 else (pts[:, 0], pts[:, 1], pts[:, 2])
        ax.scatter(*args, s=6, label=name)
    ax.set_title(f"{emb.method} ({d}-D)")
    if len(set(labels)) > 1:
        ax.legend(fontsize=7, markerscale=2)
    fig.tight_layout()
    _save(fig, path)


def render_chain_stages(stages, path, window_s: float = 6.0) -> None:
    """Waveform panels for the four chain taps."""
    fs = stages.stage_a.fs_hz
    n = min(int(window_s * fs), stages.stage_a.samples.size)
    t = np.arange(n) / fs
    fig, axes = plt.subplots(4, 1, figsize=(8, 8), sharex=True)
    names = [
        ("stage_a", "(a) raw"),
        ("stage_b", "(b) DC removed + amplified"),
        ("stage_c", "(c) band-passed"),
        ("stage_d", "(d) low-passed + PGA"),
    ]
    for ax, (attr, title) in zip(axes, names):
        ax.plot(t, getattr(stages, attr).samples[:n], lw=0.8)
        ax.set_title(title, fontsize=9)
    axes[-1].set_xlabel("time (s)")
    fig.tight_layout()
    _save(fig, path)


def render_hr_comparison(times_s, main_bpm, ref_bpm, path) -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(times_s, main_bpm, label="chain pipeline", lw=1.2)
    ax.plot(times_s, ref_bpm, label="reference pipeline", lw=1.2, ls="--")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("heart rate (bpm)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def render_bland_altman(main_bpm, ref_bpm, report, path) -> None:
    means = (np.asarray(main_bpm) + np.asarray(ref_bpm)) / 2.0
    diffs = np.asarray(main_bpm) - np.asarray(ref_bpm)
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.scatter(means, diffs, s=10)
    ax.axhline(report.bias_bpm, color="k", lw=1,
               label=f"bias {report.bias_bpm:.2f} bpm")
    ax.axhline(report.loa_low_bpm, color="r", lw=1, ls="--",
               label=f"limits {report.loa_low_bpm:.2f} / {report.loa_high_bpm:.2f}")
    ax.axhline(report.loa_high_bpm, color="r", lw=1, ls="--")
    ax.set_xlabel("mean of methods (bpm)")
    ax.set_ylabel("difference (bpm)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def render_posture_stats(stats: PostureStats, path) -> None:
    """Duration and repetition bars over the queried window."""
    labels = sorted(stats.durations_s)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.bar(labels, [stats.durations_s[l] for l in labels], color="#4878a8")
    ax1.set_ylabel("duration (s)")
    ax1.tick_params(axis="x", rotation=45)
    ax2.bar(labels, [stats.repetitions.get(l, 0) for l in labels], color="#a85048")
    ax2.set_ylabel("repetitions")
    ax2.tick_params(axis="x", rotation=45)
    fig.tight_layout()
    _save(fig, path)
