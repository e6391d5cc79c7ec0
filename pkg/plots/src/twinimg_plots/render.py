"""Deterministic figure rendering for the three panel kinds.

Rendering is pure: the Agg backend with pinned DPI, fonts and SVG hash
salt, plus timestamp-free metadata, makes repeated renders of the same
spec byte-identical.  The color scale of a heatmap is either taken from
the spec or derived symmetrically from the data, and is always printed
into the figure so the mapping is recorded in the output itself.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .readers import read_corr_csv, read_report, read_snr_csv
from .specs import PlotSpec

_RC = {
    "figure.dpi": 150,
    "savefig.dpi": 150,
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "svg.hashsalt": "twinimg-plots",
    "axes.grid": False,
}

_PLANE_LABEL = {"near": "crystal-image plane", "far": "focal plane"}


def _metadata(path: Path) -> dict:
    if path.suffix == ".svg":
        return {"Date": None}
    return {"Software": "twinimg-plots"}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata=_metadata(path))
    plt.close(fig)
    return path


def _color_bounds(values: np.ndarray, spec: PlotSpec) -> tuple[float, float]:
    if spec.color_scale is not None:
        return spec.color_scale
    peak = float(np.abs(values).max()) or 1.0
    return (-peak, peak)


def render_corr_map(spec: PlotSpec) -> Path:
    data = read_corr_csv(spec.corr_csv)
    lo, hi = _color_bounds(data.values, spec)
    scale = data.physical_per_pixel
    extent = [
        (data.shifts_x[0] - 0.5) * scale, (data.shifts_x[-1] + 0.5) * scale,
        (data.shifts_y[0] - 0.5) * scale, (data.shifts_y[-1] + 0.5) * scale,
    ]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.2, 3.6))
        im = ax.imshow(data.values, origin="lower", extent=extent,
                       cmap="inferno", vmin=lo, vmax=hi, interpolation="nearest")
        ax.set_xlabel(f"shift x [{data.axis_unit}]")
        ax.set_ylabel(f"shift y [{data.axis_unit}]")
        grouping = spec.grouping_annotation or data.grouping
        ax.set_title(spec.title or (
            f"normalized cross-correlation, {_PLANE_LABEL.get(data.plane, data.plane)}"))
        fig.colorbar(im, ax=ax, label="correlation")
        fig.text(0.01, 0.01,
                 f"{data.frame_count} frames, {grouping}x{grouping} px grouping, "
                 f"color scale [{lo:.3g}, {hi:.3g}]",
                 fontsize=7)
        fig.tight_layout(rect=(0, 0.04, 1, 1))
        return _save(fig, spec.out)


def render_snr_curve(spec: PlotSpec) -> Path:
    curves = read_snr_csv(spec.snr_csv)
    min_frames = {}
    if spec.report_json is not None:
        report = read_report(spec.report_json)
        for plane in ("near", "far"):
            min_frames[plane] = report.get(plane, {}).get("min_frames_detect")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.2, 3.2))
        for plane, points in sorted(curves.items()):
            counts = [c for c, _ in points]
            snrs = [s for _, s in points]
            label = _PLANE_LABEL.get(plane, plane)
            if min_frames.get(plane) is not None:
                label += f" (detect at {min_frames[plane]})"
            ax.plot(counts, snrs, marker="o", markersize=3, label=label)
        ax.axhline(spec.detect_threshold, color="k", linestyle="--", linewidth=1,
                   label=f"{spec.detect_threshold} sigma detection")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("number of frame pairs")
        ax.set_ylabel("correlation peak SNR")
        ax.set_title(spec.title or "peak detection SNR vs frame count")
        ax.legend(fontsize=7)
        fig.tight_layout()
        return _save(fig, spec.out)


def render_joint_slices(spec: PlotSpec) -> Path:
    data = read_corr_csv(spec.corr_csv)
    iy, ix = np.unravel_index(int(np.argmax(data.values)), data.values.shape)
    scale = data.physical_per_pixel
    with plt.rc_context(_RC):
        fig, (ax_x, ax_y) = plt.subplots(1, 2, figsize=(6.4, 2.8), sharey=True)
        ax_x.plot(data.shifts_x * scale, data.values[iy, :], drawstyle="steps-mid")
        ax_x.set_xlabel(f"shift x [{data.axis_unit}]")
        ax_x.set_ylabel("correlation")
        ax_x.set_title(f"cut at shift y = {data.shifts_y[iy]} px", fontsize=8)
        ax_y.plot(data.shifts_y * scale, data.values[:, ix], drawstyle="steps-mid")
        ax_y.set_xlabel(f"shift y [{data.axis_unit}]")
        ax_y.set_title(f"cut at shift x = {data.shifts_x[ix]} px", fontsize=8)
        fig.suptitle(spec.title or (
            f"correlation peak profiles, {_PLANE_LABEL.get(data.plane, data.plane)}"),
            fontsize=9)
        fig.tight_layout(rect=(0, 0, 1, 0.93))
        return _save(fig, spec.out)


_RENDERERS = {
    "corr_map": render_corr_map,
    "snr_curve": render_snr_curve,
    "joint_slices": render_joint_slices,
}


def render(spec: PlotSpec) -> Path:
    """Render one panel; returns the written image path."""
    return _RENDERERS[spec.kind](spec)
