"""Run orchestration: simulate to frame files, analyze from frame files.

``simulate_stacks`` fuses the pair sampler and the detector per frame;
because every frame draws from streams keyed by (seed, frame index,
role), the output is bit-identical for any worker count or generation
order.  ``analyze_files`` rebuilds configurations from the sidecars, so
an analysis needs nothing beyond the four frame files.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .analysis import AnalyzeOptions, EprReport, PlaneAnalysis, analyze_stacks
from .camera import FrameStack, expose_frame, threshold
from .framefile import UNITS, read_framefile, write_framefile
from .runconfig import RunConfig, config_digest, echo_config, parse_config
from .sampling import ROLE_CAM1, ROLE_CAM2, PlaneKind, frame_rng, sample_frame_pairs


def simulate_stacks(
    cfg: RunConfig,
    plane: PlaneKind,
    workers: int = 1,
) -> tuple[FrameStack, FrameStack]:
    """Simulate one acquisition run: both cameras, all frames."""
    src = cfg.source()
    n = cfg.geometry.grid_size
    count = src.frames
    stack1 = np.empty((count, n, n), dtype=np.uint16)
    stack2 = np.empty((count, n, n), dtype=np.uint16)
    off_sensor = np.zeros(count, dtype=np.int64)
    multi = np.zeros(count, dtype=np.int64)

    def one(i: int) -> None:
        events = sample_frame_pairs(src, plane, i)
        f1, f2, stats = expose_frame(
            events, cfg.geometry, cfg.noise,
            frame_rng(src.seed, i, ROLE_CAM1), frame_rng(src.seed, i, ROLE_CAM2))
        stack1[i] = f1
        stack2[i] = f2
        off_sensor[i] = stats["off_sensor"]
        multi[i] = stats["multi_photon_pixels"]

    if workers <= 1:
        for i in range(count):
            one(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, range(count)))

    meta = {
        "plane": plane.value,
        "seed": src.seed,
        "config_digest": config_digest(cfg),
        "off_sensor_photons": int(off_sensor.sum()),
        "multi_photon_pixels": int(multi.sum()),
    }
    return (
        FrameStack(plane=plane, frames=stack1, meta=dict(meta, camera=1)),
        FrameStack(plane=plane, frames=stack2, meta=dict(meta, camera=2)),
    )


def run_paths(outdir: str | Path, plane: PlaneKind) -> tuple[Path, Path]:
    outdir = Path(outdir)
    return (outdir / f"{plane.value}_cam1.twim", outdir / f"{plane.value}_cam2.twim")


def write_run(
    outdir: str | Path,
    cfg: RunConfig,
    plane: PlaneKind,
    stacks: tuple[FrameStack, FrameStack],
) -> tuple[Path, Path]:
    """Persist both cameras of a run with reproducibility sidecars."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = run_paths(outdir, plane)
    for path, stack, camera in zip(paths, stacks, (1, 2)):
        sidecar = {
            "config": echo_config(cfg),
            "config_digest": config_digest(cfg),
            "seed": cfg.seed,
            "plane": plane.value,
            "camera": camera,
            "generator": f"twinimg/{__version__}",
            "units": UNITS,
            "off_sensor_photons": stack.meta.get("off_sensor_photons"),
            "multi_photon_pixels": stack.meta.get("multi_photon_pixels"),
        }
        write_framefile(path, stack, camera, sidecar)
    return paths


def load_pair(path1: str | Path, path2: str | Path) -> tuple[FrameStack, FrameStack, RunConfig]:
    """Load a camera pair and the configuration from its sidecars."""
    stack1, cam1, meta1 = read_framefile(path1)
    stack2, cam2, meta2 = read_framefile(path2)
    if {cam1, cam2} != {1, 2}:
        raise ValueError(f"expected cameras 1 and 2, got {cam1} and {cam2}")
    if cam1 == 2:
        stack1, stack2 = stack2, stack1
        meta1, meta2 = meta2, meta1
    if stack1.plane is not stack2.plane:
        raise ValueError("camera pair measures different planes")
    if stack1.frames.shape != stack2.frames.shape:
        raise ValueError("camera pair has mismatched stack shapes")
    for meta, path in ((meta1, path1), (meta2, path2)):
        if "config" not in meta:
            raise ValueError(f"{path}: sidecar lacks the run configuration")
    cfg = parse_config(meta1["config"], source=f"{path1} sidecar")
    cfg2 = parse_config(meta2["config"], source=f"{path2} sidecar")
    # seeds may differ (cross-seed pairs are a legitimate null control);
    # everything else must match for the analysis to be meaningful
    if replace(cfg, seed=0) != replace(cfg2, seed=0):
        raise ValueError("camera pair was generated from incompatible configurations")
    if cfg.geometry.grid_size != stack1.frames.shape[1]:
        raise ValueError("sidecar geometry disagrees with the stored frames")
    return stack1, stack2, cfg


def analyze_files(
    near_paths: tuple[str | Path, str | Path],
    far_paths: tuple[str | Path, str | Path],
    options: AnalyzeOptions = AnalyzeOptions(),
) -> tuple[EprReport, PlaneAnalysis, PlaneAnalysis, dict[str, Any]]:
    """Threshold and analyze two persisted runs (near and far field)."""
    near1, near2, cfg_near = load_pair(*near_paths)
    far1, far2, cfg_far = load_pair(*far_paths)
    if near1.plane is not PlaneKind.NEAR_FIELD:
        raise ValueError(f"{near_paths[0]}: expected near-field frames, got {near1.plane.value}")
    if far1.plane is not PlaneKind.FAR_FIELD:
        raise ValueError(f"{far_paths[0]}: expected far-field frames, got {far1.plane.value}")

    report, pa_near, pa_far = analyze_stacks(
        threshold(near1, cfg_near.noise), threshold(near2, cfg_near.noise),
        threshold(far1, cfg_far.noise), threshold(far2, cfg_far.noise),
        geometry_near=cfg_near.geometry, geometry_far=cfg_far.geometry,
        options=options)
    report.meta.update({
        "near_config_digest": config_digest(cfg_near),
        "far_config_digest": config_digest(cfg_far),
        "near_grid_size": cfg_near.geometry.grid_size,
        "far_grid_size": cfg_far.geometry.grid_size,
        "generator": f"twinimg/{__version__}",
    })
    configs = {"near": cfg_near, "far": cfg_far}
    return report, pa_near, pa_far, configs
