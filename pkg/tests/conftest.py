"""Shared fixtures: desk-scale matched runs reused across the suite.

The desk run mirrors the shipped defaults at a 256-pixel grid with
2000 frame pairs per plane; building it once per session keeps the
acceptance checks and the heavier statistical tests affordable.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import twinimg as t

DESK_SEED = 11
DESK_FRAMES = 2000
DESK_GRID = 256


def desk_config(frames: int = DESK_FRAMES, seed: int = DESK_SEED,
                grid: int = DESK_GRID) -> t.RunConfig:
    cfg = t.default_config()
    return replace(cfg, geometry=replace(cfg.geometry, grid_size=grid),
                   frames=frames, seed=seed)


@dataclass
class DeskRun:
    cfg: t.RunConfig
    near: tuple[t.BinaryFrameStack, t.BinaryFrameStack]
    far: tuple[t.BinaryFrameStack, t.BinaryFrameStack]
    report: t.EprReport
    pa_near: object
    pa_far: object
    simulate_seconds: float
    analyze_seconds: float


@pytest.fixture(scope="session")
def desk_run() -> DeskRun:
    """Matched-to-target run: simulate both planes, analyze once."""
    cfg = desk_config()
    stacks = {}
    t0 = time.perf_counter()
    for plane in (t.PlaneKind.NEAR_FIELD, t.PlaneKind.FAR_FIELD):
        s1, s2 = t.simulate_stacks(cfg, plane)
        stacks[plane] = (t.threshold(s1, cfg.noise), t.threshold(s2, cfg.noise))
        del s1, s2
    sim_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    report, pa_near, pa_far = t.analyze_stacks(
        *stacks[t.PlaneKind.NEAR_FIELD], *stacks[t.PlaneKind.FAR_FIELD],
        geometry_near=cfg.geometry)
    ana_s = time.perf_counter() - t0
    return DeskRun(
        cfg=cfg,
        near=stacks[t.PlaneKind.NEAR_FIELD],
        far=stacks[t.PlaneKind.FAR_FIELD],
        report=report,
        pa_near=pa_near,
        pa_far=pa_far,
        simulate_seconds=sim_s,
        analyze_seconds=ana_s,
    )


@pytest.fixture(scope="session")
def small_run():
    """Quick matched run (600 frames) for module-level statistics."""
    cfg = desk_config(frames=600, seed=7)
    out = {}
    for plane in (t.PlaneKind.NEAR_FIELD, t.PlaneKind.FAR_FIELD):
        s1, s2 = t.simulate_stacks(cfg, plane)
        out[plane] = (t.threshold(s1, cfg.noise), t.threshold(s2, cfg.noise))
    return cfg, out
