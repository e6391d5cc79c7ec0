"""Twin-camera detector model: optics, pixelation, EMCCD noise, thresholding.

Photon 1 of every pair lands on camera 1 and photon 2 on camera 2 (the
two emission arms are separated upstream).  Each camera maps the
transverse coordinate to sensor position with the plane-appropriate
scale -- magnification M in the crystal-image plane, f * lambda / (2 pi)
micrometres per unit momentum in the focal plane -- then pixelates on a
square grid.

Detection chain per photon / pixel, standard electron-multiplying CCD
statistics:

1. Bernoulli(quantum_efficiency) detection per photon;
2. integer electron counts accumulated per pixel;
3. Poisson(cic_rate) spurious (clock-induced) electrons per pixel;
4. multiplication register: a pixel holding n electrons outputs a
   Gamma(shape=n, scale=em_gain) gray value (em_gain = 1 bypasses the
   stochastic register, useful for noiseless tests);
5. additive Gaussian readout noise;
6. rounding and saturation to unsigned 16-bit.

Thresholding converts gray scales to binary photon maps: a pixel is 1
iff its gray value exceeds the threshold.  Two or more photons on one
pixel still give 1; this clipping is intrinsic to photon counting with
a threshold and is recorded in the stack metadata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .sampling import (
    ROLE_CAM1,
    ROLE_CAM2,
    PairEvents,
    PlaneKind,
    frame_rng,
)

_U16_MAX = np.iinfo(np.uint16).max


@dataclass(frozen=True)
class OpticalGeometry:
    """Imaging geometry shared by the two cameras.

    ``pixel_pitch`` and ``wavelength`` in um, ``focal_length_mm`` in mm.
    ``offset_cam*`` shift each camera's pixel origin (x, y) in whole
    pixels; coordinate (0, 0) lands on pixel (grid_size // 2 + offset).
    """

    grid_size: int = 512
    pixel_pitch: float = 16.0
    magnification: float = 2.47
    focal_length_mm: float = 120.0
    wavelength: float = 0.710
    offset_cam1: tuple[int, int] = (0, 0)
    offset_cam2: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.grid_size < 2:
            raise ValueError(f"grid_size must be >= 2, got {self.grid_size}")
        for name in ("pixel_pitch", "magnification", "focal_length_mm", "wavelength"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")

    def offset(self, camera: int) -> tuple[int, int]:
        if camera == 1:
            return self.offset_cam1
        if camera == 2:
            return self.offset_cam2
        raise ValueError(f"camera must be 1 or 2, got {camera}")

    def plane_scale(self, plane: PlaneKind) -> float:
        """Sensor um per physical coordinate unit (um or hbar/um)."""
        if plane is PlaneKind.NEAR_FIELD:
            return self.magnification
        return self.focal_length_mm * 1e3 * self.wavelength / (2.0 * math.pi)

    def effective_pixel(self, plane: PlaneKind, grouping: int = 1) -> float:
        """Physical size of one (grouped) pixel in the measured plane."""
        return self.pixel_pitch * grouping / self.plane_scale(plane)


@dataclass(frozen=True)
class CameraNoise:
    """EMCCD noise settings, gray values in ADC units."""

    quantum_efficiency: float = 0.9
    cic_rate: float = 1e-3
    em_gain: float = 500.0
    readout_sigma: float = 10.0
    threshold: float = 50.0

    def __post_init__(self):
        if not 0.0 < self.quantum_efficiency <= 1.0:
            raise ValueError(
                f"quantum_efficiency must be in (0, 1], got {self.quantum_efficiency!r}")
        if self.cic_rate < 0:
            raise ValueError(f"cic_rate must be >= 0, got {self.cic_rate!r}")
        if self.em_gain < 1.0:
            raise ValueError(f"em_gain must be >= 1, got {self.em_gain!r}")
        if self.readout_sigma < 0:
            raise ValueError(f"readout_sigma must be >= 0, got {self.readout_sigma!r}")
        if not self.threshold > 0:
            raise ValueError(f"threshold must be > 0, got {self.threshold!r}")


@dataclass
class FrameStack:
    """Grayscale exposures of one camera in one plane, (n, H, W) uint16."""

    plane: PlaneKind
    frames: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 3 or self.frames.shape[0] < 1:
            raise ValueError("frames must be a non-empty (n, H, W) array")
        if self.frames.dtype != np.uint16:
            raise ValueError(f"grayscale frames must be uint16, got {self.frames.dtype}")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape[1:]


@dataclass
class BinaryFrameStack:
    """Thresholded photon maps, same layout as FrameStack, values in {0, 1}."""

    plane: PlaneKind
    frames: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 3 or self.frames.shape[0] < 1:
            raise ValueError("frames must be a non-empty (n, H, W) array")
        if self.frames.dtype != np.uint8 or self.frames.max(initial=0) > 1:
            raise ValueError("binary frames must be uint8 with values in {0, 1}")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape[1:]


def project(coords, geometry: OpticalGeometry, plane: PlaneKind, camera: int = 1):
    """Map physical coordinates to pixel indices.

    ``coords`` is an (n, 2) array of (x, y) in the plane's units.
    Returns ``(ix, iy, on_sensor)``; indices are reported unclamped so
    out-of-sensor photons stay identifiable.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    scale = geometry.plane_scale(plane)
    off = geometry.offset(camera)
    center = geometry.grid_size // 2
    ix = np.floor(coords[:, 0] * scale / geometry.pixel_pitch).astype(np.int64) + center + off[0]
    iy = np.floor(coords[:, 1] * scale / geometry.pixel_pitch).astype(np.int64) + center + off[1]
    n = geometry.grid_size
    on_sensor = (ix >= 0) & (ix < n) & (iy >= 0) & (iy < n)
    return ix, iy, on_sensor


def expose_frame(
    events: PairEvents,
    geometry: OpticalGeometry,
    noise: CameraNoise,
    rng_cam1: np.random.Generator,
    rng_cam2: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, dict[str, int]]:
    """Expose both cameras to one frame's pairs; returns two uint16 frames."""
    n = geometry.grid_size
    frames = []
    stats = {"off_sensor": 0, "multi_photon_pixels": 0}
    for coords, rng, camera in (
        (events.coord1, rng_cam1, 1),
        (events.coord2, rng_cam2, 2),
    ):
        detected = rng.random(len(coords)) < noise.quantum_efficiency if len(coords) else \
            np.zeros(0, dtype=bool)
        ix, iy, on = project(coords[detected], geometry, events.plane, camera=camera)
        stats["off_sensor"] += int((~on).sum())

        counts = np.zeros((n, n), dtype=np.int64)
        np.add.at(counts, (iy[on], ix[on]), 1)

        # Spurious single electrons: a uniform spatial Poisson process is
        # sampled as a Poisson total with uniform pixel placement.
        n_cic = int(rng.poisson(noise.cic_rate * n * n))
        if n_cic:
            np.add.at(counts.reshape(-1), rng.integers(0, n * n, n_cic), 1)

        stats["multi_photon_pixels"] += int((counts > 1).sum())

        gray = np.zeros((n, n), dtype=float)
        occupied = counts > 0
        if noise.em_gain == 1.0:
            gray[occupied] = counts[occupied]
        else:
            gray[occupied] = rng.gamma(counts[occupied], noise.em_gain)
        if noise.readout_sigma > 0:
            gray += rng.normal(0.0, noise.readout_sigma, size=(n, n))

        frames.append(np.clip(np.rint(gray), 0, _U16_MAX).astype(np.uint16))
    return frames[0], frames[1], stats


def expose(
    frame_events: Sequence[PairEvents],
    geometry: OpticalGeometry,
    noise: CameraNoise,
    plane: PlaneKind,
    seed: int,
) -> tuple[FrameStack, FrameStack]:
    """Expose a whole run; one RNG stream per (frame, camera).

    ``frame_events[i]`` must be the pairs of frame i; camera noise for
    frame i comes from streams (seed, i, camera role), so regenerating
    any subset of frames reproduces them exactly.
    """
    if not frame_events:
        raise ValueError("frame_events must contain at least one frame")
    n = geometry.grid_size
    count = len(frame_events)
    stack1 = np.empty((count, n, n), dtype=np.uint16)
    stack2 = np.empty((count, n, n), dtype=np.uint16)
    totals = {"off_sensor": 0, "multi_photon_pixels": 0}
    for i, events in enumerate(frame_events):
        if events.plane is not plane:
            raise ValueError(f"frame {i} sampled in {events.plane}, expected {plane}")
        f1, f2, stats = expose_frame(
            events, geometry, noise,
            frame_rng(seed, i, ROLE_CAM1), frame_rng(seed, i, ROLE_CAM2))
        stack1[i] = f1
        stack2[i] = f2
        for key in totals:
            totals[key] += stats[key]
    meta = {
        "plane": plane.value,
        "seed": seed,
        "off_sensor_photons": totals["off_sensor"],
        "multi_photon_pixels": totals["multi_photon_pixels"],
    }
    return (
        FrameStack(plane=plane, frames=stack1, meta=dict(meta, camera=1)),
        FrameStack(plane=plane, frames=stack2, meta=dict(meta, camera=2)),
    )


def threshold(stack: FrameStack, noise: CameraNoise) -> BinaryFrameStack:
    """Binarize gray frames: pixel -> 1 iff gray value > threshold.

    Multiple photons on one pixel still yield 1; the clipping is noted
    in the metadata so downstream reports can flag it.
    """
    binary = (stack.frames > noise.threshold).astype(np.uint8)
    meta = dict(stack.meta)
    meta.update({
        "threshold": noise.threshold,
        "clipping": "multi-photon pixels clip to 1 after thresholding",
    })
    return BinaryFrameStack(plane=stack.plane, frames=binary, meta=meta)


def illuminated_roi(*stacks: BinaryFrameStack, level: float = 0.5) -> np.ndarray:
    """Boolean mask of pixels whose mean count reaches ``level`` x peak.

    The mean map is summed over the given stacks (typically the two
    cameras) so the region is common to both.
    """
    if not stacks:
        raise ValueError("need at least one stack")
    mean_map = sum(s.frames.mean(axis=0, dtype=np.float64) for s in stacks)
    peak = mean_map.max()
    if peak <= 0:
        raise ValueError("stacks contain no counts; cannot define an illuminated region")
    return mean_map >= level * peak


def mean_fluence(stack: BinaryFrameStack, roi: np.ndarray | None = None) -> float:
    """Mean detected photons per pixel per frame, over ``roi`` if given."""
    if roi is None:
        return float(stack.frames.mean(dtype=np.float64))
    if not roi.any():
        raise ValueError("empty region of interest")
    return float(stack.frames[:, roi].mean(dtype=np.float64))
