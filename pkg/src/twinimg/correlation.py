"""Cross-correlation analysis of twin photon-counting image stacks.

The quantum correlation between the two cameras shows up as a narrow
peak in the ensemble (frame- and pixel-wise) cross-covariance of the
binary photon maps as a function of pixel shift.  This module computes
that correlation with FFTs, removes the accidental-coincidence
background, fits the peak, and converts the fitted widths into physical
conditional variances and EPR figures of merit.

Conventions fixed here (and recorded in output metadata):

* Pearson normalization: the covariance sum at each shift is divided by
  the product of the total per-camera standard deviations, so the
  autocorrelation of a stack with itself is exactly 1 at zero shift.
* Per-pixel ensemble means are subtracted before correlating, which
  removes the deterministic illumination product from the map.
* Correlation is circular (computed over periodic shifts with FFTs);
  with a compact, roughly centered illumination the wrap-around bias is
  negligible and is checked against a direct sum in the tests.
* Accidental background: the same correlation computed between frame i
  of camera 1 and frame i+1 (cyclically) of camera 2 -- frame pairs
  that share no pump pulses -- subtracted from the coincident map.
* Far-field twin registration: opposite momenta land on point-reflected
  pixels, so camera 2 frames are spatially inverted through the sensor
  center (``flip``) before correlating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .biphoton import EprVerdict, epr_verdict
from .camera import BinaryFrameStack, FrameStack, OpticalGeometry
from .sampling import PlaneKind

_CHUNK = 64  # frames per FFT block; fixed so reductions have one order

#: Pixel-shift half-width of the stored correlation window.
DEFAULT_HALF_WINDOW = 64

#: Peak significance threshold, in standard deviations of the off-peak
#: map, above which a correlation peak counts as detected.
DETECT_SIGMA = 4.5


class NoSignificantPeakError(RuntimeError):
    """Raised when a correlation map has no peak above the noise floor."""


class PeakNarrowerThanPixelError(ValueError):
    """Raised when a fitted peak is narrower than the pixel broadening."""


@dataclass
class CountStack:
    """Integer photon-count frames (e.g. block-summed binary maps)."""

    plane: PlaneKind
    frames: np.ndarray
    grouping: int = 1
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 3 or self.frames.shape[0] < 1:
            raise ValueError("frames must be a non-empty (n, H, W) array")
        if not np.issubdtype(self.frames.dtype, np.integer):
            raise ValueError("count frames must be integer-valued")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape[1:]


@dataclass
class CorrelationMap:
    """Normalized cross-correlation over pixel shifts.

    ``values[iy, ix]`` is the correlation at shift
    (ix - center[1], iy - center[0]) in (grouped) pixels.  Windowed maps
    have odd dimensions with zero shift in the middle; full-grid maps
    keep the zero-shift index in ``center``.
    """

    values: np.ndarray
    center: tuple[int, int]
    frame_count: int
    grouping: int
    plane: PlaneKind
    flipped: bool
    background_corrected: bool
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("correlation values must be a 2D array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("correlation values must be finite")
        if self.frame_count < 1 or self.grouping < 1:
            raise ValueError("frame_count and grouping must be >= 1")

    @property
    def shifts_x(self) -> np.ndarray:
        return np.arange(self.values.shape[1]) - self.center[1]

    @property
    def shifts_y(self) -> np.ndarray:
        return np.arange(self.values.shape[0]) - self.center[0]


def _flip_frames(frames: np.ndarray) -> np.ndarray:
    """Point reflection through the sensor center (momentum negation)."""
    return frames[:, ::-1, ::-1]


def _as_stack_arrays(stack) -> tuple[np.ndarray, PlaneKind, int]:
    if isinstance(stack, (BinaryFrameStack, FrameStack)):
        return stack.frames, stack.plane, 1
    if isinstance(stack, CountStack):
        return stack.frames, stack.plane, stack.grouping
    raise TypeError(f"expected a frame stack, got {type(stack).__name__}")


def _check_pair(stack1, stack2) -> tuple[np.ndarray, np.ndarray, PlaneKind, int]:
    f1, plane1, g1 = _as_stack_arrays(stack1)
    f2, plane2, g2 = _as_stack_arrays(stack2)
    if f1.shape != f2.shape:
        raise ValueError(f"stack shapes differ: {f1.shape} vs {f2.shape}")
    if plane1 is not plane2:
        raise ValueError(f"stack planes differ: {plane1} vs {plane2}")
    if g1 != g2:
        raise ValueError(f"stack groupings differ: {g1} vs {g2}")
    return f1, f2, plane1, g1


def _ensemble_cross(
    frames1: np.ndarray,
    frames2: np.ndarray,
    pair_shifts: Sequence[int] = (0,),
    window: tuple[tuple[int, int], int] | None = None,
):
    """Summed (and optionally per-frame) circular cross-covariance.

    For each pairing shift ``s``, computes
    ``cross_s[d] = sum_f sum_r (f1[f](r) - m1(r)) (f2[(f+s)%n](r+d) - m2(r+d))``
    over circular shifts ``d`` via FFT, with per-pixel ensemble means
    ``m1, m2``.  ``window=((dy, dx), half)`` additionally collects the
    per-frame contribution on a (2*half+1)^2 patch of shifts around
    (dy, dx) plus per-frame sum-of-squares terms, which is what the
    frame bootstrap needs.  Accumulation order is fixed (chunked in
    frame order) so results are reproducible bit for bit.
    """
    n, h, w = frames1.shape
    m1 = frames1.mean(axis=0, dtype=np.float64)
    m2 = frames2.mean(axis=0, dtype=np.float64)

    spec_sums = {s: np.zeros((h, w // 2 + 1), dtype=np.complex128) for s in pair_shifts}
    ss1 = 0.0
    ss2 = 0.0
    out: dict[str, Any] = {}
    if window is not None:
        (wy, wx), half = window
        rows = (wy + np.arange(-half, half + 1)) % h
        cols = (wx + np.arange(-half, half + 1)) % w
        out["per_frame"] = {
            s: np.empty((n, 2 * half + 1, 2 * half + 1)) for s in pair_shifts}
        out["per_frame_ss"] = (np.empty(n), np.empty(n))

    for i0 in range(0, n, _CHUNK):
        i1 = min(i0 + _CHUNK, n)
        a = frames1[i0:i1].astype(np.float64) - m1
        fa = np.fft.rfft2(a)
        ss1 += float((a * a).sum())
        if window is not None:
            out["per_frame_ss"][0][i0:i1] = (a * a).sum(axis=(1, 2))
            b_own = frames2[i0:i1].astype(np.float64) - m2
            out["per_frame_ss"][1][i0:i1] = (b_own * b_own).sum(axis=(1, 2))
        for s in pair_shifts:
            idx = (np.arange(i0, i1) + s) % n
            b = frames2[idx].astype(np.float64) - m2
            fb = np.fft.rfft2(b)
            if s == 0:
                ss2 += float((b * b).sum())
            prod = np.conj(fa) * fb
            spec_sums[s] += prod.sum(axis=0)
            if window is not None:
                patch = np.fft.irfft2(prod, s=(h, w))
                out["per_frame"][s][i0:i1] = patch[:, rows][:, :, cols]
        if 0 not in pair_shifts:
            b = frames2[i0:i1].astype(np.float64) - m2
            ss2 += float((b * b).sum())

    out["cross"] = {s: np.fft.irfft2(spec_sums[s], s=(h, w)) for s in pair_shifts}
    out["den"] = math.sqrt(ss1 * ss2)
    out["ss"] = (ss1, ss2)
    return out


def _shifted_window(cross: np.ndarray, half: int | None):
    """Center the zero shift; crop to an odd window when ``half`` given."""
    shifted = np.fft.fftshift(cross)
    h, w = shifted.shape
    cy, cx = h // 2, w // 2
    if half is None:
        return shifted, (cy, cx)
    limit = min(cy, cx) - 1
    if not 1 <= half <= limit:
        raise ValueError(f"half_window must be in [1, {limit}] for shape {cross.shape}")
    win = shifted[cy - half:cy + half + 1, cx - half:cx + half + 1]
    return win.copy(), (half, half)


def cross_correlate(
    stack1,
    stack2,
    flip: bool = False,
    half_window: int | None = DEFAULT_HALF_WINDOW,
) -> CorrelationMap:
    """Ensemble Pearson-normalized cross-correlation over pixel shifts.

    ``flip`` spatially inverts camera 2 frames through the center before
    correlating; it is required for far-field stacks, where twin photons
    land on point-reflected pixels.  ``half_window=None`` keeps the full
    circular shift grid (needed e.g. for block-grouped detection maps);
    otherwise the map is cropped to shifts within ``+-half_window``.
    """
    f1, f2, plane, grouping = _check_pair(stack1, stack2)
    if flip:
        f2 = _flip_frames(f2)
    if half_window is not None:
        limit = min(f1.shape[1], f1.shape[2]) // 2 - 1
        half_window = max(1, min(half_window, limit))
    res = _ensemble_cross(f1, f2, pair_shifts=(0,))
    if res["den"] == 0:
        raise ValueError("stacks carry no variation about their per-pixel means")
    values, center = _shifted_window(res["cross"][0] / res["den"], half_window)
    return CorrelationMap(
        values=values,
        center=center,
        frame_count=f1.shape[0],
        grouping=grouping,
        plane=plane,
        flipped=flip,
        background_corrected=False,
        meta={"normalization": "pearson-ensemble", "circular": True},
    )


def background_correct(corr_map: CorrelationMap, stack1, stack2) -> CorrelationMap:
    """Subtract the accidental-coincidence background from a map.

    The background is the same normalized correlation computed between
    frame i of camera 1 and frame i+1 (cyclic) of camera 2: those frame
    pairs share no pump pulses, so only accidental structure survives.
    """
    if corr_map.background_corrected:
        raise ValueError("map is already background-corrected")
    f1, f2, plane, grouping = _check_pair(stack1, stack2)
    if plane is not corr_map.plane or grouping != corr_map.grouping:
        raise ValueError("stacks do not match the correlation map provenance")
    if f1.shape[0] != corr_map.frame_count:
        raise ValueError("frame count does not match the correlation map")
    if f1.shape[0] < 2:
        raise ValueError("background correction needs at least 2 frames")
    if corr_map.flipped:
        f2 = _flip_frames(f2)
    res = _ensemble_cross(f1, f2, pair_shifts=(1,))
    half = None
    if corr_map.values.shape[0] % 2 == 1 and corr_map.center[0] == corr_map.values.shape[0] // 2:
        half = corr_map.center[0]
    bg_values, center = _shifted_window(res["cross"][1] / res["den"], half)
    if bg_values.shape != corr_map.values.shape:
        raise ValueError("window of map and background disagree")
    meta = dict(corr_map.meta)
    meta["background"] = "cyclic frame pairing (i, i+1)"
    return replace(
        corr_map,
        values=corr_map.values - bg_values,
        center=center,
        background_corrected=True,
        meta=meta,
    )


@dataclass(frozen=True)
class PeakFit:
    """2D Gaussian-plus-offset fit of a correlation peak.

    Centers and widths are in map pixels (i.e. grouped camera pixels);
    ``*_unc`` are one-sigma uncertainties from the fit covariance scaled
    by the residual variance.
    """

    amplitude: float
    center_x: float
    center_y: float
    width_x: float
    width_y: float
    offset: float
    amplitude_unc: float
    center_x_unc: float
    center_y_unc: float
    width_x_unc: float
    width_y_unc: float
    offset_unc: float
    n_points: int
    residual_rms: float


def _gauss2d(xy, amplitude, x0, y0, wx, wy, offset):
    x, y = xy
    return amplitude * np.exp(
        -((x - x0) ** 2) / (2.0 * wx ** 2) - ((y - y0) ** 2) / (2.0 * wy ** 2)) + offset


def peak_significance(values: np.ndarray, exclude_half: int = 7) -> tuple[float, tuple[int, int]]:
    """(peak - off-peak mean) / off-peak std, and the peak index."""
    iy, ix = np.unravel_index(int(np.argmax(values)), values.shape)
    mask = np.ones(values.shape, dtype=bool)
    y0, y1 = max(0, iy - exclude_half), min(values.shape[0], iy + exclude_half + 1)
    x0, x1 = max(0, ix - exclude_half), min(values.shape[1], ix + exclude_half + 1)
    mask[y0:y1, x0:x1] = False
    rest = values[mask]
    sd = rest.std()
    if sd == 0:
        return math.inf if values[iy, ix] > rest.mean() else 0.0, (iy, ix)
    return float((values[iy, ix] - rest.mean()) / sd), (iy, ix)


def fit_peak(
    corr_map: CorrelationMap,
    fit_window: int = 15,
    detect_sigma: float = DETECT_SIGMA,
) -> PeakFit:
    """Nonlinear least-squares Gaussian fit of the correlation peak.

    Fits ``A exp(-dx^2/(2 wx^2) - dy^2/(2 wy^2)) + B`` on a
    ``fit_window`` x ``fit_window`` patch around the map maximum,
    initialized from second moments.  Raises
    :class:`NoSignificantPeakError` when the maximum does not stand
    ``detect_sigma`` standard deviations above the off-peak map.
    """
    if not corr_map.background_corrected:
        raise ValueError("fit_peak requires a background-corrected map")
    values = corr_map.values
    h, w = values.shape
    if fit_window < 5:
        raise ValueError("fit_window must be >= 5")
    fit_window = min(fit_window, h, w)

    snr, (iy, ix) = peak_significance(values, exclude_half=max(2, fit_window // 2))
    if snr < detect_sigma:
        raise NoSignificantPeakError(
            f"no significant correlation peak: max is {snr:.2f} sigma above the "
            f"off-peak map (threshold {detect_sigma})")

    half = fit_window // 2
    y0 = int(np.clip(iy - half, 0, h - fit_window))
    x0 = int(np.clip(ix - half, 0, w - fit_window))
    patch = values[y0:y0 + fit_window, x0:x0 + fit_window]
    dy = (np.arange(y0, y0 + fit_window) - corr_map.center[0]).astype(float)
    dx = (np.arange(x0, x0 + fit_window) - corr_map.center[1]).astype(float)
    gx, gy = np.meshgrid(dx, dy)

    base = float(np.median(patch))
    bumped = np.clip(patch - base, 0.0, None)
    total = bumped.sum()
    if total <= 0:
        raise NoSignificantPeakError("peak region carries no excess correlation")
    cx = float((gx * bumped).sum() / total)
    cy = float((gy * bumped).sum() / total)
    wx0 = math.sqrt(max(float((((gx - cx) ** 2) * bumped).sum() / total), 0.1))
    wy0 = math.sqrt(max(float((((gy - cy) ** 2) * bumped).sum() / total), 0.1))
    p0 = [float(patch.max() - base), cx, cy, wx0, wy0, base]

    span = float(fit_window)
    lower = [0.0, dx[0] - 1, dy[0] - 1, 0.05, 0.05, -np.inf]
    upper = [np.inf, dx[-1] + 1, dy[-1] + 1, 4 * span, 4 * span, np.inf]
    p0 = [min(max(p, lo), up if up != np.inf else p) for p, lo, up in zip(p0, lower, upper)]
    popt, pcov = curve_fit(
        _gauss2d, (gx.ravel(), gy.ravel()), patch.ravel(),
        p0=p0, bounds=(lower, upper), maxfev=20000)
    perr = np.sqrt(np.clip(np.diag(pcov), 0.0, None))
    residuals = patch.ravel() - _gauss2d((gx.ravel(), gy.ravel()), *popt)
    return PeakFit(
        amplitude=float(popt[0]),
        center_x=float(popt[1]), center_y=float(popt[2]),
        width_x=float(abs(popt[3])), width_y=float(abs(popt[4])),
        offset=float(popt[5]),
        amplitude_unc=float(perr[0]),
        center_x_unc=float(perr[1]), center_y_unc=float(perr[2]),
        width_x_unc=float(perr[3]), width_y_unc=float(perr[4]),
        offset_unc=float(perr[5]),
        n_points=patch.size,
        residual_rms=float(np.sqrt((residuals ** 2).mean())),
    )


@dataclass(frozen=True)
class AxisVariances:
    """Per-axis conditional variances in physical units, with errors."""

    var_x: float
    var_y: float
    unc_x: float
    unc_y: float
    effective_pixel: float
    plane: PlaneKind


def variances_from_fit(
    fit: PeakFit,
    geometry: OpticalGeometry,
    plane: PlaneKind,
    grouping: int = 1,
) -> AxisVariances:
    """Convert fitted pixel widths to physical conditional variances.

    The peak observed on the pixel grid is the true coordinate density
    convolved with the correlation of two pixel boxes, so the pixel
    variance contribution s_eff^2 / 6 (s_eff = effective pixel size) is
    subtracted after scaling.  Near field: um^2 in the crystal plane;
    far field: hbar^2 um^-2.
    """
    s_eff = geometry.effective_pixel(plane, grouping)
    out = {}
    for axis, width, unc in (("x", fit.width_x, fit.width_x_unc),
                             ("y", fit.width_y, fit.width_y_unc)):
        var = (width * s_eff) ** 2 - s_eff ** 2 / 6.0
        if var <= 0:
            raise PeakNarrowerThanPixelError(
                f"fitted {axis} peak (width {width:.3f} px) is narrower than the "
                "pixel-sampling broadening; variance would be non-positive")
        out[axis] = (var, 2.0 * width * s_eff ** 2 * unc)
    return AxisVariances(
        var_x=out["x"][0], var_y=out["y"][0],
        unc_x=out["x"][1], unc_y=out["y"][1],
        effective_pixel=s_eff, plane=plane,
    )


@dataclass(frozen=True)
class EprProducts:
    """Conditional-variance products, paradox degrees and dimensionality."""

    product_x: float
    product_y: float
    product_unc_x: float
    product_unc_y: float
    v_x: float
    v_y: float
    v_unc_x: float
    v_unc_y: float
    schmidt_k: float
    schmidt_k_unc: float
    verdict_x: EprVerdict
    verdict_y: EprVerdict


def epr_products(near: AxisVariances, far: AxisVariances) -> EprProducts:
    """Combine near- and far-field variances into EPR products.

    Uncertainties propagate to first order; the violation significance
    per axis is the distance of the product below the Heisenberg bound
    in units of the product uncertainty.
    """
    if near.plane is not PlaneKind.NEAR_FIELD or far.plane is not PlaneKind.FAR_FIELD:
        raise ValueError("epr_products expects (near-field, far-field) variances")
    vals = {}
    for axis, (vn, un), (vf, uf) in (
        ("x", (near.var_x, near.unc_x), (far.var_x, far.unc_x)),
        ("y", (near.var_y, near.unc_y), (far.var_y, far.unc_y)),
    ):
        if vn <= 0 or vf <= 0:
            raise ValueError("variances must be positive")
        product = vn * vf
        rel = math.hypot(un / vn, uf / vf)
        vals[axis] = (product, product * rel)
    v_x = 0.25 / vals["x"][0]
    v_y = 0.25 / vals["y"][0]
    rel_x = vals["x"][1] / vals["x"][0]
    rel_y = vals["y"][1] / vals["y"][0]
    schmidt = math.sqrt(v_x * v_y)
    return EprProducts(
        product_x=vals["x"][0], product_y=vals["y"][0],
        product_unc_x=vals["x"][1], product_unc_y=vals["y"][1],
        v_x=v_x, v_y=v_y,
        v_unc_x=v_x * rel_x, v_unc_y=v_y * rel_y,
        schmidt_k=schmidt,
        schmidt_k_unc=schmidt * 0.5 * math.hypot(rel_x, rel_y),
        verdict_x=epr_verdict(vals["x"][0], vals["x"][1]),
        verdict_y=epr_verdict(vals["y"][0], vals["y"][1]),
    )


def group_pixels(obj, grouping: int):
    """Sum non-overlapping ``grouping`` x ``grouping`` pixel blocks.

    Works on frame stacks (counts add; binary stacks become count
    stacks) and on correlation maps (correlation values add; the
    zero-shift index is tracked through the block arithmetic).
    """
    if grouping < 1:
        raise ValueError(f"grouping must be >= 1, got {grouping}")
    if isinstance(obj, CorrelationMap):
        if grouping == 1:
            return replace(obj, values=obj.values.copy(), meta=dict(obj.meta))
        h, w = obj.values.shape
        if h % grouping or w % grouping:
            raise ValueError(f"grouping {grouping} must divide map shape {(h, w)}")
        vals = obj.values.reshape(h // grouping, grouping, w // grouping, grouping).sum(axis=(1, 3))
        return replace(
            obj,
            values=vals,
            center=(obj.center[0] // grouping, obj.center[1] // grouping),
            grouping=obj.grouping * grouping,
            meta=dict(obj.meta, grouped_from=obj.values.shape),
        )
    frames, plane, g0 = _as_stack_arrays(obj)
    if grouping == 1:
        if isinstance(obj, CountStack):
            return CountStack(plane=plane, frames=frames.copy(), grouping=g0,
                              meta=dict(obj.meta))
        return type(obj)(plane=plane, frames=frames.copy(), meta=dict(obj.meta))
    n, h, w = frames.shape
    if h % grouping or w % grouping:
        raise ValueError(f"grouping {grouping} must divide grid shape {(h, w)}")
    summed = frames.reshape(n, h // grouping, grouping, w // grouping, grouping) \
        .sum(axis=(2, 4), dtype=np.int64).astype(np.int32)
    return CountStack(plane=plane, frames=summed, grouping=g0 * grouping,
                      meta=dict(getattr(obj, "meta", {})))


def grouped_peak_snr(values: np.ndarray, exclude: int = 1) -> float:
    """Peak magnitude over off-peak noise of a (grouped) correlation map."""
    iy, ix = np.unravel_index(int(np.argmax(values)), values.shape)
    mask = np.ones(values.shape, dtype=bool)
    mask[max(0, iy - exclude):iy + exclude + 1, max(0, ix - exclude):ix + exclude + 1] = False
    rest = values[mask]
    sd = rest.std()
    if sd == 0:
        return math.inf
    return float((values[iy, ix] - rest.mean()) / sd)


@dataclass
class SnrResult:
    """Detection signal-to-noise ratio as a function of frame count."""

    points: list[tuple[int, float]]
    min_frames_detect: int | None
    grouping: int
    detect_sigma: float


def default_snr_counts(n_frames: int, per_decade: int = 5) -> list[int]:
    """Roughly log-spaced frame counts from 2 up to ``n_frames``."""
    if n_frames < 2:
        raise ValueError("need at least 2 frames")
    counts = {2, n_frames}
    steps = int(math.log10(n_frames / 2.0) * per_decade) + 1
    for k in range(steps + 1):
        counts.add(min(n_frames, round(2.0 * 10 ** (k / per_decade))))
    return sorted(counts)


def snr_curve(
    stack1,
    stack2,
    frame_counts: Sequence[int] | None = None,
    grouping: int = 8,
    flip: bool = False,
    detect_sigma: float = DETECT_SIGMA,
    exclude: int = 1,
) -> SnrResult:
    """Detection SNR of the grouped correlation peak versus frame count.

    For each requested prefix of the stacks the background-corrected
    correlation image is computed over the full shift grid, summed over
    ``grouping`` x ``grouping`` shift blocks, and scored as peak
    magnitude over the standard deviation of the image outside the peak
    area.  ``min_frames_detect`` is the smallest evaluated count whose
    SNR reaches ``detect_sigma``.

    Implementation streams cumulative frame spectra, so the whole curve
    costs one pass over the stacks.
    """
    f1, f2, plane, g0 = _check_pair(stack1, stack2)
    if flip:
        f2 = _flip_frames(f2)
    n, h, w = f1.shape
    if h % grouping or w % grouping:
        raise ValueError(f"grouping {grouping} must divide grid shape {(h, w)}")
    if frame_counts is None:
        frame_counts = default_snr_counts(n)
    counts = sorted(set(int(c) for c in frame_counts))
    if counts[0] < 2:
        raise ValueError("frame counts must be >= 2 (background pairing needs 2)")
    if counts[-1] > n:
        raise ValueError(f"requested {counts[-1]} frames, stack has {n}")

    # Cumulative sums over frames: spectra, spectrum products for the
    # coincident and cyclically shifted pairings, and square sums.
    shape_spec = (h, w // 2 + 1)
    sum_f1 = np.zeros(shape_spec, dtype=np.complex128)
    sum_f2 = np.zeros(shape_spec, dtype=np.complex128)
    prod_main = np.zeros(shape_spec, dtype=np.complex128)
    prod_next = np.zeros(shape_spec, dtype=np.complex128)  # pairs (i, i+1), linear part
    sumsq1 = 0.0
    sumsq2 = 0.0
    pix1 = np.zeros((h, w))
    pix2 = np.zeros((h, w))
    spec2_first = None
    prev_spec1 = None

    points: list[tuple[int, float]] = []
    want = iter(counts)
    next_count = next(want)
    done = False
    for i in range(counts[-1]):
        a = f1[i].astype(np.float64)
        b = f2[i].astype(np.float64)
        fa = np.fft.rfft2(a)
        fb = np.fft.rfft2(b)
        if i == 0:
            spec2_first = fb
        if prev_spec1 is not None:
            prod_next += np.conj(prev_spec1) * fb
        prev_spec1 = fa
        sum_f1 += fa
        sum_f2 += fb
        prod_main += np.conj(fa) * fb
        sumsq1 += float((a * a).sum())
        sumsq2 += float((b * b).sum())
        pix1 += a
        pix2 += b
        k = i + 1
        if k == next_count:
            mean_term = np.conj(sum_f1) * sum_f2 / k
            num_main = np.fft.irfft2(prod_main - mean_term, s=(h, w))
            wrap = np.conj(prev_spec1) * spec2_first
            num_bg = np.fft.irfft2(prod_next + wrap - mean_term, s=(h, w))
            den = math.sqrt(
                (sumsq1 - (pix1 ** 2).sum() / k) * (sumsq2 - (pix2 ** 2).sum() / k))
            corrected = np.fft.fftshift((num_main - num_bg) / den)
            grouped = corrected.reshape(
                h // grouping, grouping, w // grouping, grouping).sum(axis=(1, 3))
            points.append((k, grouped_peak_snr(grouped, exclude=exclude)))
            try:
                next_count = next(want)
            except StopIteration:
                done = True
                break
    assert done or points[-1][0] == counts[-1]

    min_frames = next((k for k, s in points if s >= detect_sigma), None)
    return SnrResult(points=points, min_frames_detect=min_frames,
                     grouping=grouping, detect_sigma=detect_sigma)


@dataclass(frozen=True)
class SubShotNoise:
    """Twin-image photon-number difference noise in shot-noise units."""

    r: float
    unc: float
    n_frames: int
    roi_pixels: int
    mean_total: float


def sub_shot_noise(
    stack1,
    stack2,
    flip: bool = False,
    roi: np.ndarray | None = None,
) -> SubShotNoise:
    """Variance of the twin-pixel count difference in shot-noise units.

    r = Var(N1 - N2) / (Var(N1) + Var(N2)), pooled over frames and the
    region of interest, with per-pixel means removed.  For Poisson
    counts the denominator equals the mean total <N1 + N2> (the shot
    noise); using the measured per-camera variances keeps the unit
    baseline exact for thresholded (clipped) binary maps as well, so
    uncorrelated stacks score 1 regardless of fluence.  ``flip``
    registers far-field twins (N2 evaluated at the point-reflected
    pixel).  The uncertainty is the standard error of the frame-wise
    estimates.
    """
    f1, f2, plane, _ = _check_pair(stack1, stack2)
    if flip:
        f2 = _flip_frames(f2)
    n = f1.shape[0]
    if n < 2:
        raise ValueError("need at least 2 frames")
    m1 = f1.mean(axis=0, dtype=np.float64)
    m2 = f2.mean(axis=0, dtype=np.float64)
    if roi is None:
        mean_map = m1 + m2
        roi = mean_map >= 0.5 * mean_map.max()
    roi = np.asarray(roi, dtype=bool)
    if roi.shape != f1.shape[1:]:
        raise ValueError(f"roi shape {roi.shape} does not match frames {f1.shape[1:]}")
    if not roi.any():
        raise ValueError("empty region of interest")

    r1 = m1[roi]
    r2 = m2[roi]
    diff_sq = np.empty(n)
    var_sum = np.empty(n)
    for i0 in range(0, n, _CHUNK):
        i1 = min(i0 + _CHUNK, n)
        a = f1[i0:i1][:, roi].astype(np.float64) - r1
        b = f2[i0:i1][:, roi].astype(np.float64) - r2
        d = a - b
        diff_sq[i0:i1] = (d * d).sum(axis=1)
        var_sum[i0:i1] = (a * a).sum(axis=1) + (b * b).sum(axis=1)

    r = diff_sq.sum() / var_sum.sum()
    # Delta-method standard error of the ratio of frame means.
    w_res = diff_sq - r * var_sum
    unc = math.sqrt(w_res.var(ddof=1) / n) / var_sum.mean()
    return SubShotNoise(
        r=float(r), unc=float(unc), n_frames=n,
        roi_pixels=int(roi.sum()), mean_total=float((r1 + r2).mean()),
    )
