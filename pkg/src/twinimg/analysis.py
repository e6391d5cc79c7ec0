"""Full EPR analysis of a matched pair of twin-image runs.

Turns four binary stacks (two cameras in the crystal-image plane, two
in the focal plane) into a structured report: per-plane conditional
variances from the correlation-peak fits, the per-axis variance
products against the Heisenberg bound, the degree of paradox and
Schmidt dimensionality, sub-shot-noise ratios and detection-SNR curves.

Uncertainties are reported two ways per quantity: first-order
propagation of the fit covariance, and the spread of a frame bootstrap
(resampling frames with replacement while keeping the per-pixel
ensemble means of the full sample).  The violation significance quotes
the more conservative of the two.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .biphoton import HEISENBERG_BOUND
from .camera import BinaryFrameStack, OpticalGeometry, illuminated_roi, mean_fluence
from .correlation import (
    DETECT_SIGMA,
    AxisVariances,
    CorrelationMap,
    PeakFit,
    SnrResult,
    _ensemble_cross,
    _flip_frames,
    _gauss2d,
    _shifted_window,
    epr_products,
    fit_peak,
    snr_curve,
    sub_shot_noise,
    variances_from_fit,
)
from .sampling import PlaneKind

from scipy.optimize import curve_fit


@dataclass(frozen=True)
class AnalyzeOptions:
    """Tunables of the analysis chain (defaults match the shipped CLI)."""

    grouping: int = 8
    half_window: int = 64
    fit_window: int = 15
    snr_frame_counts: tuple[int, ...] | None = None
    bootstrap_resamples: int = 100
    bootstrap_seed: int = 617350
    detect_sigma: float = DETECT_SIGMA


@dataclass
class PlaneAnalysis:
    """Everything extracted from one camera pair."""

    plane: PlaneKind
    corr_map: CorrelationMap
    fit: PeakFit
    variances: AxisVariances
    boot_unc_x: float
    boot_unc_y: float
    boot_failures: int
    sub_shot: Any
    snr: SnrResult
    fluence_cam1: float
    fluence_cam2: float
    roi_pixels: int


def _bootstrap_variances(
    patch_main: np.ndarray,
    patch_bg: np.ndarray,
    ss1: np.ndarray,
    ss2: np.ndarray,
    dx: np.ndarray,
    dy: np.ndarray,
    p0: list[float],
    s_eff: float,
    resamples: int,
    seed: int,
) -> tuple[float, float, int]:
    """Std of the recovered physical variances under frame resampling."""
    n = patch_main.shape[0]
    rng = np.random.default_rng(seed)
    gx, gy = np.meshgrid(dx, dy)
    coords = (gx.ravel(), gy.ravel())
    var_x: list[float] = []
    var_y: list[float] = []
    failures = 0
    for _ in range(resamples):
        idx = rng.integers(0, n, size=n)
        den = math.sqrt(ss1[idx].sum() * ss2[idx].sum())
        values = (patch_main[idx].sum(axis=0) - patch_bg[idx].sum(axis=0)) / den
        try:
            popt, _ = curve_fit(_gauss2d, coords, values.ravel(), p0=p0, maxfev=5000)
            vx = (popt[3] * s_eff) ** 2 - s_eff ** 2 / 6.0
            vy = (popt[4] * s_eff) ** 2 - s_eff ** 2 / 6.0
            if vx <= 0 or vy <= 0 or not (np.isfinite(vx) and np.isfinite(vy)):
                raise ValueError("non-positive resampled variance")
        except (RuntimeError, ValueError):
            failures += 1
            continue
        var_x.append(vx)
        var_y.append(vy)
    if len(var_x) < max(10, resamples // 2):
        return math.nan, math.nan, failures
    return float(np.std(var_x, ddof=1)), float(np.std(var_y, ddof=1)), failures


def analyze_plane(
    stack1: BinaryFrameStack,
    stack2: BinaryFrameStack,
    geometry: OpticalGeometry,
    options: AnalyzeOptions = AnalyzeOptions(),
) -> PlaneAnalysis:
    """Correlate, fit and score one camera pair.

    Far-field stacks are flipped for twin registration automatically.
    """
    if stack1.plane is not stack2.plane:
        raise ValueError("camera stacks measure different planes")
    plane = stack1.plane
    flip = plane is PlaneKind.FAR_FIELD
    f1 = stack1.frames
    f2 = _flip_frames(stack2.frames) if flip else stack2.frames
    n, h, w = f1.shape

    half_window = min(options.half_window, h // 2 - 1, w // 2 - 1)
    patch_half = options.fit_window // 2 + 6
    res = _ensemble_cross(f1, f2, pair_shifts=(0, 1), window=((0, 0), patch_half))
    den = res["den"]
    main, center = _shifted_window(res["cross"][0] / den, half_window)
    bg, _ = _shifted_window(res["cross"][1] / den, half_window)
    corr_map = CorrelationMap(
        values=main - bg,
        center=center,
        frame_count=n,
        grouping=1,
        plane=plane,
        flipped=flip,
        background_corrected=True,
        meta={
            "normalization": "pearson-ensemble",
            "circular": True,
            "background": "cyclic frame pairing (i, i+1)",
        },
    )

    fit = fit_peak(corr_map, fit_window=options.fit_window,
                   detect_sigma=options.detect_sigma)
    variances = variances_from_fit(fit, geometry, plane, grouping=1)

    # Frame bootstrap on the per-frame patch contributions.  The patch
    # from the first pass is centered on zero shift; if the peak sits
    # outside it (offset cameras), collect a recentered patch.
    peak_shift = (int(round(fit.center_y)), int(round(fit.center_x)))
    margin = patch_half - options.fit_window // 2
    if max(abs(peak_shift[0]), abs(peak_shift[1])) > margin:
        res = _ensemble_cross(f1, f2, pair_shifts=(0, 1),
                              window=(peak_shift, patch_half))
        patch_center = peak_shift
    else:
        patch_center = (0, 0)
    dx = patch_center[1] + np.arange(-patch_half, patch_half + 1).astype(float)
    dy = patch_center[0] + np.arange(-patch_half, patch_half + 1).astype(float)
    p0 = [fit.amplitude, fit.center_x, fit.center_y, fit.width_x, fit.width_y, fit.offset]
    boot_x, boot_y, failures = _bootstrap_variances(
        res["per_frame"][0], res["per_frame"][1],
        res["per_frame_ss"][0], res["per_frame_ss"][1],
        dx, dy, p0, variances.effective_pixel,
        options.bootstrap_resamples, options.bootstrap_seed)

    sub = sub_shot_noise(stack1, stack2, flip=flip)
    counts = list(options.snr_frame_counts) if options.snr_frame_counts else None
    snr = snr_curve(stack1, stack2, frame_counts=counts, grouping=options.grouping,
                    flip=flip, detect_sigma=options.detect_sigma)

    roi = illuminated_roi(stack1, stack2)
    return PlaneAnalysis(
        plane=plane,
        corr_map=corr_map,
        fit=fit,
        variances=variances,
        boot_unc_x=boot_x,
        boot_unc_y=boot_y,
        boot_failures=failures,
        sub_shot=sub,
        snr=snr,
        fluence_cam1=mean_fluence(stack1, roi),
        fluence_cam2=mean_fluence(stack2, roi),
        roi_pixels=int(roi.sum()),
    )


@dataclass
class AxisProduct:
    product: float
    unc: float
    unc_bootstrap: float
    v: float
    v_unc: float
    n_sigma: float
    violated: bool


@dataclass
class PlaneSummary:
    var_x: float
    var_y: float
    unc_x: float
    unc_y: float
    unc_bootstrap_x: float
    unc_bootstrap_y: float
    unit: str
    effective_pixel: float
    fit: dict
    r: float
    r_unc: float
    fluence_cam1: float
    fluence_cam2: float
    snr_points: list
    min_frames_detect: int | None


@dataclass
class EprReport:
    """Machine-readable result of the full analysis chain."""

    near: PlaneSummary
    far: PlaneSummary
    x: AxisProduct
    y: AxisProduct
    schmidt_k: float
    schmidt_k_unc: float
    meta: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["schema"] = "twinimg-report/1"
        doc["bound"] = HEISENBERG_BOUND
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "EprReport":
        def denull(d, keys):
            # JSON writes non-finite uncertainties as null
            return {k: (math.nan if k in keys and v is None else v) for k, v in d.items()}

        boot_keys = {"unc_bootstrap", "unc_bootstrap_x", "unc_bootstrap_y"}

        def plane(d):
            d = denull(d, boot_keys)
            d["snr_points"] = [tuple(p) for p in d["snr_points"]]
            return PlaneSummary(**d)

        return cls(
            near=plane(doc["near"]),
            far=plane(doc["far"]),
            x=AxisProduct(**denull(doc["x"], boot_keys)),
            y=AxisProduct(**denull(doc["y"], boot_keys)),
            schmidt_k=doc["schmidt_k"],
            schmidt_k_unc=doc["schmidt_k_unc"],
            meta=doc.get("meta", {}),
        )


def _plane_summary(pa: PlaneAnalysis) -> PlaneSummary:
    unit = "um^2" if pa.plane is PlaneKind.NEAR_FIELD else "hbar^2 um^-2"
    return PlaneSummary(
        var_x=pa.variances.var_x, var_y=pa.variances.var_y,
        unc_x=pa.variances.unc_x, unc_y=pa.variances.unc_y,
        unc_bootstrap_x=pa.boot_unc_x, unc_bootstrap_y=pa.boot_unc_y,
        unit=unit,
        effective_pixel=pa.variances.effective_pixel,
        fit=asdict(pa.fit),
        r=pa.sub_shot.r, r_unc=pa.sub_shot.unc,
        fluence_cam1=pa.fluence_cam1, fluence_cam2=pa.fluence_cam2,
        snr_points=[[int(k), float(s)] for k, s in pa.snr.points],
        min_frames_detect=pa.snr.min_frames_detect,
    )


def analyze_stacks(
    near1: BinaryFrameStack,
    near2: BinaryFrameStack,
    far1: BinaryFrameStack,
    far2: BinaryFrameStack,
    geometry_near: OpticalGeometry,
    geometry_far: OpticalGeometry | None = None,
    options: AnalyzeOptions = AnalyzeOptions(),
) -> tuple[EprReport, PlaneAnalysis, PlaneAnalysis]:
    """Run the full chain and assemble the report.

    Returns the report plus the two per-plane analyses (which carry the
    correlation maps for export).
    """
    if near1.plane is not PlaneKind.NEAR_FIELD or near2.plane is not PlaneKind.NEAR_FIELD:
        raise ValueError("near stacks must be near-field")
    if far1.plane is not PlaneKind.FAR_FIELD or far2.plane is not PlaneKind.FAR_FIELD:
        raise ValueError("far stacks must be far-field")
    geometry_far = geometry_far or geometry_near

    pa_near = analyze_plane(near1, near2, geometry_near, options)
    pa_far = analyze_plane(far1, far2, geometry_far, options)

    prods = epr_products(pa_near.variances, pa_far.variances)

    def axis(name: str) -> AxisProduct:
        vn = getattr(pa_near.variances, f"var_{name}")
        vf = getattr(pa_far.variances, f"var_{name}")
        bn = getattr(pa_near, f"boot_unc_{name}")
        bf = getattr(pa_far, f"boot_unc_{name}")
        product = getattr(prods, f"product_{name}")
        unc = getattr(prods, f"product_unc_{name}")
        boot = product * math.hypot(bn / vn, bf / vf) if np.isfinite(bn + bf) else math.nan
        verdict = getattr(prods, f"verdict_{name}")
        worst = max(unc, boot) if np.isfinite(boot) else unc
        return AxisProduct(
            product=product,
            unc=unc,
            unc_bootstrap=boot,
            v=getattr(prods, f"v_{name}"),
            v_unc=getattr(prods, f"v_unc_{name}"),
            n_sigma=(HEISENBERG_BOUND - product) / worst,
            violated=verdict.violated,
        )

    meta = {
        "frame_count": near1.frame_count,
        "normalization": "pearson-ensemble",
        "background": "cyclic frame pairing (i, i+1)",
        "pixel_broadening": "effective_pixel^2 / 6 subtracted from fitted variances",
        "clipping": near1.meta.get("clipping", "thresholded counts clip at 1"),
        "uncertainty": "n_sigma uses the larger of propagated and bootstrap errors",
        "sub_shot_noise": "r = Var(N1-N2) / (Var(N1)+Var(N2)); "
                          "denominator equals <N1+N2> for Poisson counts",
        "grouping": AnalyzeOptions().grouping,
        "bootstrap_resamples": options.bootstrap_resamples,
        "bootstrap_failures": [pa_near.boot_failures, pa_far.boot_failures],
        "detect_sigma": options.detect_sigma,
    }
    meta["grouping"] = options.grouping
    report = EprReport(
        near=_plane_summary(pa_near),
        far=_plane_summary(pa_far),
        x=axis("x"),
        y=axis("y"),
        schmidt_k=prods.schmidt_k,
        schmidt_k_unc=prods.schmidt_k_unc,
        meta=meta,
    )
    return report, pa_near, pa_far
