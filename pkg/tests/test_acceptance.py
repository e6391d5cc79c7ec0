"""Acceptance gate: one test (and one printed verdict line) per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict
lines; the desk-scale matched run (2000 frame pairs per plane on a
256-pixel grid) is built once per session by the ``desk_run`` fixture.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

import twinimg as t
from oracles import direct_pearson_cross, fit_loglog_slope, quad_moments
from conftest import desk_config

NEAR = t.PlaneKind.NEAR_FIELD
FAR = t.PlaneKind.FAR_FIELD


def verdict(criterion: int, passed: bool, detail: str) -> None:
    print(f"CRITERION {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")
    assert passed, f"criterion {criterion}: {detail}"


def rolled(stack, k=1):
    return t.BinaryFrameStack(plane=stack.plane,
                              frames=np.roll(stack.frames, k, axis=0),
                              meta=dict(stack.meta))


def test_criterion_1_closed_loop_degree_of_paradox(desk_run):
    pred = t.predict(desk_run.cfg.params)
    assert pred.product_x == pytest.approx(2.9e-3, rel=2e-3)
    assert pred.product_y == pytest.approx(4.25e-4, rel=2e-3)
    report = desk_run.report
    runtime = desk_run.simulate_seconds + desk_run.analyze_seconds
    ok_x = abs(report.x.v - 86.0) <= 0.15 * 86.0
    ok_y = abs(report.y.v - 595.0) <= 0.15 * 595.0
    ok_t = runtime < 600.0
    verdict(1, ok_x and ok_y and ok_t,
            f"V_x={report.x.v:.1f} (target 86 +-15%), V_y={report.y.v:.1f} "
            f"(target 595 +-15%), runtime {runtime:.0f}s (< 600s)")


def test_criterion_2_schmidt_number(desk_run):
    report = desk_run.report
    k = report.schmidt_k
    consistent = abs(k - math.sqrt(report.x.v * report.y.v)) <= 1e-12 * k
    verdict(2, 190.0 <= k <= 260.0 and consistent,
            f"K={k:.1f} in [190, 260], equals sqrt(V_x V_y) to 1e-12")


def test_criterion_3_violation_significance(desk_run):
    report = desk_run.report
    ok = (report.x.violated and report.y.violated
          and report.x.n_sigma >= 50.0 and report.y.n_sigma >= 50.0)
    verdict(3, ok, f"violated on both axes, n_sigma x={report.x.n_sigma:.0f}, "
                   f"y={report.y.n_sigma:.0f} (>= 50)")


def test_criterion_4_variance_recovery(desk_run):
    near = desk_run.report.near
    ok_x = abs(near.var_x - 299.0) <= 0.15 * 299.0
    ok_y = abs(near.var_y - 168.0) <= 0.15 * 168.0
    verdict(4, ok_x and ok_y,
            f"near-field variances x={near.var_x:.1f} um^2 (target 299 +-15%), "
            f"y={near.var_y:.1f} um^2 (target 168 +-15%)")


def test_criterion_5_null_controls(desk_run):
    results = []
    # (a) cyclic pairing: frames that share no pump pulses
    for plane, flip in ((NEAR, False), (FAR, True)):
        b1, b2 = getattr(desk_run, "near" if plane is NEAR else "far")
        sub1 = t.BinaryFrameStack(plane=plane, frames=b1.frames[:800])
        sub2 = t.BinaryFrameStack(plane=plane, frames=np.roll(b2.frames[:800], 1, axis=0))
        corr = t.background_correct(
            t.cross_correlate(sub1, sub2, flip=flip, half_window=None), sub1, sub2)
        from twinimg.correlation import grouped_peak_snr
        snr = grouped_peak_snr(t.group_pixels(corr, 8).values)
        cy, cx = corr.center
        windowed = replace(corr, values=corr.values[cy - 64:cy + 65, cx - 64:cx + 65],
                           center=(64, 64))
        with pytest.raises(t.NoSignificantPeakError):
            t.fit_peak(windowed)
        sub = t.sub_shot_noise(sub1, sub2, flip=flip)
        results.append((f"cyclic-{plane.value}", snr, sub))
    # (b) independent seeds
    indep_cfg = replace(desk_config(frames=500), seed=desk_run.cfg.seed + 303)
    i1, i2 = t.simulate_stacks(indep_cfg, NEAR)
    ind2 = t.threshold(i2, indep_cfg.noise)
    own1 = t.BinaryFrameStack(plane=NEAR, frames=desk_run.near[0].frames[:500])
    corr = t.background_correct(t.cross_correlate(own1, ind2, half_window=None), own1, ind2)
    from twinimg.correlation import grouped_peak_snr
    snr_i = grouped_peak_snr(t.group_pixels(corr, 8).values)
    sub_i = t.sub_shot_noise(own1, ind2)
    results.append(("independent-seeds", snr_i, sub_i))

    ok = all(snr < 4.5 and abs(sub.r - 1.0) <= 4 * sub.unc for _, snr, sub in results)
    detail = "; ".join(f"{name}: peak {snr:.2f} sigma < 4.5, r={sub.r:.4f}+-{sub.unc:.4f}"
                       for name, snr, sub in results)
    verdict(5, ok, detail)


def test_criterion_6_snr_scaling_and_detection(desk_run):
    report = desk_run.report
    slope_near = fit_loglog_slope(report.near.snr_points)
    slope_far = fit_loglog_slope(report.far.snr_points)
    ok = (0.4 <= slope_near <= 0.6 and 0.4 <= slope_far <= 0.6
          and report.near.min_frames_detect is not None
          and report.near.min_frames_detect <= 40
          and report.far.min_frames_detect is not None
          and report.far.min_frames_detect <= 5)
    verdict(6, ok,
            f"SNR exponents near={slope_near:.2f}, far={slope_far:.2f} (in [0.4, 0.6]); "
            f"min frames near={report.near.min_frames_detect} (<= 40), "
            f"far={report.far.min_frames_detect} (<= 5)")


def test_criterion_7_sub_shot_noise(desk_run):
    report = desk_run.report
    ok_planes = (report.near.r < 1.0 - 5 * report.near.r_unc
                 and report.far.r < 1.0 - 5 * report.far.r_unc)

    sweep = []
    for eta in (0.3, 0.6, 0.9):
        cfg = desk_config(frames=800, seed=desk_run.cfg.seed + 71)
        cfg = replace(cfg, noise=replace(cfg.noise, quantum_efficiency=eta))
        s1, s2 = t.simulate_stacks(cfg, NEAR)
        sub = t.sub_shot_noise(t.threshold(s1, cfg.noise), t.threshold(s2, cfg.noise))
        sweep.append((eta, sub))
    gaps_ok = all(
        lo.r - hi.r >= 4 * math.hypot(lo.unc, hi.unc)
        for (_, lo), (_, hi) in zip(sweep, sweep[1:]))
    detail = (f"r_near={report.near.r:.4f}+-{report.near.r_unc:.4f}, "
              f"r_far={report.far.r:.4f}+-{report.far.r_unc:.4f} (both < 1 by >= 5 SE); "
              + ", ".join(f"r(eta={eta})={sub.r:.4f}" for eta, sub in sweep))
    verdict(7, ok_planes and gaps_ok, detail)


def test_criterion_8_oracle_equivalences():
    # FFT correlation vs direct sum
    rng = np.random.default_rng(88)
    f1 = (rng.random((10, 32, 32)) < 0.2).astype(np.uint8)
    f2 = (rng.random((10, 32, 32)) < 0.2).astype(np.uint8)
    s1 = t.BinaryFrameStack(plane=NEAR, frames=f1)
    s2 = t.BinaryFrameStack(plane=NEAR, frames=f2)
    fft_map = t.cross_correlate(s1, s2, half_window=None)
    direct = direct_pearson_cross(f1, f2)
    fft_err = np.abs(fft_map.values - direct).max() / np.abs(direct).max()

    # sampler moments vs quadrature of the squared amplitude
    params = t.BiphotonParams(40.0, 60.0, 10.0, 12.0)
    pos = quad_moments(t.wavefunction_position, params, (130.0, 190.0, 130.0, 190.0))
    mom = quad_moments(t.wavefunction_momentum, params, (0.31, 0.26, 0.31, 0.26))
    cfg = t.SourceConfig(params=params, mean_pairs_per_frame=100_000, seed=8, frames=1)
    moments_ok = True
    for plane, res, keys in ((NEAR, pos, ("var_diff_x", "var_diff_y")),
                             (FAR, mom, ("var_sum_x", "var_sum_y"))):
        events = t.sample_frame_pairs(cfg, plane, 0)
        n = len(events)
        combine = (events.coord1 - events.coord2 if plane is NEAR
                   else events.coord1 + events.coord2)
        for axis, key in enumerate(keys):
            var = combine[:, axis].var(ddof=1)
            se = var * math.sqrt(2.0 / (n - 1))
            moments_ok &= abs(var - res[key]) < 4 * se

    norm_ok = abs(pos["norm"] - 1.0) < 1e-6 and abs(mom["norm"] - 1.0) < 1e-6
    verdict(8, fft_err < 1e-10 and moments_ok and norm_ok,
            f"FFT vs direct rel err {fft_err:.1e} (< 1e-10); sampler moments within "
            f"4 SE of quadrature; |norm - 1| < 1e-6 in both representations")


def test_criterion_9_determinism(tmp_path):
    from click.testing import CliRunner
    from twinimg.cli import main

    cfg_text = "grid_size = 64\nframes = 25\nseed = 4\nmean_pairs_per_frame = 250.0\n"
    cfg_path = tmp_path / "det.cfg"
    cfg_path.write_text(cfg_text)
    runner = CliRunner()

    def simulate(out, plane, workers="1"):
        res = runner.invoke(main, ["simulate", "--config", str(cfg_path), "--plane", plane,
                                   "--out", str(out), "--workers", workers],
                            catch_exceptions=False)
        assert res.exit_code == 0, res.output

    def tree(d):
        return {p.name: p.read_bytes() for p in sorted(d.iterdir())}

    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for out, workers in ((a, "1"), (b, "1"), (c, "3")):
        simulate(out, "near", workers)
        simulate(out, "far", workers)
    sim_ok = tree(a) == tree(b) == tree(c)

    def analyze(src, out):
        res = runner.invoke(main, [
            "analyze",
            "--near", str(src / "near_cam1.twim"), str(src / "near_cam2.twim"),
            "--far", str(src / "far_cam1.twim"), str(src / "far_cam2.twim"),
            "--out", str(out), "--bootstrap", "20", "--fit-window", "9",
            "--snr-frames", "2,5,12,25", "--half-window", "20",
        ], catch_exceptions=False)
        assert res.exit_code == 0, res.output

    r1, r2 = tmp_path / "r1", tmp_path / "r2"
    analyze(a, r1)
    analyze(b, r2)
    ana_ok = tree(r1) == tree(r2)
    verdict(9, sim_ok and ana_ok,
            "simulate byte-identical across reruns and worker counts; "
            "analyze outputs byte-identical across reruns")
