"""Closed-form model: normalization, duality, moments, verdicts."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

import twinimg as t
from oracles import dft_momentum_amplitude, quad_moments

PARAMS = t.BiphotonParams(sigma_p_x=40.0, sigma_p_y=60.0,
                          sigma_phi_x=10.0, sigma_phi_y=12.0)


def pos_extents(p, k=6.0):
    sx = k * math.sqrt(p.sigma_p_x ** 2 + p.sigma_phi_x ** 2) / 2.0
    sy = k * math.sqrt(p.sigma_p_y ** 2 + p.sigma_phi_y ** 2) / 2.0
    return (sx, sy, sx, sy)


def mom_extents(p, k=6.0):
    sx = k * math.sqrt(1 / p.sigma_p_x ** 2 + 1 / p.sigma_phi_x ** 2) / 2.0
    sy = k * math.sqrt(1 / p.sigma_p_y ** 2 + 1 / p.sigma_phi_y ** 2) / 2.0
    return (sx, sy, sx, sy)


class TestValidation:
    def test_rejects_nonpositive_widths(self):
        with pytest.raises(ValueError):
            t.BiphotonParams(0.0, 60.0, 10.0, 12.0)
        with pytest.raises(ValueError):
            t.BiphotonParams(40.0, 60.0, -1.0, 12.0)
        with pytest.raises(ValueError):
            t.BiphotonParams(40.0, math.inf, 10.0, 12.0)

    def test_rejects_nonfinite_coordinates(self):
        with pytest.raises(ValueError):
            t.wavefunction_position(PARAMS, (0.0, math.nan), (0.0, 0.0))
        with pytest.raises(ValueError):
            t.wavefunction_momentum(PARAMS, (0.0, 0.0), (math.inf, 0.0))


class TestPositionAmplitude:
    def test_global_maximum_at_origin(self):
        peak = t.wavefunction_position(PARAMS, (0.0, 0.0), (0.0, 0.0))
        rng = np.random.default_rng(0)
        r1 = rng.normal(0, 30, size=(200, 2))
        r2 = rng.normal(0, 30, size=(200, 2))
        assert np.all(t.wavefunction_position(PARAMS, r1, r2) <= peak)

    @given(st.lists(st.floats(-50, 50), min_size=4, max_size=4))
    @settings(max_examples=50, deadline=None)
    def test_swap_symmetry(self, coords):
        r1 = coords[:2]
        r2 = coords[2:]
        assert_allclose(
            t.wavefunction_position(PARAMS, r1, r2),
            t.wavefunction_position(PARAMS, r2, r1), rtol=1e-14)

    def test_normalized_by_quadrature(self):
        res = quad_moments(t.wavefunction_position, PARAMS, pos_extents(PARAMS))
        assert abs(res["norm"] - 1.0) < 1e-6


class TestMomentumAmplitude:
    def test_antidiagonal_maximizes_sum_factor(self):
        # fixed difference, varying sum: the amplitude peaks at p1 = -p2
        diff = np.array([0.04, -0.02])
        sums = np.linspace(-0.1, 0.1, 41)
        vals = [
            t.wavefunction_momentum(PARAMS, (s + diff) / 2.0, (s - diff) / 2.0)
            for s in np.stack([sums, 0.3 * sums], axis=1)
        ]
        assert int(np.argmax(vals)) == 20  # the zero-sum sample

    def test_normalized_by_quadrature(self):
        res = quad_moments(t.wavefunction_momentum, PARAMS, mom_extents(PARAMS))
        assert abs(res["norm"] - 1.0) < 1e-6

    def test_fourier_consistency_64_point_grid(self):
        # DFT of position samples along (x1, x2) at y1 = y2 = 0 must
        # reproduce the momentum amplitude at (px1, px2), py = 0, up to
        # the analytic y-sector constant 1 / (sigma_p_y * sigma_phi_y).
        p = t.BiphotonParams(2.0, 3.0, 0.5, 0.8)
        n = 64
        half = 10.0
        dx = 2.0 * half / n
        grid = (np.arange(n) - n // 2) * dx
        x1, x2 = np.meshgrid(grid, grid, indexing="ij")
        zeros = np.zeros_like(x1)
        psi = t.wavefunction_position(
            p, np.stack([x1, zeros], axis=-1), np.stack([x2, zeros], axis=-1))
        pgrid, transformed = dft_momentum_amplitude(psi, dx)
        assert np.abs(transformed.imag).max() < 1e-9 * transformed.real.max()

        p1, p2 = np.meshgrid(pgrid, pgrid, indexing="ij")
        pz = np.zeros_like(p1)
        expected = t.wavefunction_momentum(
            p, np.stack([p1, pz], axis=-1), np.stack([p2, pz], axis=-1))
        expected = expected / (p.sigma_p_y * p.sigma_phi_y)
        mask = expected > 1e-3 * expected.max()
        rel = np.abs(transformed.real[mask] - expected[mask]) / expected[mask]
        assert rel.max() < 1e-6


class TestPredict:
    def test_moments_match_quadrature(self):
        pred = t.predict(PARAMS)
        pos = quad_moments(t.wavefunction_position, PARAMS, pos_extents(PARAMS))
        mom = quad_moments(t.wavefunction_momentum, PARAMS, mom_extents(PARAMS))
        assert_allclose(pred.var_diff_x, pos["var_diff_x"], rtol=1e-6)
        assert_allclose(pred.var_diff_y, pos["var_diff_y"], rtol=1e-6)
        assert_allclose(pred.var_sum_px, mom["var_sum_x"], rtol=1e-6)
        assert_allclose(pred.var_sum_py, mom["var_sum_y"], rtol=1e-6)

    def test_products_are_width_ratios(self):
        pred = t.predict(PARAMS)
        assert pred.product_x == (PARAMS.sigma_phi_x / PARAMS.sigma_p_x) ** 2 \
            == pred.var_diff_x * pred.var_sum_px
        assert pred.product_y == pytest.approx(
            (PARAMS.sigma_phi_y / PARAMS.sigma_p_y) ** 2, rel=1e-15)

    def test_matches_published_degrees_of_paradox(self):
        pred = t.predict(t.default_params())
        assert pred.product_x == pytest.approx(2.9e-3, rel=2e-3)
        assert pred.product_y == pytest.approx(4.25e-4, rel=2e-3)
        assert pred.v_x == pytest.approx(86.0, abs=1.0)
        assert abs(pred.v_y - 595.0) < 40.0
        assert pred.schmidt_k == pytest.approx(225.0, abs=2.0)
        assert pred.schmidt_k == pytest.approx(math.sqrt(pred.v_x * pred.v_y), rel=1e-15)

    def test_regime_guard(self):
        marginal = t.BiphotonParams(20.0, 60.0, 10.1, 12.0)  # sigma_p_x < 2 sigma_phi_x
        with pytest.raises(t.EprRegimeError, match="not in EPR approximation regime"):
            t.predict(marginal)
        boundary = t.BiphotonParams(16.0, 24.0, 8.0, 12.0)
        t.predict(boundary)  # exactly at the factor-2 cut: accepted

    def test_boundary_product_is_exact_quarter(self):
        # dyadic widths keep the float arithmetic exact
        pred = t.predict(t.BiphotonParams(16.0, 32.0, 8.0, 16.0))
        assert pred.product_x == 0.25
        assert pred.product_y == 0.25
        assert pred.v_x == 1.0
        verdict = t.epr_verdict(pred.product_x, 1e-3)
        assert not verdict.violated
        assert verdict.n_sigma == 0.0

    @given(st.floats(0.01, 100.0))
    @settings(max_examples=50, deadline=None)
    def test_unit_scale_invariance(self, scale):
        base = t.predict(PARAMS)
        scaled = t.predict(t.BiphotonParams(
            PARAMS.sigma_p_x * scale, PARAMS.sigma_p_y * scale,
            PARAMS.sigma_phi_x * scale, PARAMS.sigma_phi_y * scale))
        assert_allclose(scaled.v_x, base.v_x, rtol=1e-12)
        assert_allclose(scaled.v_y, base.v_y, rtol=1e-12)
        assert_allclose(scaled.schmidt_k, base.schmidt_k, rtol=1e-12)


class TestVerdict:
    def test_published_significance(self):
        verdict = t.epr_verdict(2.9e-3, 2e-4)
        assert verdict.violated
        assert verdict.n_sigma == pytest.approx(1235.5, abs=1.0)

    def test_any_small_uncertainty_still_violates(self):
        assert t.epr_verdict(2.9e-3, 1e-9).violated

    def test_above_bound(self):
        verdict = t.epr_verdict(0.3, 0.01)
        assert not verdict.violated
        assert verdict.n_sigma < 0

    def test_rejects_bad_uncertainty(self):
        with pytest.raises(ValueError):
            t.epr_verdict(0.1, 0.0)
        with pytest.raises(ValueError):
            t.epr_verdict(0.1, -1.0)
