import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symeye.errors import DegenerateCalibration, FlatImage, ParameterError
from symeye.freqest import (
    DEFAULT_WIDTHS,
    WidthCalibration,
    calibrate_width_polynomial,
    default_calibration,
    estimate_edge_width,
    local_frequency_map,
    reference_frequency,
)
from symeye.irismatch import Circle
from symeye.synthbench import gen_cdf_edge, gen_sinusoid, gen_synthetic_eye


def interior(a, margin=16):
    return a[margin:-margin, margin:-margin]


@pytest.fixture(scope="module")
def calibration():
    return default_calibration()


class TestLocalFrequency:
    @pytest.mark.parametrize("orientation", [0.0, 0.6, math.pi / 2])
    def test_sinusoid_of_period_twelve(self, orientation):
        omega = 2 * math.pi / 12
        freq, valid = local_frequency_map(gen_sinusoid((96, 96), omega, orientation))
        assert interior(valid).all()
        assert np.max(np.abs(interior(freq) / omega - 1)) < 0.05

    @pytest.mark.parametrize("period", [24, 16, 12])
    def test_doubling_the_frequency_doubles_the_estimate(self, period):
        lo = np.nanmedian(interior(local_frequency_map(gen_sinusoid((96, 96), 2 * math.pi / period))[0]))
        hi = np.nanmedian(interior(local_frequency_map(gen_sinusoid((96, 96), 4 * math.pi / period))[0]))
        assert hi / lo == pytest.approx(2.0, rel=0.05)

    def test_constant_image_is_flat(self):
        with pytest.raises(FlatImage):
            local_frequency_map(np.full((64, 64), 0.4))

    def test_image_smaller_than_window(self):
        with pytest.raises(ParameterError):
            local_frequency_map(np.random.default_rng(0).random((20, 20)))

    def test_flat_region_is_invalid(self):
        img = np.full((80, 80), 0.5)
        img[:, :20] = gen_sinusoid((80, 20), 1.0).data
        freq, valid = local_frequency_map(img)
        assert not valid[:, 60:].any()
        assert np.isnan(freq[:, 60:]).all()


class TestCalibration:
    def test_too_few_widths(self):
        with pytest.raises(ParameterError):
            calibrate_width_polynomial([2, 3])
        with pytest.raises(ParameterError):
            calibrate_width_polynomial([4, 4, 8])

    def test_reference_frequency_decreases_with_width(self):
        f = [reference_frequency(t) for t in DEFAULT_WIDTHS]
        assert all(a > b for a, b in zip(f, f[1:]))

    def test_polynomial_is_decreasing_over_the_fitted_range(self, calibration):
        f = np.linspace(calibration.f_min, calibration.f_max, 400)
        assert np.all(np.diff(calibration.width(f)) < 0)

    def test_round_trip_within_fifteen_percent(self, calibration):
        for t, f in calibration.samples:
            if 4 <= t <= 20:
                assert calibration.width(f) == pytest.approx(t, rel=0.15)

    @pytest.mark.xfail(strict=True, reason="quadratic misfits the saturated narrow-edge samples by ~12%")
    def test_round_trip_within_ten_percent(self, calibration):
        for t, f in calibration.samples:
            if 4 <= t <= 20:
                assert calibration.width(f) == pytest.approx(t, rel=0.10)

    def test_serialisation_round_trip(self, calibration, tmp_path):
        calibration.save(tmp_path / "cal.json")
        assert WidthCalibration.load(tmp_path / "cal.json") == calibration

    def test_non_finite_coefficients(self):
        with pytest.raises(DegenerateCalibration):
            WidthCalibration(math.nan, 0, 0, 0, 1)


class TestEdgeWidth:
    def test_edge_of_width_twelve(self, calibration):
        assert 10.2 <= estimate_edge_width(gen_cdf_edge((129, 129), 12), calibration) <= 13.8

    @pytest.mark.parametrize("T", range(4, 21))
    def test_recovers_cdf_edge_width(self, calibration, T):
        assert estimate_edge_width(gen_cdf_edge((129, 129), T), calibration) == pytest.approx(T, rel=0.15)

    def test_synthetic_eye_of_width_eight(self, calibration):
        img, _ = gen_synthetic_eye((128, 160), Circle(80, 64, 12), Circle(80, 64, 34), edge_T=8, texture_seed=0)
        assert estimate_edge_width(img, calibration) == pytest.approx(8, rel=0.25)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0.1, 1.0), st.floats(0.0, 0.5), st.sampled_from([5, 9, 14]))
    def test_intensity_affine_invariance(self, c, d, T):
        edge = gen_cdf_edge((96, 96), T, orientation=0.3).data * 0.5 + 0.25
        base = estimate_edge_width(edge)
        moved = np.clip(c * edge + d * (1 - c), 0, 1)
        assert estimate_edge_width(moved) == pytest.approx(base, rel=1e-6)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_output_is_clamped(self, seed):
        noise = np.random.default_rng(seed).random((48, 48))
        assert 2.0 <= estimate_edge_width(noise) <= 22.0
        blurry = gen_cdf_edge((129, 129), 30).data
        assert 2.0 <= estimate_edge_width(blurry) <= 22.0
