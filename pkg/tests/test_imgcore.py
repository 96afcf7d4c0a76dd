import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symeye.errors import ParameterError
from symeye.imgcore import (
    ComplexField,
    GrayImage,
    Kernel1D,
    apply_separable_complex,
    convolve_dense,
    convolve_separable,
    gaussian_kernel,
    load_image,
    moment_kernel,
    save_image,
    separable_filter,
)
from symeye.symmetry import SeparableComplexFilter, build_symmetry_filter, sample_symmetry_filter

from .conftest import rel_err


def brute_force_convolve(arr, kernel):
    """Textbook double loop with clamped indices."""
    h, w = arr.shape
    kh, kw = kernel.shape
    ry, rx = kh // 2, kw // 2
    out = np.zeros((h, w), dtype=np.result_type(arr, kernel))
    for y in range(h):
        for x in range(w):
            acc = 0
            for v in range(-ry, ry + 1):
                for u in range(-rx, rx + 1):
                    yy = min(max(y - v, 0), h - 1)
                    xx = min(max(x - u, 0), w - 1)
                    acc += arr[yy, xx] * kernel[v + ry, u + rx]
            out[y, x] = acc
    return out


class TestKernels:
    def test_gaussian_sigma1_has_seven_unit_sum_taps(self):
        k = gaussian_kernel(1.0)
        assert len(k) == 7
        assert abs(k.taps.sum() - 1.0) < 1e-12

    @given(st.floats(0.3, 12.0))
    def test_gaussian_is_even(self, sigma):
        t = gaussian_kernel(sigma).taps
        np.testing.assert_array_equal(t, t[::-1])

    def test_gaussian_ratio_at_two_sigma_offset(self):
        k = gaussian_kernel(2.0)
        assert k.at(0) / k.at(2) == pytest.approx(math.exp(0.5), rel=1e-12)

    @given(st.floats(0.3, 12.0))
    def test_first_moment_is_odd_and_zero_sum(self, sigma):
        t = moment_kernel(sigma, 1).taps
        assert abs(t.sum()) < 1e-12
        np.testing.assert_allclose(t, -t[::-1], atol=0)

    def test_second_moment_matches_variance(self):
        g = moment_kernel(1.0, 0, truncation=6.0)
        x2g = moment_kernel(1.0, 2, truncation=6.0)
        assert x2g.taps.sum() / g.taps.sum() == pytest.approx(1.0, rel=1e-6)

    def test_default_truncation_gives_close_second_moment(self):
        ratio = moment_kernel(1.0, 2).taps.sum() / moment_kernel(1.0, 0).taps.sum()
        assert ratio == pytest.approx(1.0, rel=0.05)

    def test_bad_inputs(self):
        with pytest.raises(ParameterError):
            gaussian_kernel(0.0)
        with pytest.raises(ParameterError):
            moment_kernel(1.0, 3)
        with pytest.raises(ParameterError):
            Kernel1D(np.ones(4))


class TestSeparable:
    def test_impulse_is_identity(self, rng):
        img = rng.random((20, 17))
        imp = Kernel1D.impulse()
        np.testing.assert_array_equal(convolve_separable(img, imp, imp).data.real, img)

    def test_constant_image_stays_constant(self):
        img = np.full((24, 24), 0.37)
        k = gaussian_kernel(2.5)
        np.testing.assert_allclose(separable_filter(img, k, k), 0.37, rtol=1e-12)

    def test_matches_brute_force_oracle(self, rng):
        img = rng.random((32, 32))
        h = Kernel1D(rng.normal(size=7))
        v = Kernel1D(rng.normal(size=5))
        dense = np.outer(v.taps, h.taps)
        got = separable_filter(img, h, v)
        assert rel_err(got, brute_force_convolve(img, dense)) < 1e-10

    def test_dense_path_matches_brute_force(self, rng):
        img = rng.random((16, 19)) + 1j * rng.random((16, 19))
        kernel = rng.normal(size=(5, 7)) + 1j * rng.normal(size=(5, 7))
        assert rel_err(convolve_dense(img, kernel), brute_force_convolve(img, kernel)) < 1e-12

    def test_complex_input_splits_cleanly(self, rng):
        re, im = rng.random((30, 30)), rng.random((30, 30))
        k = moment_kernel(1.5, 1)
        g = gaussian_kernel(1.5)
        both = separable_filter(re + 1j * im, k, g)
        np.testing.assert_allclose(both.real, separable_filter(re, k, g), atol=1e-15)
        np.testing.assert_allclose(both.imag, separable_filter(im, k, g), atol=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**32 - 1))
    def test_linearity(self, a, b, seed):
        r = np.random.default_rng(seed)
        f, g = r.random((24, 24)), r.random((24, 24))
        filt = build_symmetry_filter(-2, 1.3)
        lhs = apply_separable_complex(a * f + b * g, filt).data
        rhs = a * apply_separable_complex(f, filt).data + b * apply_separable_complex(g, filt).data
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(rhs)))

    def test_bit_identical_reruns(self, rng):
        img = rng.random((40, 40))
        filt = build_symmetry_filter(1, 2.0)
        a = apply_separable_complex(img, filt).data
        b = apply_separable_complex(img, filt).data
        assert a.tobytes() == b.tobytes()

    def test_single_term_impulse_filter_is_identity(self, rng):
        img = rng.random((12, 12))
        imp = Kernel1D.impulse()
        filt = SeparableComplexFilter(order=0, sigma=1.0, terms=((imp, imp, 1.0),))
        np.testing.assert_array_equal(apply_separable_complex(img, filt).data, img)

    def test_gradient_filter_kills_constants(self):
        out = apply_separable_complex(np.full((30, 30), 0.6), build_symmetry_filter(1, 2.0))
        assert np.max(out.magnitude) < 1e-14

    def test_order_minus_two_matches_sampled_filter(self, rng):
        img = rng.random((48, 48))
        dense = convolve_dense(img, sample_symmetry_filter(-2, 2.5))
        sep = apply_separable_complex(img, build_symmetry_filter(-2, 2.5)).data
        assert rel_err(sep, dense) < 1e-8

    def test_kernel_longer_than_twice_the_image_is_rejected(self):
        k = gaussian_kernel(3.0)  # 19 taps
        with pytest.raises(ParameterError):
            separable_filter(np.zeros((9, 40)), k, k)


class TestImages:
    def test_gray_image_validation(self):
        with pytest.raises(ParameterError):
            GrayImage(np.array([[0.0, 1.2]]))
        with pytest.raises(ParameterError):
            GrayImage(np.array([[np.nan]]))
        with pytest.raises(ParameterError):
            GrayImage(np.zeros(5))

    def test_arrays_are_read_only(self):
        img = GrayImage(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            img.data[0, 0] = 1.0
        field = ComplexField(np.zeros((2, 2)))
        assert field.magnitude.shape == (2, 2)

    def test_png_round_trip(self, tmp_path, rng):
        arr = np.round(rng.random((10, 13)) * 255) / 255
        save_image(tmp_path / "a.png", arr)
        back = load_image(tmp_path / "a.png")
        np.testing.assert_allclose(back.data, arr, atol=1e-12)
        assert back.shape == (10, 13)

    def test_colour_uses_luma_weights(self, tmp_path):
        from PIL import Image

        rgb = np.zeros((2, 2, 3), dtype=np.uint8)
        rgb[..., 0] = 255
        Image.fromarray(rgb, mode="RGB").save(tmp_path / "red.png")
        assert load_image(tmp_path / "red.png").data[0, 0] == pytest.approx(0.299)

    def test_sixteen_bit(self, tmp_path):
        from PIL import Image

        arr = np.array([[0, 65535], [32768, 1000]], dtype=np.uint16)
        Image.fromarray(arr).save(tmp_path / "d.png")
        got = load_image(tmp_path / "d.png").data
        assert got[0, 1] == pytest.approx(1.0)
        assert got[1, 0] == pytest.approx(32768 / 65535)
