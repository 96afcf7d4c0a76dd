import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symeye.errors import DataError, EmptyOverlap, ParameterError
from symeye.irismatch import (
    Circle,
    EyeAnnotation,
    IrisCode,
    encode_log_gabor_1d,
    hamming_distance,
    iris_code,
    rubber_sheet,
)
from symeye.synthbench import gen_synthetic_eye

ANN = EyeAnnotation(Circle(80, 64, 12), Circle(80, 64, 36))


def eye(seed, noise_seed=None, noise=0.0, dims=(128, 160), ann=ANN):
    return gen_synthetic_eye(dims, ann.pupil, ann.sclera, texture_seed=seed, noise_sigma=noise, noise_seed=noise_seed,
                             eyelids=ann.eyelids)[0]


def random_code(rng, shape=(20, 240, 2)):
    return IrisCode(rng.random(shape) < 0.5, np.ones(shape, bool))


class TestRubberSheet:
    def test_shape(self):
        strip, mask = rubber_sheet(eye(0), ANN)
        assert strip.shape == (20, 240) and mask.shape == (20, 240) and mask.all()

    def test_radial_pattern_gives_constant_rows(self):
        y, x = np.mgrid[0:128, 0:160].astype(float)
        r = np.hypot(x - 80, y - 64)
        img = 0.5 + 0.4 * np.cos(r / 3.0)
        strip, _ = rubber_sheet(img, ANN)
        spread = strip.data.max(axis=1) - strip.data.min(axis=1)
        assert spread.max() < 0.02

    def test_eyelid_masks_the_top(self):
        ann = EyeAnnotation(ANN.pupil, ANN.sclera, {"upper": Circle(80, -40, 85)})
        _, mask = rubber_sheet(eye(0), ann)
        assert (~mask).sum() > 0
        # theta = 3pi/2 points up (image y decreases)
        assert not mask[-1, 180] and mask[-1, 60]

    def test_outside_image_is_masked(self):
        ann = EyeAnnotation(Circle(10, 64, 6), Circle(10, 64, 30))
        _, mask = rubber_sheet(np.full((128, 160), 0.5), ann)
        assert not mask[-1, 120] and mask[:, 0].all()

    def test_pupil_must_be_strictly_inside(self):
        ann = EyeAnnotation(Circle(80, 64, 30), Circle(85, 64, 32))
        with pytest.raises(DataError):
            rubber_sheet(eye(0), ann)


class TestEncoding:
    def test_deterministic(self):
        a, b = iris_code(eye(3), ANN), iris_code(eye(3), ANN)
        assert np.array_equal(a.bits, b.bits)

    @settings(max_examples=10, deadline=None)
    @given(st.floats(0.1, 1.0))
    def test_scaling_does_not_change_bits(self, c):
        img = eye(4).data
        assert np.array_equal(iris_code(c * img, ANN).bits, iris_code(img, ANN).bits)

    def test_inversion_flips_every_bit(self):
        img = eye(5).data
        a, b = iris_code(img, ANN), iris_code(1.0 - img, ANN)
        assert np.all(a.bits != b.bits)
        assert hamming_distance(a, b) == 1.0

    def test_mask_shape_mismatch(self):
        with pytest.raises(ParameterError):
            encode_log_gabor_1d(np.zeros((20, 240)), np.ones((20, 10), bool))

    def test_adding_occlusion_only_masks(self):
        img = eye(6).data
        open_code = iris_code(img, ANN)
        lidded = iris_code(img, EyeAnnotation(ANN.pupil, ANN.sclera, {"lower": Circle(80, 150, 80)}))
        assert np.array_equal(open_code.bits, lidded.bits)
        assert np.all(lidded.mask <= open_code.mask) and lidded.mask.sum() < open_code.mask.sum()

    def test_serialisation(self, rng):
        code = random_code(rng)
        code = IrisCode(code.bits, rng.random(code.bits.shape) < 0.9)
        back = IrisCode.from_dict(code.to_dict())
        assert np.array_equal(back.bits, code.bits) and np.array_equal(back.mask, code.mask)


class TestHamming:
    def test_self_is_zero(self, rng):
        c = random_code(rng)
        assert hamming_distance(c, c) == 0.0

    def test_complement_is_one(self, rng):
        c = random_code(rng)
        assert hamming_distance(c, IrisCode(~c.bits, c.mask)) == 1.0

    @pytest.mark.parametrize("seed", range(5))
    def test_independent_codes_near_half(self, seed):
        r = np.random.default_rng(seed)
        a, b = random_code(r), random_code(r)
        assert a.mask.sum() >= 4800
        assert abs(hamming_distance(a, b) - 0.5) <= 0.03

    @given(st.integers(0, 2**32 - 1))
    def test_symmetric_and_in_unit_interval(self, seed):
        r = np.random.default_rng(seed)
        a = IrisCode(r.random((4, 8, 2)) < 0.5, r.random((4, 8, 2)) < 0.8)
        b = IrisCode(r.random((4, 8, 2)) < 0.5, r.random((4, 8, 2)) < 0.8)
        if not (a.mask & b.mask).any():
            return
        d = hamming_distance(a, b)
        assert d == hamming_distance(b, a) and 0 <= d <= 1

    def test_no_overlap(self):
        a = IrisCode(np.zeros((2, 2, 2), bool), np.zeros((2, 2, 2), bool))
        with pytest.raises(EmptyOverlap):
            hamming_distance(a, a)

    def test_same_texture_vs_different_texture(self):
        ref = iris_code(eye(10, 1, 0.02), ANN)
        genuine = [hamming_distance(ref, iris_code(eye(10, k, 0.02), ANN)) for k in (2, 3, 4)]
        impostor = [hamming_distance(ref, iris_code(eye(s, 5, 0.02), ANN)) for s in (11, 12, 13, 14)]
        assert max(genuine) < 0.3
        assert all(abs(d - 0.5) < 0.15 for d in impostor)


class TestAnnotation:
    def test_pupil_outside_sclera(self):
        with pytest.raises(DataError):
            EyeAnnotation(Circle(0, 0, 5), Circle(100, 100, 20))

    def test_bad_circle(self):
        with pytest.raises(DataError):
            Circle(0, 0, -1)

    def test_scaling(self):
        ann = EyeAnnotation(Circle(10, 20, 3), Circle(11, 21, 9), {"upper": Circle(10, -5, 30)})
        s = ann.scaled(2.0)
        assert s.pupil == Circle(20, 40, 6) and s.eyelids["upper"] == Circle(20, -10, 60)
