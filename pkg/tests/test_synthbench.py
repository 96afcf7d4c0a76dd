
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from symeye.errors import ParameterError
from symeye.evalfusion import load_manifest, normalized_distance
from symeye.irismatch import Circle
from symeye.periocular import GaborBankSpec, build_grid, chi2_distance, extract_template
from symeye.symmetry import detect_eye
from symeye.synthbench import add_lashes, cdf_profile, emit_corpus, gen_cdf_edge, gen_sinusoid, gen_synthetic_eye


class TestEdges:
    def test_profile_reaches_three_sigma_at_half_width(self):
        assert cdf_profile(np.array(6.0), 12) == pytest.approx(norm.cdf(3.0), abs=1e-12)
        assert cdf_profile(np.array(-6.0), 12) == pytest.approx(norm.cdf(-3.0), abs=1e-12)
        assert cdf_profile(np.array(0.0), 12) == 0.5

    def test_edge_centre_is_half(self):
        assert gen_cdf_edge((33, 41), 8).data[16, 20] == pytest.approx(0.5)

    def test_width_range(self):
        with pytest.raises(ParameterError):
            gen_cdf_edge((32, 32), 1.0)

    def test_sinusoid_range(self):
        s = gen_sinusoid((16, 16), 1.0).data
        assert s.min() >= 0.1 - 1e-12 and s.max() <= 0.9 + 1e-12


class TestEyes:
    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_noiseless_eye_is_detected(self, seed):
        img, ann = gen_synthetic_eye((96, 96), Circle(48, 48, 10), Circle(48, 48, 28), edge_T=6, texture_seed=seed)
        assert normalized_distance(detect_eye(img).center, ann.pupil) <= 0.25

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0, 0.1))
    def test_deterministic_and_in_range(self, seed, noise):
        a, ann_a = gen_synthetic_eye((64, 80), Circle(40, 32, 8), Circle(40, 32, 20), texture_seed=seed, noise_sigma=noise)
        b, ann_b = gen_synthetic_eye((64, 80), Circle(40, 32, 8), Circle(40, 32, 20), texture_seed=seed, noise_sigma=noise)
        assert a.data.tobytes() == b.data.tobytes() and ann_a == ann_b
        assert a.data.min() >= 0 and a.data.max() <= 1

    def test_annotation_is_exact(self):
        _, ann = gen_synthetic_eye((64, 64), Circle(31.5, 30.25, 7.5), Circle(32, 32, 20))
        assert ann.pupil == Circle(31.5, 30.25, 7.5)

    def test_different_seeds_differ_more_than_noise(self):
        def tmpl(seed, noise_seed):
            img, _ = gen_synthetic_eye(
                (96, 96), Circle(48, 48, 10), Circle(48, 48, 28), texture_seed=seed, noise_sigma=0.01, noise_seed=noise_seed
            )
            return extract_template(img, build_grid((5, 5, 12), img.shape, (48, 48)), GaborBankSpec()).magnitudes_pdf

        same = chi2_distance(tmpl(1, 10), tmpl(1, 11))
        assert all(chi2_distance(tmpl(1, 10), tmpl(s, 11)) > same for s in (2, 3, 4))

    def test_lashes_darken_only_above_the_pupil(self):
        img, ann = gen_synthetic_eye((96, 96), Circle(48, 48, 10), Circle(48, 48, 28))
        lashed = add_lashes(img, ann, count=15, seed=3)
        changed = np.argwhere(np.abs(lashed.data - img.data) > 1e-9)
        assert changed.size and np.all(lashed.data <= img.data + 1e-12)
        assert changed[:, 0].max() < 48 + 28 * 0.4


class TestCorpus:
    def test_emit_then_load(self, tmp_path):
        path = emit_corpus(tmp_path, identities=3, samples=2, sessions=2, seed=4)
        m = load_manifest(path)
        assert len(m.records) == 12 and len(m.identities()) == 3 and m.two_sessions
        assert all((tmp_path / r.path).exists() for r in m.records)
        assert m.tags["grid"]["dense"][:2] == [7, 9]

    def test_emit_is_deterministic(self, tmp_path):
        a = emit_corpus(tmp_path / "a", identities=2, samples=2, seed=9)
        b = emit_corpus(tmp_path / "b", identities=2, samples=2, seed=9)
        assert a.read_bytes() == b.read_bytes()
        for name in sorted(p.name for p in (tmp_path / "a" / "images").iterdir()):
            assert (tmp_path / "a" / "images" / name).read_bytes() == (tmp_path / "b" / "images" / name).read_bytes()
