import numpy as np
import pytest
from scipy.signal import csd, welch

from pymixbf import (
    InvalidScene,
    SceneSpec,
    Source,
    make_diffuse_noise,
    render_scene,
    split_rir,
    synth_rir,
)
from pymixbf.scene import (
    DEFAULT_GEOMETRY,
    activity,
    direct_delay,
    fibonacci_directions,
    fractional_delay,
    speech_like,
    synth_array_rirs,
)

SR = 16000


def window_energy(signal, start, width=800):
    return float(np.sum(signal[start : start + width] ** 2))


def coherence(a, b, sr, nperseg=512):
    freqs, pab = csd(a, b, fs=sr, nperseg=nperseg)
    _, paa = welch(a, fs=sr, nperseg=nperseg)
    _, pbb = welch(b, fs=sr, nperseg=nperseg)
    return freqs, np.real(pab) / np.sqrt(paa * pbb)


def correlation(a, b):
    return abs(np.sum(a * b)) / np.sqrt(np.sum(a ** 2) * np.sum(b ** 2))


class TestSceneSpec:
    def test_defaults(self):
        spec = SceneSpec()
        assert spec.num_mics == 5
        assert len(spec.sources) == 2
        assert spec.t60 == 0.38
        assert spec.sample_rate == SR
        assert spec.has_noise
        spec.validate()

    def test_no_noise(self):
        assert not SceneSpec(rmnr_db=None).has_noise
        assert not SceneSpec(rmnr_db=np.inf).has_noise

    def test_invalid_values(self):
        with pytest.raises(ValueError):
            SceneSpec(t60=0)
        with pytest.raises(ValueError):
            SceneSpec(sample_rate=16000.0)
        with pytest.raises(ValueError):
            SceneSpec(early_ms=-1)
        with pytest.raises(ValueError):
            SceneSpec(mic_geometry=[[0, 0]])
        with pytest.raises(ValueError):
            SceneSpec(rmnr_db=float("nan"))
        with pytest.raises(ValueError):
            Source((1, 2))

    def test_invalid_scene(self):
        with pytest.raises(InvalidScene, match="no sources"):
            render_scene(SceneSpec(sources=[]))
        with pytest.raises(InvalidScene, match="coincides"):
            render_scene(SceneSpec(sources=[Source(DEFAULT_GEOMETRY[2])]))
        silent = Source((1, 0, 0), signal=np.zeros(100))
        with pytest.raises(InvalidScene, match="silent"):
            render_scene(SceneSpec(sources=[silent]))

    def test_source_seed(self):
        spec = SceneSpec(sources=[Source((1, 0, 0)), Source((0, 1, 0), seed=9)])
        assert spec.source_seed(1) == 9
        first = np.random.default_rng(spec.source_seed(0)).standard_normal(4)
        again = np.random.default_rng(spec.source_seed(0)).standard_normal(4)
        np.testing.assert_array_equal(first, again)

    def test_to_dict(self):
        data = SceneSpec(seed=3).to_dict()
        assert data["seed"] == 3
        assert len(data["mic_geometry"]) == 5
        assert data["sources"][0]["position"] == [0.707, 0.707, 0.0]


class TestImpulseResponses:
    def test_direct_delay(self):
        delay = direct_delay((1.0, 0.0, 0.0), [(0.0, 0.0, 0.0)], SR)
        assert delay == pytest.approx(46.647, abs=1e-3)

    def test_fractional_delay_integer(self):
        filt = fractional_delay(10.0, 64)
        expected = np.zeros(64)
        expected[10] = 1.0
        np.testing.assert_allclose(filt, expected, atol=1e-12)

    def test_fractional_delay_peak(self):
        filt = fractional_delay(46.647, 128)
        assert np.argmax(np.abs(filt)) == 47
        assert np.abs(filt[46]) > 0.3

    def test_fractional_delay_truncated(self):
        filt = fractional_delay(2.5, 8)
        assert filt.shape == (8,)
        assert np.all(np.isfinite(filt))

    def test_short_t60(self):
        rir = synth_rir((1.0, 0.0, 0.0), (0.0, 0.0, 0.0), 0.001, SR, 4)
        near = rir[47 - 32 : 47 + 32]
        assert np.sum(near ** 2) >= 0.95 * np.sum(rir ** 2)

    def test_decay(self):
        t60 = 0.38
        rir = synth_rir((1.0, 0.0, 0.0), (0.0, 0.0, 0.0), t60, SR, 11)
        start = 47 + 100
        first = window_energy(rir, start)
        later = window_energy(rir, start + int(t60 * SR))
        assert 10 * np.log10(later / first) == pytest.approx(-60, abs=2)

    def test_array_shape(self):
        rirs = synth_array_rirs((1.0, 0.5, 0.0), DEFAULT_GEOMETRY, 0.2, SR, 1)
        assert rirs.shape[0] == 5
        assert np.all(np.isfinite(rirs))
        again = synth_array_rirs((1.0, 0.5, 0.0), DEFAULT_GEOMETRY, 0.2, SR, 1)
        np.testing.assert_array_equal(rirs, again)

    def test_coincident(self):
        with pytest.raises(InvalidScene):
            synth_rir((0, 0, 0), (0, 0, 0), 0.3, SR, 0)

    def test_split(self):
        rir = synth_rir((1.0, 0.0, 0.0), (0.0, 0.0, 0.0), 0.3, SR, 2)
        early, late = split_rir(rir, 50.0, SR, delay=46.647)
        np.testing.assert_array_equal(early + late, rir)
        assert early.shape == late.shape == rir.shape
        assert not np.any(early[847:])
        assert not np.any(late[:847])

    def test_split_default_delay(self):
        rir = np.zeros(100)
        rir[20] = 1.0
        rir[60] = 0.5
        early, late = split_rir(rir, 1.0, SR)
        assert early[20] == 1.0
        assert late[60] == 0.5
        assert not np.any(late[:36])

    def test_split_empty(self):
        with pytest.raises(ValueError):
            split_rir(np.zeros(0), 50.0)


class TestDiffuseNoise:
    def test_coincident(self):
        noise = make_diffuse_noise([(0.1, 0.0, 0.0)] * 2, 0.5, SR, 3)
        np.testing.assert_array_equal(noise[0], noise[1])

    def test_seeded(self):
        a = make_diffuse_noise(DEFAULT_GEOMETRY, 0.25, SR, 42)
        b = make_diffuse_noise(DEFAULT_GEOMETRY, 0.25, SR, 42)
        c = make_diffuse_noise(DEFAULT_GEOMETRY, 0.25, SR, 43)
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, c)
        assert a.shape == (5, 4000)

    def test_unit_variance(self):
        noise = make_diffuse_noise(DEFAULT_GEOMETRY, 5.0, SR, 5)
        np.testing.assert_allclose(np.var(noise, axis=1), 1.0, atol=0.05)

    def test_spatial_coherence(self):
        spacing = 0.04
        noise = make_diffuse_noise([(0, 0, 0), (spacing, 0, 0)], 30.0, SR, 8)
        # magnitude-squared coherence
        freqs, coh = coherence(noise[0], noise[1], SR)
        for frequency in (1000.0, 4000.0):
            index = np.argmin(np.abs(freqs - frequency))
            expected = np.sinc(2 * frequency * spacing / 343.0) ** 2
            assert coh[index] == pytest.approx(expected, abs=0.05)

    def test_directions(self):
        directions = fibonacci_directions(128)
        np.testing.assert_allclose(np.linalg.norm(directions, axis=1), 1.0)
        assert np.linalg.norm(np.mean(directions, axis=0)) < 0.05

    def test_empty(self):
        with pytest.raises(ValueError):
            make_diffuse_noise(DEFAULT_GEOMETRY, 0.0, SR, 0)


class TestRender:
    def test_decomposition(self, small_scene):
        spec, scene = small_scene
        total = scene.desired + scene.interference
        np.testing.assert_array_equal(scene.captured, total)
        np.testing.assert_array_equal(scene.desired, sum(scene.per_source_desired))
        assert scene.captured.shape == (5, 64000)
        assert scene.num_sources == 2
        assert scene.num_channels == 5
        assert scene.noise_reference.shape == (5, 32000)

    def test_rmnr(self, small_scene):
        spec, scene = small_scene
        assert scene.rmnr_measured_db == pytest.approx(spec.rmnr_db, abs=0.1)

    def test_lead_in_silent(self, small_scene):
        _, scene = small_scene
        assert np.max(np.abs(scene.desired[:, :7000])) < 1e-9
        assert not np.any(scene.activity[:, :10])

    def test_activity(self, small_scene):
        _, scene = small_scene
        assert scene.activity.shape == (2, 80)
        assert np.any(scene.activity[:, 20:])

    def test_uncorrelated(self, small_scene):
        _, scene = small_scene
        for d, v in zip(scene.desired, scene.interference):
            assert correlation(d, v) < 0.1

    def test_deterministic(self, small_scene):
        spec, scene = small_scene
        again = render_scene(spec)
        np.testing.assert_array_equal(again.captured, scene.captured)
        np.testing.assert_array_equal(again.noise_reference, scene.noise_reference)

    def test_dry_scene(self):
        spec = SceneSpec(
            sources=[Source((1.0, 0.0, 0.0))], t60=0.01, rmnr_db=None, duration=1.0
        )
        scene = render_scene(spec)
        assert scene.noise_reference is None
        assert scene.rmnr_measured_db is None
        ratio = np.sum(scene.interference ** 2) / np.sum(scene.desired ** 2)
        assert ratio < 1e-3

    def test_linear(self, rng):
        signal = rng.standard_normal(SR // 2)
        other = rng.standard_normal(SR // 2)

        def scene(*sources):
            return render_scene(SceneSpec(sources=list(sources), rmnr_db=None))

        a = Source((1.0, 0.0, 0.0), signal=signal, seed=5)
        b = Source((0.0, 1.0, 0.0), signal=other, seed=6)
        doubled = Source((1.0, 0.0, 0.0), signal=2 * signal, seed=5)
        single_a = scene(a)
        single_b = scene(b)
        both = scene(a, b)
        np.testing.assert_allclose(
            scene(doubled).desired, 2 * single_a.desired, atol=1e-12
        )
        np.testing.assert_allclose(
            both.desired, single_a.desired + single_b.desired, atol=1e-12
        )
        np.testing.assert_allclose(
            both.interference,
            single_a.interference + single_b.interference,
            atol=1e-12,
        )


class TestSignals:
    def test_speech_like(self):
        signal = speech_like(4.0, SR, 1)
        assert signal.shape == (64000,)
        assert np.max(np.abs(signal)) == pytest.approx(0.5)
        np.testing.assert_array_equal(signal, speech_like(4.0, SR, 1))
        mask = activity(signal, SR)
        assert 0 < np.mean(mask) < 1

    def test_activity(self):
        signal = np.zeros(SR)
        signal[4000:8000] = 1.0
        mask = activity(signal, SR)
        assert mask.shape == (20,)
        np.testing.assert_array_equal(np.flatnonzero(mask), np.arange(5, 10))
