import itertools
from unittest.mock import patch

import numpy as np
import pytest

from pymixbf import (
    BeamformerKind,
    Enhancer,
    InvalidConfiguration,
    NoiseScmMode,
    RunConfig,
    SceneSpec,
    StftConfig,
    TimingReport,
    init_from_noise,
    render_scene,
)
from pymixbf.cli import compare_beamformers, evaluate_scene, noise_scm_for
from pymixbf.warnings import HopBudgetWarning, NanFrameWarning

CHANNELS = 3


def noisy_audio(rng, num_samples, channels=CHANNELS):
    return 0.1 * rng.standard_normal((channels, num_samples))


class TestRunConfig:
    def test_defaults(self):
        config = RunConfig()
        assert config.beamformer is BeamformerKind.MOD_PMWF_APPROX
        assert config.noise_scm_mode is NoiseScmMode.PRECOMPUTED_FROM_FILE
        assert config.gamma == 0.0
        assert config.beta == 0.85
        assert config.alpha == 0.9998
        assert config.stft == StftConfig()
        assert config.power_iters == 1
        assert not config.all_channels

    def test_kind_default_beta(self):
        assert RunConfig(beamformer="ur_mwf").beta == 0.99
        assert RunConfig(beamformer="ur_mwf", beta=0.9).beta == 0.9

    def test_parse(self):
        config = RunConfig(
            beamformer="GEV_MVDR",
            noise_scm_mode="online_spp",
            stft={"sample_rate": 16000, "window_len": 512, "hop": 128},
        )
        assert config.beamformer is BeamformerKind.GEV_MVDR
        assert config.noise_scm_mode is NoiseScmMode.ONLINE_SPP
        assert config.stft.num_bins == 257

    def test_invalid(self):
        with pytest.raises(ValueError):
            RunConfig(beamformer="delay_and_sum")
        with pytest.raises(ValueError):
            RunConfig(gamma=-1)
        with pytest.raises(ValueError):
            RunConfig(beta=0)
        with pytest.raises(ValueError):
            RunConfig(beta=1.5)
        with pytest.raises(ValueError):
            RunConfig(alpha=0)
        with pytest.raises(ValueError):
            RunConfig(power_iters=0)
        with pytest.raises(ValueError):
            RunConfig(warmup_frames=-1)
        with pytest.raises(ValueError):
            RunConfig(all_channels="yes")
        with pytest.raises(ValueError):
            RunConfig(stft="16k")

    def test_to_dict(self):
        data = RunConfig(beamformer="ur_mwf").to_dict()
        assert data["beamformer"] == "ur_mwf"
        assert data["beta"] == 0.99
        assert data["stft"]["hop"] == 80
        assert RunConfig(**data).to_dict() == data


class TestTimingReport:
    def test_budget(self):
        report = TimingReport([0.001, 0.01], 0.005)
        assert report.num_frames == 2
        assert report.over_budget == 1
        assert report.real_time_factor == pytest.approx(1.1)
        data = report.to_dict()
        assert data["frames_over_hop"] == 1
        assert data["max_ms"] == pytest.approx(10.0)
        assert data["hop_ms"] == pytest.approx(5.0)

    def test_empty(self):
        report = TimingReport([], 0.005)
        assert report.real_time_factor == 0.0
        assert report.to_dict()["p99_ms"] == 0.0


class TestEnhancer:
    def setup_method(self):
        self.rng = np.random.default_rng(41)
        self.cfg = StftConfig()
        noise = noisy_audio(self.rng, 16000)
        self.noise_scm = init_from_noise(noise, self.cfg)

    def test_configuration_errors(self):
        with pytest.raises(InvalidConfiguration, match="per-source"):
            Enhancer(RunConfig(beamformer="pmwf_single"), CHANNELS, self.noise_scm)
        with pytest.raises(InvalidConfiguration, match="per-source"):
            Enhancer(RunConfig(beamformer="mvdr_per_source"), CHANNELS, self.noise_scm)
        with pytest.raises(InvalidConfiguration, match="at least 2 channels"):
            Enhancer(RunConfig(), 1, self.noise_scm[:, :1, :1])
        with pytest.raises(InvalidConfiguration, match="noise SCM"):
            Enhancer(RunConfig(), CHANNELS)
        with pytest.raises(InvalidConfiguration, match="warmup"):
            Enhancer(RunConfig(noise_scm_mode="online_spp", warmup_frames=0), CHANNELS)
        with pytest.raises(InvalidConfiguration, match="shape"):
            Enhancer(RunConfig(), CHANNELS, self.noise_scm[:10])

    def test_power_iteration_start(self):
        enhancer = Enhancer(RunConfig(beamformer="gev_mvdr"), CHANNELS, self.noise_scm)
        u = enhancer.state.u
        assert u.shape == (self.cfg.num_bins, CHANNELS)
        np.testing.assert_array_equal(u[:, 0], 1)
        np.testing.assert_array_equal(u[:, 1:], 0)

    def test_wrong_channel_count(self):
        enhancer = Enhancer(RunConfig(), CHANNELS, self.noise_scm)
        with pytest.raises(InvalidConfiguration, match="channels"):
            enhancer.process(noisy_audio(self.rng, 1000, 2))

    def test_identity(self):
        audio = noisy_audio(self.rng, 4000)
        enhancer = Enhancer(RunConfig(beamformer="identity"), CHANNELS)
        output, timing = enhancer.process(audio)
        assert output.shape == audio.shape
        np.testing.assert_allclose(output, audio, atol=1e-10)
        assert timing.num_frames == self.cfg.num_frames(4000)

    def test_mono_identity(self):
        audio = noisy_audio(self.rng, 1000, 1)
        output, _ = Enhancer(RunConfig(beamformer="identity"), 1).process(audio)
        np.testing.assert_allclose(output, audio, atol=1e-10)

    def test_causal(self):
        config = RunConfig()
        prefix = noisy_audio(self.rng, 3000)
        first = np.concatenate([prefix, noisy_audio(self.rng, 2000)], axis=1)
        second = np.concatenate([prefix, 5 * noisy_audio(self.rng, 1000)], axis=1)
        out_first, _ = Enhancer(config, CHANNELS, self.noise_scm).process(first)
        out_second, _ = Enhancer(config, CHANNELS, self.noise_scm).process(second)
        keep = 3000 - self.cfg.window_len
        np.testing.assert_array_equal(out_first[:, :keep], out_second[:, :keep])
        assert not np.allclose(out_first[:, 3500:4000], out_second[:, 3500:4000])

    def test_deterministic(self):
        audio = noisy_audio(self.rng, 4000)
        config = RunConfig(beamformer="gev_mvdr")
        a, _ = Enhancer(config, CHANNELS, self.noise_scm).process(audio)
        b, _ = Enhancer(config, CHANNELS, self.noise_scm).process(audio)
        np.testing.assert_array_equal(a, b)

    def test_non_finite_frames(self):
        audio = noisy_audio(self.rng, 4000)
        audio[1, 2000] = np.nan
        warnings = []
        enhancer = Enhancer(RunConfig(), CHANNELS, self.noise_scm, warnings)
        output, _ = enhancer.process(audio)
        assert np.all(np.isfinite(output[:, :1500]))
        assert np.all(np.isfinite(output[:, 2500:]))
        assert any(isinstance(w, NanFrameWarning) for w in warnings)
        assert enhancer.state.captured.skipped > 0

    def test_warmup(self):
        config = RunConfig(noise_scm_mode="online_spp", warmup_frames=10)
        enhancer = Enhancer(config, CHANNELS)
        assert enhancer.warming_up
        frames = self.rng.standard_normal((11, self.cfg.num_bins, CHANNELS)) + 0j
        for x in frames[:10]:
            assert enhancer.weights(x).kind is BeamformerKind.IDENTITY
        assert not enhancer.warming_up
        weights = enhancer.weights(frames[10])
        assert weights.kind is BeamformerKind.MOD_PMWF_APPROX
        assert np.all(np.isfinite(weights.W))

    def test_online_with_noise(self):
        config = RunConfig(noise_scm_mode="online_spp")
        enhancer = Enhancer(config, CHANNELS, self.noise_scm)
        assert not enhancer.warming_up
        output, _ = enhancer.process(noisy_audio(self.rng, 2000))
        assert np.all(np.isfinite(output))

    @pytest.mark.parametrize(
        "kind", ["mod_pmwf_exact", "gev_mvdr", "max_snr", "ur_mwf"]
    )
    def test_kinds(self, kind, small_scene):
        _, scene = small_scene
        config = RunConfig(beamformer=kind, power_iters=2)
        noise_scm = noise_scm_for(config, scene.noise_reference)
        audio = scene.captured[:, :16000]
        warnings = []
        enhancer = Enhancer(config, scene.num_channels, noise_scm, warnings)
        output, timing = enhancer.process(audio)
        assert output.shape == audio.shape
        assert np.all(np.isfinite(output))
        assert set(timing.to_dict()) == {
            "frames",
            "mean_ms",
            "max_ms",
            "p50_ms",
            "p99_ms",
            "real_time_factor",
            "hop_ms",
            "frames_over_hop",
        }

    def test_ur_mwf_tracks_inverse(self):
        audio = noisy_audio(self.rng, 4000)
        config = RunConfig(beamformer="ur_mwf")
        enhancer = Enhancer(config, CHANNELS, self.noise_scm)
        captured = enhancer.state.captured
        assert captured.track_inverse
        with patch("pymixbf.beamformers.solve_hpd") as solve:
            weights = list(enhancer.weights_stream(audio))
        solve.assert_not_called()
        direct = np.linalg.inv(captured.phi)
        np.testing.assert_allclose(captured.phi_inv, direct, rtol=1e-6, atol=1e-6)
        expected = np.linalg.solve(captured.phi, captured.phi - enhancer.state.phi_v)
        np.testing.assert_allclose(weights[-1].W, expected, atol=1e-6)

    def test_weights_stream(self):
        audio = noisy_audio(self.rng, 1000)
        enhancer = Enhancer(RunConfig(), CHANNELS, self.noise_scm)
        weights = list(enhancer.weights_stream(audio))
        assert len(weights) == self.cfg.num_frames(1000)
        assert weights[0].W.shape == (self.cfg.num_bins, CHANNELS, CHANNELS)
        assert enhancer.state.frames == len(weights)


class TestEndToEnd:
    def test_identity(self, small_scene):
        _, scene = small_scene
        report = evaluate_scene(scene, RunConfig(beamformer="identity"))
        assert abs(report.segdir_improvement_db) < 0.01
        assert report.segddr_db > 60

    @pytest.mark.parametrize("mode", ["precomputed_from_file", "online_spp"])
    def test_mod_pmwf_improves(self, small_scene, mode):
        _, scene = small_scene
        warnings = []
        config = RunConfig(noise_scm_mode=mode)
        report = evaluate_scene(scene, config, warnings=warnings)
        assert report.segdir_improvement_db > 0
        assert np.isfinite(report.segddr_db)
        assert not any(w.critical for w in warnings)


@pytest.fixture(scope="module")
def reverberant_scenes():
    return [
        render_scene(SceneSpec(rmnr_db=rmnr, seed=seed))
        for rmnr in (20.0, 10.0)
        for seed in (1, 2)
    ]


class TestBeamformerOrdering:
    # margins are checked on the mean over both noise levels
    def setup_method(self):
        self.kinds = ["mod_pmwf_approx", "gev_mvdr", "ur_mwf"]

    def test_precomputed(self, reverberant_scenes):
        results = compare_beamformers(reverberant_scenes, self.kinds)
        mod, gev, ur = (results[kind] for kind in self.kinds)
        assert mod["segdir_improvement_db"] > gev["segdir_improvement_db"]
        assert gev["segdir_improvement_db"] >= ur["segdir_improvement_db"]
        assert mod["segdir_improvement_db"] >= 3.0
        assert ur["segdir_improvement_db"] < mod["segdir_improvement_db"] - 2.0
        assert ur["segddr_db"] > max(mod["segddr_db"], gev["segddr_db"])

    def test_online_interference_scm(self, reverberant_scenes):
        kinds = ["mod_pmwf_approx"]
        stored = compare_beamformers(reverberant_scenes, kinds)[kinds[0]]
        online = compare_beamformers(
            reverberant_scenes, kinds, RunConfig(noise_scm_mode="online_spp")
        )[kinds[0]]
        assert online["segdir_improvement_db"] > 0
        gap = stored["segdir_improvement_db"] - online["segdir_improvement_db"]
        assert abs(gap) < 3.0


def test_hop_budget():
    clock = itertools.count(0.0, 0.01)
    warnings = []
    enhancer = Enhancer(RunConfig(beamformer="identity"), 2, warnings=warnings)
    with patch("pymixbf.enhancer.time.perf_counter", side_effect=lambda: next(clock)):
        _, timing = enhancer.process(np.zeros((2, 800)))
    assert timing.over_budget == timing.num_frames
    assert timing.real_time_factor == pytest.approx(2.0)
    assert warnings == [HopBudgetWarning(timing.num_frames, 0.005)]
