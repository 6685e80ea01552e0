# Copyright 2021 Daniel Nunes
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Frame-by-frame online enhancement."""

import logging
import time

import numpy as np

from .base import BeamformerKind, NoiseScmMode
from .beamformers import (
    BeamformerWeights,
    TradeoffGamma,
    apply,
    desired_scm_estimate,
    gev_mvdr,
    maxsnr,
    mod_pmwf_approx,
    mod_pmwf_exact,
    ur_mwf,
)
from .linalg import hermitize, load_diagonal, power_iteration
from .stft import StftConfig, StreamingAnalyzer, StreamingSynthesizer, as_audio
from .tracking import (
    InterferenceTracker,
    ScmTracker,
    init_from_frames,
    spp_estimate,
    update_interference_scm,
    update_scm,
)
from .warnings import DegeneratePowerWarning, HopBudgetWarning

logger = logging.getLogger(__name__)

STREAMING_KINDS = (
    BeamformerKind.MOD_PMWF_APPROX,
    BeamformerKind.MOD_PMWF_EXACT,
    BeamformerKind.GEV_MVDR,
    BeamformerKind.MAX_SNR,
    BeamformerKind.UR_MWF,
    BeamformerKind.IDENTITY,
)


class InvalidConfiguration(ValueError):
    pass


def _unit_interval(value, open_zero=True):
    value = float(value)
    low_ok = value > 0 if open_zero else value >= 0
    if not (low_ok and value <= 1):
        raise ValueError("Value should be in (0, 1].")
    return value


class RunConfig(object):
    def __init__(
        self,
        beamformer=None,
        gamma=0.0,
        beta=None,
        alpha=0.9998,
        noise_scm_mode=None,
        stft=None,
        power_iters=1,
        warmup_frames=100,
        all_channels=False,
        seed=0,
    ):
        self.beamformer = beamformer or BeamformerKind.default()
        self.gamma = gamma
        self.beta = beta
        self.alpha = alpha
        self.noise_scm_mode = noise_scm_mode or NoiseScmMode.default()
        self.stft = stft or StftConfig()
        self.power_iters = power_iters
        self.warmup_frames = warmup_frames
        self.all_channels = all_channels
        self.seed = seed

    @property
    def beamformer(self):
        return self._beamformer

    @beamformer.setter
    def beamformer(self, value):
        self._beamformer = BeamformerKind.parse(value)

    @property
    def gamma(self):
        return self._gamma

    @gamma.setter
    def gamma(self, value):
        self._gamma = TradeoffGamma(value)

    @property
    def beta(self):
        """Forgetting factor, defaults per beamformer kind."""
        if self._beta is None:
            return self._beamformer.default_beta
        return self._beta

    @beta.setter
    def beta(self, value):
        self._beta = None if value is None else _unit_interval(value)

    @property
    def alpha(self):
        return self._alpha

    @alpha.setter
    def alpha(self, value):
        self._alpha = _unit_interval(value)

    @property
    def noise_scm_mode(self):
        return self._noise_scm_mode

    @noise_scm_mode.setter
    def noise_scm_mode(self, value):
        self._noise_scm_mode = NoiseScmMode.parse(value)

    @property
    def stft(self):
        return self._stft

    @stft.setter
    def stft(self, value):
        if isinstance(value, dict):
            value = StftConfig.from_dict(value)
        if not isinstance(value, StftConfig):
            raise ValueError("Value should be StftConfig.")
        self._stft = value

    @property
    def power_iters(self):
        return self._power_iters

    @power_iters.setter
    def power_iters(self, value):
        if not isinstance(value, (int, np.integer)) or value < 1:
            raise ValueError("Value should be a positive integer.")
        self._power_iters = int(value)

    @property
    def warmup_frames(self):
        return self._warmup_frames

    @warmup_frames.setter
    def warmup_frames(self, value):
        if not isinstance(value, (int, np.integer)) or value < 0:
            raise ValueError("Value should be a non-negative integer.")
        self._warmup_frames = int(value)

    @property
    def all_channels(self):
        return self._all_channels

    @all_channels.setter
    def all_channels(self, value):
        if not isinstance(value, bool):
            raise ValueError("Value should be boolean.")
        self._all_channels = value

    def to_dict(self):
        return {
            "beamformer": self._beamformer.value,
            "gamma": float(self._gamma),
            "beta": self.beta,
            "alpha": self._alpha,
            "noise_scm_mode": self._noise_scm_mode.value,
            "stft": self._stft.to_dict(),
            "power_iters": self._power_iters,
            "warmup_frames": self._warmup_frames,
            "all_channels": self._all_channels,
            "seed": self.seed,
        }

    def __repr__(self):
        return f"RunConfig({self.to_dict()})"


class TimingReport(object):
    def __init__(self, frame_times, hop_seconds):
        self.frame_times = np.asarray(frame_times, dtype=np.float64)
        self.hop_seconds = hop_seconds

    @property
    def num_frames(self):
        return self.frame_times.size

    @property
    def over_budget(self):
        return int(np.sum(self.frame_times > self.hop_seconds))

    @property
    def real_time_factor(self):
        if not self.num_frames:
            return 0.0
        return float(np.sum(self.frame_times) / (self.num_frames * self.hop_seconds))

    def percentile(self, q):
        if not self.num_frames:
            return 0.0
        return float(np.percentile(self.frame_times, q))

    def to_dict(self):
        mean = float(np.mean(self.frame_times)) if self.num_frames else 0.0
        peak = float(np.max(self.frame_times)) if self.num_frames else 0.0
        return {
            "frames": self.num_frames,
            "mean_ms": mean * 1000,
            "max_ms": peak * 1000,
            "p50_ms": self.percentile(50) * 1000,
            "p99_ms": self.percentile(99) * 1000,
            "real_time_factor": self.real_time_factor,
            "hop_ms": self.hop_seconds * 1000,
            "frames_over_hop": self.over_budget,
        }


class EnhancerState(object):
    """Per-bin state carried from frame to frame."""

    def __init__(self, interference, captured, u):
        self.interference = interference
        self.captured = captured
        self.u = u
        self.frames = 0

    @property
    def phi_v(self):
        return self.interference.phi_v

    @property
    def phi_v_inv(self):
        return self.interference.phi_v_inv

    @property
    def phi_x(self):
        return self.captured.phi


class Enhancer(object):
    """
    Online beamformer over all frequency bins.

    ``noise_scm`` is the (F, M, M) interference SCM, required unless the
    configuration tracks it online. Without it the online mode seeds the
    interference SCM from the first ``warmup_frames`` frames and passes the
    input through meanwhile.
    """

    def __init__(self, config, num_channels, noise_scm=None, warnings=None):
        self.config = config
        self.num_channels = num_channels
        self.warnings = warnings
        self.state = None
        self._warmup = []
        kind = config.beamformer
        if kind not in STREAMING_KINDS:
            raise InvalidConfiguration(
                f"Beamformer '{kind.value}' needs per-source SCMs "
                "and cannot run online."
            )
        if kind.multichannel and num_channels < 2:
            raise InvalidConfiguration(
                f"Beamformer '{kind.value}' needs at least 2 channels, "
                f"got {num_channels}."
            )
        online = config.noise_scm_mode is NoiseScmMode.ONLINE_SPP
        if kind.multichannel and noise_scm is None:
            if not online:
                raise InvalidConfiguration(
                    "A noise SCM (or noise recording) is needed in "
                    f"'{config.noise_scm_mode.value}' mode."
                )
            if config.warmup_frames == 0:
                raise InvalidConfiguration(
                    "Online mode without a noise recording needs warmup frames."
                )
        if noise_scm is not None:
            noise_scm = np.asarray(noise_scm, dtype=np.complex128)
            expected = (config.stft.num_bins, num_channels, num_channels)
            if noise_scm.shape != expected:
                raise InvalidConfiguration(
                    f"Noise SCM has shape {noise_scm.shape}, expected {expected}."
                )
            if kind.multichannel:
                self.state = self._new_state(noise_scm)

    def _add_warning(self, warning):
        if self.warnings is not None:
            self.warnings.append(warning)

    def _new_state(self, phi_v):
        cfg = self.config
        phi_v = hermitize(phi_v)
        interference = InterferenceTracker(phi_v, cfg.alpha)
        # the captured-signal SCM starts from the interference SCM
        captured = ScmTracker(
            phi_v.copy(),
            cfg.beta,
            track_inverse=cfg.beamformer is BeamformerKind.UR_MWF,
        )
        # power iteration starts from the first microphone in every bin
        u = np.zeros(phi_v.shape[:-1], dtype=complex)
        u[:, 0] = 1
        return EnhancerState(interference, captured, u)

    @property
    def warming_up(self):
        return self.config.beamformer.multichannel and self.state is None

    def _seed_from_warmup(self, x):
        self._warmup.append(x)
        if len(self._warmup) < self.config.warmup_frames:
            return
        phi_v = init_from_frames(np.stack(self._warmup), min_frames=1, allow_zero=True)
        # all-zero warmup would leave the interference SCM singular
        phi_v = load_diagonal(phi_v) + 1e-20 * np.eye(self.num_channels)
        logger.info("Interference SCM seeded from %d frame(s)", len(self._warmup))
        self._warmup = []
        self.state = self._new_state(phi_v)

    def weights(self, x):
        """Advance the state by one frame ``x`` (F, M) and return its weights."""
        cfg = self.config
        kind = cfg.beamformer
        num_bins = x.shape[0]
        if not kind.multichannel:
            return BeamformerWeights.identity(self.num_channels, (num_bins,))
        if self.state is None:
            self._seed_from_warmup(x)
            return BeamformerWeights.identity(self.num_channels, (num_bins,))
        state = self.state
        warnings = self.warnings
        if cfg.noise_scm_mode is NoiseScmMode.ONLINE_SPP:
            # presence is judged against the SCM of the previous frames
            q = spp_estimate(
                np.nan_to_num(x), state.phi_v_inv, state.phi_x, warnings=warnings
            )
            update_interference_scm(state.interference, x, q, warnings=warnings)
        update_scm(state.captured, x, warnings=warnings)
        state.frames += 1
        if kind is BeamformerKind.MOD_PMWF_APPROX:
            return mod_pmwf_approx(state.phi_v_inv, state.phi_x, cfg.gamma, warnings)
        if kind is BeamformerKind.MOD_PMWF_EXACT:
            phi_d = desired_scm_estimate(state.phi_x, state.phi_v)
            return mod_pmwf_exact(state.phi_v_inv, phi_d, cfg.gamma, warnings)
        if kind is BeamformerKind.GEV_MVDR:
            weights, state.u = gev_mvdr(
                state.phi_v,
                state.phi_v_inv,
                state.phi_x,
                state.u,
                cfg.power_iters,
                warnings,
            )
            return weights
        if kind is BeamformerKind.MAX_SNR:
            u, degenerate = power_iteration(
                state.phi_v_inv, state.phi_x, state.u, cfg.power_iters
            )
            if np.any(degenerate):
                self._add_warning(DegeneratePowerWarning(np.flatnonzero(degenerate)))
            state.u = u
            return maxsnr(state.phi_v, u)
        return ur_mwf(state.phi_x, state.phi_v, state.captured.phi_inv)

    def weights_stream(self, audio):
        """Weights of every frame of ``audio``, computed causally."""
        audio = as_audio(audio)
        analyzer = StreamingAnalyzer(self.config.stft, audio.shape[0])
        for frame in analyzer.push(audio) + analyzer.flush():
            yield self.weights(frame.bins)

    def process(self, audio, length=None):
        """
        Enhance (M, samples) audio.

        Returns the M output channels and the per-frame timing report.
        """
        audio = as_audio(audio)
        if audio.shape[0] != self.num_channels:
            raise InvalidConfiguration(
                f"Expected {self.num_channels} channels, got {audio.shape[0]}."
            )
        cfg = self.config.stft
        analyzer = StreamingAnalyzer(cfg, self.num_channels)
        synthesizer = StreamingSynthesizer(cfg, self.num_channels)
        frames = analyzer.push(audio) + analyzer.flush()
        chunks = []
        frame_times = []
        for frame in frames:
            start = time.perf_counter()
            weights = self.weights(frame.bins)
            x = np.where(np.isfinite(frame.bins), frame.bins, 0)
            chunks.append(synthesizer.push(frame.with_bins(apply(weights, x))))
            frame_times.append(time.perf_counter() - start)
        chunks.append(synthesizer.flush())
        output = np.concatenate(chunks, axis=1)
        if length is None:
            length = audio.shape[1]
        output = output[:, :length]
        timing = TimingReport(frame_times, cfg.hop_seconds)
        if timing.over_budget:
            self._add_warning(HopBudgetWarning(timing.over_budget, cfg.hop_seconds))
        logger.info(
            "Enhanced %d frame(s) with %s, real-time factor %.3f",
            timing.num_frames,
            self.config.beamformer.value,
            timing.real_time_factor,
        )
        return output, timing
