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

"""
Streaming short-time Fourier transform with perfect-reconstruction overlap-add.

Audio is channels-first, shape (M, samples). A frame holds the one-sided
spectrum of every channel with shape (F, M), frequency first, so that the
per-bin observation vectors are contiguous rows.
"""

import numpy as np
from scipy.signal import get_window

COLA_TOLERANCE = 1e-12


class InvalidFrame(ValueError):
    pass


class StftConfig(object):
    def __init__(self, sample_rate=16000, window_len=320, hop=80, window="sqrt_hann"):
        self.sample_rate = sample_rate
        self.window_len = window_len
        self.hop = hop
        self.window = window
        self._validate()

    @property
    def sample_rate(self):
        return self._sample_rate

    @sample_rate.setter
    def sample_rate(self, value):
        if not isinstance(value, (int, np.integer)) or value <= 0:
            raise ValueError("Value should be a positive integer.")
        self._sample_rate = int(value)

    @property
    def window_len(self):
        return self._window_len

    @window_len.setter
    def window_len(self, value):
        if not isinstance(value, (int, np.integer)) or value <= 0:
            raise ValueError("Value should be a positive integer.")
        self._window_len = int(value)
        self._windows = None

    @property
    def hop(self):
        return self._hop

    @hop.setter
    def hop(self, value):
        if not isinstance(value, (int, np.integer)) or value <= 0:
            raise ValueError("Value should be a positive integer.")
        self._hop = int(value)
        self._windows = None

    @property
    def window(self):
        return self._window

    @window.setter
    def window(self, value):
        if not isinstance(value, str):
            raise ValueError("Value should be string.")
        self._window = value
        self._windows = None

    @property
    def fft_size(self):
        return self._window_len

    @property
    def num_bins(self):
        return self.fft_size // 2 + 1

    @property
    def overlap(self):
        return self._window_len // self._hop

    @property
    def hop_seconds(self):
        return self._hop / self._sample_rate

    @property
    def analysis_window(self):
        return self._get_windows()[0]

    @property
    def synthesis_window(self):
        return self._get_windows()[1]

    def _get_windows(self):
        if self._windows is None:
            if self._window == "sqrt_hann":
                window = np.sqrt(get_window("hann", self._window_len, fftbins=True))
            else:
                window = get_window(self._window, self._window_len, fftbins=True)
            # unit energy, so SCMs come out in per-sample power units
            analysis = window / np.sqrt(np.sum(window ** 2))
            overlapped = np.sum(
                (analysis ** 2).reshape(self.overlap, self._hop), axis=0
            )
            if np.min(overlapped) <= 0:
                raise ValueError(
                    f"Window '{self._window}' does not overlap-add "
                    f"at hop {self._hop}."
                )
            synthesis = analysis / np.tile(overlapped, self.overlap)
            self._windows = (analysis, synthesis)
        return self._windows

    def _validate(self):
        if self._window_len % self._hop:
            raise ValueError(
                f"Hop {self._hop} does not divide window length {self._window_len}."
            )
        analysis, synthesis = self._get_windows()
        cola = np.sum((analysis * synthesis).reshape(self.overlap, self._hop), axis=0)
        if np.max(np.abs(cola - 1.0)) > COLA_TOLERANCE:
            raise ValueError("Analysis/synthesis windows violate overlap-add.")

    def num_frames(self, num_samples):
        if num_samples <= 0:
            return 0
        return -(-num_samples // self._hop) + self.overlap - 1

    def to_dict(self):
        return {
            "sample_rate": self._sample_rate,
            "window_len": self._window_len,
            "hop": self._hop,
            "window": self._window,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def __eq__(self, other):
        if isinstance(other, StftConfig):
            return self.to_dict() == other.to_dict()
        return NotImplemented

    def __repr__(self):
        return (
            f"StftConfig(sample_rate={self._sample_rate}, "
            f"window_len={self._window_len}, hop={self._hop}, "
            f"window={repr(self._window)})"
        )


class MultichannelSpectrum(object):
    def __init__(self, frame_index, bins):
        self.frame_index = int(frame_index)
        self.bins = bins

    @property
    def num_bins(self):
        return self.bins.shape[0]

    @property
    def num_channels(self):
        return self.bins.shape[1]

    @property
    def is_finite(self):
        return bool(np.all(np.isfinite(self.bins)))

    def with_bins(self, bins):
        return MultichannelSpectrum(self.frame_index, bins)

    def __repr__(self):
        return (
            f"MultichannelSpectrum(frame_index={self.frame_index}, "
            f"bins={self.num_bins}, channels={self.num_channels})"
        )


def as_audio(audio):
    """Coerce channels-first audio to a float array, checking channel lengths."""
    if isinstance(audio, np.ndarray):
        audio = np.asarray(audio, dtype=np.float64)
        if audio.ndim == 1:
            audio = audio[None, :]
    else:
        channels = [np.asarray(x, dtype=np.float64).ravel() for x in audio]
        if len({len(x) for x in channels}) > 1:
            lengths = ", ".join(str(len(x)) for x in channels)
            raise InvalidFrame(f"Channel lengths differ: {lengths}.")
        audio = np.stack(channels) if channels else np.zeros((0, 0))
    if audio.ndim != 2:
        raise InvalidFrame(f"Audio should be (channels, samples), got {audio.shape}.")
    if audio.shape[0] == 0:
        raise InvalidFrame("Audio has no channels.")
    return audio


class StreamingAnalyzer(object):
    """
    Push samples in, get frames out.

    Frame t is emitted as soon as samples up to t*hop + hop are available,
    ``window_len - hop`` zeros precede the first sample.
    """

    def __init__(self, cfg, num_channels):
        if num_channels < 1:
            raise InvalidFrame("Audio has no channels.")
        self.cfg = cfg
        self.num_channels = num_channels
        self._buffer = np.zeros((num_channels, cfg.window_len - cfg.hop))
        self._samples_in = 0
        self._frames_out = 0

    def push(self, samples):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[None, :]
        if samples.shape[0] != self.num_channels:
            raise InvalidFrame(
                f"Expected {self.num_channels} channels, got {samples.shape[0]}."
            )
        self._samples_in += samples.shape[1]
        self._buffer = np.concatenate([self._buffer, samples], axis=1)
        return self._drain()

    def flush(self):
        missing = self.cfg.num_frames(self._samples_in) - self._frames_out
        if missing <= 0:
            return []
        needed = self.cfg.window_len + (missing - 1) * self.cfg.hop
        pad = max(needed - self._buffer.shape[1], 0)
        self._buffer = np.concatenate(
            [self._buffer, np.zeros((self.num_channels, pad))], axis=1
        )
        return self._drain(limit=missing)

    def _drain(self, limit=None):
        cfg = self.cfg
        window = cfg.analysis_window
        frames = []
        while self._buffer.shape[1] >= cfg.window_len:
            if limit is not None and len(frames) >= limit:
                break
            segment = self._buffer[:, : cfg.window_len]
            spectrum = np.fft.rfft(segment * window, n=cfg.fft_size, axis=-1)
            frames.append(
                MultichannelSpectrum(self._frames_out, np.ascontiguousarray(spectrum.T))
            )
            self._frames_out += 1
            self._buffer = self._buffer[:, cfg.hop :]
        return frames


class StreamingSynthesizer(object):
    """Push frames in, get ``hop`` finished samples out per frame."""

    def __init__(self, cfg, num_channels):
        self.cfg = cfg
        self.num_channels = num_channels
        self._buffer = np.zeros((num_channels, cfg.window_len))
        self._last_index = None
        # leading samples that belong to the analysis zero padding
        self._discard = cfg.window_len - cfg.hop

    def push(self, frame):
        cfg = self.cfg
        if self._last_index is not None and frame.frame_index != self._last_index + 1:
            raise InvalidFrame(
                f"Frame {frame.frame_index} arrived after frame {self._last_index}."
            )
        if frame.bins.shape != (cfg.num_bins, self.num_channels):
            raise InvalidFrame(
                f"Frame has shape {frame.bins.shape}, expected "
                f"({cfg.num_bins}, {self.num_channels})."
            )
        self._last_index = frame.frame_index
        segment = np.fft.irfft(frame.bins.T, n=cfg.fft_size, axis=-1)
        self._buffer += segment[:, : cfg.window_len] * cfg.synthesis_window
        done = self._buffer[:, : cfg.hop].copy()
        self._buffer = np.concatenate(
            [self._buffer[:, cfg.hop :], np.zeros((self.num_channels, cfg.hop))], axis=1
        )
        return self._trim(done)

    def flush(self):
        tail = self._buffer[:, : self.cfg.window_len - self.cfg.hop].copy()
        self._buffer = np.zeros_like(self._buffer)
        return self._trim(tail)

    def _trim(self, samples):
        if self._discard:
            cut = min(self._discard, samples.shape[1])
            self._discard -= cut
            samples = samples[:, cut:]
        return samples


def analyze(audio, cfg):
    """Split (M, samples) audio into a list of MultichannelSpectrum frames."""
    audio = as_audio(audio)
    if not np.all(np.isfinite(audio)):
        raise InvalidFrame("Audio contains non-finite samples.")
    analyzer = StreamingAnalyzer(cfg, audio.shape[0])
    return analyzer.push(audio) + analyzer.flush()


def analyze_array(audio, cfg):
    frames = analyze(audio, cfg)
    if not frames:
        return np.zeros((0, cfg.num_bins, as_audio(audio).shape[0]), dtype=complex)
    return np.stack([frame.bins for frame in frames])


def synthesize(frames, cfg, length=None):
    """Overlap-add frames back to (M, samples) audio."""
    frames = list(frames)
    if not frames:
        return np.zeros((0, length or 0))
    for previous, current in zip(frames, frames[1:]):
        if current.frame_index <= previous.frame_index:
            raise InvalidFrame(
                f"Frames out of order: {current.frame_index} "
                f"after {previous.frame_index}."
            )
    num_channels = frames[0].num_channels
    synthesizer = StreamingSynthesizer(cfg, num_channels)
    chunks = [synthesizer.push(frame) for frame in frames]
    chunks.append(synthesizer.flush())
    signal = np.concatenate(chunks, axis=1)
    if length is None:
        length = len(frames) * cfg.hop - (cfg.window_len - cfg.hop)
    if signal.shape[1] < length:
        signal = np.pad(signal, ((0, 0), (0, length - signal.shape[1])))
    return signal[:, : max(length, 0)]


def synthesize_array(spectra, cfg, length=None):
    frames = [MultichannelSpectrum(t, bins) for t, bins in enumerate(spectra)]
    return synthesize(frames, cfg, length)
