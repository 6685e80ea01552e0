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
Synthetic reverberant multichannel scenes with a known decomposition.

The captured signal is ``x = d + v`` where ``d`` holds the direct path and
early reflections of every source and ``v`` holds the late reverberation of
every source plus diffuse and sensor noise.
"""

import numpy as np
from scipy.signal import fftconvolve, lfilter

from .metrics import activity_mask

SPEED_OF_SOUND = 343.0
SINC_TAPS = 32
NUM_DIRECTIONS = 128

# 5 of the 8 vertices of a 4 cm cube
DEFAULT_GEOMETRY = (
    (-0.02, -0.02, -0.02),
    (0.02, 0.02, -0.02),
    (0.02, -0.02, 0.02),
    (-0.02, 0.02, 0.02),
    (0.02, 0.02, 0.02),
)
DEFAULT_SOURCES = ((0.707, 0.707, 0.0), (-0.866, 0.5, 0.0))


class InvalidScene(ValueError):
    pass


class Source(object):
    def __init__(self, position, signal=None, seed=None):
        self.position = position
        self.signal = signal
        self.seed = seed

    @property
    def position(self):
        return self._position

    @position.setter
    def position(self, value):
        value = np.asarray(value, dtype=np.float64)
        if value.shape != (3,) or not np.all(np.isfinite(value)):
            raise ValueError("Value should be a 3-D position in meters.")
        self._position = value

    @property
    def signal(self):
        return self._signal

    @signal.setter
    def signal(self, value):
        if value is not None:
            value = np.asarray(value, dtype=np.float64).ravel()
        self._signal = value

    def __repr__(self):
        return f"Source(position={self._position.tolist()})"


class SceneSpec(object):
    def __init__(
        self,
        mic_geometry=DEFAULT_GEOMETRY,
        sources=None,
        t60=0.38,
        rmnr_db=20.0,
        sample_rate=16000,
        early_ms=50.0,
        seed=0,
        duration=10.0,
        lead_in=0.5,
        sensor_noise_db=-30.0,
        noise_reference_s=5.0,
        room_volume=60.0,
    ):
        self.mic_geometry = mic_geometry
        if sources is None:
            sources = [Source(position) for position in DEFAULT_SOURCES]
        self.sources = list(sources)
        self.t60 = t60
        self.rmnr_db = rmnr_db
        self.sample_rate = sample_rate
        self.early_ms = early_ms
        self.seed = seed
        self.duration = duration
        self.lead_in = lead_in
        self.sensor_noise_db = sensor_noise_db
        self.noise_reference_s = noise_reference_s
        self.room_volume = room_volume

    @property
    def mic_geometry(self):
        return self._mic_geometry

    @mic_geometry.setter
    def mic_geometry(self, value):
        value = np.asarray(value, dtype=np.float64)
        if value.ndim != 2 or value.shape[1] != 3 or value.shape[0] < 1:
            raise ValueError("Value should be a list of 3-D positions in meters.")
        self._mic_geometry = value

    @property
    def t60(self):
        return self._t60

    @t60.setter
    def t60(self, value):
        if not value > 0:
            raise ValueError("Value should be a positive number of seconds.")
        self._t60 = float(value)

    @property
    def rmnr_db(self):
        return self._rmnr_db

    @rmnr_db.setter
    def rmnr_db(self, value):
        # None or +inf renders without noise
        if value is not None:
            value = float(value)
            if np.isnan(value) or value == -np.inf:
                raise ValueError("Value should be a ratio in dB, +inf or None.")
        self._rmnr_db = value

    @property
    def sample_rate(self):
        return self._sample_rate

    @sample_rate.setter
    def sample_rate(self, value):
        if not isinstance(value, (int, np.integer)) or value <= 0:
            raise ValueError("Value should be a positive integer.")
        self._sample_rate = int(value)

    @property
    def early_ms(self):
        return self._early_ms

    @early_ms.setter
    def early_ms(self, value):
        if not value > 0:
            raise ValueError("Value should be a positive number of milliseconds.")
        self._early_ms = float(value)

    @property
    def has_noise(self):
        return self._rmnr_db is not None and np.isfinite(self._rmnr_db)

    @property
    def num_mics(self):
        return self._mic_geometry.shape[0]

    def validate(self):
        if not self.sources:
            raise InvalidScene("The scene has no sources.")
        for index, source in enumerate(self.sources):
            distances = np.linalg.norm(self._mic_geometry - source.position, axis=1)
            if np.any(distances <= 0):
                raise InvalidScene(f"Source {index} coincides with a microphone.")
            if source.signal is not None and not np.any(source.signal):
                raise InvalidScene(f"Source {index} is silent.")
        if self.duration <= 0 and any(s.signal is None for s in self.sources):
            raise InvalidScene("Generated sources need a positive duration.")
        if self.lead_in < 0 or self.noise_reference_s < 0 or self.room_volume <= 0:
            raise InvalidScene("Lead-in, noise reference and room volume are invalid.")

    def source_seed(self, index):
        source = self.sources[index]
        if source.seed is not None:
            return source.seed
        return np.random.SeedSequence([self.seed, index])

    def to_dict(self):
        return {
            "mic_geometry": self._mic_geometry.tolist(),
            "sources": [
                {"position": s.position.tolist(), "seed": s.seed} for s in self.sources
            ],
            "t60": self._t60,
            "rmnr_db": self._rmnr_db,
            "sample_rate": self._sample_rate,
            "early_ms": self._early_ms,
            "seed": self.seed,
            "duration": self.duration,
            "lead_in": self.lead_in,
            "sensor_noise_db": self.sensor_noise_db,
            "noise_reference_s": self.noise_reference_s,
            "room_volume": self.room_volume,
        }


class SceneOutput(object):
    def __init__(
        self,
        desired,
        per_source_desired,
        interference,
        activity,
        sample_rate,
        noise_reference=None,
        rmnr_measured_db=None,
    ):
        self.desired = desired
        self.per_source_desired = per_source_desired
        self.interference = interference
        self.captured = desired + interference
        self.activity = activity
        self.sample_rate = sample_rate
        self.noise_reference = noise_reference
        self.rmnr_measured_db = rmnr_measured_db

    @property
    def num_sources(self):
        return len(self.per_source_desired)

    @property
    def num_channels(self):
        return self.captured.shape[0]

    def __repr__(self):
        return (
            f"SceneOutput(channels={self.num_channels}, "
            f"samples={self.captured.shape[1]}, sources={self.num_sources})"
        )


def _rng(seed):
    return np.random.default_rng(seed)


def _child_seed(seed, *key):
    if isinstance(seed, np.random.SeedSequence):
        entropy = seed.entropy
        key = tuple(seed.spawn_key) + key
        return np.random.SeedSequence(entropy, spawn_key=key)
    return np.random.SeedSequence([seed, *key])


def fibonacci_directions(count):
    """Nearly uniform unit vectors on the sphere, shape (count, 3)."""
    index = np.arange(count) + 0.5
    z = 1 - 2 * index / count
    radius = np.sqrt(1 - z ** 2)
    azimuth = np.pi * (1 + 5 ** 0.5) * index
    return np.stack([radius * np.cos(azimuth), radius * np.sin(azimuth), z], axis=1)


def make_diffuse_noise(geometry, duration, sr, seed, num_directions=NUM_DIRECTIONS):
    """
    Spherically isotropic noise from a sum of Gaussian plane waves.

    Every direction contributes an independent white spectrum, delayed per
    microphone by the projection of its position on the direction. Each
    channel has unit variance. ``duration`` is in seconds.
    """
    geometry = np.atleast_2d(np.asarray(geometry, dtype=np.float64))
    num_samples = int(round(duration * sr))
    if num_samples <= 0:
        raise ValueError("Value should be a positive duration.")
    nfft = 1 << int(np.ceil(np.log2(max(num_samples, 2))))
    omega = 2 * np.pi * sr * np.arange(nfft // 2 + 1) / nfft
    relative = geometry - geometry[0]
    rng = _rng(seed)
    spectrum = np.zeros((geometry.shape[0], omega.size), dtype=np.complex128)
    for direction in fibonacci_directions(num_directions):
        wave = rng.standard_normal(omega.size) + 1j * rng.standard_normal(omega.size)
        delays = relative @ direction / SPEED_OF_SOUND
        spectrum += wave * np.exp(-1j * delays[:, None] * omega)
    spectrum /= np.sqrt(2 * num_directions)
    return np.fft.irfft(spectrum, n=nfft, axis=-1, norm="ortho")[:, :num_samples]


def fractional_delay(delay, length, taps=SINC_TAPS):
    """Hann-windowed sinc impulse centred on the fractional sample ``delay``."""
    filt = np.zeros(length)
    start = int(np.floor(delay)) - taps // 2 + 1
    n = np.arange(start, start + taps)
    keep = (n >= 0) & (n < length)
    offset = n - delay
    window = 0.5 * (1 + np.cos(np.pi * offset / (taps / 2)))
    window[np.abs(offset) >= taps / 2] = 0
    filt[n[keep]] = (np.sinc(offset) * window)[keep]
    return filt


def critical_distance(t60, room_volume):
    return 0.057 * np.sqrt(room_volume / t60)


def _tail_length(t60, sr):
    return int(np.ceil(1.5 * t60 * sr)) + 1


def synth_array_rirs(source, geometry, t60, sr, seed, room_volume=60.0):
    """
    Impulse responses from ``source`` to every microphone, shape (M, L).

    Each response is a windowed-sinc direct path with 1/distance gain plus an
    exponentially decaying late tail. The tails are spatially diffuse across
    the array and carry a total energy of ``1 / r_c**2``.
    """
    geometry = np.atleast_2d(np.asarray(geometry, dtype=np.float64))
    distances = np.linalg.norm(geometry - np.asarray(source, dtype=np.float64), axis=1)
    if np.any(distances <= 0):
        raise InvalidScene("Source coincides with a microphone.")
    delays = distances / SPEED_OF_SOUND * sr
    onset = int(np.ceil(np.min(delays)))
    tail_len = _tail_length(t60, sr)
    length = int(np.ceil(np.max(delays))) + SINC_TAPS // 2 + tail_len
    rirs = np.stack(
        [fractional_delay(t, length) / r for t, r in zip(delays, distances)]
    )
    decay = 10 ** (-6 / (t60 * sr))
    initial = (1 - decay) / critical_distance(t60, room_volume) ** 2
    # amplitude envelope 10^(-3 t / t60)
    envelope = np.sqrt(initial) * decay ** (np.arange(tail_len) / 2)
    tail = make_diffuse_noise(geometry, tail_len / sr, sr, seed)[:, :tail_len]
    rirs[:, onset : onset + tail_len] += tail * envelope[: tail.shape[1]]
    return rirs


def synth_rir(src, mic, t60, sr, seed, room_volume=60.0):
    return synth_array_rirs(src, [mic], t60, sr, seed, room_volume)[0]


def direct_delay(source, geometry, sr):
    """Earliest direct-path arrival over the array, in samples."""
    geometry = np.atleast_2d(np.asarray(geometry, dtype=np.float64))
    distances = np.linalg.norm(geometry - np.asarray(source, dtype=np.float64), axis=1)
    return float(np.min(distances)) / SPEED_OF_SOUND * sr


def split_rir(rir, early_ms, sr=16000, delay=None):
    """
    Split responses at ``delay + early_ms`` into early and late parts.

    Both parts keep the full length, so ``early + late == rir`` exactly. When
    ``delay`` is not given it is taken from the strongest sample.
    """
    rir = np.asarray(rir, dtype=np.float64)
    if rir.shape[-1] == 0:
        raise ValueError("Impulse response is empty.")
    if delay is None:
        delay = np.min(np.argmax(np.abs(rir.reshape(-1, rir.shape[-1])), axis=-1))
    boundary = int(round(delay)) + int(round(early_ms * sr / 1000))
    boundary = min(max(boundary, 0), rir.shape[-1])
    early = rir.copy()
    early[..., boundary:] = 0
    late = rir.copy()
    late[..., :boundary] = 0
    return early, late


def speech_like(duration, sr, seed):
    """
    Speech-shaped test signal.

    Low-pass coloured noise under a syllabic amplitude modulation, cut into
    talk spurts and pauses.
    """
    rng = _rng(seed)
    num_samples = int(round(duration * sr))
    noise = lfilter([1.0], [1.0, -0.9], rng.standard_normal(num_samples))
    t = np.arange(num_samples) / sr
    rate = rng.uniform(3.0, 5.0)
    phase = rng.uniform(0, 2 * np.pi)
    modulation = (0.55 + 0.45 * np.sin(2 * np.pi * rate * t + phase)) ** 2
    gate = np.zeros(num_samples)
    position = 0
    while position < num_samples:
        talk = int(rng.uniform(0.6, 2.0) * sr)
        gate[position : position + talk] = 1.0
        position += talk + int(rng.uniform(0.15, 0.6) * sr)
    # short fades keep the spurts click-free
    fade = np.hanning(int(0.02 * sr) | 1)
    gate = np.convolve(gate, fade / np.sum(fade), mode="same")
    signal = noise * modulation * gate
    return signal / max(np.max(np.abs(signal)), np.finfo(np.float64).tiny) * 0.5


def activity(signal, sr, segment_ms=50.0, threshold_db=-40.0):
    """Segment-wise activity of one source signal."""
    delta = int(round(segment_ms * sr / 1000))
    return activity_mask([signal], delta, threshold_db)[0]


def _power(signal):
    return float(np.mean(np.abs(signal) ** 2)) if signal.size else 0.0


def _noise_field(spec, num_samples, seed):
    sr = spec.sample_rate
    diffuse = make_diffuse_noise(spec.mic_geometry, num_samples / sr, sr, seed)
    sensor = _rng(_child_seed(seed, 1)).standard_normal(diffuse.shape)
    return diffuse + sensor * 10 ** (spec.sensor_noise_db / 20)


def _source_signal(spec, index, seed):
    source = spec.sources[index]
    if source.signal is not None:
        return source.signal
    return speech_like(spec.duration, spec.sample_rate, _child_seed(seed, 0))


def render_scene(spec):
    """Render the scene and its ground-truth decomposition."""
    spec.validate()
    sr = spec.sample_rate
    lead = int(round(spec.lead_in * sr))
    signals = []
    for index in range(len(spec.sources)):
        signal = _source_signal(spec, index, spec.source_seed(index))
        if not np.any(signal):
            raise InvalidScene(f"Source {index} is silent.")
        signals.append(signal)
    num_samples = lead + max(len(s) for s in signals)
    geometry = spec.mic_geometry
    per_source_desired = []
    late_sum = np.zeros((spec.num_mics, num_samples))
    padded = []
    for index, signal in enumerate(signals):
        dry = np.zeros(num_samples)
        dry[lead : lead + len(signal)] = signal
        padded.append(dry)
        seed = _child_seed(spec.source_seed(index), 1)
        position = spec.sources[index].position
        rirs = synth_array_rirs(
            position, geometry, spec.t60, sr, seed, spec.room_volume
        )
        delay = direct_delay(position, geometry, sr)
        early, late = split_rir(rirs, spec.early_ms, sr, delay)
        desired_n = fftconvolve(dry[None, :], early, axes=-1)[:, :num_samples]
        per_source_desired.append(desired_n)
        late_sum += fftconvolve(dry[None, :], late, axes=-1)[:, :num_samples]
    desired = sum(per_source_desired)
    noise_reference = None
    rmnr_measured = None
    interference = late_sum
    if spec.has_noise:
        noise = _noise_field(spec, num_samples, _child_seed(spec.seed, 1000))
        mixture_power = _power(desired + late_sum)
        gain = np.sqrt(mixture_power / (_power(noise) * 10 ** (spec.rmnr_db / 10)))
        interference = late_sum + gain * noise
        rmnr_measured = 10 * np.log10(mixture_power / _power(gain * noise))
        ref_samples = int(round(spec.noise_reference_s * sr))
        if ref_samples > 0:
            reference = _noise_field(spec, ref_samples, _child_seed(spec.seed, 1001))
            noise_reference = gain * reference
    activity_rows = np.stack([activity(dry, sr) for dry in padded])
    return SceneOutput(
        desired,
        per_source_desired,
        interference,
        activity_rows,
        sr,
        noise_reference,
        rmnr_measured,
    )
