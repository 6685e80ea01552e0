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
Segmental desired-to-interference and desired-to-distortion ratios.

Signals are channels-first (M, samples). Segment energies are summed over all
channels, only full segments are scored.
"""

import csv
import json
import logging
from itertools import zip_longest

import numpy as np

from .beamformers import apply
from .stft import as_audio, analyze, synthesize
from .warnings import NoActivityWarning

logger = logging.getLogger(__name__)

DB_CAP = 100.0
DEFAULT_DELTA = 800
ACTIVITY_THRESHOLD_DB = -40.0
TINY = np.finfo(np.float64).tiny


class EmptyActiveSet(ValueError):
    pass


class ComponentMismatch(ValueError):
    pass


class SegmentSet(object):
    def __init__(self, delta=DEFAULT_DELTA, active=(), num_segments=None):
        self.delta = delta
        self.num_segments = num_segments
        self.active = active

    @property
    def delta(self):
        return self._delta

    @delta.setter
    def delta(self, value):
        if not isinstance(value, (int, np.integer)) or value <= 0:
            raise ValueError("Value should be a positive integer.")
        self._delta = int(value)

    @property
    def active(self):
        return self._active

    @active.setter
    def active(self, value):
        value = [int(x) for x in value]
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("Value should be unique ascending segment indices.")
        if value and value[0] < 0:
            raise ValueError("Value should hold non-negative segment indices.")
        if self.num_segments is not None and value and value[-1] >= self.num_segments:
            raise ValueError("Value should hold indices within the signal.")
        self._active = value

    def __len__(self):
        return len(self._active)

    def __iter__(self):
        return iter(self._active)

    def __repr__(self):
        return f"SegmentSet(delta={self._delta}, active={len(self._active)})"


class MetricReport(object):
    def __init__(
        self, segdir_db, segddr_db, observed_segdir_db, per_segment=None, **info
    ):
        self.segdir_db = float(segdir_db)
        self.segddr_db = float(segddr_db)
        self.observed_segdir_db = float(observed_segdir_db)
        self.per_segment = per_segment
        self.info = info

    @property
    def segdir_improvement_db(self):
        return self.segdir_db - self.observed_segdir_db

    def to_dict(self):
        data = dict(self.info)
        data.update(
            {
                "segdir_db": self.segdir_db,
                "segddr_db": self.segddr_db,
                "observed_segdir_db": self.observed_segdir_db,
                "segdir_improvement_db": self.segdir_improvement_db,
            }
        )
        return data

    def write_json(self, path):
        with open(path, "w") as json_file:
            json.dump(self.to_dict(), json_file, indent=2)
            json_file.write("\n")

    def write_csv(self, path):
        if self.per_segment is None:
            raise ValueError("Report has no per-segment rows.")
        fields = ["segment", "segdir_db", "segddr_db", "observed_segdir_db"]
        with open(path, "w", newline="") as csv_file:
            writer = csv.DictWriter(csv_file, fieldnames=fields)
            writer.writeheader()
            for row in self.per_segment:
                writer.writerow(row)

    def __repr__(self):
        return (
            f"MetricReport(segdir_db={self.segdir_db:.2f}, "
            f"segddr_db={self.segddr_db:.2f}, "
            f"improvement={self.segdir_improvement_db:.2f})"
        )


def segment_energy(signal, delta):
    """Energy of every full ``delta``-sample segment, summed over channels."""
    signal = np.asarray(signal)
    if signal.ndim == 1:
        signal = signal[None, :]
    count = signal.shape[-1] // delta
    blocks = signal[..., : count * delta].reshape(signal.shape[:-1] + (count, delta))
    energy = np.sum(np.abs(blocks) ** 2, axis=-1)
    return np.sum(energy.reshape(-1, energy.shape[-1]), axis=0)


def segment_db(num, den):
    """Per-segment ``10 log10(num / den)``, capped at +-100 dB."""
    num = np.maximum(np.asarray(num, dtype=np.float64), TINY)
    den = np.maximum(np.asarray(den, dtype=np.float64), TINY)
    return np.clip(10 * np.log10(num / den), -DB_CAP, DB_CAP)


def _check_pair(a, b):
    a = as_audio(a)
    b = as_audio(b)
    if a.shape != b.shape:
        raise ComponentMismatch(f"Signal shapes differ: {a.shape} and {b.shape}.")
    return a, b


def _mean_over(values, segs):
    if len(segs) == 0:
        raise EmptyActiveSet("No active segments to average over.")
    return float(np.mean(values[segs.active]))


def segdir_per_segment(d_hat, v_hat, delta=DEFAULT_DELTA):
    d_hat, v_hat = _check_pair(d_hat, v_hat)
    return segment_db(segment_energy(d_hat, delta), segment_energy(v_hat, delta))


def segddr_per_segment(d_hat, d, delta=DEFAULT_DELTA):
    d_hat, d = _check_pair(d_hat, d)
    return segment_db(segment_energy(d, delta), segment_energy(d_hat - d, delta))


def segdir(d_hat, v_hat, segs):
    return _mean_over(segdir_per_segment(d_hat, v_hat, segs.delta), segs)


def segddr(d_hat, d, segs):
    return _mean_over(segddr_per_segment(d_hat, d, segs.delta), segs)


def activity_mask(per_source, delta=DEFAULT_DELTA, threshold_db=ACTIVITY_THRESHOLD_DB):
    """
    Per-source segment activity, shape (N, segments).

    A segment is active for a source when its energy exceeds the source's
    loudest segment by ``threshold_db`` (negative) or more.
    """
    energies = np.stack([segment_energy(source, delta) for source in per_source])
    if energies.shape[1] == 0:
        return energies.astype(bool)
    peak = np.max(energies, axis=1, keepdims=True)
    return energies > peak * 10 ** (threshold_db / 10)


def active_segments(
    per_source_desired,
    delta=DEFAULT_DELTA,
    threshold_db=ACTIVITY_THRESHOLD_DB,
    warnings=None,
):
    if len(per_source_desired) == 0:
        raise ValueError("At least one source is needed.")
    mask = activity_mask(per_source_desired, delta, threshold_db)
    active = np.flatnonzero(np.any(mask, axis=0))
    if active.size == 0:
        logger.warning("No active segments found.")
        if warnings is not None:
            warnings.append(NoActivityWarning())
    return SegmentSet(delta, active.tolist(), mask.shape[1])


def component_pass(weights_stream, d, v, cfg):
    """
    Filter the desired and interference components with a weight stream.

    ``weights_stream`` yields one weight batch (F, M, M) per frame, as computed
    from the captured signal. Returns the filtered ``(d_hat, v_hat)``.
    """
    d, v = _check_pair(d, v)
    out_d = []
    out_v = []
    missing = object()
    frames = zip_longest(
        weights_stream, analyze(d, cfg), analyze(v, cfg), fillvalue=missing
    )
    for weights, frame_d, frame_v in frames:
        if weights is missing or frame_d is missing:
            raise ComponentMismatch(
                "Weight stream and signals have different frame counts."
            )
        out_d.append(frame_d.with_bins(apply(weights, frame_d.bins)))
        out_v.append(frame_v.with_bins(apply(weights, frame_v.bins)))
    length = d.shape[1]
    return synthesize(out_d, cfg, length), synthesize(out_v, cfg, length)


def evaluate(
    d_hat,
    v_hat,
    d,
    v,
    per_source_desired,
    delta=DEFAULT_DELTA,
    details=False,
    warnings=None,
    **info,
):
    """Score filtered components against the unprocessed ones."""
    segs = active_segments(per_source_desired, delta, warnings=warnings)
    dir_rows = segdir_per_segment(d_hat, v_hat, delta)
    ddr_rows = segddr_per_segment(d_hat, d, delta)
    observed_rows = segdir_per_segment(d, v, delta)
    per_segment = None
    if details:
        per_segment = [
            {
                "segment": tau,
                "segdir_db": float(dir_rows[tau]),
                "segddr_db": float(ddr_rows[tau]),
                "observed_segdir_db": float(observed_rows[tau]),
            }
            for tau in segs
        ]
    report = MetricReport(
        _mean_over(dir_rows, segs),
        _mean_over(ddr_rows, segs),
        _mean_over(observed_rows, segs),
        per_segment,
        active_segments=len(segs),
        delta=delta,
        **info,
    )
    logger.info("%s over %d active segment(s)", report, len(segs))
    return report
