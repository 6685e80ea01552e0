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

"""Reading and writing configurations, WAV files and scene directories."""

import json
import re
from pathlib import Path

import numpy as np
import soundfile as sf

from .enhancer import RunConfig
from .scene import InvalidScene, SceneOutput, SceneSpec, Source
from .stft import StftConfig
from .warnings import UnknownKeyWarning

CONFIG_KEYS = (
    "beamformer",
    "gamma",
    "beta",
    "alpha",
    "noise_scm_mode",
    "stft",
    "power_iters",
    "warmup_frames",
    "all_channels",
    "seed",
)
SCENE_KEYS = (
    "mic_geometry",
    "sources",
    "t60",
    "rmnr_db",
    "sample_rate",
    "early_ms",
    "seed",
    "duration",
    "lead_in",
    "sensor_noise_db",
    "noise_reference_s",
    "room_volume",
)
MANIFEST_NAME = "manifest.json"
CAPTURED_NAME = "captured.wav"
DESIRED_NAME = "desired.wav"
INTERFERENCE_NAME = "interference.wav"
NOISE_REFERENCE_NAME = "noise_reference.wav"
SOURCE_NAME = "source_{}.wav"
ACTIVITY_SEGMENT_MS = 50.0


class InvalidConfig(ValueError):
    pass


class Reader(object):
    def __init__(self, source, warnings=None):
        self.source = source
        self.warnings = warnings
        self.text = ""
        self.lines = {}

    def _add_warning(self, warning):
        if self.warnings is not None:
            self.warnings.append(warning)

    def load(self):
        if self.source is None:
            return {}
        self.text = Path(self.source).read_text()
        try:
            data = json.loads(self.text)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(
                f"{self.source}, line {exc.lineno}: {exc.msg}."
            ) from None
        if not isinstance(data, dict):
            raise InvalidConfig(f"{self.source}, line 1: expected a JSON object.")
        return data

    def lineno(self, key):
        if key not in self.lines:
            match = re.search(r'"{}"\s*:'.format(re.escape(key)), self.text)
            line = self.text.count("\n", 0, match.start()) + 1 if match else 0
            self.lines[key] = line
        return self.lines[key]

    def known(self, data, keys):
        result = {}
        for key, value in data.items():
            if key in keys:
                result[key] = value
            else:
                self._add_warning(UnknownKeyWarning(key, self.lineno(key)))
        return result

    def assign(self, target, key, value, convert=None):
        try:
            if convert is not None:
                value = convert(value)
            setattr(target, key, value)
        except (TypeError, ValueError) as exc:
            where = f"line {self.lineno(key)}" if self.lineno(key) else "override"
            raise InvalidConfig(f"{self.source}, {where}: '{key}': {exc}") from None


def _stft_config(value):
    if isinstance(value, StftConfig):
        return value
    if not isinstance(value, dict):
        raise ValueError("Value should be an object.")
    return StftConfig(**value)


def parse_config(source=None, warnings=None, **overrides):
    """
    Read a JSON run configuration.

    Unknown keys are reported and ignored. Keyword overrides that are not None
    replace file values.
    """
    reader = Reader(source, warnings)
    data = reader.known(reader.load(), CONFIG_KEYS)
    data.update({k: v for k, v in overrides.items() if v is not None})
    config = RunConfig()
    for key in CONFIG_KEYS:
        if key not in data:
            continue
        convert = _stft_config if key == "stft" else None
        reader.assign(config, key, data[key], convert)
    return config


def _source(reader, entry, base_dir, sample_rate):
    if not isinstance(entry, dict) or "position" not in entry:
        raise InvalidConfig(
            f"{reader.source}, line {reader.lineno('sources')}: "
            "every source needs a position."
        )
    signal = None
    if entry.get("wav"):
        audio, rate = read_wav(Path(base_dir, entry["wav"]))
        if rate != sample_rate:
            raise InvalidConfig(
                f"{reader.source}: '{entry['wav']}' is sampled at {rate} Hz, "
                f"the scene at {sample_rate} Hz."
            )
        signal = audio[0]
    try:
        return Source(entry["position"], signal, entry.get("seed"))
    except ValueError as exc:
        raise InvalidConfig(
            f"{reader.source}, line {reader.lineno('sources')}: 'sources': {exc}"
        ) from None


def parse_scene_spec(source=None, warnings=None, **overrides):
    """Read a JSON scene description, source WAVs are relative to the file."""
    reader = Reader(source, warnings)
    data = reader.known(reader.load(), SCENE_KEYS)
    data.update({k: v for k, v in overrides.items() if v is not None})
    spec = SceneSpec()
    for key in SCENE_KEYS:
        if key in data and key != "sources":
            reader.assign(spec, key, data[key])
    if "sources" in data:
        base_dir = Path(source).parent if source is not None else Path.cwd()
        entries = data["sources"]
        if not isinstance(entries, list):
            raise InvalidConfig(
                f"{source}, line {reader.lineno('sources')}: "
                "'sources' should be a list."
            )
        spec.sources = [
            _source(reader, entry, base_dir, spec.sample_rate) for entry in entries
        ]
    return spec


def read_wav(path):
    """Return channels-first float audio and its sample rate."""
    audio, rate = sf.read(str(path), dtype="float64", always_2d=True)
    return audio.T, rate


def write_wav(path, audio, sample_rate, subtype="FLOAT"):
    audio = np.atleast_2d(np.asarray(audio))
    dtype = np.float64 if subtype == "DOUBLE" else np.float32
    sf.write(str(path), audio.T.astype(dtype), sample_rate, subtype=subtype)


def write_json(path, data):
    with open(path, "w") as json_file:
        json.dump(data, json_file, indent=2)
        json_file.write("\n")


def write_scene(directory, spec, output):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    sr = output.sample_rate
    # float64 on disk keeps captured == desired + interference exactly
    write_wav(directory / CAPTURED_NAME, output.captured, sr, "DOUBLE")
    write_wav(directory / DESIRED_NAME, output.desired, sr, "DOUBLE")
    write_wav(directory / INTERFERENCE_NAME, output.interference, sr, "DOUBLE")
    for index, desired in enumerate(output.per_source_desired):
        write_wav(directory / SOURCE_NAME.format(index), desired, sr, "DOUBLE")
    if output.noise_reference is not None:
        write_wav(
            directory / NOISE_REFERENCE_NAME, output.noise_reference, sr, "DOUBLE"
        )
    manifest = {
        "spec": spec.to_dict(),
        "sample_rate": sr,
        "num_channels": output.num_channels,
        "num_sources": output.num_sources,
        "num_samples": int(output.captured.shape[1]),
        "rmnr_target_db": spec.rmnr_db if spec.has_noise else None,
        "rmnr_measured_db": output.rmnr_measured_db,
        "rmnr_window": "full_file",
        "activity_segment_ms": ACTIVITY_SEGMENT_MS,
        "activity": output.activity.astype(int).tolist(),
        "noise_reference": output.noise_reference is not None,
    }
    write_json(directory / MANIFEST_NAME, manifest)
    return directory


def read_scene(directory):
    """Load a scene directory written by ``write_scene``."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise InvalidScene(f"No {MANIFEST_NAME} in {directory}.")
    manifest = json.loads(manifest_path.read_text())

    def component(name):
        path = directory / name
        if not path.is_file():
            raise InvalidScene(f"Missing component {name} in {directory}.")
        return read_wav(path)[0]

    per_source = [
        component(SOURCE_NAME.format(n)) for n in range(manifest["num_sources"])
    ]
    noise_reference = None
    if manifest.get("noise_reference"):
        noise_reference = component(NOISE_REFERENCE_NAME)
    output = SceneOutput(
        component(DESIRED_NAME),
        per_source,
        component(INTERFERENCE_NAME),
        np.asarray(manifest["activity"], dtype=bool),
        manifest["sample_rate"],
        noise_reference,
        manifest.get("rmnr_measured_db"),
    )
    # captured.wav must exist but is rebuilt from the components
    component(CAPTURED_NAME)
    output.manifest = manifest
    return output
