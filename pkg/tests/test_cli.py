import csv
import json

import numpy as np
import pytest
import soundfile as sf

from pymixbf import RunConfig, read_wav, write_scene, write_wav
from pymixbf.cli import EXIT_DATA, EXIT_OK, benchmark, compare_beamformers, main


@pytest.fixture
def spec_path(tmp_path):
    path = tmp_path / "scene.json"
    path.write_text(json.dumps({"duration": 2.0, "noise_reference_s": 1.0}))
    return path


@pytest.fixture
def scene_dir(tmp_path, small_scene):
    spec, scene = small_scene
    return write_scene(tmp_path / "scene", spec, scene)


def test_simulate(tmp_path, spec_path):
    first = tmp_path / "first"
    second = tmp_path / "second"
    args = ["simulate", "--spec", str(spec_path), "--seed", "3", "--rmnr", "10"]
    assert main(args + ["--out", str(first)]) == EXIT_OK
    assert main(args + ["--out", str(second)]) == EXIT_OK
    info = sf.info(str(first / "captured.wav"))
    assert info.channels == 5
    assert info.samplerate == 16000
    assert info.frames == 40000
    for name in ("captured.wav", "desired.wav", "noise_reference.wav"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    manifest = json.loads((first / "manifest.json").read_text())
    assert manifest["rmnr_measured_db"] == pytest.approx(10.0, abs=0.1)
    assert manifest["spec"]["seed"] == 3


def test_enhance_scene(tmp_path, scene_dir):
    out = tmp_path / "enhanced.wav"
    report = tmp_path / "timing.json"
    args = ["enhance", "--scene", str(scene_dir), "--out", str(out)]
    assert main(args + ["--report", str(report)]) == EXIT_OK
    audio, rate = read_wav(out)
    assert rate == 16000
    assert audio.shape == (1, 64000)
    assert np.all(np.isfinite(audio))
    data = json.loads(report.read_text())
    assert data["config"]["beamformer"] == "mod_pmwf_approx"
    assert data["timing"]["frames"] > 0


def test_enhance_online(tmp_path, scene_dir):
    out = tmp_path / "enhanced.wav"
    args = ["enhance", "--scene", str(scene_dir), "--out", str(out)]
    assert main(args + ["--mode", "online_spp", "--beamformer", "gev_mvdr"]) == 0
    assert read_wav(out)[0].shape == (1, 64000)


def test_enhance_identity(tmp_path, scene_dir):
    out = tmp_path / "enhanced.wav"
    args = ["enhance", "--in", str(scene_dir / "captured.wav"), "--out", str(out)]
    assert main(args + ["--beamformer", "identity", "--all-channels"]) == EXIT_OK
    captured, _ = read_wav(scene_dir / "captured.wav")
    enhanced, _ = read_wav(out)
    np.testing.assert_allclose(enhanced, captured, atol=1e-6)


def test_enhance_mono(tmp_path):
    mono = tmp_path / "mono.wav"
    write_wav(mono, 0.1 * np.random.default_rng(61).standard_normal(8000), 16000)
    args = ["enhance", "--in", str(mono), "--noise", str(mono)]
    assert main(args + ["--out", str(tmp_path / "out.wav")]) == EXIT_DATA


def test_enhance_rate_mismatch(tmp_path):
    audio = tmp_path / "audio.wav"
    write_wav(audio, np.zeros((2, 800)), 8000)
    args = ["enhance", "--in", str(audio), "--out", str(tmp_path / "out.wav")]
    assert main(args + ["--beamformer", "identity"]) == EXIT_DATA


def test_missing_input(tmp_path):
    args = ["enhance", "--in", str(tmp_path / "absent.wav")]
    assert main(args + ["--out", str(tmp_path / "out.wav")]) == EXIT_DATA
    assert main(["evaluate", "--scene", str(tmp_path), "--out", "x.json"]) == EXIT_DATA


@pytest.mark.parametrize(
    "argv", [[], ["enhance"], ["shout"], ["enhance", "--in", "a", "--scene", "b"]]
)
def test_usage(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1


def test_evaluate(tmp_path, scene_dir):
    out = tmp_path / "metrics.json"
    rows = tmp_path / "segments.csv"
    args = ["evaluate", "--scene", str(scene_dir), "--out", str(out)]
    assert main(args + ["--beamformer", "identity", "--csv", str(rows)]) == EXIT_OK
    report = json.loads(out.read_text())
    assert report["segdir_improvement_db"] == pytest.approx(0.0, abs=0.01)
    assert report["beamformer"] == "identity"
    with open(rows, newline="") as csv_file:
        segments = list(csv.DictReader(csv_file))
    assert len(segments) == report["active_segments"]


def test_benchmark():
    results = benchmark(kinds=("mod_pmwf_approx",), frames=30, repeats=2)
    result = results["mod_pmwf_approx"]
    assert set(result["per_frame_ms"]) == {2, 4, 8, 16}
    assert result["slope"] <= 2.3
    assert result["hop_ms"] == pytest.approx(5.0)


def test_benchmark_command(tmp_path):
    out = tmp_path / "bench.json"
    argv = ["benchmark", "--channels", "2", "3", "--frames", "12", "--repeats", "1"]
    assert main(argv + ["--beamformers", "ur_mwf", "--out", str(out)]) == EXIT_OK
    data = json.loads(out.read_text())
    assert set(data) == {"ur_mwf"}
    assert set(data["ur_mwf"]["per_frame_ms"]) == {"2", "3"}


def test_compare(small_scene):
    _, scene = small_scene
    results = compare_beamformers([scene], ["identity", "mod_pmwf_approx"])
    assert set(results) == {"identity", "mod_pmwf_approx"}
    assert results["identity"]["segdir_improvement_db"] == pytest.approx(0, abs=0.01)
    assert results["mod_pmwf_approx"]["scenes"] == 1


def test_compare_command(tmp_path, scene_dir):
    out = tmp_path / "compare.json"
    argv = ["compare", str(scene_dir), "--beamformers", "identity", "ur_mwf"]
    assert main(argv + ["--out", str(out)]) == EXIT_OK
    assert set(json.loads(out.read_text())) == {"identity", "ur_mwf"}

