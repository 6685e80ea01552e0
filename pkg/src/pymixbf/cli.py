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

"""Command line interface: simulate, enhance, evaluate, benchmark, compare."""

import argparse
import logging
import sys
import time

import numpy as np

from .base import BeamformerKind, NoiseScmMode
from .enhancer import Enhancer, RunConfig
from .metrics import component_pass, evaluate
from .parser import (
    parse_config,
    parse_scene_spec,
    read_scene,
    read_wav,
    write_json,
    write_scene,
    write_wav,
)
from .scene import render_scene
from .stft import StftConfig
from .tracking import init_from_frames, init_from_noise

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
BENCHMARK_KINDS = (
    BeamformerKind.MOD_PMWF_APPROX,
    BeamformerKind.GEV_MVDR,
    BeamformerKind.UR_MWF,
)


class UsageParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _with_config(config, **changes):
    data = config.to_dict()
    data.update(changes)
    data["stft"] = StftConfig.from_dict(data["stft"])
    return RunConfig(**data)


def noise_scm_for(config, noise):
    """Interference SCM from a noise recording, or None when it is not used."""
    if noise is None or not config.beamformer.multichannel:
        return None
    return init_from_noise(noise, config.stft)


def enhance(audio, config, noise=None, warnings=None):
    enhancer = Enhancer(config, audio.shape[0], noise_scm_for(config, noise), warnings)
    return enhancer.process(audio)


def evaluate_scene(scene, config, details=False, warnings=None):
    """Shadow-filter the ground-truth components of a scene and score them."""
    noise = scene.noise_reference
    if config.noise_scm_mode is NoiseScmMode.ONLINE_SPP:
        noise = None
    enhancer = Enhancer(
        config, scene.num_channels, noise_scm_for(config, noise), warnings
    )
    stream = enhancer.weights_stream(scene.captured)
    d_hat, v_hat = component_pass(
        stream, scene.desired, scene.interference, config.stft
    )
    return evaluate(
        d_hat,
        v_hat,
        scene.desired,
        scene.interference,
        scene.per_source_desired,
        delta=int(round(0.05 * config.stft.sample_rate)),
        details=details,
        warnings=warnings,
        beamformer=config.beamformer.value,
        noise_scm_mode=config.noise_scm_mode.value,
    )


def compare_beamformers(scenes, kinds, config=None, warnings=None):
    """
    Mean SegDIR improvement and SegDDR per beamformer kind over scenes.

    Each kind runs with its own default forgetting factor.
    """
    config = config or RunConfig()
    results = {}
    for kind in kinds:
        kind = BeamformerKind.parse(kind)
        run_config = _with_config(config, beamformer=kind.value, beta=None)
        reports = [evaluate_scene(s, run_config, warnings=warnings) for s in scenes]
        results[kind.value] = {
            "segdir_improvement_db": float(
                np.mean([r.segdir_improvement_db for r in reports])
            ),
            "segddr_db": float(np.mean([r.segddr_db for r in reports])),
            "scenes": len(reports),
        }
        logger.info("%s: %s", kind.value, results[kind.value])
    return results


def benchmark(
    channels=(2, 4, 8, 16),
    kinds=BENCHMARK_KINDS,
    frames=200,
    repeats=3,
    stft=None,
    seed=0,
):
    """
    Per-frame wall time of the weight update for every kind and channel count.

    The reported cost per channel count is the best of ``repeats`` medians.
    The slope is the least-squares log-log growth rate over the counts.
    """
    stft = stft or StftConfig()
    rng = np.random.default_rng(seed)
    results = {}
    for kind in kinds:
        kind = BeamformerKind.parse(kind)
        config = RunConfig(beamformer=kind, stft=stft)
        costs = {}
        tails = {}
        for num_channels in channels:
            shape = (frames, stft.num_bins, num_channels)
            data = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            noise_scm = init_from_frames(data)
            medians = []
            times = []
            for _ in range(repeats):
                enhancer = Enhancer(config, num_channels, noise_scm)
                times = []
                for x in data:
                    start = time.perf_counter()
                    enhancer.weights(x)
                    times.append(time.perf_counter() - start)
                medians.append(np.median(times))
            costs[num_channels] = float(np.min(medians))
            tails[num_channels] = float(np.percentile(times, 99))
        slope = np.polyfit(np.log(list(costs)), np.log(list(costs.values())), 1)[0]
        results[kind.value] = {
            "per_frame_ms": {m: t * 1000 for m, t in costs.items()},
            "p99_ms": {m: t * 1000 for m, t in tails.items()},
            "slope": float(slope),
            "hop_ms": stft.hop_seconds * 1000,
        }
        logger.info("%s: log-log slope %.2f", kind.value, slope)
    return results


def _config_from(args, warnings):
    return parse_config(
        args.config,
        warnings,
        beamformer=args.beamformer,
        gamma=args.gamma,
        beta=args.beta,
        noise_scm_mode=args.mode,
        all_channels=True if args.all_channels else None,
    )


def cmd_simulate(args, warnings):
    spec = parse_scene_spec(args.spec, warnings, seed=args.seed, rmnr_db=args.rmnr)
    output = render_scene(spec)
    write_scene(args.out, spec, output)
    logger.info("Scene written to %s (%r)", args.out, output)


def cmd_enhance(args, warnings):
    config = _config_from(args, warnings)
    noise = None
    if args.scene is not None:
        scene = read_scene(args.scene)
        audio, rate = scene.captured, scene.sample_rate
        noise = scene.noise_reference
    else:
        audio, rate = read_wav(args.input)
    if args.noise is not None:
        noise, noise_rate = read_wav(args.noise)
        if noise_rate != rate:
            raise ValueError(
                f"Noise is sampled at {noise_rate} Hz, input at {rate} Hz."
            )
    if rate != config.stft.sample_rate:
        raise ValueError(
            f"Input is sampled at {rate} Hz, "
            f"the configuration expects {config.stft.sample_rate} Hz."
        )
    if config.noise_scm_mode is NoiseScmMode.ONLINE_SPP and args.noise is None:
        noise = None
    output, timing = enhance(audio, config, noise, warnings)
    if not config.all_channels:
        output = output[:1]
    write_wav(args.out, output, rate)
    if args.report is not None:
        report = {"timing": timing.to_dict(), "config": config.to_dict()}
        write_json(args.report, report)
    logger.info("Timing: %s", timing.to_dict())


def cmd_evaluate(args, warnings):
    config = _config_from(args, warnings)
    scene = read_scene(args.scene)
    details = args.csv is not None
    report = evaluate_scene(scene, config, details=details, warnings=warnings)
    report.write_json(args.out)
    if args.csv is not None:
        report.write_csv(args.csv)
    logger.info("%r", report)


def cmd_benchmark(args, warnings):
    results = benchmark(args.channels, args.beamformers, args.frames, args.repeats)
    if args.out is not None:
        write_json(args.out, results)
    for kind, result in results.items():
        print(f"{kind}: slope {result['slope']:.2f}, p99 {result['p99_ms']} ms")


def cmd_compare(args, warnings):
    config = _config_from(args, warnings)
    scenes = [read_scene(directory) for directory in args.scenes]
    results = compare_beamformers(scenes, args.beamformers, config, warnings)
    if args.out is not None:
        write_json(args.out, results)
    for kind, result in results.items():
        print(
            f"{kind}: SegDIR improvement {result['segdir_improvement_db']:.2f} dB, "
            f"SegDDR {result['segddr_db']:.2f} dB"
        )


def _add_run_options(parser):
    kinds = [kind.value for kind in BeamformerKind]
    modes = [mode.value for mode in NoiseScmMode]
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--beamformer", choices=kinds)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--mode", choices=modes, help="interference SCM mode")
    parser.add_argument("--all-channels", action="store_true")


def build_parser():
    parser = UsageParser(prog="pymixbf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    commands = parser.add_subparsers(dest="command", parser_class=UsageParser)
    commands.required = True

    simulate = commands.add_parser("simulate", help="render a synthetic scene")
    simulate.add_argument("--spec", help="JSON scene description")
    simulate.add_argument("--out", required=True, help="output directory")
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--rmnr", type=float, help="mixture to noise ratio in dB")
    simulate.set_defaults(handler=cmd_simulate)

    enhance_cmd = commands.add_parser("enhance", help="enhance a recording")
    source = enhance_cmd.add_mutually_exclusive_group(required=True)
    source.add_argument("--in", dest="input", help="multichannel WAV")
    source.add_argument("--scene", help="scene directory")
    enhance_cmd.add_argument("--out", required=True, help="output WAV")
    enhance_cmd.add_argument("--noise", help="noise-only multichannel WAV")
    enhance_cmd.add_argument("--report", help="timing report JSON")
    _add_run_options(enhance_cmd)
    enhance_cmd.set_defaults(handler=cmd_enhance)

    evaluate_cmd = commands.add_parser("evaluate", help="score a scene")
    evaluate_cmd.add_argument("--scene", required=True, help="scene directory")
    evaluate_cmd.add_argument("--out", required=True, help="metric report JSON")
    evaluate_cmd.add_argument("--csv", help="per-segment rows")
    _add_run_options(evaluate_cmd)
    evaluate_cmd.set_defaults(handler=cmd_evaluate)

    kinds = [kind.value for kind in BeamformerKind]
    bench = commands.add_parser("benchmark", help="time the weight updates")
    bench.add_argument("--channels", type=int, nargs="+", default=[2, 4, 8, 16])
    bench.add_argument(
        "--beamformers",
        nargs="+",
        choices=kinds,
        default=[kind.value for kind in BENCHMARK_KINDS],
    )
    bench.add_argument("--frames", type=int, default=200)
    bench.add_argument("--repeats", type=int, default=3)
    bench.add_argument("--out", help="benchmark JSON")
    bench.set_defaults(handler=cmd_benchmark)

    compare = commands.add_parser("compare", help="compare beamformers on scenes")
    compare.add_argument("scenes", nargs="+", help="scene directories")
    compare.add_argument(
        "--beamformers",
        nargs="+",
        choices=kinds,
        default=["mod_pmwf_approx", "gev_mvdr", "ur_mwf"],
    )
    compare.add_argument("--out", help="comparison JSON")
    _add_run_options(compare)
    compare.set_defaults(handler=cmd_compare)
    return parser


def _report(warnings):
    for warning in warnings:
        level = logging.ERROR if warning.critical else logging.WARNING
        logger.log(level, "%s: %s", warning.title, warning.msg)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=max(logging.WARNING - 10 * args.verbose, logging.DEBUG),
        format="%(levelname)s %(name)s: %(message)s",
    )
    warnings = []
    try:
        args.handler(args, warnings)
    except (ValueError, OSError, RuntimeError) as exc:
        _report(warnings)
        logger.error("%s", exc)
        return EXIT_DATA
    _report(warnings)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
