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

__all__ = [
    "BeamformerKind",
    "NoiseScmMode",
    "BeamformerWeights",
    "SilentSource",
    "TradeoffGamma",
    "apply",
    "decomposition_weights",
    "eta_factor",
    "gev_mvdr",
    "maxsnr",
    "mod_pmwf_approx",
    "mod_pmwf_exact",
    "per_source_mvdr",
    "pmwf_single",
    "ur_mwf",
    "Enhancer",
    "InvalidConfiguration",
    "RunConfig",
    "TimingReport",
    "SingularMatrix",
    "inverse_hpd",
    "power_iteration",
    "rank1_inverse_update",
    "solve_hpd",
    "trace_of_product",
    "ComponentMismatch",
    "EmptyActiveSet",
    "MetricReport",
    "SegmentSet",
    "active_segments",
    "component_pass",
    "segddr",
    "segdir",
    "InvalidConfig",
    "parse_config",
    "parse_scene_spec",
    "read_scene",
    "read_wav",
    "write_scene",
    "write_wav",
    "InvalidScene",
    "SceneOutput",
    "SceneSpec",
    "Source",
    "make_diffuse_noise",
    "render_scene",
    "split_rir",
    "synth_rir",
    "InvalidFrame",
    "MultichannelSpectrum",
    "StftConfig",
    "analyze",
    "synthesize",
    "InsufficientData",
    "InterferenceTracker",
    "ScmTracker",
    "init_from_noise",
    "spp_estimate",
    "update_interference_scm",
    "update_scm",
    "ProcessingWarning",
]

from .base import BeamformerKind, NoiseScmMode
from .beamformers import (
    BeamformerWeights,
    SilentSource,
    TradeoffGamma,
    apply,
    decomposition_weights,
    eta_factor,
    gev_mvdr,
    maxsnr,
    mod_pmwf_approx,
    mod_pmwf_exact,
    per_source_mvdr,
    pmwf_single,
    ur_mwf,
)
from .enhancer import Enhancer, InvalidConfiguration, RunConfig, TimingReport
from .linalg import (
    SingularMatrix,
    inverse_hpd,
    power_iteration,
    rank1_inverse_update,
    solve_hpd,
    trace_of_product,
)
from .metrics import (
    ComponentMismatch,
    EmptyActiveSet,
    MetricReport,
    SegmentSet,
    active_segments,
    component_pass,
    segddr,
    segdir,
)
from .parser import (
    InvalidConfig,
    parse_config,
    parse_scene_spec,
    read_scene,
    read_wav,
    write_scene,
    write_wav,
)
from .scene import (
    InvalidScene,
    SceneOutput,
    SceneSpec,
    Source,
    make_diffuse_noise,
    render_scene,
    split_rir,
    synth_rir,
)
from .stft import InvalidFrame, MultichannelSpectrum, StftConfig, analyze, synthesize
from .tracking import (
    InsufficientData,
    InterferenceTracker,
    ScmTracker,
    init_from_noise,
    spp_estimate,
    update_interference_scm,
    update_scm,
)
from .warnings import ProcessingWarning
