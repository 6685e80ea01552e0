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

"""Base classes."""

from enum import Enum


class MixEnum(Enum):
    @classmethod
    def default(cls):
        # default becomes the first defined member
        return list(cls.__members__.values())[0]

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            pass
        # accept member names as well, "GEV_MVDR" or "GevMvdr"
        folded = str(value).replace("_", "").replace("-", "").lower()
        for member in cls:
            if member.name.replace("_", "").lower() == folded:
                return member
        values = "', '".join(x.value for x in cls)
        raise ValueError(f"'{value}' is not one of: '{values}'.")


class BeamformerKind(MixEnum):
    MOD_PMWF_APPROX = "mod_pmwf_approx"
    MOD_PMWF_EXACT = "mod_pmwf_exact"
    PMWF_SINGLE = "pmwf_single"
    MVDR_PER_SOURCE = "mvdr_per_source"
    GEV_MVDR = "gev_mvdr"
    MAX_SNR = "max_snr"
    UR_MWF = "ur_mwf"
    IDENTITY = "identity"

    @property
    def default_beta(self):
        if self is BeamformerKind.UR_MWF:
            return 0.99
        return 0.85

    @property
    def multichannel(self):
        return self is not BeamformerKind.IDENTITY


class NoiseScmMode(MixEnum):
    PRECOMPUTED_FROM_FILE = "precomputed_from_file"
    ONLINE_SPP = "online_spp"
