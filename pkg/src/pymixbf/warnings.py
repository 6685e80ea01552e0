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

import numpy as np


def _bin_list(bins):
    bins = np.atleast_1d(np.asarray(bins)).ravel().tolist()
    if len(bins) > 8:
        return ", ".join(str(b) for b in bins[:8]) + f", ... ({len(bins)} bins)"
    return ", ".join(str(b) for b in bins)


class ProcessingWarning(object):
    def __init__(self, title, msg, elem, critical=False):
        self.title = title
        self.msg = msg
        self.elem = elem
        self.critical = critical

    def __eq__(self, other):
        if isinstance(other, ProcessingWarning):
            return (
                self.title == other.title
                and self.msg == other.msg
                and self.elem == other.elem
                and self.critical == other.critical
            )
        return NotImplemented

    def __repr__(self):
        level = "critical" if self.critical else "recoverable"
        return f"<{type(self).__name__} ({level}) {self.title!r}: {self.msg!r}>"


class NanFrameWarning(ProcessingWarning):
    def __init__(self, bins, elem=None):
        title = "Non-finite Observation"
        msg = (
            f"The observation in bin(s) {_bin_list(bins)} is not finite. "
            "The frame was skipped and the tracker left unchanged."
        )
        super().__init__(title, msg, elem, critical=True)


class SilentFrameWarning(ProcessingWarning):
    def __init__(self, bins, elem=None):
        title = "Silent Frame"
        msg = (
            f"The weight normaliser in bin(s) {_bin_list(bins)} vanished. "
            "Identity/M weights were used instead."
        )
        super().__init__(title, msg, elem, critical=False)


class DegeneratePowerWarning(ProcessingWarning):
    def __init__(self, bins, elem=None):
        title = "Degenerate Power Iteration"
        msg = (
            f"The power iteration collapsed to zero in bin(s) {_bin_list(bins)}. "
            "The previous vector was reused."
        )
        super().__init__(title, msg, elem, critical=False)


class DegenerateSppWarning(ProcessingWarning):
    def __init__(self, bins, elem=None):
        title = "Degenerate Presence Probability"
        msg = (
            f"The captured-signal SCM is singular in bin(s) {_bin_list(bins)}. "
            "The presence probability was set to 0.5."
        )
        super().__init__(title, msg, elem, critical=False)


class RankCheckWarning(ProcessingWarning):
    def __init__(self, ratio, elem=None):
        title = "Desired SCM Not Rank-1"
        msg = (
            f"The second eigenvalue is {ratio:.3g} times the first; "
            "a rank-1 SCM was expected. Proceeding anyway."
        )
        super().__init__(title, msg, elem, critical=False)


class InverseDriftWarning(ProcessingWarning):
    def __init__(self, drift, elem=None):
        title = "Inverse Drift"
        msg = (
            f"The tracked inverse drifted by {drift:.3g} from the true inverse. "
            "It was recomputed from the tracked SCM."
        )
        super().__init__(title, msg, elem, critical=False)


class DirectInverseWarning(ProcessingWarning):
    def __init__(self, bins, elem=None):
        title = "Rank-1 Update Underflow"
        msg = (
            f"The rank-1 update denominator underflowed in bin(s) "
            f"{_bin_list(bins)}. A direct inversion was used instead."
        )
        super().__init__(title, msg, elem, critical=False)


class NoActivityWarning(ProcessingWarning):
    def __init__(self, elem=None):
        title = "No Active Segments"
        msg = "No source is active in any segment, the active set is empty."
        super().__init__(title, msg, elem, critical=True)


class HopBudgetWarning(ProcessingWarning):
    def __init__(self, count, budget, elem=None):
        title = "Hop Budget Exceeded"
        msg = (
            f"{count} frame(s) took longer than the "
            f"{budget * 1000:.2f} ms hop to process."
        )
        super().__init__(title, msg, elem, critical=False)


class UnknownKeyWarning(ProcessingWarning):
    def __init__(self, key, lineno, elem=None):
        title = "Unknown Key"
        msg = f"The key '{key}' (line {lineno}) is not recognised, it was ignored."
        super().__init__(title, msg, elem, critical=False)
