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

"""Online spatial covariance tracking."""

import numpy as np
from scipy.special import expit

from .linalg import hermitize, inverse_hpd, inverse_residual, rank1_inverse_update
from .stft import analyze_array
from .warnings import DegenerateSppWarning, InverseDriftWarning, NanFrameWarning

REINVERT_EVERY = 1000
DRIFT_TOLERANCE = 1e-6
SPP_CLAMP = 30.0


class InsufficientData(ValueError):
    pass


def outer(x):
    return x[..., :, None] * np.conj(x[..., None, :])


class _Tracker(object):
    def __init__(self, phi, phi_inv, track_inverse, reinvert_every):
        self.phi = hermitize(np.array(phi, dtype=np.complex128))
        self.track_inverse = track_inverse
        if track_inverse and phi_inv is None:
            phi_inv = inverse_hpd(self.phi)
        if phi_inv is not None:
            phi_inv = np.array(phi_inv, dtype=np.complex128)
        self.phi_inv = phi_inv
        self.reinvert_every = reinvert_every
        self.updates = 0
        self.skipped = 0

    @property
    def dim(self):
        return self.phi.shape[-1]

    def _blend(self, x, factor, warnings):
        x = np.asarray(x, dtype=np.complex128)
        if x.shape != self.phi.shape[:-1]:
            raise ValueError(
                f"Expected observation shape {self.phi.shape[:-1]}, got {x.shape}."
            )
        finite = np.all(np.isfinite(x), axis=-1)
        if not np.all(finite):
            self.skipped += int(np.sum(~finite))
            if warnings is not None:
                warnings.append(NanFrameWarning(np.flatnonzero(~finite)))
            x = np.where(finite[..., None], x, 0)
        factor = np.broadcast_to(np.asarray(factor, dtype=np.float64), finite.shape)
        # bins with factor 1 keep their bits
        keep = ~finite | (factor >= 1.0)
        decayed = factor[..., None, None] * self.phi
        blended = hermitize(decayed + (1.0 - factor)[..., None, None] * outer(x))
        self.phi = np.where(keep[..., None, None], self.phi, blended)
        if self.track_inverse:
            safe = np.where(keep, 1.0, factor)
            inverse = rank1_inverse_update(self.phi_inv, x, safe, warnings=warnings)
            self.phi_inv = np.where(keep[..., None, None], self.phi_inv, inverse)
        self.updates += 1
        if self.track_inverse and self.updates % self.reinvert_every == 0:
            self.reinvert(warnings)
        return self

    def reinvert(self, warnings=None):
        drift = inverse_residual(self.phi, self.phi_inv)
        if drift > DRIFT_TOLERANCE and warnings is not None:
            warnings.append(InverseDriftWarning(drift))
        self.phi_inv = inverse_hpd(self.phi)
        return drift


class ScmTracker(_Tracker):
    """Recursive captured-signal SCM, ``phi = beta phi + (1 - beta) x x^H``."""

    def __init__(
        self,
        phi,
        beta,
        track_inverse=False,
        phi_inv=None,
        reinvert_every=REINVERT_EVERY,
    ):
        super().__init__(phi, phi_inv, track_inverse, reinvert_every)
        self.beta = beta

    @property
    def beta(self):
        return self._beta

    @beta.setter
    def beta(self, value):
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise ValueError("Value should be in [0, 1].")
        if value == 0.0 and self.track_inverse:
            raise ValueError("Value should be in (0, 1] when tracking the inverse.")
        self._beta = value

    @classmethod
    def from_power(cls, x, beta, eps=1e-6, **kwargs):
        """Seed with ``eps`` times the average power of ``x`` on the diagonal."""
        x = np.asarray(x)
        power = np.mean(np.abs(x) ** 2, axis=-1)
        power = np.where(power > 0, power, 1.0)
        phi = (eps * power)[..., None, None] * np.eye(x.shape[-1])
        return cls(phi, beta, **kwargs)


class InterferenceTracker(_Tracker):
    """Interference SCM gated by a speech presence probability."""

    def __init__(
        self, phi_v, alpha=0.9998, phi_v_inv=None, reinvert_every=REINVERT_EVERY
    ):
        super().__init__(phi_v, phi_v_inv, True, reinvert_every)
        self.alpha = alpha
        self.q_last = np.zeros(self.phi.shape[:-2])

    @property
    def alpha(self):
        return self._alpha

    @alpha.setter
    def alpha(self, value):
        value = float(value)
        if not 0.0 < value <= 1.0:
            raise ValueError("Value should be in (0, 1].")
        self._alpha = value

    @property
    def phi_v(self):
        return self.phi

    @property
    def phi_v_inv(self):
        return self.phi_inv


def effective_alpha(alpha, q):
    return alpha + (1.0 - alpha) * np.asarray(q, dtype=np.float64)


def update_scm(tracker, x, warnings=None):
    return tracker._blend(x, tracker.beta, warnings)


def update_interference_scm(tracker, x, q, warnings=None):
    q = np.asarray(q, dtype=np.float64)
    if np.any(q < 0) or np.any(q > 1):
        raise ValueError("Presence probability should be in [0, 1].")
    tracker._blend(x, effective_alpha(tracker.alpha, q), warnings)
    tracker.q_last = np.broadcast_to(q, tracker.phi.shape[:-2]).copy()
    return tracker


def spp_estimate(x, phi_v_inv, phi_x, warnings=None):
    """
    Speech presence probability from the Gaussian likelihood ratio.

    ``Lambda = det(phi_v) / det(phi_x) * exp(x^H (phi_v^-1 - phi_x^-1) x)`` and
    ``q = Lambda / (1 + Lambda)``. The log ratio is clamped to +-30.
    """
    x = np.asarray(x, dtype=np.complex128)
    phi_v_inv = np.asarray(phi_v_inv, dtype=np.complex128)
    phi_x = hermitize(np.asarray(phi_x, dtype=np.complex128))
    dim = phi_x.shape[-1]
    sign_x, logdet_x = np.linalg.slogdet(phi_x)
    _, logdet_v_inv = np.linalg.slogdet(hermitize(phi_v_inv))
    scale = np.real(np.trace(phi_x, axis1=-2, axis2=-1)) / dim
    with np.errstate(divide="ignore", invalid="ignore"):
        conditioned = logdet_x - dim * np.log(scale) > dim * np.log(1e-12)
    degenerate = ~(np.real(sign_x) > 0) | ~np.isfinite(logdet_x) | ~conditioned
    safe_x = np.where(degenerate[..., None, None], np.eye(dim), phi_x)
    quad_v = np.real(np.einsum("...i,...ij,...j->...", np.conj(x), phi_v_inv, x))
    solved = np.linalg.solve(safe_x, x[..., None])[..., 0]
    quad_x = np.real(np.einsum("...i,...i->...", np.conj(x), solved))
    logdet_x = np.where(degenerate, 0.0, logdet_x)
    log_ratio = -np.real(logdet_v_inv) - logdet_x + quad_v - quad_x
    q = expit(np.clip(log_ratio, -SPP_CLAMP, SPP_CLAMP))
    q = np.where(degenerate, 0.5, q)
    if np.any(degenerate) and warnings is not None:
        warnings.append(DegenerateSppWarning(np.flatnonzero(degenerate)))
    return q


def init_from_frames(spectra, min_frames=10, allow_zero=False):
    """Time-average of ``x x^H`` over spectra shaped (T, F, M)."""
    spectra = np.asarray(spectra)
    if spectra.shape[0] < min_frames:
        raise InsufficientData(
            f"{spectra.shape[0]} frame(s) given, at least {min_frames} are needed."
        )
    if not allow_zero and not np.any(spectra):
        raise InsufficientData("The noise signal is silent.")
    phi = np.einsum("tfm,tfn->fmn", spectra, np.conj(spectra)) / spectra.shape[0]
    return hermitize(phi)


def init_from_noise(audio, cfg, min_frames=10, allow_zero=False):
    """Interference SCM per frequency bin from noise-only audio, shape (F, M, M)."""
    return init_from_frames(analyze_array(audio, cfg), min_frames, allow_zero)
