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
Beamforming weight matrices.

Every function works on a batch of problems: matrices are (..., M, M) and the
leading dimensions (usually frequency) are independent. The enhanced signal
is ``y = W^H x``.
"""

import numpy as np

from .base import BeamformerKind
from .linalg import hermitize, power_iteration, solve_hpd, trace_of_product
from .warnings import DegeneratePowerWarning, RankCheckWarning, SilentFrameWarning

SILENCE = 1e-12
RANK_TOLERANCE = 1e-6


class SilentSource(ValueError):
    pass


class TradeoffGamma(float):
    """Speech distortion weight, ``gamma >= 0``."""

    def __new__(cls, value=0.0):
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ValueError("Value should be a real number.") from None
        if not np.isfinite(value) or value < 0:
            raise ValueError("Value should be a non-negative real number.")
        return super().__new__(cls, value)

    def __repr__(self):
        return f"TradeoffGamma({float(self)})"


class BeamformerWeights(object):
    def __init__(self, W, kind, degenerate=None):
        self.W = W
        self.kind = kind
        if degenerate is None:
            degenerate = np.zeros(self.W.shape[:-2], dtype=bool)
        self.degenerate = degenerate

    @property
    def W(self):
        return self._W

    @W.setter
    def W(self, value):
        value = np.asarray(value, dtype=np.complex128)
        if value.ndim < 2 or value.shape[-1] != value.shape[-2]:
            raise ValueError("Value should be a square matrix or a batch of them.")
        if not np.all(np.isfinite(value)):
            raise ValueError("Value should have finite entries.")
        self._W = value

    @property
    def kind(self):
        return self._kind

    @kind.setter
    def kind(self, value):
        if not isinstance(value, BeamformerKind):
            raise ValueError("Value should be BeamformerKind.")
        self._kind = value

    @property
    def dim(self):
        return self._W.shape[-1]

    @classmethod
    def identity(cls, dim, batch_shape=()):
        shape = tuple(batch_shape) + (dim, dim)
        eye = np.broadcast_to(np.eye(dim, dtype=np.complex128), shape)
        return cls(eye.copy(), BeamformerKind.IDENTITY)

    def reference_column(self, channel=0):
        """Weights producing the output of a single reference channel."""
        return self._W[..., :, channel]

    def __repr__(self):
        return f"BeamformerWeights(kind={self._kind}, shape={self._W.shape})"


def _normalize(numerator, lam, gamma, kind, warnings):
    denom = gamma + lam
    degenerate = ~(denom >= SILENCE)
    dim = numerator.shape[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        W = numerator / denom[..., None, None]
    if np.any(degenerate):
        W = np.where(degenerate[..., None, None], np.eye(dim) / dim, W)
        if warnings is not None:
            warnings.append(SilentFrameWarning(np.flatnonzero(degenerate)))
    return BeamformerWeights(W, kind, degenerate)


def mod_pmwf_approx(phi_v_inv, phi_x, gamma=0.0, warnings=None):
    """``W = phi_v^-1 phi_x / (gamma + tr{phi_v^-1 phi_x})``."""
    gamma = TradeoffGamma(gamma)
    lam = trace_of_product(phi_v_inv, phi_x)
    return _normalize(
        np.asarray(phi_v_inv) @ phi_x,
        lam,
        gamma,
        BeamformerKind.MOD_PMWF_APPROX,
        warnings,
    )


def mod_pmwf_exact(phi_v_inv, phi_d, gamma=0.0, warnings=None):
    """``W = phi_v^-1 phi_d / (gamma + tr{phi_v^-1 phi_d})``."""
    gamma = TradeoffGamma(gamma)
    lam = trace_of_product(phi_v_inv, phi_d)
    return _normalize(
        np.asarray(phi_v_inv) @ phi_d,
        lam,
        gamma,
        BeamformerKind.MOD_PMWF_EXACT,
        warnings,
    )


def per_source_mvdr(phi_v_inv, phi_d_n):
    lam = trace_of_product(phi_v_inv, phi_d_n)
    silent = ~(lam > SILENCE)
    if np.any(silent):
        bins = np.flatnonzero(silent)
        raise SilentSource(f"Source has no power in frequency bin(s) {bins.tolist()}.")
    W = (np.asarray(phi_v_inv) @ phi_d_n) / lam[..., None, None]
    return BeamformerWeights(W, BeamformerKind.MVDR_PER_SOURCE)


def decomposition_weights(phi_v_inv, phi_d_list, gamma=0.0):
    """
    Mixing weights of the per-source MVDR decomposition.

    Returns ``(mu, lam)``, both shaped (N, ...): ``lam[n] = tr{phi_v^-1 phi_d_n}``
    and ``mu[n] = lam[n] / (gamma + sum(lam))``.
    """
    gamma = TradeoffGamma(gamma)
    if len(phi_d_list) == 0:
        raise ValueError("At least one source SCM is needed.")
    lam = np.stack([trace_of_product(phi_v_inv, phi_d) for phi_d in phi_d_list])
    scale = np.max(np.abs(lam))
    if np.any(lam < -SILENCE * max(scale, 1.0)):
        raise ValueError("Source SCMs should be positive semi-definite.")
    lam = np.maximum(lam, 0.0)
    total = np.sum(lam, axis=0)
    if np.any(~(gamma + total > SILENCE)):
        raise SilentSource("All sources are silent.")
    return lam / (gamma + total), lam


def approximation_weights(lambda_d, dim, gamma=0.0):
    """
    ``(mu_d, mu_v)`` such that the approximated Mod-PMWF equals
    ``mu_d * W_exact + mu_v * I / M`` when ``phi_x = phi_d + phi_v``.
    """
    gamma = TradeoffGamma(gamma)
    lambda_d = np.asarray(lambda_d, dtype=np.float64)
    denom = gamma + lambda_d + dim
    return (gamma + lambda_d) / denom, dim / denom


def pmwf_single(phi_v_inv, phi_d1, gamma=0.0, warnings=None):
    gamma = TradeoffGamma(gamma)
    phi_d1 = np.asarray(phi_d1)
    if phi_d1.shape[-1] > 1:
        eigvals = np.linalg.eigvalsh(phi_d1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(eigvals[..., -2]) / eigvals[..., -1]
        ratio = np.where(eigvals[..., -1] > 0, ratio, 0.0)
        if np.any(ratio >= RANK_TOLERANCE) and warnings is not None:
            warnings.append(RankCheckWarning(float(np.max(ratio))))
    lam = trace_of_product(phi_v_inv, phi_d1)
    return _normalize(
        np.asarray(phi_v_inv) @ phi_d1, lam, gamma, BeamformerKind.PMWF_SINGLE, warnings
    )


def _maxsnr_matrix(phi_v, u):
    phi_v_u = (np.asarray(phi_v) @ u[..., None])[..., 0]
    norm = np.real(np.einsum("...i,...i->...", np.conj(u), phi_v_u))
    b = phi_v_u / norm[..., None]
    return u[..., :, None] * np.conj(b[..., None, :])


def maxsnr(phi_v, u):
    """MaxSNR form ``W = u b^H`` with ``b = phi_v u / (u^H phi_v u)``."""
    u = np.asarray(u, dtype=np.complex128)
    return BeamformerWeights(_maxsnr_matrix(phi_v, u), BeamformerKind.MAX_SNR)


def gev_mvdr(phi_v, phi_v_inv, phi_x, u_prev, iters=1, warnings=None):
    """
    GEV-MVDR weights ``u u^H phi_v / tr{u u^H phi_v}``.

    ``u`` tracks the principal generalized eigenvector of (phi_x, phi_v) by
    warm-started power iteration. Returns the weights and the new ``u``.
    """
    u, degenerate = power_iteration(phi_v_inv, phi_x, u_prev, iters)
    if np.any(degenerate) and warnings is not None:
        warnings.append(DegeneratePowerWarning(np.flatnonzero(degenerate)))
    W = _maxsnr_matrix(phi_v, u)
    weights = BeamformerWeights(W, BeamformerKind.GEV_MVDR, degenerate)
    return weights, u


def ur_mwf(phi_x, phi_v, phi_x_inv=None):
    """
    ``W = phi_x^-1 (phi_x - phi_v)``.

    With a tracked ``phi_x_inv`` this is ``I - phi_x_inv phi_v`` and nothing is
    factorised. Otherwise phi_x is solved directly.
    """
    phi_v = np.asarray(phi_v, dtype=np.complex128)
    if phi_x_inv is None:
        phi_x = np.asarray(phi_x, dtype=np.complex128)
        W = solve_hpd(phi_x, phi_x - phi_v)
    else:
        W = np.eye(phi_v.shape[-1]) - np.asarray(phi_x_inv) @ phi_v
    return BeamformerWeights(W, BeamformerKind.UR_MWF)


def eta_factor(lambda_d, gamma=0.0):
    gamma = TradeoffGamma(gamma)
    lambda_d = np.asarray(lambda_d, dtype=np.float64)
    if np.any(lambda_d < 0):
        raise ValueError("Value should be non-negative.")
    if gamma == 0:
        return np.ones_like(lambda_d)
    return lambda_d / (gamma + lambda_d)


def apply(weights, x):
    W = weights.W if isinstance(weights, BeamformerWeights) else np.asarray(weights)
    x = np.asarray(x)
    if x.shape[-1] != W.shape[-2]:
        raise ValueError(f"Dimension mismatch: weights {W.shape}, input {x.shape}.")
    return np.einsum("...ji,...j->...i", np.conj(W), x)


def desired_scm_estimate(phi_x, phi_v):
    """Positive semi-definite part of ``phi_x - phi_v``."""
    diff = hermitize(np.asarray(phi_x) - np.asarray(phi_v))
    eigvals, eigvecs = np.linalg.eigh(diff)
    eigvals = np.maximum(eigvals, 0.0)
    return (eigvecs * eigvals[..., None, :]) @ np.conj(np.swapaxes(eigvecs, -1, -2))
