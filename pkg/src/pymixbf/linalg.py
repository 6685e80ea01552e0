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
Complex Hermitian kernels.

Matrices have shape (..., M, M) and vectors (..., M). Leading dimensions are
independent problems, usually one per frequency bin.
"""

import numpy as np
import scipy.linalg

from .warnings import DirectInverseWarning

LOADING = 1e-9
TINY = np.finfo(np.float64).tiny


class SingularMatrix(ValueError):
    def __init__(self, index, msg=None):
        self.index = index
        if msg is None:
            msg = (
                "Matrix is singular beyond loading tolerance "
                f"in frequency bin {index}."
            )
        super().__init__(msg)


def _bin_of(batch_shape, flat_index):
    if not batch_shape:
        return ()
    index = np.unravel_index(flat_index, batch_shape)
    return index[0] if len(index) == 1 else tuple(int(i) for i in index)


def hermitize(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def identity_like(a):
    return np.broadcast_to(np.eye(a.shape[-1], dtype=a.dtype), a.shape).copy()


def load_diagonal(a, eps=LOADING):
    dim = a.shape[-1]
    level = eps * np.real(np.trace(a, axis1=-2, axis2=-1)) / dim
    return a + level[..., None, None] * np.eye(dim)


def _cholesky_or_raise(a):
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    batch_shape = a.shape[:-2]
    flat = a.reshape((-1,) + a.shape[-2:])
    for i, matrix in enumerate(flat):
        try:
            np.linalg.cholesky(matrix)
        except np.linalg.LinAlgError:
            raise SingularMatrix(_bin_of(batch_shape, i)) from None
    raise SingularMatrix(())


def solve_hpd(a, b, eps=LOADING):
    """
    Solve ``a @ x = b`` for Hermitian positive-definite ``a``.

    ``a`` is diagonally loaded by ``eps * tr(a) / M`` before factorising and
    the solution gets one refinement step against the unloaded matrix.
    ``b`` may be a matrix (..., M, K) or a vector (..., M).
    """
    a = hermitize(np.asarray(a, dtype=np.complex128))
    b = np.asarray(b)
    vector = b.ndim == a.ndim - 1
    if vector:
        b = b[..., None]
    if b.shape[-2] != a.shape[-1]:
        raise ValueError(f"Shape mismatch: {a.shape} and {b.shape}.")
    if not np.all(np.isfinite(a)):
        batch_shape = a.shape[:-2]
        bad = np.flatnonzero(~np.all(np.isfinite(a), axis=(-2, -1)))
        raise SingularMatrix(
            _bin_of(batch_shape, bad[0]) if batch_shape else (),
            "Matrix has non-finite entries.",
        )
    loaded = load_diagonal(a, eps)
    _cholesky_or_raise(loaded)
    x = np.linalg.solve(loaded, b)
    x = x + np.linalg.solve(loaded, b - a @ x)
    return x[..., 0] if vector else x


def inverse_hpd(a, eps=LOADING):
    a = np.asarray(a, dtype=np.complex128)
    return hermitize(solve_hpd(a, identity_like(a), eps))


def rank1_inverse_update(ainv, x, beta, warnings=None):
    """
    Return ``(beta * A + (1 - beta) * x x^H)^-1`` given ``ainv = A^-1``.

    Sherman-Morrison, O(M^2) per problem. ``beta`` broadcasts over the batch
    dimensions. Problems whose denominator underflows are inverted directly.
    """
    ainv = np.asarray(ainv, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    beta = np.asarray(beta, dtype=np.float64)
    if np.any(beta < 0) or np.any(beta > 1):
        raise ValueError("Beta should be in (0, 1].")
    if np.any(beta == 0):
        if np.any(np.all(x == 0, axis=-1)):
            raise ValueError("Degenerate update: beta is 0 and x is 0.")
        raise ValueError("Beta should be in (0, 1], the update has no inverse.")
    c = 1.0 - beta
    u = (ainv @ x[..., None])[..., 0]
    denom = beta + c * np.real(np.einsum("...i,...i->...", np.conj(x), u))
    outer = u[..., :, None] * np.conj(u[..., None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = c / denom
        updated = (ainv - gain[..., None, None] * outer) / beta[..., None, None]
    underflow = ~(denom > 1e-12 * beta)
    if np.any(underflow):
        # O(M^3) fallback for the affected problems only
        batch_shape = denom.shape
        full = np.broadcast_to(ainv, batch_shape + ainv.shape[-2:])
        a = np.linalg.inv(full[underflow])
        beta_u = np.broadcast_to(beta, batch_shape)[underflow]
        xu = np.broadcast_to(x, batch_shape + x.shape[-1:])[underflow]
        direct = beta_u[:, None, None] * a + (1.0 - beta_u)[:, None, None] * (
            xu[:, :, None] * np.conj(xu[:, None, :])
        )
        updated = np.array(np.broadcast_to(updated, batch_shape + ainv.shape[-2:]))
        updated[underflow] = inverse_hpd(direct)
        if warnings is not None:
            warnings.append(DirectInverseWarning(np.flatnonzero(underflow)))
    return hermitize(updated)


def trace_of_product(ainv, b, tolerance=1e-9):
    """Return the real ``tr{ainv @ b}`` of two Hermitian matrices."""
    ainv = np.asarray(ainv)
    b = np.asarray(b)
    if ainv.shape[-2:] != b.shape[-2:] or ainv.shape[-1] != ainv.shape[-2]:
        raise ValueError(f"Shape mismatch: {ainv.shape} and {b.shape}.")
    trace = np.einsum("...ij,...ji->...", ainv, b)
    scale = np.linalg.norm(ainv, axis=(-2, -1)) * np.linalg.norm(b, axis=(-2, -1))
    if np.any(np.abs(np.imag(trace)) > tolerance * np.maximum(scale, TINY)):
        raise ValueError("Trace is not real, the arguments are not Hermitian.")
    return np.real(trace)


def power_iteration(avinv, ax, u_prev, iters=1):
    """
    Warm-started power method on ``avinv @ ax``.

    Returns the unit vector after ``iters`` iterations and a boolean flag that
    is set where the iterate vanished; there ``u_prev`` is returned unchanged.
    """
    if iters < 1:
        raise ValueError("Value should be a positive integer.")
    u_prev = np.asarray(u_prev, dtype=np.complex128)
    if np.any(np.all(u_prev == 0, axis=-1)):
        raise ValueError("Initial vector should be nonzero.")
    avinv = np.asarray(avinv)
    ax = np.asarray(ax)
    u = u_prev
    degenerate = np.zeros(np.broadcast(ax[..., 0], u_prev).shape[:-1], dtype=bool)
    for _ in range(iters):
        # two mat-vecs keep each iteration O(M^2)
        v = (avinv @ (ax @ u[..., None]))[..., 0]
        norm = np.linalg.norm(v, axis=-1)
        degenerate = degenerate | ~(norm > TINY) | ~np.isfinite(norm)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = v / norm[..., None]
    u = np.where(degenerate[..., None], u_prev, u)
    return u, degenerate


def rayleigh_quotient(ax, av, u):
    u = np.asarray(u)
    num = np.real(np.einsum("...i,...ij,...j->...", np.conj(u), ax, u))
    den = np.real(np.einsum("...i,...ij,...j->...", np.conj(u), av, u))
    return num / den


def dominant_generalized_eigvec(ax, av):
    """Dense oracle: the dominant eigenvector of ``ax v = lambda av v``."""
    ax = np.asarray(ax)
    av = np.asarray(av)
    batch_shape = ax.shape[:-2]
    flat_x = ax.reshape((-1,) + ax.shape[-2:])
    flat_v = av.reshape((-1,) + av.shape[-2:])
    vectors = np.empty(flat_x.shape[:-1], dtype=np.complex128)
    for i, (mx, mv) in enumerate(zip(flat_x, flat_v)):
        _, eigvecs = scipy.linalg.eigh(hermitize(mx), hermitize(mv))
        vector = eigvecs[:, -1]
        vectors[i] = vector / np.linalg.norm(vector)
    return vectors.reshape(batch_shape + ax.shape[-1:])


def inverse_residual(a, ainv):
    """Largest entry of ``a @ ainv - I``."""
    a = np.asarray(a)
    return float(np.max(np.abs(a @ ainv - np.eye(a.shape[-1]))))


def min_eigenvalue(a):
    return np.linalg.eigvalsh(hermitize(np.asarray(a)))[..., 0]
