"""Diagonal phase transform that flattens spherical wavefronts.

The transform multiplies each antenna by a unit-modulus phase chosen so
that near-field steering vectors of the estimated paths move toward their
planar (far-field) counterparts.
"""

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .channel import distance_response, far_steering
from .estimation import as_estimate

#: Largest ``n_t * P`` for which the dense construction is cross-checked.
DENSE_CHECK_CAP = 4096


def build_u1(est, geom):
    """Unit-norm planar steering vector of the first (strongest) path."""
    est = as_estimate(est)
    if est.p_hat < 1:
        raise ValueError("need at least one estimated path")
    return far_steering(geom, est.theta_hat[0], est.phi_hat[0]) / np.sqrt(geom.n_t)


def build_g_row(u1, n):
    """Row `n` (1-based) of the orthogonalizing block.

    The row has the largest possible `n`-th entry subject to unit norm and
    orthogonality to `u1`. Its off-diagonal entries all share the modulus
    ``1 / sqrt(N (N - 1))``.
    """
    u1 = np.asarray(u1, complex)
    N = u1.shape[0]
    if N < 2:
        raise ValueError("need at least two antennas")
    if not 1 <= n <= N:
        raise IndexError(f"row {n} outside 1..{N}")
    uc = u1.conj()
    zero = np.flatnonzero(np.abs(u1) == 0)
    if zero.size:
        raise numerics.NumericalError(f"u1 vanishes at index {zero[0] + 1}")
    common = -uc[n - 1] / np.sqrt(N * (N - 1))
    g = common / uc
    g[n - 1] = np.sqrt((N - 1) / N)
    return g


def g_diagonal(n_t):
    """Concentrated entry shared by every row."""
    return np.sqrt((n_t - 1) / n_t)


@dataclass(frozen=True)
class TransformMatrix:
    """Diagonal unit-modulus transform, stored as its diagonal."""

    diag: np.ndarray = field(repr=False)

    @classmethod
    def identity(cls, n_t):
        return cls(np.ones(n_t, complex))

    @property
    def n_t(self):
        return self.diag.shape[0]

    def apply(self, h):
        """Transform antenna-domain data; the first axis indexes antennas."""
        h = np.asarray(h)
        return self.diag.reshape((-1,) + (1,) * (h.ndim - 1)) * h

    def apply_inverse(self, h):
        h = np.asarray(h)
        return self.diag.conj().reshape((-1,) + (1,) * (h.ndim - 1)) * h

    def phases(self):
        """(index, phase in radians) pairs, index 1-based."""
        return list(zip(range(1, self.n_t + 1), np.angle(self.diag).tolist()))


def _transform_diagonal(est, geom):
    P = est.p_hat
    acc = np.zeros(geom.n_t, complex)
    for p in range(P):
        ar = distance_response(geom, est.theta_hat[p], est.phi_hat[p], est.r_hat[p])
        w = 1 + g_diagonal(geom.n_t) if p == 0 else 1.0
        acc += w * ar.conj()
    return acc / P


def _dense_transform(est, geom):
    """Full matrix product with a numerical pseudo-inverse; test path."""
    N, P = geom.n_t, est.p_hat
    K = np.tile(np.eye(N), (1, P))
    K_pinv = numerics.pinv(K)
    expect = np.tile(np.eye(N), (P, 1)) / P
    if np.max(np.abs(K_pinv - expect)) > 1e-12:
        raise numerics.NumericalError("pseudo-inverse of the stacked identity "
                                      "deviates from its closed form")
    G = np.zeros((N, N * P), complex)
    G[:, :N] = g_diagonal(N) * np.eye(N)
    ar_inv = np.concatenate([
        distance_response(geom, est.theta_hat[p], est.phi_hat[p], est.r_hat[p]).conj()
        for p in range(P)])
    return ((G + K) * ar_inv) @ K_pinv


def build_transform(est, geom, verify=None):
    """Build the wavefront transform from path estimates.

    Parameters
    ----------
    est : PathEstimate or sequence of PathParams
        Estimated (or oracle) paths; the first one is treated as dominant.
    geom : ArrayGeometry
    verify : bool, optional
        Cross-check the closed form against the dense matrix product.
        Defaults to True when ``n_t * P <= DENSE_CHECK_CAP``.

    Returns
    -------
    TransformMatrix
    """
    est = as_estimate(est)
    if est.p_hat < 1:
        raise ValueError("need at least one estimated path")
    if np.any(np.asarray(est.r_hat) <= 0):
        raise ValueError("estimated distances must be positive")
    d = _transform_diagonal(est, geom)
    if verify is None:
        verify = geom.n_t * est.p_hat <= DENSE_CHECK_CAP
    if verify:
        B = _dense_transform(est, geom)
        off = B - np.diag(np.diag(B))
        if np.max(np.abs(off)) >= 1e-12:
            raise numerics.NumericalError("dense transform is not diagonal")
        if np.max(np.abs(np.diag(B) - d)) > 1e-10:
            raise numerics.NumericalError("dense and closed-form transforms differ")
    mag = np.abs(d)
    bad = np.flatnonzero(mag <= 1e-14 * max(mag.max(), 1.0))
    if bad.size:
        raise numerics.NumericalError(
            f"transform diagonal vanishes at antenna {bad[0] + 1}")
    return TransformMatrix(d / mag)


class FrequencyExtended:
    """``I_{N_f} (x) diag(b)`` applied blockwise to vectorized channels."""

    def __init__(self, bn, n_f):
        self.bn = bn
        self.n_f = n_f

    @property
    def shape(self):
        n = self.bn.n_t * self.n_f
        return n, n

    def _blocks(self, x):
        x = np.asarray(x, complex)
        if x.shape[0] != self.shape[0]:
            raise ValueError(f"expected leading dimension {self.shape[0]}")
        return x.reshape((self.n_f, self.bn.n_t) + x.shape[1:])

    def apply(self, x):
        xb = self._blocks(x)
        return (self.bn.diag.reshape((1, -1) + (1,) * (xb.ndim - 2)) * xb).reshape(np.shape(x))

    def apply_inverse(self, x):
        xb = self._blocks(x)
        return (self.bn.diag.conj().reshape((1, -1) + (1,) * (xb.ndim - 2)) * xb).reshape(np.shape(x))

    def dense(self):
        return numerics.kron(np.eye(self.n_f), np.diag(self.bn.diag))


def frequency_extend(bn, n_f):
    return FrequencyExtended(bn, n_f)
