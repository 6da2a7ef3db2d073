"""Delay/Doppler sampling intervals and the time-frequency projection.

For sample index ``n_t`` (1-based, time ``n_t * T``) the projection block
is ``D_{n_t} = [W_1, ..., W_{N_s}]`` where ``W_{n_s}`` holds delay/Doppler
response vectors on a delay grid of step ``delta_tau`` and Doppler
``(n_s - 1) * delta_omega``. Every ``W_{n_s}`` is a diagonal phase times
the unitary DFT, hence ``D_{n_t} D_{n_t}^H = N_s I``.
"""

import numpy as np

from . import numerics


def delay_interval(cfg):
    """Delay grid step ``1 / (N_f * delta_f)`` in seconds."""
    return 1.0 / (cfg.n_f * cfg.delta_f)


def doppler_interval(cfg):
    """Doppler grid step in Hz, using the first subcarrier."""
    return cfg.f_c / (cfg.n_s * cfg.T * (cfg.f_c + cfg.f_1))


def doppler_interval_exact(cfg, n_f=1):
    """Doppler step that zeroes the coherence at subcarrier `n_f`."""
    f = cfg.f_1 + (n_f - 1) * cfg.delta_f
    return cfg.f_c / (cfg.n_s * cfg.T * (cfg.f_c + f))


def delay_coherence(cfg, tau_a, tau_b):
    """Normalized inner product of two delay responses across subcarriers."""
    # the common f_1 phase drops out of the magnitude
    df = np.arange(cfg.n_f) * cfg.delta_f
    return np.abs(np.sum(np.exp(2j * np.pi * df * (tau_b - tau_a)))) / cfg.n_f


def doppler_coherence(cfg, w_a, w_b, n_f=1):
    """Normalized inner product of two Doppler sequences over the samples."""
    f = cfg.f_1 + (n_f - 1) * cfg.delta_f
    n = np.arange(1, cfg.n_s + 1)
    ph = 2 * np.pi * (1 + f / cfg.f_c) * (w_b - w_a) * n * cfg.T
    return np.abs(np.sum(np.exp(1j * ph))) / cfg.n_s


class TFDictionary:
    """Lazily built, cached time-frequency projection blocks.

    Parameters
    ----------
    cfg : ScenarioConfig
    static : bool
        Keep only the zero-Doppler (pure DFT) block.
    dense_cap : int
        Largest entry count for which the full record-wide matrix may be
        materialized.
    """

    def __init__(self, cfg, static=False, dense_cap=1 << 22):
        self.cfg = cfg
        self.n_f = cfg.n_f
        self.n_s = cfg.n_s
        self.static = static
        self.n_doppler = 1 if static else cfg.n_s
        self.delta_tau = delay_interval(cfg)
        self.delta_omega = doppler_interval(cfg)
        self.dense_cap = dense_cap
        self._cache = {}

    @property
    def block_width(self):
        return self.n_f * self.n_doppler

    def build_block(self, n_s, n_t):
        """``W_{n_s}`` at sample `n_t` (both 1-based), shape (N_f, N_f)."""
        c = self.cfg
        f = c.subcarriers
        k = np.arange(self.n_f)
        dop = (1 + f / c.f_c) * (n_s - 1) * n_t * self.delta_omega * c.T
        # (f_k - f_1) * n' * delta_tau == k * n' / N_f exactly
        dly = (np.outer(k, k) % self.n_f) / self.n_f
        return np.exp(2j * np.pi * (dop[:, None] - dly)) / np.sqrt(self.n_f)

    def block(self, n_t):
        """``D_{n_t}``, shape (N_f, N_f * n_doppler); column ``(n_s-1)*N_f + n'``."""
        if n_t not in self._cache:
            self._cache[n_t] = np.concatenate(
                [self.build_block(s, n_t) for s in range(1, self.n_doppler + 1)],
                axis=1)
        return self._cache[n_t]

    def full(self):
        """Record-wide matrix ``[D_1, ..., D_{N_s}]``."""
        size = self.n_f * self.block_width * self.n_s
        if size > self.dense_cap:
            raise MemoryError(f"full projection matrix has {size} entries; "
                              f"cap is {self.dense_cap}")
        return np.concatenate([self.block(n) for n in range(1, self.n_s + 1)], axis=1)

    def scale(self, n_t=None):
        """Gram scale: ``D D^H = scale * I``."""
        return self.n_doppler * (self.n_s if n_t is None else 1)


def project_tf(x, tf, n_t=None, method="adjoint"):
    """Project frequency-domain data onto the delay/Doppler atoms.

    With ``n_t`` the block for that sample is used; otherwise the
    record-wide matrix. `x` may carry trailing or leading axes: the
    frequency axis must be the last one.

    ``method="pinv"`` uses an SVD pseudo-inverse instead of the scaled
    adjoint; both agree because the blocks have orthogonal rows.
    """
    D = tf.full() if n_t is None else tf.block(n_t)
    if method == "adjoint":
        P = D.conj().T / tf.scale(n_t)
    elif method == "pinv":
        P = numerics.pinv(D)
    else:
        raise ValueError(f"unknown method {method!r}")
    return np.asarray(x) @ P.T


def reconstruct_tf(c, tf, n_t=None):
    """Map coefficients back to the frequency domain (applies ``D``)."""
    D = tf.full() if n_t is None else tf.block(n_t)
    return np.asarray(c) @ D.T
