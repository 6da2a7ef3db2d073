"""Angular/time-frequency projection, matrix-pencil Doppler estimation and
channel extrapolation.

Channel records are arrays of shape ``(n_samples, n_t, n_f)`` sampled every
``T`` seconds; sample ``i`` (0-based) is aligned with projection block
``i + 1``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .channel import ChannelSnapshot
from .tfproj import TFDictionary

VARIANTS = ("standard", "difference")


class PencilBoundError(ValueError):
    """Pencil size outside the admissible interval for the model order."""


@dataclass(frozen=True)
class PencilConfig:
    """Matrix-pencil and prediction settings.

    `pencil_size` None selects ``floor(N_s / 2)`` clamped into the valid
    interval. `model_order` overrides the path count from the estimator.
    `gamma1` is the fraction of projected L1 mass kept by the support.
    """

    pencil_size: int = None
    n_predict: int = 1
    variant: str = "standard"
    gamma1: float = 0.99
    model_order: int = None
    rank_tol: float = 1e-10

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.n_predict < 0:
            raise ValueError("n_predict must be >= 0")
        if not 0 < self.gamma1 <= 1:
            raise ValueError("gamma1 must lie in (0, 1]")


def max_order(n_s, variant="standard"):
    """Largest model order the pencil bounds allow for `n_s` samples."""
    return (n_s - 1) // 2 if variant == "standard" else (n_s - 2) // 2


def pencil_bounds(n_s, p, variant="standard"):
    """Inclusive range ``(lo, hi)`` of admissible pencil sizes."""
    hi = n_s - p if variant == "standard" else n_s - p - 1
    return p + 1, hi


def default_pencil_size(n_s, p, variant="standard"):
    lo, hi = pencil_bounds(n_s, p, variant)
    if lo > hi:
        raise PencilBoundError(f"no admissible pencil size for N_s={n_s}, P={p}")
    return int(min(max(n_s // 2, lo), hi))


def hankel(x, q):
    """Hankel matrix with `q` rows: ``H[i, l] = x[i + l]``."""
    x = np.asarray(x)
    n = x.shape[0]
    idx = np.arange(q)[:, None] + np.arange(n - q + 1)[None, :]
    return x[idx]


def _check_q(n_s, q, p, variant):
    lo, hi = pencil_bounds(n_s, p, variant)
    if not lo <= q <= hi:
        raise PencilBoundError(f"pencil size {q} outside [{lo}, {hi}] "
                               f"for N_s={n_s}, P={p} ({variant})")


def pencil_poles(x, q, p, variant="standard", rank_tol=1e-10):
    """Estimate up to `p` signal poles from a uniformly sampled series.

    Returns the raw eigenvalues, largest magnitude first. Fewer than `p`
    are returned when the data has lower numerical rank.
    """
    x = np.asarray(x, complex)
    n_s = x.shape[0]
    _check_q(n_s, q, p, variant)
    if variant == "standard":
        d1 = hankel(x, q)
    else:
        d1 = hankel(x[1:], q) - hankel(x[:-1], q)
    left, right = d1[:, :-1], d1[:, 1:]
    u, s, v = numerics.svd(left)
    r = 0 if s.size == 0 or s[0] == 0 else min(p, int(np.sum(s > rank_tol * s[0])))
    if r == 0:
        return np.zeros(0, complex)
    # pseudo-inverse truncated to the model order keeps noise out of the
    # signal subspace; the nonzero eigenvalues are then the r poles
    left_pinv = (v[:, :r] / s[:r]) @ u[:, :r].conj().T
    ev = numerics.eig_general(right @ left_pinv)
    order = np.argsort(-np.abs(ev), kind="stable")
    return ev[order[:r]]


def poles_to_doppler(z, T, f_c=None, f=None):
    """Doppler (Hz) of unit poles observed at subcarrier `f`."""
    factor = 1.0 if f_c is None else 1 + (f_c if f is None else f) / f_c
    return np.angle(z) / (2 * np.pi * factor * T)


def mp_estimate(series, cfg, p, *, T, f_c=None, f=None):
    """Doppler estimates (Hz, ascending) by the standard matrix pencil.

    Parameters
    ----------
    series : (N_s,) complex ndarray
    cfg : PencilConfig
    p : int
        Number of tones.
    T : float
        Sample period.
    f_c, f : float, optional
        Carrier and subcarrier frequency. The phase advance per sample is
        ``2 pi (1 + f/f_c) omega T``; without `f_c` it is ``2 pi omega T``.
    """
    n_s = len(series)
    q = cfg.pencil_size or default_pencil_size(n_s, p)
    z = pencil_poles(series, q, p, "standard", cfg.rank_tol)
    return np.sort(poles_to_doppler(z, T, f_c, f))


def mp_estimate_difference(series, cfg, p, *, T, f_c=None, f=None):
    """Doppler estimates from the difference pencil.

    Insensitive to a constant additive offset on `series`.

    Raises
    ------
    numerics.NumericalError
        If the differenced data has no signal (rank collapse).
    """
    n_s = len(series)
    q = cfg.pencil_size or default_pencil_size(n_s, p, "difference")
    z = pencil_poles(series, q, p, "difference", cfg.rank_tol)
    if z.size == 0:
        raise numerics.NumericalError("difference pencil has rank zero")
    return np.sort(poles_to_doppler(z, T, f_c, f))


def _unit(z):
    return np.exp(1j * np.angle(z))


def _vandermonde(z, n):
    return z[None, :] ** np.arange(n)[:, None]


def extrapolate(d1, zhat, e1hat, e2hat, n_steps, mode="window"):
    """Continue a Hankel-structured series by `n_steps` samples.

    In ``"window"`` mode each step forms the one-sample-shifted Hankel
    matrix from the pole model, reads off its last entry, then slides the
    window: the first column is dropped and the newest column appended.
    ``"model"`` mode instead keeps shifting the whole modelled matrix,
    which has the closed form ``E1 Z^s (E1^+ D1 E2^+) E2``; the two agree
    whenever the data follows the pole model.

    Parameters
    ----------
    d1 : (Q, L) complex ndarray
        Hankel matrix of the observed series.
    zhat : (p,) complex ndarray
    e1hat : (Q, p) complex ndarray
    e2hat : (p, L) complex ndarray
    n_steps : int

    Returns
    -------
    (n_steps,) complex ndarray
    """
    if mode == "model":
        amp = numerics.pinv(e1hat) @ d1 @ numerics.pinv(e2hat)
        zs = zhat[None, :] ** np.arange(1, n_steps + 1)[:, None]
        return (zs * e1hat[-1][None, :]) @ amp @ e2hat[:, -1]
    if mode != "window":
        raise ValueError(f"unknown mode {mode!r}")
    z = np.diag(zhat)
    left = e1hat @ z @ numerics.pinv(e1hat)
    right = numerics.pinv(e2hat) @ e2hat
    d = np.array(d1, complex)
    out = np.empty(n_steps, complex)
    for s in range(n_steps):
        d2 = left @ d @ right
        out[s] = d2[-1, -1]
        d = np.concatenate([d[:, 1:], d2[:, -1:]], axis=1)
    return out


def _dedupe_poles(z, tol=1e-9):
    keep = []
    for v in z:
        if all(abs(v - w) > tol for w in keep):
            keep.append(v)
    return np.array(keep, complex)


def predict_series(x, n_steps, p, variant="standard", q=None, rank_tol=1e-10,
                   mode="model"):
    """Extrapolate one series `n_steps` samples past its end.

    Poles are reduced to unit modulus before building the model. The
    difference variant adds the constant (``z = 1``) term it cannot see.
    """
    x = np.asarray(x, complex)
    n_s = x.shape[0]
    if n_steps == 0:
        return x[-1]
    p = min(p, max_order(n_s, variant))
    if q is None:
        q = default_pencil_size(n_s, p, variant)
    z = _unit(pencil_poles(x, q, p, variant, rank_tol))
    if variant == "difference":
        z = _dedupe_poles(np.concatenate([z, [1.0 + 0j]]))
    if z.size == 0:
        return 0j
    d1 = hankel(x, q)
    e1 = _vandermonde(z, q)
    e2 = _vandermonde(z, d1.shape[1]).T
    return extrapolate(d1, z, e1, e2, n_steps, mode)[-1]


# -- projection ---------------------------------------------------------

def angular_transform(h, n_h, n_v):
    """Apply ``W_h^H (x) W_v^H`` along the antenna axis (axis -2)."""
    h = np.asarray(h, complex)
    shp = h.shape
    g = h.reshape(shp[:-2] + (n_h, n_v, shp[-1]))
    g = np.fft.ifft(np.fft.ifft(g, axis=-2, norm="ortho"), axis=-3, norm="ortho")
    return g.reshape(shp)


def angular_inverse(a, n_h, n_v):
    a = np.asarray(a, complex)
    shp = a.shape
    g = a.reshape(shp[:-2] + (n_h, n_v, shp[-1]))
    g = np.fft.fft(np.fft.fft(g, axis=-2, norm="ortho"), axis=-3, norm="ortho")
    return g.reshape(shp)


def select_support(weights, gamma1):
    """Smallest leading set whose L1 mass reaches ``gamma1`` of the total.

    Larger weights come first; equal weights keep the lower index first.
    Returns flat indices into `weights` in selection order.
    """
    if not 0 < gamma1 <= 1:
        raise ValueError("gamma1 must lie in (0, 1]")
    w = np.asarray(weights, float).ravel()
    total = w.sum()
    if total == 0:
        return np.zeros(0, int)
    order = np.argsort(-w, kind="stable")
    if gamma1 == 1:
        return order[w[order] > 0]
    csum = np.cumsum(w[order])
    n = int(np.searchsorted(csum, gamma1 * total, side="left")) + 1
    return order[:min(n, w.size)]


@dataclass
class ProjectedSeries:
    """Projected coefficients of a record.

    `coeffs` has shape (N_s, n_t, N_f * n_doppler): angle bin, then
    time-frequency atom. Flat support index is ``atom * n_t + angle``.
    """

    coeffs: np.ndarray = field(repr=False)
    angular: np.ndarray = field(repr=False)
    support: np.ndarray
    gamma1: float

    @property
    def n_t(self):
        return self.coeffs.shape[1]

    def mask(self):
        """Boolean (n_t, n_atoms) support mask."""
        m = np.zeros(self.coeffs.shape[1:][::-1], bool)
        m.ravel()[self.support] = True
        return m.T

    def series(self, n):
        """Time series of flat coefficient `n`."""
        j, a = divmod(int(n), self.n_t)
        return self.coeffs[:, a, j]


def _as_record(samples):
    if isinstance(samples, np.ndarray):
        return np.asarray(samples, complex)
    return np.stack([s.H if isinstance(s, ChannelSnapshot) else s for s in samples])


def project(samples, bn, tf, geom, gamma1=0.99):
    """Transform, angular DFT and time-frequency projection of a record.

    The support is picked on the time-averaged coefficient magnitudes.
    """
    rec = _as_record(samples)
    n = rec.shape[0]
    ang = angular_transform(bn.apply(rec.transpose(1, 0, 2)).transpose(1, 0, 2),
                            geom.n_h, geom.n_v)
    coeffs = np.stack([ang[i] @ (tf.block(i + 1).conj() / tf.n_doppler)
                       for i in range(n)])
    weight = np.mean(np.abs(coeffs), axis=0)
    support = select_support(weight.T, gamma1)
    return ProjectedSeries(coeffs, ang, support, gamma1)


def predict_channel(samples, est, bn, tf, cfg, geom):
    """Predict the channel ``cfg.n_predict`` samples after the record.

    Parameters
    ----------
    samples : (N_s, n_t, n_f) array or list of ChannelSnapshot
    est : PathEstimate or None
        Supplies the pencil model order unless ``cfg.model_order`` is set.
    bn : TransformMatrix
    tf : TFDictionary
    cfg : PencilConfig
    geom : ArrayGeometry

    Returns
    -------
    ChannelSnapshot
        At time ``(N_s + n_predict) * T``; `flags` holds ``"empty-support"``
        when nothing was selected.
    """
    rec = _as_record(samples)
    n_s = rec.shape[0]
    T = tf.cfg.T
    t_out = (n_s + cfg.n_predict) * T
    proj = project(rec, bn, tf, geom, cfg.gamma1)
    if proj.support.size == 0:
        warnings.warn("projection support is empty; predicting zero", stacklevel=2)
        return ChannelSnapshot(np.zeros(rec.shape[1:], complex), t_out,
                               ("empty-support",))
    mask = proj.mask()
    rows = np.flatnonzero(mask.any(axis=1))
    if cfg.n_predict == 0:
        fut = proj.angular[-1][rows]
    else:
        p = cfg.model_order if cfg.model_order is not None else max(est.p_hat, 1)
        fut = np.empty((rows.size, rec.shape[2]), complex)
        for i, a in enumerate(rows):
            for k in range(rec.shape[2]):
                fut[i, k] = predict_series(proj.angular[:, a, k], cfg.n_predict, p,
                                           cfg.variant, cfg.pencil_size, cfg.rank_tol)
    D = tf.block(n_s + cfg.n_predict)
    chi = (fut @ D.conj()) / tf.n_doppler
    chi *= mask[rows]
    ang = np.zeros(rec.shape[1:], complex)
    ang[rows] = chi @ D.T
    h = bn.apply_inverse(angular_inverse(ang, geom.n_h, geom.n_v))
    return ChannelSnapshot(h, t_out)


def predict_channel_bruteforce(samples, est, bn, tf, cfg, geom):
    """Literal per-coefficient, per-subcarrier reference implementation.

    Every selected coefficient is split into its subcarrier constituents,
    each constituent series is extrapolated on its own, and the forecasts
    are summed. Only meant for small test cases.
    """
    rec = _as_record(samples)
    n_s, n_t, n_f = rec.shape
    proj = project(rec, bn, tf, geom, cfg.gamma1)
    p = cfg.model_order if cfg.model_order is not None else max(est.p_hat, 1)
    target = n_s + cfg.n_predict
    D_fut = tf.block(target)
    chi_hat = {}
    for n in proj.support:
        j, a = divmod(int(n), n_t)
        total = 0j
        for k in range(n_f):
            series = np.array([np.conj(tf.block(i + 1)[k, j]) * proj.angular[i, a, k]
                               for i in range(n_s)]) / tf.n_doppler
            if cfg.n_predict == 0:
                total += series[-1]
            else:
                total += predict_series(series, cfg.n_predict, p, cfg.variant,
                                        cfg.pencil_size, cfg.rank_tol)
        chi_hat[(a, j)] = total
    ang = np.zeros((n_t, n_f), complex)
    for (a, j), c in chi_hat.items():
        ang[a] += c * D_fut[:, j]
    h = bn.apply_inverse(angular_inverse(ang, geom.n_h, geom.n_v))
    return ChannelSnapshot(h, target * tf.cfg.T)


def run_pipeline(record, geom, tf, cfg, dictionary=None, *, use_transform=True,
                 est=None, max_paths=8, residual_tol=0.05):
    """Estimate paths, build the transform and predict, in one call.

    Path estimation runs on the first-subcarrier column of the last observed
    sample unless an estimate (or oracle path list) is given.

    Returns
    -------
    (ChannelSnapshot, PathEstimate)
    """
    from .estimation import as_estimate, omp_estimate
    from .transform import TransformMatrix, build_transform

    rec = _as_record(record)
    if est is None:
        est = omp_estimate(rec[-1][:, 0], dictionary, max_paths, residual_tol)
    else:
        est = as_estimate(est)
    if use_transform and est.p_hat > 0:
        bn = build_transform(est, geom)
    else:
        bn = TransformMatrix.identity(geom.n_t)
    return predict_channel(rec, est, bn, tf, cfg, geom), est
