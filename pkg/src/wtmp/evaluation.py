"""Metrics, eigen-based zero-forcing, baselines and Monte-Carlo trials."""

import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from . import numerics
from .channel import (ArrayGeometry, ScenarioConfig, generate_scenario,
                      observe_record, synthesize_record)
from .estimation import build_dictionary, default_grid
from .predictor import PencilConfig, run_pipeline
from .tfproj import TFDictionary

ERROR_FLOOR_DB = -200.0

BASELINES = ("stationary", "no_prediction", "wtmp", "wtmp_no_transform",
             "wtmp_static_dict")


def _pairs(h_hat, h_true):
    a, b = np.asarray(h_hat, complex), np.asarray(h_true, complex)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim < 2:
        raise ValueError("channels must be at least 2-D")
    return a.reshape(-1, *a.shape[-2:]), b.reshape(-1, *b.shape[-2:])


def prediction_error(h_hat, h_true):
    """Mean of ``||H_hat - H||_F^2 / ||H||_F^2`` over leading axes."""
    a, b = _pairs(h_hat, h_true)
    num = np.sum(np.abs(a - b) ** 2, axis=(1, 2))
    den = np.sum(np.abs(b) ** 2, axis=(1, 2))
    if np.any(den == 0):
        raise ValueError("reference channel is zero")
    return float(np.mean(num / den))


def prediction_error_db(h_hat, h_true):
    """:func:`prediction_error` in dB, floored at -200 dB."""
    e = prediction_error(h_hat, h_true)
    return ERROR_FLOOR_DB if e <= 0 else max(10 * math.log10(e), ERROR_FLOOR_DB)


def transform_nmse(h, h_plane, bn):
    """NMSE to the planar-wavefront channel with and without the transform.

    Parameters
    ----------
    h, h_plane : (..., n_t, n_f) arrays
        Spherical-wavefront channels and their planar counterparts.
    bn : TransformMatrix

    Returns
    -------
    (with_transform, without_transform) : tuple of float
    """
    h, hp = _pairs(h, h_plane)
    moved = bn.diag[None, :, None] * h
    den = np.sum(np.abs(hp) ** 2, axis=(1, 2))
    w = np.sum(np.abs(moved - hp) ** 2, axis=(1, 2)) / den
    wo = np.sum(np.abs(h - hp) ** 2, axis=(1, 2)) / den
    return float(np.mean(w)), float(np.mean(wo))


def effective_row(h_ue):
    """Dominant left singular vector applied to a (ports, n_t) channel."""
    u, s, v = numerics.svd(np.asarray(h_ue, complex))
    return u[:, 0].conj() @ h_ue


def ezf_precode(channels, reg=1e-9):
    """Eigen-based zero-forcing precoder.

    Parameters
    ----------
    channels : sequence of (ports, n_t) arrays, one per UE

    Returns
    -------
    (n_t, n_ue) ndarray with unit-norm columns.
    """
    H = np.stack([effective_row(h) for h in channels])
    G = H @ H.conj().T
    s = np.linalg.svd(G, compute_uv=False)
    if s[-1] <= 1e-10 * s[0]:
        warnings.warn("effective channel is rank deficient; regularizing",
                      stacklevel=2)
        W = H.conj().T @ np.linalg.inv(G + reg * s[0] * np.eye(G.shape[0]))
    else:
        W = H.conj().T @ np.linalg.inv(G)
    return W / np.linalg.norm(W, axis=0, keepdims=True)


def spectral_efficiency(true_channels, precoder, snr_db):
    """Sum over UEs of ``log2(1 + SINR)`` with true effective rows."""
    H = np.stack([effective_row(h) for h in true_channels])
    rho = 10 ** (snr_db / 10)
    g = np.abs(H @ precoder) ** 2
    sig = np.diag(g)
    intf = g.sum(axis=1) - sig
    return float(np.sum(np.log2(1 + rho * sig / (1 + rho * intf))))


def mean_se(true_ue, est_ue, snr_db):
    """SE averaged over subcarriers.

    `true_ue`/`est_ue` are lists (per UE) of (ports, n_t, n_f) arrays.
    """
    n_f = true_ue[0].shape[-1]
    out = 0.0
    for k in range(n_f):
        W = ezf_precode([h[:, :, k] for h in est_ue])
        out += spectral_efficiency([h[:, :, k] for h in true_ue], W, snr_db)
    return out / n_f


@dataclass
class ExperimentResult:
    metric: str
    axis_name: str
    axis: list
    samples: list = field(repr=False)  # samples[i] = per-seed values at axis[i]
    seeds: list = field(default_factory=list)

    @property
    def n(self):
        return len(self.seeds)

    @property
    def mean(self):
        return [float(np.mean(s)) for s in self.samples]

    @property
    def stderr(self):
        return [float(np.std(s, ddof=1) / np.sqrt(len(s))) if len(s) > 1 else 0.0
                for s in self.samples]

    def rows(self):
        return [(a, m, e, self.n) for a, m, e in zip(self.axis, self.mean, self.stderr)]


@dataclass
class SEExperiment:
    """Multi-user downlink scenario for baseline comparisons."""

    n_h: int = 1
    n_v: int = 256
    f_c: float = 39e9
    delta_f: float = 30e3
    n_f: int = 12
    T: float = 0.5e-3
    n_s: int = 25
    csi_delay: int = 32
    n_ue: int = 4
    n_clusters: int = 1
    rays_per_cluster: int = 10
    distance_range: tuple = (6.0, 12.0)
    distance_spread: float = 0.0
    angular_spreads: dict = field(default_factory=lambda: {"eod": 6.0, "aod": 1.0,
                                                           "eoa": 10.0, "aoa": 30.0})
    speed: float = 1.5
    obs_snr_db: float = None
    snr_db: tuple = (0.0, 10.0, 20.0, 30.0)
    gamma1: float = 0.99
    variant: str = "standard"
    max_paths: int = 8
    residual_tol: float = 0.05
    grid_counts: tuple = (30, 90, 36)

    def geometry(self):
        return ArrayGeometry.half_wavelength(self.n_h, self.n_v, self.f_c)

    def scenario(self):
        return ScenarioConfig(self.f_c, self.delta_f, self.n_f, self.T, self.n_s)

    def to_dict(self):
        return asdict(self)


class TrialRunner:
    """Shares the dictionary and projection blocks across trials."""

    def __init__(self, exp):
        self.exp = exp
        self.geom = exp.geometry()
        self.cfg = exp.scenario()
        self.grid = default_grid(self.geom, exp.distance_range,
                                 counts=exp.grid_counts)
        self.dictionary = build_dictionary(self.geom, self.grid)
        self.tf = TFDictionary(self.cfg)
        self.tf_static = TFDictionary(self.cfg, static=True)
        self.pencil = PencilConfig(n_predict=exp.csi_delay, variant=exp.variant,
                                   gamma1=exp.gamma1)

    def ue_paths(self, seed, ue):
        e = self.exp
        return generate_scenario(
            [seed, ue], e.n_clusters, e.rays_per_cluster, e.distance_range,
            e.angular_spreads, e.speed, wavelength=self.cfg.wavelength,
            distance_spread=e.distance_spread)

    def ue_records(self, seed, ue):
        """Truth over the whole horizon and the (noisy) observed window,
        each shaped (ports, samples, n_t, n_f)."""
        e = self.exp
        paths = self.ue_paths(seed, ue)
        times = np.arange(1, e.n_s + e.csi_delay + 1) * e.T
        truth = np.stack([synthesize_record(self.geom, self.cfg, paths, times, port)
                          for port in range(2)])
        rng = np.random.default_rng([seed, ue, 7])
        obs = np.stack([observe_record(truth[v, :e.n_s], e.obs_snr_db, rng)
                        for v in range(2)])
        return truth, obs

    def estimate(self, kind, obs):
        """Channel used for precoding, (ports, n_t, n_f)."""
        if kind == "no_prediction":
            return obs[:, -1]
        opts = dict(max_paths=self.exp.max_paths, residual_tol=self.exp.residual_tol)
        tf = self.tf_static if kind == "wtmp_static_dict" else self.tf
        use_b = kind != "wtmp_no_transform"
        out = []
        est = None
        for v in range(obs.shape[0]):
            snap, e = run_pipeline(obs[v], self.geom, tf, self.pencil, self.dictionary,
                                   use_transform=use_b, est=est, **opts)
            est = e  # both ports share the geometry
            out.append(snap.H)
        return np.stack(out)

    def trial(self, seed, kinds=BASELINES):
        """SE per kind and SNR, plus prediction error per kind."""
        truth, obs, est = [], [], {k: [] for k in kinds}
        for ue in range(self.exp.n_ue):
            t, o = self.ue_records(seed, ue)
            truth.append(t[:, -1])
            obs.append(o)
            for k in kinds:
                est[k].append(t[:, -1] if k == "stationary" else self.estimate(k, o))
        se = {k: [mean_se(truth, est[k], s) for s in self.exp.snr_db] for k in kinds}
        err = {k: prediction_error(np.stack(est[k]), np.stack(truth)) for k in kinds}
        return se, err


def run_trials(exp, seeds, kinds=BASELINES, workers=1):
    """SE-vs-SNR results for several baselines over the given seeds.

    Seeds are independent; with ``workers > 1`` they run on a thread pool
    and results are collected in seed order.

    Returns
    -------
    dict kind -> ExperimentResult, and dict kind -> list of prediction errors
    """
    runner = TrialRunner(exp)
    se = {k: [] for k in kinds}
    err = {k: [] for k in kinds}
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            outs = list(pool.map(lambda s: runner.trial(s, kinds), seeds))
    else:
        outs = [runner.trial(s, kinds) for s in seeds]
    for a, b in outs:
        for k in kinds:
            se[k].append(a[k])
            err[k].append(b[k])
    res = {}
    for k in kinds:
        per_snr = np.array(se[k]).T.tolist()
        res[k] = ExperimentResult("se_bps_hz", "snr_db", list(exp.snr_db),
                                  per_snr, list(seeds))
    return res, err


def run_baseline(kind, exp=None, seeds=range(20)):
    """SE-vs-SNR result for one baseline."""
    if kind not in BASELINES:
        raise ValueError(f"unknown baseline {kind!r}")
    res, _ = run_trials(exp or SEExperiment(), list(seeds), (kind,))
    return res[kind]


def antenna_sweep(n_t_values=(32, 64, 128, 256), seeds=range(20), n_paths=3,
                  n_predict=4, distance_range=(5.0, 20.0), speed=1.5,
                  f_c=39e9, delta_f=30e3, n_f=12, T=0.5e-3, gamma1=0.99,
                  use_transform=True):
    """Prediction error against array size for a sparse near-field channel.

    Uses a vertical ULA, ``N_s = 2 * n_paths + 2`` noise-free samples and
    single-ray clusters.
    """
    seeds = list(seeds)
    n_s = 2 * n_paths + 2
    cfg = ScenarioConfig(f_c, delta_f, n_f, T, n_s)
    tf = TFDictionary(cfg)
    pencil = PencilConfig(n_predict=n_predict, gamma1=gamma1)
    times = np.arange(1, n_s + n_predict + 1) * T
    samples = []
    for n_t in n_t_values:
        geom = ArrayGeometry.half_wavelength(1, n_t, f_c)
        dic = build_dictionary(geom, default_grid(geom, distance_range))
        errs = []
        for s in seeds:
            paths = generate_scenario(s, n_paths, 1, distance_range, speed=speed,
                                      wavelength=cfg.wavelength, n_ports=1)
            rec = synthesize_record(geom, cfg, paths, times)
            snap, _ = run_pipeline(rec[:n_s], geom, tf, pencil, dic,
                                   use_transform=use_transform)
            errs.append(prediction_error(snap.H, rec[-1]))
        samples.append(errs)
    return ExperimentResult("prediction_error", "n_t", list(n_t_values), samples, seeds)


def distance_sweep(distances=(30.0, 60.0, 120.0, 240.0), seeds=range(20), n_t=256,
                   n_paths=3, f_c=39e9, delta_f=30e3, n_f=12, T=0.5e-3,
                   angular_spread_deg=2.0):
    """Transform NMSE with and without the transform against distance.

    Paths of one cluster sit at the swept distance; the transform is built
    from the true parameters.

    Returns
    -------
    (with_result, without_result) : ExperimentResult pair
    """
    from .transform import build_transform

    seeds = list(seeds)
    cfg = ScenarioConfig(f_c, delta_f, n_f, T, 1)
    geom = ArrayGeometry.half_wavelength(1, n_t, f_c)
    spreads = {"eod": angular_spread_deg, "aod": angular_spread_deg}
    w_all, wo_all = [], []
    for r in distances:
        w, wo = [], []
        for s in seeds:
            paths = generate_scenario(s, 1, n_paths, (r, r), spreads, 0.0,
                                      wavelength=cfg.wavelength, n_ports=1)
            bn = build_transform(paths, geom)
            h = synthesize_record(geom, cfg, paths, [0.0])
            hp = synthesize_record(geom, cfg, paths, [0.0], model="plane")
            a, b = transform_nmse(h, hp, bn)
            w.append(a)
            wo.append(b)
        w_all.append(w)
        wo_all.append(wo)
    return (ExperimentResult("nmse_with_transform", "r_m", list(distances), w_all, seeds),
            ExperimentResult("nmse_without_transform", "r_m", list(distances), wo_all, seeds))
