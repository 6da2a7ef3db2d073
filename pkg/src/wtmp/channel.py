"""Spherical-wavefront multipath channel for a uniform planar array.

The BS array lies in the yOz plane with its reference element at the
origin. Antenna vectors are ordered ``a_h (x) a_v``: the vertical index runs
fastest, so element ``(s_h, s_v)`` (1-based) sits at flat index
``(s_h - 1) * n_v + (s_v - 1)``.

Subcarrier frequencies are absolute RF frequencies, ``f_1`` close to ``f_c``.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayGeometry:
    """UPA with `n_h` columns (along y) and `n_v` rows (along z).

    Each dimension must be even or equal to one; a singleton dimension
    collapses onto the origin, which turns the UPA into a ULA.
    """

    n_h: int
    n_v: int
    d_h: float
    d_v: float
    wavelength: float

    def __post_init__(self):
        for name in ("n_h", "n_v"):
            n = getattr(self, name)
            if n < 1 or (n > 1 and n % 2):
                raise ValueError(f"{name} must be 1 or even, got {n}")
        if self.wavelength <= 0 or self.d_h <= 0 or self.d_v <= 0:
            raise ValueError("spacings and wavelength must be positive")

    @classmethod
    def half_wavelength(cls, n_h, n_v, f_c):
        lam = SPEED_OF_LIGHT / f_c
        return cls(n_h, n_v, lam / 2, lam / 2, lam)

    @property
    def n_t(self):
        return self.n_h * self.n_v

    @property
    def aperture_h(self):
        return (self.n_h - 1) * self.d_h

    @property
    def aperture_v(self):
        return (self.n_v - 1) * self.d_v

    @property
    def span_h(self):
        """Twice the largest |y| of any element."""
        return 2 * np.max(np.abs(self.offsets_h()))

    @property
    def span_v(self):
        """Twice the largest |z| of any element."""
        return 2 * np.max(np.abs(self.offsets_v()))

    def offsets_h(self):
        if self.n_h == 1:
            return np.zeros(1)
        return self.d_h * (np.arange(1, self.n_h + 1) - self.n_h / 2)

    def offsets_v(self):
        if self.n_v == 1:
            return np.zeros(1)
        return self.d_v * (np.arange(1, self.n_v + 1) - self.n_v / 2)

    def positions(self):
        """(n_t, 3) element coordinates in flat antenna order."""
        y, z = np.meshgrid(self.offsets_h(), self.offsets_v(), indexing="ij")
        return np.stack([np.zeros(self.n_t), y.ravel(), z.ravel()], axis=1)


@dataclass(frozen=True)
class PathParams:
    """One propagation path.

    `theta`/`phi` are the BS-side EOD/AOD, `r` the distance from the
    reference element to the scatterer, `doppler` in Hz and `gains` one
    complex amplitude per UE receive port.
    """

    theta: float
    phi: float
    r: float
    tau0: float
    doppler: float
    gains: tuple = (1.0 + 0j,)
    theta_eoa: float = math.pi / 2
    phi_aoa: float = 0.0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("path distance must be positive")
        if not 0 <= self.theta <= math.pi:
            raise ValueError(f"theta={self.theta} outside [0, pi]")
        if not -math.pi < self.phi <= math.pi:
            raise ValueError(f"phi={self.phi} outside (-pi, pi]")
        object.__setattr__(self, "gains", tuple(complex(g) for g in self.gains))

    def delay(self, t, f_c):
        """Time-varying delay ``tau0 - doppler * t / f_c``."""
        return self.tau0 - self.doppler * t / f_c


@dataclass(frozen=True)
class ScenarioConfig:
    f_c: float
    delta_f: float
    n_f: int
    T: float
    n_s: int
    f_1: float = None
    ue_velocity: tuple = (0.0, 0.0, 0.0)
    noise_snr_db: float = None
    seed: int = 0

    def __post_init__(self):
        if self.f_1 is None:
            object.__setattr__(self, "f_1", self.f_c - self.bandwidth / 2)
        if self.f_1 <= 0 or self.n_f < 1 or self.n_s < 1 or self.T <= 0:
            raise ValueError("invalid scenario configuration")
        if min(self.f_c, self.f_1) < 10 * self.bandwidth:
            warnings.warn("carrier is not much larger than the bandwidth; "
                          "the Doppler-interval approximation degrades",
                          stacklevel=2)

    @property
    def bandwidth(self):
        return self.n_f * self.delta_f

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.f_c

    @property
    def subcarriers(self):
        return self.f_1 + np.arange(self.n_f) * self.delta_f


@dataclass(frozen=True)
class ChannelSnapshot:
    """Channel matrix of shape (n_t, n_f) at time `t`."""

    H: np.ndarray = field(repr=False)
    t: float = 0.0
    flags: tuple = ()

    def __post_init__(self):
        H = np.asarray(self.H, dtype=np.complex128)
        if H.ndim != 2 or not np.all(np.isfinite(H)):
            raise ValueError("snapshot must be a finite 2-D array")
        object.__setattr__(self, "H", H)

    @property
    def vec(self):
        """Column-stacked form: subcarrier index outer, antenna inner."""
        return self.H.reshape(-1, order="F")


def rx_unit_vector(theta_eoa, phi_aoa):
    st = math.sin(theta_eoa)
    return np.array([st * math.cos(phi_aoa), st * math.sin(phi_aoa),
                     math.cos(theta_eoa)])


def element_position(geom, s_h, s_v):
    """Coordinates of column `s_h`, row `s_v` (both 1-based)."""
    if not (1 <= s_h <= geom.n_h and 1 <= s_v <= geom.n_v):
        raise IndexError(f"element ({s_h}, {s_v}) outside {geom.n_h}x{geom.n_v}")
    return np.array([0.0, geom.offsets_h()[s_h - 1], geom.offsets_v()[s_v - 1]])


def element_index(geom, s_h, s_v):
    return (s_h - 1) * geom.n_v + (s_v - 1)


def psi(geom, theta, phi):
    """Projection of every element position onto the path direction."""
    yh = math.sin(theta) * math.sin(phi) * geom.offsets_h()
    zv = math.cos(theta) * geom.offsets_v()
    return (yh[:, None] + zv[None, :]).ravel()


def upsilon(geom):
    """Squared distance of every element from the reference element."""
    return (geom.offsets_h()[:, None] ** 2 + geom.offsets_v()[None, :] ** 2).ravel()


def _pick(values, geom, s_h, s_v):
    if s_h is None and s_v is None:
        return values
    return values[element_index(geom, s_h, s_v)]


def _check_far(geom, r):
    if r < 2 * max(geom.span_h, geom.span_v):
        warnings.warn(f"r={r:g} m is not much larger than the array aperture",
                      stacklevel=3)


# Distances are computed as offsets from r_p so that differences between the
# expansions keep full relative precision.

def exact_offset(geom, path, s_h=None, s_v=None):
    _check_far(geom, path.r)
    p, u, r = psi(geom, path.theta, path.phi), upsilon(geom), path.r
    x = -2 * p / r + u / r**2
    return _pick(r * x / (np.sqrt(1 + x) + 1), geom, s_h, s_v)


def fresnel_offset(geom, path, s_h=None, s_v=None):
    p, u, r = psi(geom, path.theta, path.phi), upsilon(geom), path.r
    return _pick(-p + (u - p**2) / (2 * r), geom, s_h, s_v)


def far_offset(geom, path, s_h=None, s_v=None):
    return _pick(-psi(geom, path.theta, path.phi), geom, s_h, s_v)


def third_order_offset(geom, path, s_h=None, s_v=None):
    p, u, r = psi(geom, path.theta, path.phi), upsilon(geom), path.r
    return _pick(-p + (u - p**2) / (2 * r) + (p * u - p**3) / (2 * r**2),
                 geom, s_h, s_v)


def exact_distance(geom, path, s_h=None, s_v=None):
    """Euclidean element-to-scatterer distance (all elements if no index)."""
    return path.r + exact_offset(geom, path, s_h, s_v)


def fresnel_distance(geom, path, s_h=None, s_v=None):
    return path.r + fresnel_offset(geom, path, s_h, s_v)


def far_distance(geom, path, s_h=None, s_v=None):
    return path.r + far_offset(geom, path, s_h, s_v)


def third_order_distance(geom, path, s_h=None, s_v=None):
    return path.r + third_order_offset(geom, path, s_h, s_v)


def near_phase_discrepancy(geom, path):
    """Per-element phase gap between the exact and Fresnel wavefronts."""
    p, u = psi(geom, path.theta, path.phi), upsilon(geom)
    return 2 * np.pi / geom.wavelength * np.abs(p * u - p**3) / (2 * path.r**2)


def far_phase_discrepancy(geom, path):
    """Per-element phase gap between the Fresnel and planar wavefronts."""
    p, u = psi(geom, path.theta, path.phi), upsilon(geom)
    return 2 * np.pi / geom.wavelength * np.abs(u - p**2) / (2 * path.r)


def _xi(theta, dh, dv):
    s, c = np.sin(theta), np.cos(theta)
    return (s * dh + c * dv) * (c * dh - s * dv) ** 2


def approximation_region(geom):
    """Distance interval in which the Fresnel wavefront is accurate.

    Both ends follow from bounding the largest element phase error by pi/8.
    The aperture used here is twice the largest element coordinate, so that
    every element respects the bound used in the derivation.

    Returns
    -------
    (r_lo, r_hi) : tuple of float, meters
    """
    dh, dv, lam = geom.span_h, geom.span_v, geom.wavelength
    r_hi = 2 * (dh**2 + dv**2) / lam
    if dh == 0 and dv == 0:
        return 0.0, 0.0
    grid = np.linspace(0.0, np.pi, int(np.ceil(np.pi / 1e-4)) + 1)
    vals = _xi(grid, dh, dv)
    i = int(np.argmax(vals))
    step = grid[1] - grid[0]
    lo, hi = max(0.0, grid[i] - step), min(np.pi, grid[i] + step)
    res = scipy.optimize.minimize_scalar(lambda th: -_xi(th, dh, dv),
                                         bounds=(lo, hi), method="bounded",
                                         options={"xatol": 1e-12})
    xi_max = max(vals[i], -res.fun)
    return math.sqrt(xi_max / lam), r_hi


# -- steering vectors -----------------------------------------------------

def far_steering(geom, theta, phi):
    """Planar-wavefront steering vector ``a_h(theta, phi) (x) a_v(theta)``."""
    k = 2 * np.pi / geom.wavelength
    a_h = np.exp(1j * k * math.sin(theta) * math.sin(phi) * geom.d_h
                 * np.arange(geom.n_h))
    a_v = np.exp(1j * k * math.cos(theta) * geom.d_v * np.arange(geom.n_v))
    return np.kron(a_h, a_v)


def distance_response(geom, theta, phi, r):
    """Quadratic (Fresnel) phase term of each element; 1 at the origin."""
    p, u = psi(geom, theta, phi), upsilon(geom)
    return np.exp(-1j * 2 * np.pi / geom.wavelength * (u - p**2) / (2 * r))


def near_steering(geom, theta, phi, r):
    """Fresnel near-field steering vector."""
    return distance_response(geom, theta, phi, r) * far_steering(geom, theta, phi)


def spherical_steering(geom, theta, phi, r):
    """Steering vector built from the exact element distances."""
    p, u = psi(geom, theta, phi), upsilon(geom)
    x = -2 * p / r + u / r**2
    # r*(sqrt(1+x) - 1) + psi, rearranged to avoid cancellation
    curv = (u - p**2) / (r * (np.sqrt(1 + x) + 1 - p / r))
    return np.exp(-1j * 2 * np.pi / geom.wavelength * curv) * far_steering(geom, theta, phi)


_STEERING = {"fresnel": near_steering, "exact": spherical_steering}


def steering_matrix(geom, paths, model="fresnel"):
    """(n_t, P) matrix of per-path steering vectors.

    `model` is ``"fresnel"`` (default), ``"exact"`` or ``"plane"``.
    """
    if model == "plane":
        cols = [far_steering(geom, p.theta, p.phi) for p in paths]
    else:
        fn = _STEERING[model]
        cols = [fn(geom, p.theta, p.phi, p.r) for p in paths]
    return np.stack(cols, axis=1)


def delay_doppler_vector(cfg, tau0, doppler, t):
    """Per-subcarrier phase of a path with initial delay `tau0`."""
    f = cfg.subcarriers
    return np.exp(2j * np.pi * ((1 + f / cfg.f_c) * doppler * t - f * tau0))


def _delay_doppler_matrix(cfg, paths, t):
    f = cfg.subcarriers
    tau = np.array([p.tau0 for p in paths])[:, None]
    w = np.array([p.doppler for p in paths])[:, None]
    # split f*tau into integer and fractional cycles before exponentiating
    cyc = (1 + f / cfg.f_c) * w * t - f * tau
    return np.exp(2j * np.pi * (cyc - np.round(cyc)))


def _gains(paths, port):
    return np.array([p.gains[port] for p in paths])


def synthesize_channel(geom, cfg, paths, t, port=0, model="fresnel"):
    """Channel snapshot ``H = A C B(t)`` seen by receive `port`."""
    if not paths:
        raise ValueError("need at least one path")
    A = steering_matrix(geom, paths, model)
    H = (A * _gains(paths, port)) @ _delay_doppler_matrix(cfg, paths, t)
    return ChannelSnapshot(H, t)


def synthesize_vectorized(geom, cfg, paths, t, port=0, model="fresnel"):
    """Vectorized channel as a sum of per-path Kronecker products.

    Independent of :func:`synthesize_channel`; the two must agree.
    """
    out = np.zeros(geom.n_t * cfg.n_f, complex)
    steer = {"fresnel": lambda p: near_steering(geom, p.theta, p.phi, p.r),
             "exact": lambda p: spherical_steering(geom, p.theta, p.phi, p.r),
             "plane": lambda p: far_steering(geom, p.theta, p.phi)}[model]
    for p in paths:
        b = delay_doppler_vector(cfg, p.tau0, p.doppler, t)
        out += p.gains[port] * np.kron(b, steer(p))
    return out


def synthesize_record(geom, cfg, paths, times, port=0, model="fresnel"):
    """Channels at several instants, shape (len(times), n_t, n_f)."""
    A = steering_matrix(geom, paths, model) * _gains(paths, port)
    return np.stack([A @ _delay_doppler_matrix(cfg, paths, t) for t in times])


def observe(snapshot, snr_db, rng):
    """Add circularly-symmetric Gaussian noise at a per-entry SNR."""
    if snr_db is None:
        return snapshot
    H = snapshot.H
    sigma2 = np.mean(np.abs(H) ** 2) / 10 ** (snr_db / 10)
    noise = rng.standard_normal(H.shape) + 1j * rng.standard_normal(H.shape)
    return ChannelSnapshot(H + np.sqrt(sigma2 / 2) * noise, snapshot.t)


def observe_record(record, snr_db, rng):
    """Noisy copy of a (n_samples, n_t, n_f) record, SNR set per sample."""
    if snr_db is None:
        return record
    p = np.mean(np.abs(record) ** 2, axis=(1, 2), keepdims=True)
    sigma2 = p / 10 ** (snr_db / 10)
    noise = rng.standard_normal(record.shape) + 1j * rng.standard_normal(record.shape)
    return record + np.sqrt(sigma2 / 2) * noise


# -- scenario generation --------------------------------------------------

DEFAULT_SPREADS_DEG = {"eod": 2.0, "aod": 2.0, "eoa": 10.0, "aoa": 15.0}


def _wrap_theta(x):
    x = np.mod(x, 2 * np.pi)
    return np.where(x > np.pi, 2 * np.pi - x, x)


def _wrap_phi(x):
    y = np.mod(x + np.pi, 2 * np.pi) - np.pi
    return np.where(y <= -np.pi, np.pi, y)


def generate_scenario(seed, n_clusters, rays_per_cluster, distance_range,
                      angular_spreads=None, speed=0.0, *, wavelength,
                      n_ports=2, theta_range=(np.pi / 4, 3 * np.pi / 4),
                      phi_range=(-np.pi / 3, np.pi / 3), max_delay=1e-6,
                      velocity=None, distance_spread=0.0):
    """Draw a clustered multipath scenario.

    Cluster centres are uniform over the given angle/distance ranges; rays
    scatter around them with Gaussian offsets whose RMS is given (degrees)
    in `angular_spreads`. Rays share their cluster's distance, optionally
    perturbed by a relative Gaussian `distance_spread` (then clipped into
    `distance_range`).
    The UE moves at `speed` m/s in a random horizontal direction unless an
    explicit `velocity` is given. Path gains are complex Gaussian with total
    power one per port.

    Returns
    -------
    list of PathParams
    """
    rng = np.random.default_rng(seed)
    spreads = dict(DEFAULT_SPREADS_DEG)
    spreads.update(angular_spreads or {})
    spreads = {k: np.deg2rad(v) for k, v in spreads.items()}
    if velocity is None:
        az = rng.uniform(-np.pi, np.pi)
        velocity = speed * np.array([np.cos(az), np.sin(az), 0.0])
    velocity = np.asarray(velocity, float)

    n = n_clusters * rays_per_cluster
    c_theta = rng.uniform(*theta_range, n_clusters)
    c_phi = rng.uniform(*phi_range, n_clusters)
    c_eoa = rng.uniform(np.pi / 3, 2 * np.pi / 3, n_clusters)
    c_aoa = rng.uniform(-np.pi, np.pi, n_clusters)
    c_tau = rng.uniform(0, max_delay, n_clusters)

    rep = lambda a: np.repeat(a, rays_per_cluster)
    theta = _wrap_theta(rep(c_theta) + spreads["eod"] * rng.standard_normal(n))
    phi = _wrap_phi(rep(c_phi) + spreads["aod"] * rng.standard_normal(n))
    eoa = _wrap_theta(rep(c_eoa) + spreads["eoa"] * rng.standard_normal(n))
    aoa = _wrap_phi(rep(c_aoa) + spreads["aoa"] * rng.standard_normal(n))
    c_r = rng.uniform(*distance_range, n_clusters)
    r = rep(c_r) * (1 + distance_spread * rng.standard_normal(n))
    r = np.clip(r, *distance_range)
    tau = rep(c_tau) + rng.uniform(0, 0.05 * max_delay, n)
    g = rng.standard_normal((n, n_ports)) + 1j * rng.standard_normal((n, n_ports))
    g /= np.sqrt(np.sum(np.abs(g) ** 2, axis=0, keepdims=True))

    paths = []
    for i in range(n):
        dop = float(rx_unit_vector(eoa[i], aoa[i]) @ velocity / wavelength)
        paths.append(PathParams(float(theta[i]), float(phi[i]), float(r[i]),
                                float(tau[i]), dop, tuple(g[i]),
                                float(eoa[i]), float(aoa[i])))
    return paths
