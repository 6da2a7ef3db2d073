"""Polar-grid dictionary and orthogonal matching pursuit.

Recovers the number of paths and their (EOD, AOD, distance) triples from
one antenna-domain snapshot, typically the first-subcarrier column of the
channel matrix.
"""

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .channel import far_steering, psi, upsilon

#: Default dictionary memory cap in bytes.
DICTIONARY_CAP_BYTES = 1 << 30


@dataclass(frozen=True)
class PolarGrid:
    """Uniform grid over EOD, AOD and distance.

    A range whose count is 1 collapses to its lower end.
    """

    theta_range: tuple
    phi_range: tuple
    r_range: tuple
    m_theta: int
    m_phi: int
    m_r: int

    def __post_init__(self):
        for rng, m in ((self.theta_range, self.m_theta),
                       (self.phi_range, self.m_phi),
                       (self.r_range, self.m_r)):
            if m < 1:
                raise ValueError("grid counts must be >= 1")
            if rng[1] < rng[0]:
                raise ValueError(f"range {rng} has max < min")
        if self.r_range[0] <= 0:
            raise ValueError("distance grid must be positive")

    @staticmethod
    def _axis(rng, m):
        if m == 1:
            return np.array([float(rng[0])])
        return np.linspace(rng[0], rng[1], m)

    @staticmethod
    def _step(rng, m):
        return 0.0 if m == 1 else (rng[1] - rng[0]) / (m - 1)

    @property
    def thetas(self):
        return self._axis(self.theta_range, self.m_theta)

    @property
    def phis(self):
        return self._axis(self.phi_range, self.m_phi)

    @property
    def rs(self):
        return self._axis(self.r_range, self.m_r)

    @property
    def resolution(self):
        """(d_theta, d_phi, d_r) grid steps."""
        return (self._step(self.theta_range, self.m_theta),
                self._step(self.phi_range, self.m_phi),
                self._step(self.r_range, self.m_r))

    @property
    def size(self):
        return self.m_theta * self.m_phi * self.m_r

    def point(self, index):
        """(theta, phi, r) of a linear atom index; distance runs fastest."""
        i_t, i_p, i_r = np.unravel_index(index, (self.m_theta, self.m_phi, self.m_r))
        return self.thetas[i_t], self.phis[i_p], self.rs[i_r]


def default_grid(geom, r_range, theta_range=(np.pi / 4, 3 * np.pi / 4),
                 phi_range=(-np.pi / 3, np.pi / 3), counts=(30, 90, 36)):
    """Desk-scale grid for `geom`.

    A vertical ULA cannot resolve azimuth and a horizontal ULA only sees
    ``sin(theta) sin(phi)``, so the redundant axis is collapsed and the
    remaining angle gets ``max(90, 2 * n)`` points.
    """
    m_t, m_p, m_r = counts
    if geom.n_h == 1:
        phi_range, m_p = (0.0, 0.0), 1
        m_t = max(m_t, 90, 2 * geom.n_v)
    elif geom.n_v == 1:
        theta_range, m_t = (np.pi / 2, np.pi / 2), 1
        m_p = max(m_p, 90, 2 * geom.n_h)
    return PolarGrid(tuple(theta_range), tuple(phi_range), tuple(r_range),
                     m_t, m_p, m_r)


@dataclass(frozen=True)
class Dictionary:
    """Column-normalized near-field steering atoms over a polar grid."""

    atoms: np.ndarray = field(repr=False)
    grid: PolarGrid

    @property
    def n_atoms(self):
        return self.atoms.shape[1]


def build_dictionary(geom, grid, cap_bytes=DICTIONARY_CAP_BYTES):
    """Dictionary whose column ``(i_theta, i_phi, i_r)`` is the steering
    vector at that grid point, scaled to unit norm.

    Raises
    ------
    MemoryError
        If the dense atom matrix would exceed `cap_bytes`.
    """
    need = geom.n_t * grid.size * 16
    if need > cap_bytes:
        raise MemoryError(f"dictionary needs {need} bytes "
                          f"({geom.n_t} x {grid.size}); cap is {cap_bytes}")
    atoms = np.empty((geom.n_t, grid.m_theta, grid.m_phi, grid.m_r), complex)
    u, k = upsilon(geom), 2 * np.pi / geom.wavelength
    inv_r = 1.0 / grid.rs
    for i, th in enumerate(grid.thetas):
        for j, ph in enumerate(grid.phis):
            curv = (u - psi(geom, th, ph) ** 2) / 2
            atoms[:, i, j, :] = (far_steering(geom, th, ph)[:, None]
                                 * np.exp(-1j * k * np.outer(curv, inv_r)))
    atoms = atoms.reshape(geom.n_t, -1) / np.sqrt(geom.n_t)
    return Dictionary(atoms, grid)


@dataclass
class PathEstimate:
    """Output of the sparse recovery: one entry per selected atom, in
    order of selection."""

    p_hat: int
    theta_hat: np.ndarray
    phi_hat: np.ndarray
    r_hat: np.ndarray
    residual_norm: float = 0.0
    indices: np.ndarray = None
    amplitudes: np.ndarray = None
    residual_history: list = field(default_factory=list)

    @classmethod
    def from_paths(cls, paths):
        """Wrap true path parameters as an oracle estimate."""
        return cls(len(paths), np.array([p.theta for p in paths]),
                   np.array([p.phi for p in paths]),
                   np.array([p.r for p in paths]))

    def records(self):
        """(order, theta, phi, r) tuples."""
        return [(k, float(self.theta_hat[k]), float(self.phi_hat[k]),
                 float(self.r_hat[k])) for k in range(self.p_hat)]


def as_estimate(est_or_paths):
    if isinstance(est_or_paths, PathEstimate):
        return est_or_paths
    return PathEstimate.from_paths(list(est_or_paths))


def omp_estimate(y, dictionary, max_paths=8, residual_tol=0.05):
    """Orthogonal matching pursuit.

    Each iteration picks the atom with the largest ``|<atom, residual>|``
    (lowest index on ties) and refits all selected amplitudes by least
    squares. Stops once ``||residual|| / ||y||`` falls to `residual_tol` or
    after `max_paths` atoms.

    Parameters
    ----------
    y : (n_t,) complex ndarray
    dictionary : Dictionary
    max_paths : int
    residual_tol : float
        Residual norm ratio that ends the search.

    Returns
    -------
    PathEstimate
    """
    A = dictionary.atoms
    if A.shape[1] == 0:
        raise ValueError("empty dictionary")
    y = np.asarray(y, complex).ravel()
    if y.shape[0] != A.shape[0]:
        raise ValueError(f"y has length {y.shape[0]}, atoms have {A.shape[0]}")
    grid = dictionary.grid
    y_energy = float(np.vdot(y, y).real)
    empty = np.zeros(0)
    if y_energy == 0.0:
        return PathEstimate(0, empty, empty, empty, 0.0,
                            np.zeros(0, int), np.zeros(0, complex), [0.0])

    support, history = [], [np.sqrt(y_energy)]
    resid, coef = y.copy(), np.zeros(0, complex)
    while len(support) < max_paths:
        if history[-1] <= residual_tol * history[0]:
            break
        corr = np.abs(A.conj().T @ resid)
        corr[support] = -1.0
        k = int(np.argmax(corr))  # argmax returns the first maximum
        support.append(k)
        sub = A[:, support]
        coef = numerics.pinv(sub) @ y
        resid = y - sub @ coef
        history.append(float(np.linalg.norm(resid)))

    pts = [grid.point(k) for k in support]
    return PathEstimate(
        len(support),
        np.array([p[0] for p in pts]), np.array([p[1] for p in pts]),
        np.array([p[2] for p in pts]), history[-1],
        np.array(support, int), coef, history)
