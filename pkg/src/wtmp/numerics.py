"""Dense complex linear-algebra kernels.

Thin, checked wrappers around LAPACK (via numpy/scipy). Every routine takes
and returns plain ``numpy.ndarray`` objects; complex matrices are
``complex128`` arrays of shape ``(rows, cols)``.
"""

import numpy as np
import scipy.linalg


class NumericalError(RuntimeError):
    """Raised when a kernel cannot produce a trustworthy result."""


def as_cmatrix(m) -> np.ndarray:
    """Return `m` as a finite 2-D complex128 array, raising otherwise."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got array with ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN or Inf entries")
    return a


def svd(m):
    """Thin singular value decomposition ``m = U @ diag(s) @ V^H``.

    Returns
    -------
    U : (rows, k) ndarray
    s : (k,) ndarray
        Non-negative, sorted in descending order. ``k = min(rows, cols)``.
    V : (cols, k) ndarray
    """
    a = as_cmatrix(m)
    if a.size == 0:
        k = min(a.shape)
        return (np.zeros((a.shape[0], k), complex), np.zeros(k),
                np.zeros((a.shape[1], k), complex))
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError:
        try:
            # gesvd is slower but converges in cases where gesdd gives up
            u, s, vh = scipy.linalg.svd(a, full_matrices=False,
                                        lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"SVD of {a.shape} matrix did not converge: {exc}") from exc
    return u, s, vh.conj().T


def eig_general(m) -> np.ndarray:
    """All eigenvalues of a square, not necessarily Hermitian, matrix."""
    a = as_cmatrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"eig_general needs a square matrix, got {a.shape}")
    if a.size == 0:
        return np.zeros(0, complex)
    try:
        return scipy.linalg.eigvals(a, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"QR iteration on {a.shape} matrix did not converge: {exc}") from exc


def default_pinv_tol(m) -> float:
    """Rank cutoff ``max(rows, cols) * eps * s_max`` as a relative factor."""
    a = np.asarray(m)
    return max(a.shape) * np.finfo(float).eps


def pinv(m, tol=None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse.

    Singular values below ``tol * s_max`` are treated as zero. The default
    `tol` is ``max(rows, cols) * eps``.
    """
    a = as_cmatrix(m)
    if tol is None:
        tol = default_pinv_tol(a)
    if tol < 0:
        raise ValueError("tol must be non-negative")
    u, s, v = svd(a)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(a.shape[::-1], complex)
    keep = s > tol * s[0]
    return (v[:, keep] / s[keep]) @ u[:, keep].conj().T


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix with entries ``exp(-2j*pi*a*b/n) / sqrt(n)``."""
    if n < 1:
        raise ValueError("DFT size must be >= 1")
    k = np.arange(n)
    # reduce a*b mod n first so the phase stays exact for large n
    return np.exp(-2j * np.pi * (np.outer(k, k) % n) / n) / np.sqrt(n)


def kron(a, b) -> np.ndarray:
    """Kronecker product of two complex matrices."""
    return np.kron(as_cmatrix(a), as_cmatrix(b))
