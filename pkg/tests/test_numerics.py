import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wtmp import numerics

SEED = 20240611


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def penrose_residuals(a, x):
    scale = max(1.0, np.linalg.norm(a), np.linalg.norm(x))
    return [np.linalg.norm(a @ x @ a - a) / scale,
            np.linalg.norm(x @ a @ x - x) / scale,
            np.linalg.norm((a @ x).conj().T - a @ x) / scale,
            np.linalg.norm((x @ a).conj().T - x @ a) / scale]


class TestSvd:
    def test_identity(self):
        u, s, v = numerics.svd(np.eye(4))
        np.testing.assert_allclose(s, np.ones(4))

    def test_zero(self):
        u, s, v = numerics.svd(np.zeros((3, 2)))
        np.testing.assert_array_equal(s, [0, 0])

    def test_random_reconstruction(self):
        rng = np.random.default_rng(SEED)
        m = crandn(rng, 5, 3)
        u, s, v = numerics.svd(m)
        assert np.linalg.norm(u @ np.diag(s) @ v.conj().T - m) < 1e-10
        np.testing.assert_allclose(u.conj().T @ u, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(v.conj().T @ v, np.eye(3), atol=1e-12)
        assert np.all(np.diff(s) <= 0)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            numerics.svd(np.array([[np.nan, 1.0]]))


class TestEig:
    def test_diagonal(self):
        ev = numerics.eig_general(np.diag([2, 3j]))
        assert sorted(ev, key=lambda z: z.imag) == pytest.approx([2, 3j])

    def test_rotation(self):
        # characteristic polynomial l^2 + 1
        ev = numerics.eig_general(np.array([[0, 1], [-1, 0]]))
        np.testing.assert_allclose(sorted(ev, key=lambda z: z.imag), [-1j, 1j], atol=1e-14)

    def test_identity(self):
        np.testing.assert_allclose(numerics.eig_general(np.eye(3)), np.ones(3))

    def test_rejects_rectangular(self):
        with pytest.raises(ValueError):
            numerics.eig_general(np.ones((2, 3)))

    def test_residual_battery(self):
        rng = np.random.default_rng(SEED)
        for n in (1, 2, 5, 12):
            m = crandn(rng, n, n)
            for lam in numerics.eig_general(m):
                smin = np.linalg.svd(m - lam * np.eye(n), compute_uv=False)[-1]
                assert smin <= 1e-8 * np.linalg.norm(m)

    def test_normal_matrix_matches_singular_values(self):
        rng = np.random.default_rng(SEED + 1)
        q, _ = np.linalg.qr(crandn(rng, 6, 6))
        m = q @ np.diag(crandn(rng, 6)) @ q.conj().T
        ev = np.sort(np.abs(numerics.eig_general(m)))
        sv = np.sort(numerics.svd(m)[1])
        np.testing.assert_allclose(ev, sv, atol=1e-8)


class TestPinv:
    def test_identity(self):
        np.testing.assert_allclose(numerics.pinv(np.eye(3)), np.eye(3))

    def test_zero(self):
        x = numerics.pinv(np.zeros((4, 2)))
        assert x.shape == (2, 4) and not np.any(x)

    @pytest.mark.parametrize("p", [1, 2, 5])
    def test_stacked_identity(self, p):
        a = np.tile(np.eye(3), (p, 1))
        x = numerics.pinv(a)
        np.testing.assert_allclose(x, np.tile(np.eye(3), (1, p)) / p, atol=1e-14)
        assert max(penrose_residuals(a, x)) < 1e-9

    def test_penrose_battery(self):
        rng = np.random.default_rng(SEED)
        for shape in ((4, 4), (6, 3), (3, 7)):
            a = crandn(rng, *shape)
            assert max(penrose_residuals(a, numerics.pinv(a))) < 1e-9
        # rank deficient
        a = crandn(rng, 6, 2) @ crandn(rng, 2, 5)
        assert max(penrose_residuals(a, numerics.pinv(a))) < 1e-9

    def test_negative_tol(self):
        with pytest.raises(ValueError):
            numerics.pinv(np.eye(2), tol=-1)

    def test_default_tol(self):
        assert numerics.default_pinv_tol(np.zeros((3, 7))) == 7 * np.finfo(float).eps


class TestDft:
    def test_n1(self):
        np.testing.assert_array_equal(numerics.dft_matrix(1), [[1]])

    def test_n2(self):
        np.testing.assert_allclose(numerics.dft_matrix(2),
                                   np.array([[1, 1], [1, -1]]) / np.sqrt(2), atol=1e-15)

    @pytest.mark.parametrize("n", [3, 8, 64, 1024])
    def test_unitary(self, n):
        w = numerics.dft_matrix(n)
        assert np.linalg.norm(w.conj().T @ w - np.eye(n)) < 1e-12 * max(1, n / 64)

    def test_matches_fft(self):
        x = np.random.default_rng(SEED).standard_normal(16)
        np.testing.assert_allclose(numerics.dft_matrix(16) @ x,
                                   np.fft.fft(x, norm="ortho"), atol=1e-12)

    def test_bad_size(self):
        with pytest.raises(ValueError):
            numerics.dft_matrix(0)


class TestKron:
    def test_identity_block(self):
        m = np.arange(4).reshape(2, 2)
        out = numerics.kron(np.eye(2), m)
        expect = np.zeros((4, 4))
        expect[:2, :2] = m
        expect[2:, 2:] = m
        np.testing.assert_array_equal(out, expect)

    def test_unit(self):
        a = np.arange(6).reshape(2, 3)
        np.testing.assert_array_equal(numerics.kron(a, [[1]]), a)

    def test_mixed_product(self):
        rng = np.random.default_rng(SEED)
        a, b = crandn(rng, 2, 2), crandn(rng, 2, 2)
        x, y = crandn(rng, 2), crandn(rng, 2)
        lhs = numerics.kron(a, b) @ np.kron(x, y)
        rhs = np.kron(a @ x, b @ y)
        assert np.linalg.norm(lhs - rhs) < 1e-12


finite = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_svd_reconstruction_property(r, c, seed):
    m = crandn(np.random.default_rng(seed), r, c)
    u, s, v = numerics.svd(m)
    assert np.linalg.norm(u @ np.diag(s) @ v.conj().T - m) <= 1e-10 * max(1, np.linalg.norm(m))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_pinv_penrose_property(r, c, seed):
    a = crandn(np.random.default_rng(seed), r, c)
    assert max(penrose_residuals(a, numerics.pinv(a))) < 1e-9
