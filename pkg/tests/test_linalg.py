import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from concavelift import linalg as la
from concavelift.errors import NotHermitian, NotPSD, Singular


def rand_herm(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a + la.adjoint(a)


def rand_psd(rng, n, rank=None):
    a = rng.standard_normal((n, rank or n)) + 1j * rng.standard_normal((n, rank or n))
    return a @ la.adjoint(a)


def test_cmatrix_scalar_and_rejects():
    assert la.cmatrix(3.0).shape == (1, 1)
    with pytest.raises(ValueError):
        la.cmatrix([1.0, 2.0])
    with pytest.raises(ValueError):
        la.cmatrix([[np.nan]])


def test_op_norm_empty_is_zero():
    assert la.op_norm(np.zeros((0, 0))) == 0.0


def test_check_hermitian_rejects():
    with pytest.raises(NotHermitian):
        la.check_hermitian(np.array([[0, 1], [0, 0]]))
    with pytest.raises(NotHermitian):
        la.check_hermitian(np.zeros((2, 3)))


def test_herm_eig_reconstructs(rng):
    m = rand_herm(rng, 6)
    w, u = la.herm_eig(m)
    assert np.all(np.diff(w) >= 0)
    assert la.op_norm(u @ np.diag(w) @ la.adjoint(u) - m) < 1e-12 * la.op_norm(m)


def test_herm_eig_is_deterministic(rng):
    m = rand_herm(rng, 5)
    _, u1 = la.herm_eig(m)
    _, u2 = la.herm_eig(m.copy())
    assert np.allclose(u1, u2)


def test_psd_and_min_eig(rng):
    p = rand_psd(rng, 5)
    assert la.is_psd(p)
    assert not la.is_psd(-p)
    assert la.min_eig(np.diag([3.0, -1.0])) == pytest.approx(-1.0)


def test_herm_sqrt(rng):
    p = rand_psd(rng, 6, rank=3)
    r = la.herm_sqrt(p)
    assert la.op_norm(r @ r - p) < 1e-10 * la.op_norm(p)
    assert la.is_psd(r, 1e-10)
    with pytest.raises(NotPSD):
        la.herm_sqrt(np.diag([1.0, -1.0]))


def test_inverse_and_singular(rng):
    m = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    assert np.allclose(la.inverse(m, 1e-12) @ m, np.eye(4))
    with pytest.raises(Singular):
        la.inverse(np.diag([1.0, 0.0]), 1e-12)


def test_kernel_projector(rng):
    p = rand_psd(rng, 6, rank=2)
    k = la.kernel_projector(p)
    assert la.is_projector(k)
    assert round(np.trace(k).real) == 4
    assert la.op_norm(p @ k) < 1e-9 * la.op_norm(p)


def test_range_basis_coordinate_projector():
    p = np.diag([0, 1, 0, 1]).astype(complex)
    b = la.range_basis(p)
    assert b.shape == (4, 2)
    assert np.allclose(b, np.eye(4)[:, [1, 3]])


def test_is_projector():
    assert la.is_projector(np.eye(3))
    assert not la.is_projector(2 * np.eye(3))
    assert not la.is_projector(np.zeros((2, 3)))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 8), rank=st.integers(1, 8), seed=st.integers(0, 10**6))
def test_range_basis_is_orthonormal(n, rank, seed):
    rank = min(rank, n)
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    q, _ = np.linalg.qr(a)
    p = q @ la.adjoint(q)
    b = la.range_basis(p)
    assert b.shape == (n, rank)
    assert np.allclose(la.adjoint(b) @ b, np.eye(rank), atol=1e-10)
    assert la.op_norm(b @ la.adjoint(b) - p) < 1e-9


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 10), seed=st.integers(0, 10**6))
def test_sqrt_of_square_is_identity_on_psd(n, seed):
    rng = np.random.default_rng(seed)
    p = rand_psd(rng, n)
    r = la.herm_sqrt(p @ p)
    assert la.op_norm(r - p) <= 1e-8 * max(1.0, la.op_norm(p))
