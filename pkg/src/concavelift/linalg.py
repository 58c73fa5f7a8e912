"""Dense complex matrix kernel.

All matrices are ``numpy.ndarray`` of dtype ``complex128``.  Tolerances are
relative to ``max(1, ||m||)`` unless stated otherwise.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import NoConvergence, NotHermitian, NotPSD, Singular

EIG_TOL = 1e-12
RANK_TOL = 1e-9
IDENTITY_TOL = 1e-8


class HermEig(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def cmatrix(m) -> np.ndarray:
    """Coerce to a finite 2-D complex array."""
    a = np.array(m, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def adjoint(m) -> np.ndarray:
    return np.conj(np.asarray(m)).T.copy()


def op_norm(m) -> float:
    """Largest singular value (0 for empty matrices)."""
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def _scale(m) -> float:
    return max(1.0, op_norm(m))


def check_hermitian(m, tol: float = EIG_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.shape[0] != m.shape[1]:
        raise NotHermitian(f"matrix is not square: {m.shape}")
    if m.size and op_norm(m - adjoint(m)) > tol * _scale(m):
        raise NotHermitian("matrix is not Hermitian within tolerance")
    return m


def _canonical_phase(vecs: np.ndarray) -> np.ndarray:
    # fix the phase so the largest-modulus entry of each column is real > 0
    out = vecs.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        i = int(np.argmax(np.abs(col) > np.abs(col).max() * (1 - 1e-8)))
        if abs(col[i]) > 0:
            out[:, k] = col * (abs(col[i]) / col[i])
    return out


def herm_eig(m, tol: float = EIG_TOL) -> HermEig:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending."""
    m = check_hermitian(m, tol)
    h = 0.5 * (m + adjoint(m))
    if h.size == 0:
        return HermEig(np.zeros(0), np.zeros((0, 0), dtype=complex))
    try:
        w, u = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    return HermEig(w, _canonical_phase(u))


def min_eig(m, tol: float = EIG_TOL) -> float:
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(herm_eig(m, tol).eigenvalues[0])


def is_psd(m, tol: float = EIG_TOL) -> bool:
    m = check_hermitian(m, tol)
    if m.size == 0:
        return True
    return min_eig(m, tol) >= -tol * _scale(m)


def herm_sqrt(m, tol: float = EIG_TOL) -> np.ndarray:
    """Positive square root of a PSD matrix.

    Eigenvalues within ``tol`` below zero are clamped to zero before rooting.
    """
    m = check_hermitian(m, tol)
    if m.size == 0:
        return m.copy()
    w, u = herm_eig(m, tol)
    if w[0] < -tol * _scale(m):
        raise NotPSD(f"min eigenvalue {w[0]:.3e} is negative")
    r = (u * np.sqrt(np.clip(w, 0.0, None))) @ adjoint(u)
    return 0.5 * (r + adjoint(r))


def inverse(m, tol: float) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.shape[0] != m.shape[1]:
        raise Singular(f"matrix is not square: {m.shape}")
    if m.size == 0:
        return m.copy()
    s = np.linalg.svd(m, compute_uv=False)
    if s[-1] <= tol:
        raise Singular(f"smallest singular value {s[-1]:.3e} <= {tol:.1e}")
    return np.linalg.inv(m)


def kernel_projector(m, tol: float = RANK_TOL) -> np.ndarray:
    """Orthogonal projector onto the kernel of a Hermitian matrix.

    An eigenvalue counts as zero when ``|lambda| <= tol * ||m||``.
    """
    m = check_hermitian(m, max(tol, EIG_TOL))
    n = m.shape[0]
    if n == 0:
        return m.copy()
    w, u = herm_eig(m, max(tol, EIG_TOL))
    cut = tol * op_norm(m)
    ker = u[:, np.abs(w) <= cut]
    p = ker @ adjoint(ker)
    return 0.5 * (p + adjoint(p))


def range_basis(p, rank: int | None = None, tol: float = 1e-6) -> np.ndarray:
    """Orthonormal basis of the range of an orthogonal projector.

    Pivoted Gram-Schmidt over the projector's columns: for projectors that
    are diagonal in the canonical basis this returns coordinate vectors in
    index order, which keeps downstream block read-offs basis-explicit.
    """
    p = np.asarray(p, dtype=complex)
    n = p.shape[0]
    if rank is None:
        rank = int(round(float(np.real(np.trace(p))))) if n else 0
    basis = np.zeros((n, rank), dtype=complex)
    resid = p.copy()
    for k in range(rank):
        norms = np.linalg.norm(resid, axis=0)
        j = int(np.argmax(norms > norms.max() * (1 - 1e-9)))
        if norms[j] <= tol:
            raise NotPSD("projector rank is smaller than requested")
        q = resid[:, j] / norms[j]
        # second pass keeps orthogonality at round-off level
        q = q - basis[:, :k] @ (adjoint(basis[:, :k]) @ q)
        q /= np.linalg.norm(q)
        basis[:, k] = q
        resid = resid - np.outer(q, adjoint(q) @ resid)
    return basis


def is_projector(p, tol: float = IDENTITY_TOL) -> bool:
    p = np.asarray(p, dtype=complex)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        return False
    return (op_norm(p - adjoint(p)) <= tol
            and op_norm(p @ p - p) <= tol)
