"""Operators between graded spaces, block assembly, compression, and the
windowed functional calculus used on truncated towers.

``boundary_depth`` counts how many tower-shift applications are baked into an
operator.  A column ``e_j`` of an operator with boundary depth ``b`` agrees
with the untruncated model whenever ``j`` lies in the budget-``b`` window; a
product of ``k`` such factors is exact on the budget ``k*b`` window.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import linalg as la
from .errors import (DimensionMismatch, NotProjector, SpaceMismatch,
                     WindowNotReducing)
from .spaces import GradedSpace, WindowSpec, direct_sum, space


@dataclass(eq=False)
class Operator:
    matrix: np.ndarray
    dom: GradedSpace
    cod: GradedSpace
    boundary_depth: int = 0

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (self.cod.total_dim, self.dom.total_dim):
            raise DimensionMismatch(
                f"matrix shape {self.matrix.shape} does not match "
                f"{self.cod.total_dim}x{self.dom.total_dim}")

    @property
    def H(self) -> "Operator":
        return Operator(la.adjoint(self.matrix), self.cod, self.dom,
                        self.boundary_depth)

    @property
    def is_square(self) -> bool:
        return self.dom == self.cod

    def __matmul__(self, other: "Operator") -> "Operator":
        return compose(self, other)

    def __repr__(self):
        return (f"Operator({self.cod!r} <- {self.dom!r}, "
                f"bd={self.boundary_depth})")

    def norm(self) -> float:
        return la.op_norm(self.matrix)

    def to_dict(self) -> dict:
        return {
            "dom": self.dom.to_list(),
            "cod": self.cod.to_list(),
            "boundary_depth": self.boundary_depth,
            "matrix": matrix_to_json(self.matrix),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Operator":
        return cls(matrix_from_json(d["matrix"]),
                   GradedSpace.from_list(d["dom"]),
                   GradedSpace.from_list(d["cod"]),
                   int(d.get("boundary_depth", 0)))


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(rows) -> np.ndarray:
    a = np.array(rows, dtype=float)
    if a.ndim != 3 or a.shape[2] != 2:
        raise ValueError("matrix entries must be [re, im] pairs in nested rows")
    return la.cmatrix(a[..., 0] + 1j * a[..., 1])


def operator(matrix, sp: GradedSpace | None = None, boundary_depth=0,
             label="H") -> Operator:
    """Square operator on ``sp`` (a plain block ``label`` if omitted)."""
    m = la.cmatrix(matrix)
    if sp is None:
        sp = space((label, m.shape[1]))
    return Operator(m, sp, sp, boundary_depth)


def identity(sp: GradedSpace) -> Operator:
    return Operator(np.eye(sp.total_dim, dtype=complex), sp, sp, 0)


def compose(a: Operator, b: Operator) -> Operator:
    if b.cod != a.dom:
        raise SpaceMismatch(f"cannot compose {a!r} after {b!r}")
    return Operator(a.matrix @ b.matrix, b.dom, a.cod,
                    a.boundary_depth + b.boundary_depth)


def power(t: Operator, n: int) -> Operator:
    out = identity(t.dom)
    for _ in range(n):
        out = compose(t, out)
    return out


@dataclass
class BlockLayout:
    """Block grid; ``rows``/``cols`` are the summands of codomain/domain."""
    rows: Sequence[GradedSpace]
    cols: Sequence[GradedSpace]
    entries: dict = field(default_factory=dict)

    def __setitem__(self, ij, op: Optional[Operator]):
        self.entries[ij] = op


def assemble(layout: BlockLayout) -> Operator:
    rows, cols = list(layout.rows), list(layout.cols)
    cod, dom = direct_sum(*rows), direct_sum(*cols)
    m = np.zeros((cod.total_dim, dom.total_dim), dtype=complex)
    roff = np.cumsum([0] + [r.total_dim for r in rows])
    coff = np.cumsum([0] + [c.total_dim for c in cols])
    bd = 0
    for (i, j), op in layout.entries.items():
        if op is None:
            continue
        if op.cod != rows[i] or op.dom != cols[j]:
            raise DimensionMismatch(
                f"entry ({i},{j}) is {op!r}, expected "
                f"{rows[i]!r} <- {cols[j]!r}")
        m[roff[i]:roff[i + 1], coff[j]:coff[j + 1]] = op.matrix
        bd = max(bd, op.boundary_depth)
    return Operator(m, dom, cod, bd)


def block_of(t: Operator, row: str, col: str) -> np.ndarray:
    return t.matrix[t.cod.slice(row), t.dom.slice(col)]


def compress_with_basis(t: Operator, p, label: str = "range",
                        tol: float = la.IDENTITY_TOL):
    """Compression ``P T |_{ran P}`` in an orthonormal basis of ``ran P``.

    Returns ``(operator, basis)`` with ``basis`` the ``n x r`` isometry whose
    columns span ``ran P``.  An empty range gives ``(None, basis)``.
    """
    if not t.is_square:
        raise SpaceMismatch("compression needs a square operator")
    p = np.asarray(p, dtype=complex)
    if not la.is_projector(p, tol):
        raise NotProjector("p is not an orthogonal projector")
    basis = la.range_basis(p)
    r = basis.shape[1]
    if r == 0:
        return None, basis
    m = la.adjoint(basis) @ t.matrix @ basis
    sp = space((label, r))
    return Operator(m, sp, sp, t.boundary_depth), basis


def compress(t: Operator, p, label: str = "range") -> Operator:
    return compress_with_basis(t, p, label)[0]


def lifting_residual(s: Operator, j: Operator, t: Operator,
                     w: WindowSpec) -> float:
    """``||(J* S - T J*) P_w||`` on the budget-``s.boundary_depth`` window."""
    if j.cod != s.dom or j.dom != t.dom or w.space != s.dom:
        raise SpaceMismatch("J must embed t's space into s's space")
    budget = max(1, s.boundary_depth, t.boundary_depth)
    mask = w.mask(budget)
    jh = la.adjoint(j.matrix)
    diff = jh @ s.matrix - t.matrix @ jh
    return la.op_norm(diff[:, mask])


# ---------------------------------------------------------------------------
# windowed functional calculus
# ---------------------------------------------------------------------------

def wsub(m, mask) -> np.ndarray:
    """Compression of ``m`` to the window (the window's coordinates only)."""
    return np.asarray(m)[np.ix_(mask, mask)]


def wnorm(m, mask) -> float:
    return la.op_norm(wsub(m, mask))


def wpsd_residual(m, mask) -> float:
    """Relative amount by which the windowed compression fails to be PSD."""
    sub = wsub(m, mask)
    if sub.size == 0:
        return 0.0
    sub = 0.5 * (sub + la.adjoint(sub))
    lo = float(np.linalg.eigvalsh(sub)[0])
    return max(0.0, -lo) / max(1.0, la.op_norm(sub))


def wmin_eig(m, mask) -> float:
    sub = wsub(m, mask)
    if sub.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (sub + la.adjoint(sub)))[0])


def _check_reducing(m, mask, tol):
    m = np.asarray(m)
    if mask.all():
        return
    coupling = la.op_norm(m[np.ix_(~mask, mask)])
    if coupling > tol * max(1.0, wnorm(m, mask)):
        raise WindowNotReducing(
            f"operator couples window and remainder (|coupling|={coupling:.2e})")


def _embed_window(sub, mask) -> np.ndarray:
    n = mask.size
    out = np.zeros((n, n), dtype=complex)
    out[np.ix_(mask, mask)] = sub
    return out


def wsqrt(m, mask, tol: float = la.IDENTITY_TOL) -> np.ndarray:
    """Square root of the windowed compression, zero outside the window."""
    _check_reducing(m, mask, tol)
    sub = wsub(m, mask)
    return _embed_window(la.herm_sqrt(0.5 * (sub + la.adjoint(sub)), tol), mask)


def winverse(m, mask, tol: float) -> np.ndarray:
    _check_reducing(m, mask, la.IDENTITY_TOL)
    return _embed_window(la.inverse(wsub(m, mask), tol), mask)


def wrange_projector(m, mask, tol: float = la.RANK_TOL) -> np.ndarray:
    """Projector onto the range closure of the windowed compression."""
    _check_reducing(m, mask, la.IDENTITY_TOL)
    sub = wsub(m, mask)
    sub = 0.5 * (sub + la.adjoint(sub))
    k = la.kernel_projector(sub, tol)
    return _embed_window(np.eye(sub.shape[0]) - k, mask)


def wrange_basis(m, mask, tol: float = la.RANK_TOL) -> np.ndarray:
    p = wrange_projector(m, mask, tol)
    return la.range_basis(p)
