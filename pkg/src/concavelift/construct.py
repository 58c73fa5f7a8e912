"""Liftings, canonical block decompositions and Cauchy duals.

All constructions take an operator on a graded space whose towers are
truncated.  Inputs are read on their exact window; the functional calculus
(square roots, inverses, range projectors) is taken of the windowed
compression, which is sound because the operators involved are reduced by
the window (checked, :class:`WindowNotReducing` otherwise).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import classify as cl
from . import linalg as la
from .errors import (DimensionMismatch, InvalidMajorant, IsIsometric,
                     NotConcave, NotContraction, NotLeftInvertible, NotPSD,
                     NotRegular, PreconditionFailed, WindowTooDeep)
from .operators import (BlockLayout, Operator, assemble, wnorm,
                        wpsd_residual, wrange_projector, wsqrt, wsub,
                        lifting_residual, _check_reducing)
from .spaces import (GradedSpace, WindowSpec, direct_sum, forward_shift,
                     make_tower, max_budget, space)

TOL = la.IDENTITY_TOL


# ---------------------------------------------------------------------------
# result types
# ---------------------------------------------------------------------------

@dataclass
class LiftingResult:
    S: Operator
    J: Operator
    W: Optional[Operator]
    X: Optional[Operator]
    covariance: float
    construction_tag: str
    window: WindowSpec
    residuals: dict = field(default_factory=dict)
    witness: dict = field(default_factory=dict)

    @property
    def trivial(self) -> bool:
        return self.construction_tag.endswith(":trivial")

    def to_dict(self) -> dict:
        return {"construction_tag": self.construction_tag,
                "covariance": self.covariance,
                "space": self.S.dom.to_list(),
                "S": self.S.to_dict(),
                "residuals": self.residuals,
                "witness": self.witness}


@dataclass
class CanonicalBlocks:
    """``T = [[V, sigma Z], [0, T_hat]]`` on ``N(Delta) (+) ran(Delta)``.

    ``basis_N``/``basis_R`` are the recorded orthonormal bases (columns in
    the ambient coordinates); ``mask_N`` marks the ``basis_N`` vectors inside
    the exact window.
    """
    V: Operator
    Z: Operator
    T_hat: Operator
    sigma: float
    Delta0: np.ndarray
    basis_N: np.ndarray
    basis_R: np.ndarray
    mask_N: np.ndarray
    residuals: dict = field(default_factory=dict)

    @property
    def basis(self) -> dict:
        return {"N": self.basis_N, "R": self.basis_R}

    def reassemble(self) -> np.ndarray:
        qn, q = self.basis_N, self.basis_R
        return (qn @ self.V.matrix @ la.adjoint(qn)
                + self.sigma * qn @ self.Z.matrix @ la.adjoint(q)
                + q @ self.T_hat.matrix @ la.adjoint(q))

    def to_dict(self) -> dict:
        from .operators import matrix_to_json
        return {"sigma": self.sigma,
                "T_hat": matrix_to_json(self.T_hat.matrix),
                "Delta0": matrix_to_json(self.Delta0),
                "rank": int(self.basis_R.shape[1]),
                "residuals": self.residuals}


@dataclass
class DualBlocks:
    """``T' = [[V, Z' Delta^{-1}], [0, T_hat Delta^{-1}]]`` with ``Z' = sigma Z``
    and ``Delta`` the restriction of ``T*T`` to ``ran(Delta_T)``."""
    V: Operator
    Zp: Optional[Operator]
    Dinv: np.ndarray
    T0p: Optional[Operator]
    T1p: Optional[Operator]
    blocks: Optional[CanonicalBlocks] = None
    residuals: dict = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        return self.T0p is None


@dataclass
class BrownianForm:
    """``T~ = [[C, delta E], [0, U]]`` on ``M0 (+) M1``.

    ``J_C`` acts on ``M0`` and ``J_E`` on ``M1``; both are required to be isometric on the
    defect spaces; ``embedding`` maps the original space into ``M0 (+) M1``.
    """
    C: Operator
    E: Operator
    U: Operator
    delta: float
    J_C: np.ndarray
    J_E: np.ndarray
    embedding: np.ndarray


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _window(t: Operator) -> WindowSpec:
    return WindowSpec(t.dom, 0)


def _require_concave(t: Operator, tol: float):
    r = cl.concave_residual(t, _window(t))
    if r > tol:
        raise NotConcave(f"operator is not concave (residual {r:.2e})",
                         clause="concave")


def _tail_embedding(h: GradedSpace, k: GradedSpace) -> Operator:
    """Embedding of ``h`` as the trailing summand of ``k``."""
    n, m = h.total_dim, k.total_dim
    if k.blocks[-len(h.blocks):] != h.blocks:
        raise DimensionMismatch("h is not the trailing summand of k")
    mat = np.zeros((m, n), dtype=complex)
    mat[m - n:, :] = np.eye(n)
    return Operator(mat, h, k, 0)


def _fresh(label: str, taken: GradedSpace) -> str:
    while label in taken.labels:
        label = "_" + label
    return label


def _into_level0(tower: GradedSpace, m: np.ndarray, dom: GradedSpace,
                 offset: int = 0, bd: int = 0) -> Operator:
    """Operator ``dom -> tower`` writing the rows of ``m`` into the bottom
    level of ``tower`` starting at ``offset``."""
    out = np.zeros((tower.total_dim, dom.total_dim), dtype=complex)
    out[offset:offset + m.shape[0], :] = m
    return Operator(out, dom, tower, bd)


def _range_rows(m, mask, tol=la.RANK_TOL):
    """``(Q, rank)``: orthonormal basis of the windowed range of PSD ``m``."""
    p = wrange_projector(m, mask, tol)
    q = la.range_basis(p)
    return q, q.shape[1]


def _check_depth(depth: int, need: int):
    if depth - 1 < need:
        raise WindowTooDeep(f"lift depth {depth} too small: need > {need}")


def _postconditions(s: Operator, j: Operator, t: Operator) -> tuple:
    w = _window(s)
    res = {"two_isometry": cl.two_isometry_residual(s, w),
           "lifting": lifting_residual(s, j, t, w)}
    return w, res


def _wx(s: Operator, j: Operator):
    """``W`` and ``X`` blocks of ``S`` relative to ``K = H^perp (+) H``."""
    n_new = s.dom.total_dim - j.dom.total_dim
    if n_new == 0:
        return None, None
    new_sp = GradedSpace(s.dom.blocks[:len(s.dom.blocks) - len(j.dom.blocks)])
    w_ = Operator(s.matrix[:n_new, :n_new], new_sp, new_sp, s.boundary_depth)
    x_ = Operator(s.matrix[:n_new, n_new:], j.dom, new_sp, s.boundary_depth)
    return w_, x_


def _wx_residual(w_, x_) -> float:
    if w_ is None:
        return 0.0
    return la.op_norm(la.adjoint(w_.matrix) @ x_.matrix)


def _trivial(t: Operator, tag: str) -> LiftingResult:
    w = _window(t)
    return LiftingResult(t, _tail_embedding(t.dom, t.dom), None, None,
                         cl.covariance(t, w), tag + ":trivial", w,
                         {"two_isometry": cl.two_isometry_residual(t, w),
                          "lifting": 0.0})


# ---------------------------------------------------------------------------
# first lifting: K = H1 (+) H0 (+) H
# ---------------------------------------------------------------------------

def lift_basic(t: Operator, depth: int = 6, tol: float = TOL) -> LiftingResult:
    """2-isometric lifting with ``Delta_S = 0 (+) 2 (I (+) Delta_T)``.

    ``H0`` is a tower over ``ran(Omega_T)`` and ``H1`` a tower over
    ``H0 (+) ran(Delta_T - Omega_T)``; both are cut at ``depth`` levels.
    """
    _require_concave(t, tol)
    w = _window(t)
    b = max(1, t.boundary_depth)
    mask = w.mask(2 * b)
    d, om = cl.delta(t).matrix, cl.omega(t).matrix
    if wnorm(d, mask) <= tol:
        return _trivial(t, "lift_basic:isometry")
    if wnorm(om, mask) <= tol * max(1.0, wnorm(d, mask)):
        return _trivial(t, "lift_basic:two_isometry")
    _check_depth(depth, 4 * b)

    om_r = wsqrt(om, mask, tol)
    rest_r = wsqrt(d - om, mask, tol)
    q0, r0 = _range_rows(om, mask)
    q1, r1 = _range_rows(d - om, mask)
    h0 = make_tower(_fresh("H0", t.dom), r0, depth)
    h1 = make_tower(_fresh("H1", t.dom), depth * r0 + r1, depth)

    lay = BlockLayout([h1, h0, t.dom], [h1, h0, t.dom])
    lay[0, 0] = forward_shift(h1)
    lay[0, 1] = _into_level0(h1, np.sqrt(2) * np.eye(h0.total_dim), h0)
    if r1:
        lay[0, 2] = _into_level0(h1, la.adjoint(q1) @ rest_r, t.dom,
                                 offset=h0.total_dim, bd=2 * b)
    lay[1, 1] = forward_shift(h0)
    lay[1, 2] = _into_level0(h0, la.adjoint(q0) @ om_r, t.dom, bd=2 * b)
    lay[2, 2] = t
    s = assemble(lay)
    j = _tail_embedding(t.dom, s.dom)
    ws, res = _postconditions(s, j, t)
    w_, x_ = _wx(s, j)
    res["wx"] = _wx_residual(w_, x_)
    expected = np.sqrt(2) * max(1.0, np.sqrt(wnorm(d, w.mask(b))))
    cov = cl.covariance(s, ws)
    res["covariance"] = abs(cov - expected) / expected
    return LiftingResult(s, j, w_, x_, cov, "lift_basic", ws, res,
                         {"rank_omega": r0, "rank_rest": r1,
                          "expected_covariance": float(expected)})


# ---------------------------------------------------------------------------
# second lifting from a majorant A
# ---------------------------------------------------------------------------

def two_isometry_majorant(t: Operator, tol: float = TOL) -> np.ndarray:
    """``A = Delta_T`` for a 2-isometry (then ``T* A T = A`` holds)."""
    if cl.two_isometry_residual(t, _window(t)) > tol:
        raise InvalidMajorant("Delta_T is a valid majorant only for 2-isometries",
                              clause="T* A T = A")
    return cl.delta(t).matrix


def majorant_residuals(t: Operator, a, mask) -> dict:
    a = a.matrix if isinstance(a, Operator) else la.cmatrix(a)
    d = cl.delta(t).matrix
    scale = max(1.0, wnorm(a, mask))
    return {
        "invariance": wnorm(la.adjoint(t.matrix) @ a @ t.matrix - a, mask) / scale,
        "dominates_delta": wpsd_residual(a - d, mask),
        "norm": abs(wnorm(a, mask) - wnorm(d, mask)) / scale,
    }


def lift_minimal(t: Operator, a, depth: int = 6,
                 tol: float = TOL) -> LiftingResult:
    """Lifting ``S0 = [[S_+, J (A - Delta_T)^{1/2}], [0, T]]`` with
    ``Delta_S0 = 0 (+) A``.

    The majorant ``A`` (``T* A T = A``, ``A >= Delta_T``, ``||A|| =
    ||Delta_T||``) is supplied by the caller and validated here.
    """
    _require_concave(t, tol)
    a = a.matrix if isinstance(a, Operator) else la.cmatrix(a)
    if a.shape != t.matrix.shape:
        raise DimensionMismatch("majorant and operator dimensions differ")
    w = _window(t)
    b = max(1, t.boundary_depth)
    mask = w.mask(2 * b)
    res = majorant_residuals(t, a, mask)
    names = {"invariance": "T* A T = A", "dominates_delta": "A >= Delta_T",
             "norm": "||A|| = ||Delta_T||"}
    for k, v in res.items():
        if v > tol:
            raise InvalidMajorant(f"majorant fails {names[k]} (residual {v:.2e})",
                                  clause=names[k])
    d = cl.delta(t).matrix
    gap = a - d
    q, r = _range_rows(gap, mask)
    if r == 0:
        out = _trivial(t, "lift_minimal")
        out.residuals.update(res)
        out.witness = {"minimality_rank": t.dom.total_dim,
                       "ambient_dim": t.dom.total_dim}
        return out
    _check_depth(depth, 4 * b)
    gap_r = wsqrt(gap, mask, tol)
    tw = make_tower(_fresh("M", t.dom), r, depth)
    lay = BlockLayout([tw, t.dom], [tw, t.dom])
    lay[0, 0] = forward_shift(tw)
    lay[0, 1] = _into_level0(tw, la.adjoint(q) @ gap_r, t.dom, bd=2 * b)
    lay[1, 1] = t
    s = assemble(lay)
    j = _tail_embedding(t.dom, s.dom)
    ws, post = _postconditions(s, j, t)
    res.update(post)
    w_, x_ = _wx(s, j)
    res["wx"] = _wx_residual(w_, x_)
    d_s = cl.delta(s).matrix
    mask_s = ws.mask(s.boundary_depth)
    target = np.zeros_like(d_s)
    n = t.dom.total_dim
    target[-n:, -n:] = a
    res["delta_form"] = wnorm(d_s - target, mask_s) / max(1.0, wnorm(a, mask))
    return LiftingResult(s, j, w_, x_, cl.covariance(s, ws), "lift_minimal",
                         ws, res, minimality_witness(s, j))


def minimality_witness(s: Operator, j: Operator,
                       tol: float = la.RANK_TOL) -> dict:
    """Dimension of the smallest ``S``-invariant subspace containing ``J(H)``,
    grown by orthogonalized block iteration until the towers are filled."""
    steps = max((b.depth for b in s.dom.towers), default=1)
    basis = la.range_basis(j.matrix @ la.adjoint(j.matrix))
    new = basis
    for _ in range(steps):
        x = s.matrix @ new
        x = x - basis @ (la.adjoint(basis) @ x)
        x = x - basis @ (la.adjoint(basis) @ x)
        if x.size == 0:
            break
        u, sv, _ = np.linalg.svd(x, full_matrices=False)
        keep = sv > tol * max(1.0, la.op_norm(s.matrix))
        if not keep.any():
            break
        new = u[:, keep]
        basis = np.hstack([basis, new])
    rank = basis.shape[1]
    return {"minimality_rank": rank, "ambient_dim": s.dom.total_dim,
            "minimal": rank == s.dom.total_dim}


# ---------------------------------------------------------------------------
# canonical decomposition along N(Delta_T) (+) ran(Delta_T)
# ---------------------------------------------------------------------------

def _split(t: Operator, tol: float):
    """Bases of ``ran(Delta_T)`` (window) and its orthocomplement (all of H)."""
    w = _window(t)
    mask = w.mask(cl.budget(t, 1))
    d = cl.delta(t).matrix
    if wnorm(d, mask) <= tol:
        raise IsIsometric("Delta_T vanishes on the window", clause="non-isometric")
    p = wrange_projector(d, mask)
    q = la.range_basis(p)
    qn = la.range_basis(np.eye(p.shape[0]) - p)
    inside = np.linalg.norm(qn[~mask, :], axis=0) <= 1e-12
    return q, qn, inside, mask


def compress_to_range_delta(t: Operator, tol: float = TOL):
    """``(T_hat, Z_hat)``: ``T`` compressed to ``ran(Delta_T)`` and
    ``P_N T`` restricted to ``ran(Delta_T)``, in the recorded basis."""
    q, qn, inside, _ = _split(t, tol)
    r = q.shape[1]
    rs = space(("R", r))
    ns = space(("N", qn.shape[1]))
    t_hat = Operator(la.adjoint(q) @ t.matrix @ q, rs, rs, 0)
    z_hat = Operator(la.adjoint(qn) @ t.matrix @ q, rs, ns, t.boundary_depth)
    return t_hat, z_hat


def canonical_blocks(t: Operator, tol: float = TOL,
                     check: bool = True) -> CanonicalBlocks:
    """Canonical form ``[[V, sigma Z], [0, T_hat]]`` of a regular concave
    operator, ``sigma^2 = ||Delta_T|| + 1``."""
    if check:
        _require_concave(t, tol)
    q, qn, inside, mask = _split(t, tol)
    if check:
        try:
            r = cl.delta_regular_residual(t, _window(t), tol)
        except NotPSD as exc:
            raise NotRegular(str(exc), clause="Delta_T-regular") from exc
        if r > tol:
            raise NotRegular(f"not Delta_T-regular (residual {r:.2e})",
                             clause="Delta_T-regular")
    m = t.matrix
    d = cl.delta(t).matrix
    nd = wnorm(d, mask)
    sigma = float(np.sqrt(nd + 1.0))
    rs, ns = space(("R", q.shape[1])), space(("N", qn.shape[1]))
    v = Operator(la.adjoint(qn) @ m @ qn, ns, ns, t.boundary_depth)
    z = Operator(la.adjoint(qn) @ m @ q / sigma, rs, ns, t.boundary_depth)
    t_hat = Operator(la.adjoint(q) @ m @ q, rs, rs, 0)
    delta0 = la.adjoint(q) @ d @ q
    delta0 = 0.5 * (delta0 + la.adjoint(delta0))
    cb = CanonicalBlocks(v, z, t_hat, sigma, delta0, qn, q, inside)
    cb.residuals = canonical_residuals(cb, m)
    if check:
        for key, clause in (("V_isometry", "V*V = I"), ("VZ", "V*Z = 0"),
                            ("lower_left", "N(Delta_T) invariant"),
                            ("Z_contraction", "Z contraction"),
                            ("commutation", "T_hat commutes with sigma^2 Z*Z + Delta_T_hat")):
            if cb.residuals[key] > tol:
                raise NotRegular(f"canonical form fails {clause} "
                                 f"(residual {cb.residuals[key]:.2e})", clause=clause)
        if cb.residuals["Z_injective"] <= la.RANK_TOL:
            raise NotRegular("Z is not injective", clause="Z injective")
    return cb


def canonical_residuals(cb: CanonicalBlocks, m: np.ndarray) -> dict:
    vin = cb.mask_N
    v, z, th = cb.V.matrix, cb.Z.matrix, cb.T_hat.matrix
    s2 = cb.sigma ** 2
    g = s2 * la.adjoint(z) @ z + la.adjoint(th) @ th - np.eye(th.shape[0])
    scale = max(1.0, la.op_norm(g)) * max(1.0, la.op_norm(th))
    low = la.adjoint(cb.basis_R) @ m @ cb.basis_N
    sv = np.linalg.svd(z, compute_uv=False) if z.size else np.zeros(1)
    return {
        "V_isometry": wnorm(la.adjoint(v) @ v - np.eye(v.shape[0]), vin),
        "VZ": la.op_norm((la.adjoint(v) @ z)[vin, :]),
        "lower_left": la.op_norm(low[:, vin]),
        "Z_contraction": max(0.0, la.op_norm(z) - 1.0),
        "Z_injective": float(sv.min()),
        "commutation": la.op_norm(th @ g - g @ th) / scale,
        "delta0": la.op_norm(g - cb.Delta0) / max(1.0, la.op_norm(g)),
    }


# ---------------------------------------------------------------------------
# minimal isometric lifting of a contraction and the regular lifting
# ---------------------------------------------------------------------------

def schaffer_lift(c: Operator, depth: int = 8, tol: float = TOL) -> Operator:
    """Minimal isometric lifting ``[[c, 0], [J D_c, S_+]]`` of a contraction
    on ``H (+) tower(D_c)``.  A zero defect keeps a tower over ``H``."""
    if c.norm() > 1 + tol:
        raise NotContraction(f"||c|| = {c.norm():.6g} > 1", clause="contraction")
    n = c.dom.total_dim
    dc2 = np.eye(n) - la.adjoint(c.matrix) @ c.matrix
    dc2 = 0.5 * (dc2 + la.adjoint(dc2))
    dc = la.herm_sqrt(dc2, 10 * tol)
    full = np.ones(n, dtype=bool)
    qd, rd = _range_rows(dc2, full)
    tw = make_tower(_fresh("defect", c.dom), rd if rd else n, depth)
    lay = BlockLayout([c.dom, tw], [c.dom, tw])
    lay[0, 0] = c
    if rd:
        lay[1, 0] = _into_level0(tw, la.adjoint(qd) @ dc, c.dom)
    lay[1, 1] = forward_shift(tw)
    return assemble(lay)


def lift_regular(t: Operator, depth: int = 6, tol: float = TOL,
                 check: bool = True) -> LiftingResult:
    """2-isometric lifting whose ``sigma^{-2} Delta_S`` is a projection, on
    ``K0 (+) H2 (+) H`` with ``H2`` the defect tower of the minimal isometric
    lifting of ``T_hat`` and ``K0`` a tower over ``D_Z (+) H2``.

    ``check=False`` skips the regularity gate and assembles the operator
    anyway, so the postconditions can be measured on arbitrary input.
    """
    w = _window(t)
    if cl.isometry_residual(t, w) <= tol:
        return _trivial(t, "lift_regular")
    cb = canonical_blocks(t, tol, check=check)
    b = max(1, t.boundary_depth)
    _check_depth(depth, 2 * b)
    q, sigma = cb.basis_R, cb.sigma
    r = q.shape[1]
    z, th = cb.Z.matrix, cb.T_hat.matrix
    dz2 = np.eye(r) - la.adjoint(z) @ z
    dz = la.herm_sqrt(0.5 * (dz2 + la.adjoint(dz2)), 10 * tol)
    qz, rz = _range_rows(dz2, np.ones(r, dtype=bool))

    vhat = schaffer_lift(cb.T_hat, depth, tol)
    dt_tower = GradedSpace(vhat.dom.blocks[1:])
    rt = 0 if la.op_norm(vhat.matrix[r:, :r]) <= tol else dt_tower.blocks[0].base_dim
    # coupling of the defect tower to H through the recorded basis of ran(Delta)
    coupling_t = vhat.matrix[r:, :r] @ la.adjoint(q)

    rows, cols = [], []
    h2 = k0 = None
    if rt:
        h2 = make_tower(_fresh("H2", t.dom), rt, depth)
    base_k0 = rz + (h2.total_dim if h2 else 0)
    if base_k0:
        k0 = make_tower(_fresh("K0", t.dom), base_k0, depth)
    spaces = [sp for sp in (k0, h2, t.dom) if sp is not None]
    lay = BlockLayout(spaces, spaces)
    ik0 = 0 if k0 is not None else None
    ih2 = (1 if k0 is not None else 0) if h2 is not None else None
    ih = len(spaces) - 1
    if k0 is not None:
        lay[ik0, ik0] = forward_shift(k0)
        if h2 is not None:
            lay[ik0, ih2] = _into_level0(k0, sigma * np.eye(h2.total_dim), h2)
        if rz:
            lay[ik0, ih] = _into_level0(
                k0, sigma * la.adjoint(qz) @ dz @ la.adjoint(q), t.dom,
                offset=h2.total_dim if h2 else 0, bd=b)
    if h2 is not None:
        lay[ih2, ih2] = forward_shift(h2)
        lay[ih2, ih] = Operator(coupling_t[:h2.total_dim, :], t.dom, h2, b)
    lay[ih, ih] = t
    s = assemble(lay)
    j = _tail_embedding(t.dom, s.dom)
    ws, res = _postconditions(s, j, t)
    w_, x_ = _wx(s, j)
    res["wx"] = _wx_residual(w_, x_)
    res.update(regular_lift_residuals(s, j, cb, sigma))
    return LiftingResult(s, j, w_, x_, cl.covariance(s, ws), "lift_regular",
                         ws, res, {"sigma": sigma, "rank_DZ": rz,
                                   "rank_DT_hat": rt})


def regular_lift_residuals(s: Operator, j: Operator, cb: CanonicalBlocks,
                           sigma: float) -> dict:
    ws = _window(s)
    bd = max(1, s.boundary_depth)
    mask = ws.mask(2 * bd)
    p = cl.delta(s).matrix / sigma ** 2
    sub = wsub(p, mask)
    jm = j.matrix
    ss = la.adjoint(s.matrix) @ s.matrix
    ph = jm @ la.adjoint(jm)
    leak = (np.eye(ss.shape[0]) - ph) @ ss @ ph
    n_win = jm @ cb.basis_N[:, cb.mask_N]
    return {
        "idempotency": la.op_norm(sub @ sub - sub),
        "SSH_in_H": la.op_norm(leak[np.ix_(mask, mask)]),
        "kernel_inclusion": la.op_norm((cl.delta(s).matrix @ n_win)[mask, :]),
    }


# ---------------------------------------------------------------------------
# Cauchy dual
# ---------------------------------------------------------------------------

def cauchy_dual(t: Operator, tol: float = la.RANK_TOL) -> Operator:
    """``T' = T (T*T)^{-1}`` on the exact window (zero columns outside).

    Computed from the SVD of the window columns, ``T = U s V*`` giving
    ``T' = U s^{-1} V*``, which keeps the dual an exact involution.
    """
    mask = _window(t).mask(cl.budget(t, 1))
    m = t.matrix
    _check_reducing(la.adjoint(m) @ m, mask, la.IDENTITY_TOL)
    cols = m[:, mask]
    out = np.zeros_like(m)
    if cols.size:
        u, s, vh = np.linalg.svd(cols, full_matrices=False)
        if s[-1] <= tol * max(1.0, s[0]):
            raise NotLeftInvertible(
                f"T*T is not invertible (smallest singular value {s[-1]:.2e})",
                clause="left invertible")
        out[:, mask] = (u / s) @ vh
    return Operator(out, t.dom, t.cod, t.boundary_depth)


def defect_sq(c: Operator) -> np.ndarray:
    """``D_C^2 = I - C*C``."""
    g = np.eye(c.dom.total_dim) - la.adjoint(c.matrix) @ c.matrix
    return 0.5 * (g + la.adjoint(g))


def dual_blocks(t: Operator, tol: float = TOL, samples: int = 100,
                seed: int = 0) -> DualBlocks:
    """Block form of the Cauchy dual of a regular concave operator."""
    w = _window(t)
    if cl.isometry_residual(t, w) <= tol:
        return DualBlocks(t, None, np.zeros((0, 0)), None, None)
    cb = canonical_blocks(t, tol)
    z, th, sigma = cb.Z.matrix, cb.T_hat.matrix, cb.sigma
    r = th.shape[0]
    g = sigma ** 2 * la.adjoint(z) @ z + la.adjoint(th) @ th
    ginv = la.inverse(0.5 * (g + la.adjoint(g)), la.RANK_TOL)
    rs, ns = cb.T_hat.dom, cb.V.dom
    zp = Operator(sigma * z, rs, ns, cb.Z.boundary_depth)
    t0p = Operator(th @ ginv, rs, rs, 0)
    t1p = Operator(zp.matrix @ ginv, rs, ns, zp.boundary_depth)
    db = DualBlocks(cb.V, zp, ginv, t0p, t1p, cb)
    db.residuals = dual_residuals(t, db, samples, seed)
    return db


def dual_residuals(t: Operator, db: DualBlocks, samples: int = 100,
                   seed: int = 0) -> dict:
    cb = db.blocks
    qn, q = cb.basis_N, cb.basis_R
    mask = _window(t).mask(cl.budget(t, 1))
    tp = cauchy_dual(t)
    re = (qn @ db.V.matrix @ la.adjoint(qn) + qn @ db.T1p.matrix @ la.adjoint(q)
          + q @ db.T0p.matrix @ la.adjoint(q))
    dtp = defect_sq(tp)
    target = q @ (np.eye(q.shape[1]) - db.Dinv) @ la.adjoint(q)
    # kernel comparison on the window: N(D_T') versus N(Delta_T)
    ker = cl.kernel_distance(dtp, cl.delta(t).matrix, mask)
    # sampled norm bound ||P_D T' h|| <= ||T'* T' h|| for h in ran(D_T')
    rng = np.random.default_rng(seed)
    p_d = wrange_projector(dtp, mask)
    basis = la.range_basis(p_d)
    worst = 0.0
    ttp = la.adjoint(tp.matrix) @ tp.matrix
    for _ in range(samples if basis.shape[1] else 0):
        c = rng.standard_normal(basis.shape[1]) + 1j * rng.standard_normal(basis.shape[1])
        h = basis @ (c / np.linalg.norm(c))
        lhs = np.linalg.norm(p_d @ tp.matrix @ h)
        rhs = np.linalg.norm(ttp @ h)
        worst = max(worst, lhs - rhs)
    scale = max(1.0, tp.norm())
    return {
        "reassembly": la.op_norm((re - tp.matrix)[np.ix_(mask, mask)]) / scale,
        "defect_form": wnorm(dtp - target, mask),
        "kernel": ker,
        "norm_bound": max(0.0, worst),
    }


def _dual_side_residuals(c: Operator, tol: float) -> dict:
    from .generate import validate_two_hypercontraction

    res = validate_two_hypercontraction(c, tol)
    mask = _window(c).mask(cl.budget(c, 1))
    d2 = defect_sq(c)
    p = wrange_projector(d2, mask)
    q = la.range_basis(p)
    if q.shape[1] == 0:
        res["compression_bound"] = 0.0
        return res
    c0 = la.adjoint(q) @ c.matrix @ q
    d0 = la.adjoint(q) @ la.adjoint(c.matrix) @ c.matrix @ q
    gap = d0 @ d0 - la.adjoint(c0) @ c0
    res["compression_bound"] = wpsd_residual(gap, np.ones(gap.shape[0], bool))
    return res


_DUAL_CLAUSES = {"left_invertible": "left invertible",
                 "contraction": "contraction",
                 "two_hypercontraction": "2-hypercontraction",
                 "dc2_regular": "D_C^2-regular",
                 "compression_bound": "C0*C0 <= D0^2"}


def inverse_dual(c: Operator, tol: float = TOL) -> Operator:
    """Inverse of the Cauchy-dual map on its image: ``T = C (C*C)^{-1}``."""
    res = _dual_side_residuals(c, tol)
    for key, clause in _DUAL_CLAUSES.items():
        if res[key] > tol:
            raise PreconditionFailed(
                f"dual-side hypothesis fails: {clause} (residual {res[key]:.2e})",
                clause=clause)
    if wnorm(defect_sq(c), _window(c).mask(cl.budget(c, 1))) <= tol:
        return c
    t = cauchy_dual(c)
    w = _window(t)
    if not cl.is_concave(t, w, tol):
        raise PreconditionFailed("result is not concave", clause="post: concave")
    if not cl.is_delta_regular(t, w, tol):
        raise PreconditionFailed("result is not Delta_T-regular",
                                 clause="post: Delta_T-regular")
    return t


# ---------------------------------------------------------------------------
# Brownian-type extension form
# ---------------------------------------------------------------------------

def _pos_sqrt(m) -> np.ndarray:
    w, u = la.herm_eig(0.5 * (m + la.adjoint(m)))
    return (u * np.sqrt(np.clip(w, 0.0, None))) @ la.adjoint(u)


def brownian_form_matrix(bf: BrownianForm) -> Operator:
    lay = BlockLayout([bf.C.dom, bf.U.dom], [bf.C.dom, bf.U.dom])
    lay[0, 0] = bf.C
    lay[0, 1] = Operator(bf.delta * bf.E.matrix, bf.E.dom, bf.E.cod, 0)
    lay[1, 1] = bf.U
    return assemble(lay)


def verify_brownian_form(bf: BrownianForm, t: Operator, tol: float = TOL):
    """Check a candidate extension ``[[C, delta E], [0, U]]`` of ``t``."""
    from .verify import TheoremVerdict

    c, e, u = bf.C.matrix, bf.E.matrix, bf.U.matrix
    n0, n1 = c.shape[0], u.shape[0]
    if c.shape != (n0, n0) or e.shape != (n0, n1) or u.shape != (n1, n1):
        raise DimensionMismatch("C, E, U do not form a 2x2 block operator")
    jc, je = np.asarray(bf.J_C), np.asarray(bf.J_E)
    if jc.shape[1] != n0 or je.shape[1] != n1 or jc.shape[0] != je.shape[0]:
        raise DimensionMismatch("J_C (on M0) and J_E (on M1) need a common target")
    emb = np.asarray(bf.embedding)
    if emb.shape != (n0 + n1, t.dom.total_dim):
        raise DimensionMismatch("embedding must map H into M0 (+) M1")
    tt = brownian_form_matrix(bf).matrix
    dc2 = np.eye(n0) - la.adjoint(c) @ c
    de2 = np.eye(n1) - la.adjoint(e) @ e
    # positive parts, so a non-contraction fails its clause instead of raising
    dc, de = _pos_sqrt(dc2), _pos_sqrt(de2)
    mask = _window(t).mask(cl.budget(t, 1))
    delta_t = float(np.sqrt(wnorm(cl.delta(t).matrix, mask)))
    eq = la.adjoint(c) @ e + dc @ la.adjoint(jc) @ je @ de
    scale = max(1.0, la.op_norm(c)) * max(1.0, la.op_norm(e))
    ext = (tt @ emb - emb @ t.matrix)[:, mask]
    ue = la.adjoint(e @ u) @ (e @ u)
    clauses = [
        ("C contraction", max(0.0, la.op_norm(c) - 1.0)),
        ("E contraction", max(0.0, la.op_norm(e) - 1.0)),
        ("U unitary", max(la.op_norm(la.adjoint(u) @ u - np.eye(n1)),
                          la.op_norm(u @ la.adjoint(u) - np.eye(n1)))),
        ("J_C isometric on D_C", la.op_norm(dc @ (la.adjoint(jc) @ jc - np.eye(n0)) @ dc)),
        ("J_E isometric on D_E", la.op_norm(de @ (la.adjoint(je) @ je - np.eye(n1)) @ de)),
        ("delta = ||Delta_T||^(1/2)", abs(bf.delta - delta_t) / max(1.0, delta_t)),
        ("C*E + D_C J_C* J_E D_E = 0", la.op_norm(eq) / scale),
        ("extends T", la.op_norm(ext) / max(1.0, la.op_norm(t.matrix))),
    ]
    concave_crit = max(la.op_norm(la.adjoint(c) @ c - np.eye(n0)),
                       la.op_norm(la.adjoint(c) @ e),
                       wpsd_residual(la.adjoint(e) @ e - ue, np.ones(n1, bool)))
    diag = {"concavity_criterion": concave_crit,
            "extension_concave": cl.concave_residual(
                Operator(tt, space(("M", n0 + n1)), space(("M", n0 + n1))))}
    return TheoremVerdict.build("brownian_form", clauses, tol, diagnostics=diag)
