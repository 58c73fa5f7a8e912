"""Class predicates for Hilbert space operators, evaluated on windows.

Every predicate has a ``*_residual`` form returning a relative, nonnegative
distance to the defining (in)equality; the boolean form is
``residual <= tol``.  PSD conditions are tested on the compression of the
operator to the window (eigenvalues of ``P M P`` restricted to ``ran P``), so
zero padding outside the window never creates spurious violations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import linalg as la
from .errors import NoConvergence, NotMonotone, NotPSD, WindowTooDeep
from .operators import (Operator, identity, wnorm, wpsd_residual, wsqrt,
                        wsub, wrange_projector)
from .spaces import WindowSpec, max_budget

TOL = la.IDENTITY_TOL


def _window(t: Operator, w: WindowSpec | None) -> WindowSpec:
    if w is None:
        return WindowSpec(t.dom, 0)
    if w.space != t.dom:
        raise ValueError(f"window is on {w.space!r}, operator on {t.dom!r}")
    return w


def budget(t: Operator, k: int) -> int:
    """Window budget for an expression with ``k`` factors of ``t``."""
    return k * max(1, t.boundary_depth)


def _mask(t, w, k):
    return _window(t, w).mask(budget(t, k))


def _rel(x, scale) -> float:
    return float(x) / max(1.0, float(scale))


def gram_powers(t: Operator, n: int) -> list:
    """``[T*^j T^j for j = 0..n]`` as matrices."""
    m = t.matrix
    p = np.eye(m.shape[0], dtype=complex)
    out = [p.copy()]
    for _ in range(n):
        p = m @ p
        out.append(la.adjoint(p) @ p)
    return out


# ---------------------------------------------------------------------------
# derived operators
# ---------------------------------------------------------------------------

def delta(t: Operator) -> Operator:
    """``T*T - I``."""
    m = la.adjoint(t.matrix) @ t.matrix - np.eye(t.dom.total_dim)
    return Operator(0.5 * (m + la.adjoint(m)), t.dom, t.dom, budget(t, 1))


def omega(t: Operator) -> Operator:
    """``Delta_T - T* Delta_T T``."""
    d = delta(t).matrix
    m = d - la.adjoint(t.matrix) @ d @ t.matrix
    return Operator(0.5 * (m + la.adjoint(m)), t.dom, t.dom, budget(t, 2))


def bracket(a, t: Operator, m: int) -> Operator:
    """Alternating binomial sum ``sum_j (-1)^j C(m,j) T*^j A T^j``."""
    a_bd = a.boundary_depth if isinstance(a, Operator) else 0
    a = a.matrix if isinstance(a, Operator) else la.cmatrix(a)
    if a.shape != t.matrix.shape:
        raise ValueError("weight and operator dimensions differ")
    out = np.zeros_like(a)
    tj = np.eye(a.shape[0], dtype=complex)
    for j in range(m + 1):
        out += (-1) ** j * comb(m, j) * (la.adjoint(tj) @ a @ tj)
        tj = t.matrix @ tj
    return Operator(0.5 * (out + la.adjoint(out)), t.dom, t.dom,
                    a_bd + budget(t, m))


def a_n(t: Operator, n: int) -> Operator:
    """``A_n(T) = -B_n(T)``; ``A_1 = Delta_T``."""
    if n == 1:
        return delta(t)
    b = bracket(np.eye(t.dom.total_dim), t, n)
    return Operator(-b.matrix, t.dom, t.dom, b.boundary_depth)


def delta_power(t: Operator, m: int) -> Operator:
    """``Delta_{T^m} = T*^m T^m - I``."""
    g = gram_powers(t, m)[m]
    return Operator(g - np.eye(t.dom.total_dim), t.dom, t.dom, budget(t, m))


# ---------------------------------------------------------------------------
# predicates
# ---------------------------------------------------------------------------

def expansive_residual(t, w=None) -> float:
    return wpsd_residual(delta(t).matrix, _mask(t, w, 1))


def concave_residual(t: Operator, w=None) -> float:
    """Violation of ``T*^2 T^2 - 2 T*T + I <= 0`` jointly with ``Delta_T >= 0``."""
    mask = _mask(t, w, 2)
    return max(wpsd_residual(a_n(t, 2).matrix, mask),
               wpsd_residual(delta(t).matrix, mask))


def is_concave(t, w=None, tol=TOL) -> bool:
    return concave_residual(t, w) <= tol


def two_isometry_residual(t: Operator, w=None) -> float:
    mask = _mask(t, w, 2)
    b2 = bracket(np.eye(t.dom.total_dim), t, 2).matrix
    return _rel(wnorm(b2, mask), wnorm(gram_powers(t, 2)[2], mask))


def is_two_isometry(t, w=None, tol=TOL) -> bool:
    return two_isometry_residual(t, w) <= tol


def isometry_residual(t: Operator, w=None) -> float:
    return wnorm(delta(t).matrix, _mask(t, w, 1))


def covariance(t: Operator, w=None) -> float:
    """``||Delta_T||^{1/2}`` on the window."""
    return float(np.sqrt(max(0.0, wnorm(delta(t).matrix, _mask(t, w, 1)))))


def regularity_residual(t: Operator, a, mask, tol=TOL) -> float:
    """``||P (A T - A^{1/2} T A^{1/2}) P||`` for a weight ``A >= 0`` on the
    window ``mask``; raises :class:`NotPSD` when ``A`` is not PSD there."""
    a = a.matrix if isinstance(a, Operator) else np.asarray(a)
    if wpsd_residual(a, mask) > tol:
        raise NotPSD("regularity weight is not PSD on the window")
    r = wsqrt(a, mask, tol)
    lhs = a @ t.matrix
    rhs = r @ t.matrix @ r
    scale = max(1.0, wnorm(a, mask)) * max(1.0, wnorm(t.matrix, mask))
    return _rel(wnorm(lhs - rhs, mask), scale)


def delta_regular_residual(t: Operator, w=None, tol=TOL) -> float:
    return regularity_residual(t, delta(t), _mask(t, w, 1), tol)


def is_delta_regular(t, w=None, tol=TOL) -> bool:
    return delta_regular_residual(t, w, tol) <= tol


def quasinormal_residual(t: Operator, w=None) -> float:
    m = t.matrix
    mask = _mask(t, w, 2)
    lhs = m @ la.adjoint(m) @ m
    rhs = la.adjoint(m) @ m @ m
    return _rel(wnorm(lhs - rhs, mask), wnorm(m, mask) ** 3)


def is_quasinormal(t, tol=TOL, w=None) -> bool:
    return quasinormal_residual(t, w) <= tol


def hyponormal_residual(t: Operator, w=None) -> float:
    m = t.matrix
    return wpsd_residual(la.adjoint(m) @ m - m @ la.adjoint(m), _mask(t, w, 2))


def is_hyponormal(t, tol=TOL, w=None) -> bool:
    return hyponormal_residual(t, w) <= tol


def a_contraction_residual(t: Operator, a, w=None, tol=TOL) -> float:
    """Violation of ``T* A T <= A``; ``A`` must be PSD on the window."""
    a_bd = a.boundary_depth if isinstance(a, Operator) else 0
    a = a.matrix if isinstance(a, Operator) else la.cmatrix(a)
    mask = _window(t, w).mask(a_bd + budget(t, 1))
    if wpsd_residual(a, mask) > tol:
        raise NotPSD("weight A is not PSD on the window")
    return wpsd_residual(a - la.adjoint(t.matrix) @ a @ t.matrix, mask)


def is_a_contraction(t, a, w=None, tol=TOL) -> bool:
    return a_contraction_residual(t, a, w, tol) <= tol


# ---------------------------------------------------------------------------
# hyperexpansivity profile
# ---------------------------------------------------------------------------

@dataclass
class HyperProfile:
    """Per-order signs of ``B_m(T)``.

    ``kind="expansive"`` tests ``B_m <= 0`` (stored as the min eigenvalue of
    ``-B_m``); ``kind="contractive"`` tests ``B_m >= 0``.  Verdicts are
    finite-order surrogates: "up to order M", never "completely".
    """
    order: int
    kind: str
    min_eigs: list
    residuals: list
    tol: float

    def passes(self, m: int) -> bool:
        return self.residuals[m - 1] <= self.tol

    def upto(self, m: int) -> bool:
        return all(r <= self.tol for r in self.residuals[:m])

    @property
    def completely_upto_order(self) -> bool:
        return self.upto(self.order)

    def to_dict(self) -> dict:
        return {"order": self.order, "kind": self.kind,
                "min_eigs": self.min_eigs, "residuals": self.residuals,
                "verdict": self.completely_upto_order,
                "label": f"{self.kind} up to order {self.order}"}


def hyper_profile(t: Operator, w=None, M: int = 8, tol=TOL,
                  kind: str = "expansive") -> HyperProfile:
    if kind not in ("expansive", "contractive"):
        raise ValueError(kind)
    w = _window(t, w)
    if budget(t, M) > max_budget(t.dom, w.margin):
        raise WindowTooDeep(f"order {M} needs window budget {budget(t, M)}")
    sign = -1.0 if kind == "expansive" else 1.0
    grams = gram_powers(t, M)
    min_eigs, residuals = [], []
    for m in range(1, M + 1):
        b = sum((-1) ** j * comb(m, j) * grams[j] for j in range(m + 1))
        sub = wsub(sign * b, w.mask(budget(t, m)))
        sub = 0.5 * (sub + la.adjoint(sub))
        lo = float(np.linalg.eigvalsh(sub)[0]) if sub.size else 0.0
        min_eigs.append(lo)
        residuals.append(max(0.0, -lo) / max(1.0, la.op_norm(sub)))
    return HyperProfile(M, kind, min_eigs, residuals, tol)


# ---------------------------------------------------------------------------
# asymptotic limit and the energy identity
# ---------------------------------------------------------------------------

def asymptotic_limit(t: Operator, a, w=None, tol=TOL,
                     max_iter: int = 500) -> np.ndarray:
    """Limit of ``T*^n A T^n`` (non-increasing in the PSD order).

    On truncated towers every iterate consumes one level of window, so the
    iteration stops at the window's budget.  The returned limit is the
    compression to the final window, zero outside.
    """
    w = _window(t, w)
    a_bd = a.boundary_depth if isinstance(a, Operator) else 0
    a = a.matrix if isinstance(a, Operator) else la.cmatrix(a)
    m, mh = t.matrix, la.adjoint(t.matrix)
    cap = min(max_iter, (max_budget(t.dom, w.margin) - a_bd)
              // max(1, t.boundary_depth))
    cur = a
    for k in range(1, cap + 1):
        nxt = mh @ cur @ m
        mask = w.mask(a_bd + budget(t, k))
        if k <= 3 and wpsd_residual(cur - nxt, mask) > tol:
            raise NotMonotone(f"iterate {k} is not below iterate {k - 1}")
        if wnorm(nxt - cur, mask) <= tol * max(1.0, wnorm(a, mask)):
            final = w.mask(a_bd + budget(t, k + 1)) if k + 1 <= cap else mask
            out = np.zeros_like(nxt)
            out[np.ix_(final, final)] = wsub(nxt, final)
            return out
        cur = nxt
    raise NoConvergence(f"no convergence within {cap} iterations")


def energy_identity_residuals(t: Operator, h, n: int, w=None) -> dict:
    """Residuals of the telescoping identity behind the asymptotic limit.

    ``finite``: ``|D^{1/2}h|^2 - sum_{j<=n} |W^{1/2}T^j h|^2 -
    |D^{1/2}T^{n+1}h|^2`` with ``D = Delta_T``, ``W = Omega_T`` (exact).
    ``limit_sqrt``: the same with the tail replaced by ``<A_T h, h>``, i.e.
    ``|A_T^{1/2} h|^2``; ``limit_plain`` uses ``|A_T h|^2``.  The two limit
    readings differ whenever ``A_T`` is not a projection-valued scalar.
    """
    w = _window(t, w)
    h = np.asarray(h, dtype=complex)
    d, om = delta(t).matrix, omega(t).matrix
    k = budget(t, n + 2)
    mask = w.mask(k)
    if np.linalg.norm(h[~mask]) > 0:
        raise WindowTooDeep("h must be supported in the budget window")
    wide = w.mask(budget(t, 2))
    om_r = wsqrt(om, wide)
    lhs = float(np.real(np.vdot(h, d @ h)))
    parts, x = [], h.copy()
    for _ in range(n + 1):
        parts.append(float(np.linalg.norm(om_r @ x) ** 2))
        x = t.matrix @ x
    tail = float(np.real(np.vdot(x, d @ x)))
    out = {"finite": abs(lhs - sum(parts) - tail)}
    try:
        a_t = asymptotic_limit(t, delta(t), w)
    except (NoConvergence, NotMonotone):
        return out
    out["limit_sqrt"] = abs(lhs - sum(parts) - float(np.real(np.vdot(h, a_t @ h))))
    out["limit_plain"] = abs(lhs - sum(parts) - float(np.linalg.norm(a_t @ h) ** 2))
    return out


def kernel_projector_w(m, mask, tol=la.RANK_TOL) -> np.ndarray:
    """Kernel projector of the windowed compression, as a window-sized matrix."""
    p = wrange_projector(m, mask, tol)
    return np.eye(int(mask.sum())) - wsub(p, mask)


def kernel_distance(m1, m2, mask, tol=la.RANK_TOL) -> float:
    return la.op_norm(kernel_projector_w(m1, mask, tol)
                      - kernel_projector_w(m2, mask, tol))


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass
class ClassificationReport:
    verdicts: dict
    residuals: dict
    tol: float
    margin: int
    budgets: dict
    profile: HyperProfile | None = None
    contractive_profile: HyperProfile | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"verdicts": self.verdicts, "residuals": self.residuals,
             "tolerances": {"tol": self.tol}, "margin": self.margin,
             "budgets": self.budgets, "extras": self.extras}
        if self.profile is not None:
            d["hyper_profile"] = self.profile.to_dict()
        if self.contractive_profile is not None:
            d["hypercontractive_profile"] = self.contractive_profile.to_dict()
        return d


def classify_all(t: Operator, w=None, tol=TOL, order: int = 8) -> ClassificationReport:
    w = _window(t, w)
    res, budgets = {}, {}
    res["isometry"] = isometry_residual(t, w)
    budgets["isometry"] = budget(t, 1)
    res["expansive"] = expansive_residual(t, w)
    budgets["expansive"] = budget(t, 1)
    res["concave"] = concave_residual(t, w)
    budgets["concave"] = budget(t, 2)
    res["two_isometry"] = two_isometry_residual(t, w)
    budgets["two_isometry"] = budget(t, 2)
    res["quasinormal"] = quasinormal_residual(t, w)
    budgets["quasinormal"] = budget(t, 2)
    res["hyponormal"] = hyponormal_residual(t, w)
    budgets["hyponormal"] = budget(t, 2)
    try:
        res["delta_regular"] = delta_regular_residual(t, w, tol)
    except NotPSD:
        res["delta_regular"] = float("inf")
    budgets["delta_regular"] = budget(t, 1)
    verdicts = {k: bool(v <= tol) for k, v in res.items()}
    verdicts["unitary"] = verdicts["isometry"] and t.dom.towers == [] and \
        la.op_norm(t.matrix @ la.adjoint(t.matrix) - np.eye(t.dom.total_dim)) <= tol
    order = min(order, max_budget(t.dom, w.margin) // max(1, t.boundary_depth))
    prof = cprof = None
    if order >= 1:
        prof = hyper_profile(t, w, order, tol, "expansive")
        cprof = hyper_profile(t, w, order, tol, "contractive")
        verdicts[f"hyperexpansive_upto_{order}"] = prof.completely_upto_order
        verdicts[f"hypercontractive_upto_{order}"] = cprof.completely_upto_order
    extras = {"covariance": covariance(t, w),
              "delta_rank": int(round(np.real(np.trace(
                  wrange_projector(delta(t).matrix, w.mask(budget(t, 1)))))))}
    return ClassificationReport(verdicts, res, tol, w.margin, budgets, prof,
                                cprof, extras)
