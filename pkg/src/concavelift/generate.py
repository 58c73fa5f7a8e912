"""Instance factories for positive and negative test families.

Every factory validates its output against the classifiers it promises
before returning, so a returned operator is known to lie in its family.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

from . import classify as cl
from . import linalg as la
from .errors import GammaTooSmall, GenerationFailed, NotContraction
from .operators import (BlockLayout, Operator, assemble, operator, wpsd_residual)
from .spaces import (WindowSpec, embed, forward_shift, make_tower, space)

TOL = la.IDENTITY_TOL


def _as_op(t, label="core") -> Operator:
    if isinstance(t, Operator):
        return t
    m = la.cmatrix(t)
    return operator(m, space((label, m.shape[0])))


def _check(ok: bool, what: str):
    if not ok:
        raise GenerationFailed(f"generated operator failed validation: {what}")


def coupled_shift(v_base: int, core: Operator, coupling, depth: int,
                  label: str = "shift") -> Operator:
    """``[[V, J K], [0, core]]`` with ``V`` the forward shift on a tower over
    ``C^v_base`` and ``J`` the embedding of the core into the tower's bottom
    level.  ``coupling`` is the ``v_base x dim(core)`` matrix ``K``."""
    tw = make_tower(label, v_base, depth)
    coupling = la.cmatrix(coupling)
    k_sp = space(("_k", coupling.shape[0]))
    j = embed(k_sp, tw, label)
    zk = Operator(j.matrix @ coupling, core.dom, tw, 0)
    lay = BlockLayout([tw, core.dom], [tw, core.dom])
    lay[0, 0] = forward_shift(tw)
    lay[0, 1] = zk
    lay[1, 1] = core
    return assemble(lay)


def gen_regular_concave_scalar(t_hat, gamma: float, shift_depth: int = 16,
                               validate: bool = True) -> Operator:
    """Concave, Delta-regular ``T = [[V, J (gamma^2 - T0*T0)^{1/2}], [0, T0]]``.

    ``Delta_T = 0 (+) (gamma^2 - 1) I``: scalar on its range, so regularity
    holds for every contraction ``T0``.
    """
    t0 = _as_op(t_hat)
    if t0.norm() > 1 + TOL:
        raise NotContraction("t_hat must be a contraction", clause="t_hat contraction")
    if not gamma > 1 or not gamma > t0.norm():
        raise GammaTooSmall(f"gamma={gamma} must exceed 1 and ||t_hat||",
                            clause="gamma > max(1, ||t_hat||)")
    d = t0.dom.total_dim
    g = gamma ** 2 * np.eye(d) - la.adjoint(t0.matrix) @ t0.matrix
    t = coupled_shift(d, t0, la.herm_sqrt(g), shift_depth)
    if validate:
        w = WindowSpec(t.dom, 0)
        _check(cl.is_concave(t, w), "concave")
        _check(cl.is_delta_regular(t, w), "delta-regular")
    return t


def gen_brownian_shift(sigma: float, depth: int = 16) -> Operator:
    """``[[S_+, sigma e_0], [0, 1]]``: a regular 2-isometry with rank-one defect."""
    if depth < 4:
        raise ValueError("depth must be >= 4")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    t = coupled_shift(1, operator([[1.0]], space(("unit", 1))), [[sigma]],
                      depth)
    w = WindowSpec(t.dom, 0)
    _check(cl.is_two_isometry(t, w), "2-isometry")
    _check(cl.is_delta_regular(t, w), "delta-regular")
    return t


def gen_isometric_coupling(t_hat, sigma: float, depth: int = 16) -> Operator:
    """``[[V, sigma J], [0, T0]]`` with ``J`` an isometric embedding.

    The off-diagonal corner is a multiple of an isometry by construction;
    Delta-regularity then holds exactly when ``T0`` is quasinormal.
    """
    t0 = _as_op(t_hat)
    if t0.norm() > 1 + TOL:
        raise NotContraction("t_hat must be a contraction", clause="t_hat contraction")
    if not sigma > 1:
        raise GammaTooSmall("sigma must exceed 1", clause="sigma > 1")
    d = t0.dom.total_dim
    t = coupled_shift(d, t0, sigma * np.eye(d), depth)
    _check(cl.is_concave(t, WindowSpec(t.dom, 0)), "concave")
    return t


# ---------------------------------------------------------------------------
# weighted shifts
# ---------------------------------------------------------------------------

def dirichlet_weights(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.sqrt((k + 2) / (k + 1))


def dirichlet_squares(n: int) -> list:
    return [Fraction(k + 2, k + 1) for k in range(n)]


def gen_weighted_shift(weights: Sequence[float], depth: int) -> Operator:
    """Truncated shift ``e_n -> lambda_n e_{n+1}`` on ``depth`` levels."""
    weights = np.asarray(weights, dtype=float)
    if depth < 2 or len(weights) < depth - 1:
        raise ValueError("need depth >= 2 and at least depth - 1 weights")
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    tw = make_tower("shift", 1, depth)
    m = np.diag(weights[:depth - 1].astype(complex), -1)
    return Operator(m, tw, tw, 1)


def _squares(weights, squared: bool):
    out, exact = [], True
    for w in weights:
        if isinstance(w, Fraction) or isinstance(w, int):
            out.append(Fraction(w) if squared else Fraction(w) ** 2)
            continue
        x = float(w) if squared else float(w) ** 2
        f = Fraction(x).limit_denominator(10 ** 6)
        if abs(float(f) - x) <= 1e-14 * max(1.0, x):
            out.append(f)
        else:
            out.append(x)
            exact = False
    return out, exact


_PREDICATES = ("isometry", "expansive", "concave", "two_isometry",
               "delta_regular")


def exact_oracle(weights, predicate: str, depth: int | None = None,
                 squared: bool = False, guard: float = 1e-12) -> bool:
    """Scalar reduction of a class predicate for a weighted shift.

    Checks exactly the indices a budget-limited matrix window of a
    ``depth``-level truncation sees: ``n <= depth - 2`` for one-step
    conditions, ``n <= depth - 3`` for two-step ones.  Squared weights that
    are rationals (denominator <= 1e6) are handled in exact arithmetic;
    otherwise floats are compared with a relative ``guard``.
    """
    if predicate not in _PREDICATES:
        raise ValueError(f"unknown predicate {predicate!r}")
    q, exact = _squares(weights, squared)
    if depth is None:
        depth = len(q) + 1
    one = range(0, depth - 1)
    two = range(0, depth - 2)

    def le0(x, scale=1):
        return x <= 0 if exact else x <= guard * max(1, abs(scale))

    def eq0(x, scale=1):
        return x == 0 if exact else abs(x) <= guard * max(1, abs(scale))

    if predicate == "isometry":
        return all(eq0(q[n] - 1, q[n]) for n in one)
    if predicate == "expansive":
        return all(le0(1 - q[n], q[n]) for n in one)
    if predicate in ("concave", "two_isometry"):
        vals = [(q[n] * q[n + 1] - 2 * q[n] + 1, q[n] * q[n + 1]) for n in two]
        if predicate == "two_isometry":
            return all(eq0(v, s) for v, s in vals)
        return (all(le0(v, s) for v, s in vals)
                and all(le0(1 - q[n], q[n]) for n in one))
    # delta-regular: d = lambda^2 - 1 must be PSD and d_{n+1} in {0, d_n}
    d = [q[n] - 1 for n in one]
    if not all(le0(-x, 1 + x) for x in d):
        raise ValueError("Delta is not PSD: weights below 1")
    return all(eq0(d[n + 1], 1 + d[n]) or eq0(d[n + 1] - d[n], 1 + d[n])
               for n in two)


# ---------------------------------------------------------------------------
# 2-hypercontractions
# ---------------------------------------------------------------------------

def random_normal(rng, d: int, rmax: float = 0.9) -> np.ndarray:
    """Random normal matrix with spectrum in the disc of radius ``rmax``."""
    u = unitary_group.rvs(d, random_state=rng) if d > 1 else np.eye(1)
    lam = rmax * np.sqrt(rng.uniform(0, 1, d)) * np.exp(2j * np.pi * rng.uniform(0, 1, d))
    return u @ np.diag(lam) @ la.adjoint(u)


def two_hypercontraction_from_data(c0, d0, depth: int = 16) -> Operator:
    """``C = [[V, J (D0 - C0*C0)^{1/2}], [0, C0]]``, so ``C*C = I (+) D0``."""
    c0, d0 = la.cmatrix(c0), la.cmatrix(d0)
    gap = d0 - la.adjoint(c0) @ c0
    core = operator(c0, space(("core", c0.shape[0])))
    return coupled_shift(c0.shape[0], core, la.herm_sqrt(gap, 1e-10), depth)


def validate_two_hypercontraction(c: Operator, tol: float = TOL) -> dict:
    """Residuals of every clause of the dual-side hypothesis."""
    w = WindowSpec(c.dom, 0)
    mask1 = w.mask(cl.budget(c, 1))
    n = c.dom.total_dim
    cc = la.adjoint(c.matrix) @ c.matrix
    dc2 = np.eye(n) - cc
    sub = cc[np.ix_(mask1, mask1)]
    s_min = float(np.sqrt(max(0.0, np.linalg.eigvalsh(0.5 * (sub + la.adjoint(sub)))[0])))
    out = {
        "left_invertible": max(0.0, tol - s_min),
        "contraction": wpsd_residual(dc2, mask1),
        "two_hypercontraction": cl.hyper_profile(c, w, 2, tol, "contractive").residuals[1],
    }
    try:
        out["dc2_regular"] = cl.regularity_residual(c, dc2, mask1, tol)
    except Exception:
        out["dc2_regular"] = float("inf")
    return out


def gen_two_hypercontraction(seed: int, dim: int | None = None,
                             depth: int = 16, retries: int = 20) -> Operator:
    """Left-invertible, ``D_C^2``-regular 2-hypercontraction.

    ``C0 = U diag(c) U*`` and ``D0 = U diag(d) U*`` are simultaneously
    diagonal with ``|c| <= d < 1``, which is the compression bound that makes
    ``C`` a Cauchy dual of a regular concave operator.
    """
    rng = np.random.default_rng(seed)
    for _ in range(retries):
        d = dim or int(rng.integers(1, 4))
        u = unitary_group.rvs(d, random_state=rng) if d > 1 else np.eye(1)
        dd = rng.uniform(0.2, 0.9, d)
        cc = dd * rng.uniform(0, 0.95, d) * np.exp(2j * np.pi * rng.uniform(0, 1, d))
        c0 = u @ np.diag(cc) @ la.adjoint(u)
        d0 = u @ np.diag(dd) @ la.adjoint(u)
        c = two_hypercontraction_from_data(c0, 0.5 * (d0 + la.adjoint(d0)), depth)
        if all(v <= TOL for v in validate_two_hypercontraction(c).values()):
            return c
    raise GenerationFailed(f"no valid 2-hypercontraction after {retries} tries")
