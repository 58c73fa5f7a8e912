import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from concavelift import classify as cl
from concavelift import construct as cs
from concavelift import generate as gen
from concavelift import linalg as la
from concavelift.errors import (InvalidMajorant, IsIsometric,
                                NotConcave, NotContraction, NotLeftInvertible,
                                NotRegular, PreconditionFailed,
                                WindowTooDeep)
from concavelift.operators import BlockLayout, Operator, assemble, operator
from concavelift.spaces import WindowSpec, forward_shift, make_tower, space

from conftest import positive_instance

TOL = 1e-8


def test_lift_basic_scalar_family(positive):
    res = cs.lift_basic(positive, depth=8)
    assert res.construction_tag == "lift_basic" and not res.trivial
    for key in ("two_isometry", "lifting", "wx", "covariance"):
        assert res.residuals[key] <= TOL, (key, res.residuals)
    assert res.covariance == pytest.approx(res.witness["expected_covariance"], rel=1e-8)
    assert res.J.cod == res.S.dom


def test_lift_basic_trivial_cases(brownian):
    s = forward_shift(make_tower("V", 1, 6))
    assert cs.lift_basic(s).construction_tag == "lift_basic:isometry:trivial"
    r = cs.lift_basic(brownian)
    assert r.trivial and r.S is brownian
    assert r.construction_tag == "lift_basic:two_isometry:trivial"


def test_lift_basic_rejects():
    with pytest.raises(NotConcave):
        cs.lift_basic(operator(0.5 * np.eye(2), space(("H", 2))))
    with pytest.raises(WindowTooDeep):
        cs.lift_basic(positive_instance(2), depth=3)


def test_lift_regular_scalar_family(positive):
    res = cs.lift_regular(positive, depth=8)
    for key in ("two_isometry", "lifting", "idempotency", "SSH_in_H",
                "kernel_inclusion"):
        assert res.residuals[key] <= TOL, (key, res.residuals)


def test_lift_regular_rejects_dirichlet():
    t = gen.gen_weighted_shift(gen.dirichlet_weights(20), 16)
    with pytest.raises(NotRegular) as exc:
        cs.lift_regular(t)
    assert exc.value.clause == "Delta_T-regular"


def test_lift_regular_unchecked_on_nonregular():
    t = gen.gen_isometric_coupling(np.array([[0, 0.5], [0, 0]]), 1.5, 12)
    res = cs.lift_regular(t, check=False)
    assert res.residuals["lifting"] <= TOL


def test_lift_minimal_brownian(brownian):
    a = cs.two_isometry_majorant(brownian)
    res = cs.lift_minimal(brownian, a)
    assert res.trivial


def test_lift_minimal_nontrivial_majorant():
    # Brownian shift (+) isometric shift; A adds c I on the isometric part
    b = gen.gen_brownian_shift(1.5, 10)
    iso = forward_shift(make_tower("W", 1, 10))
    lay = BlockLayout([b.dom, iso.dom], [b.dom, iso.dom])
    lay[0, 0], lay[1, 1] = b, iso
    t = assemble(lay)
    a = cl.delta(t).matrix.copy()
    a[11:, 11:] += 2.0 * np.eye(10)
    res = cs.lift_minimal(t, a, depth=8)
    assert not res.trivial
    for key in ("two_isometry", "lifting", "delta_form", "invariance"):
        assert res.residuals[key] <= TOL, (key, res.residuals)
    assert res.covariance == pytest.approx(1.5)


def test_lift_minimal_rejects_bad_majorant(positive):
    with pytest.raises(InvalidMajorant):
        cs.lift_minimal(positive, np.zeros_like(positive.matrix))
    with pytest.raises(InvalidMajorant):
        cs.two_isometry_majorant(positive)


def test_minimality_witness_shift():
    tw = make_tower("V", 1, 5)
    s = forward_shift(tw)
    j = Operator(np.eye(5)[:, :1], space(("x", 1)), tw, 0)
    w = cs.minimality_witness(s, j)
    assert w["minimal"] and w["minimality_rank"] == 5


def test_canonical_blocks_reassemble(positive):
    cb = cs.canonical_blocks(positive)
    mask = WindowSpec(positive.dom).mask(1)
    diff = (cb.reassemble() - positive.matrix)[np.ix_(mask, mask)]
    assert la.op_norm(diff) < 1e-10
    for key in ("V_isometry", "VZ", "lower_left", "commutation", "delta0"):
        assert cb.residuals[key] <= TOL, key
    assert cb.sigma ** 2 == pytest.approx(cl.covariance(positive) ** 2 + 1)


def test_canonical_blocks_rejects_isometry():
    s = forward_shift(make_tower("V", 1, 6))
    with pytest.raises(IsIsometric):
        cs.canonical_blocks(s)


def test_schaffer_lift_is_isometric_lift():
    c = operator(np.array([[0.3, 0.2], [0, 0.5]]), space(("H", 2)))
    v = cs.schaffer_lift(c, depth=6)
    w = WindowSpec(v.dom)
    assert cl.isometry_residual(v, w) < 1e-10
    assert np.allclose(v.matrix[:2, :2], c.matrix)
    with pytest.raises(NotContraction):
        cs.schaffer_lift(operator(2 * np.eye(1)))


def test_cauchy_dual_shift_and_errors(brownian):
    s = forward_shift(make_tower("V", 1, 6))
    assert np.allclose(cs.cauchy_dual(s).matrix[:, :5], s.matrix[:, :5])
    with pytest.raises(NotLeftInvertible):
        cs.cauchy_dual(operator(np.diag([1.0, 0.0])))
    tp = cs.cauchy_dual(brownian)
    assert cl.expansive_residual(brownian) == 0.0
    mask = WindowSpec(brownian.dom).mask(1)
    assert cl.wpsd_residual(cs.defect_sq(tp), mask) <= 1e-12


def test_cauchy_dual_involution_dense(rng):
    m = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    t = operator(m)
    tpp = cs.cauchy_dual(cs.cauchy_dual(t))
    assert la.op_norm(tpp.matrix - m) <= 1e-10 * max(1, la.op_norm(m))


@pytest.mark.parametrize("make", [lambda: positive_instance(5),
                                  lambda: gen.gen_brownian_shift(2.0, 12)])
def test_dual_blocks(make):
    t = make()
    db = cs.dual_blocks(t, samples=50)
    assert not db.degenerate
    for k, v in db.residuals.items():
        assert v <= 1e-7, (k, db.residuals)


def test_dual_blocks_degenerate_for_isometry():
    s = forward_shift(make_tower("V", 1, 6))
    assert cs.dual_blocks(s).degenerate


def test_inverse_dual_roundtrip():
    c = gen.gen_two_hypercontraction(4, depth=10)
    t = cs.inverse_dual(c)
    assert cl.is_concave(t) and cl.is_delta_regular(t)
    back = cs.cauchy_dual(t)
    mask = WindowSpec(c.dom).mask(1)
    assert la.op_norm((back.matrix - c.matrix)[:, mask]) < 1e-10


def test_inverse_dual_rejects_non_contraction():
    t = gen.gen_brownian_shift(2.0, 10)
    with pytest.raises(PreconditionFailed) as exc:
        cs.inverse_dual(t)
    assert exc.value.clause in ("contraction", "2-hypercontraction")


def test_brownian_form_of_brownian_shift():
    sigma, depth = 1.7, 8
    t = gen.gen_brownian_shift(sigma, depth)
    tw = make_tower("V", 1, depth)
    unit = space(("u", 1))
    c = forward_shift(tw)
    e = Operator(np.eye(depth)[:, :1], unit, tw, 0)
    u = operator([[1.0]], unit)
    jc = np.zeros((depth, depth))
    jc[0, -1] = 1.0
    bf = cs.BrownianForm(c, e, u, sigma, jc, np.zeros((depth, 1)), np.eye(depth + 1))
    v = cs.verify_brownian_form(bf, t)
    assert v.holds, v.verdicts()
    assert np.allclose(cs.brownian_form_matrix(bf).matrix, t.matrix)


def test_lifting_result_serializes(positive):
    d = cs.lift_basic(positive, depth=6).to_dict()
    assert d["construction_tag"] == "lift_basic"
    assert "S" in d and "residuals" in d


def test_negative_family_lifts(negative):
    assert cs.lift_basic(negative, depth=8).residuals["lifting"] <= TOL
    assert cs.lift_regular(negative, depth=8).residuals["idempotency"] <= TOL




@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 10**6), scale=st.floats(0.1, 10.0))
def test_cauchy_dual_involution_property(n, seed, scale):
    rng = np.random.default_rng(seed)
    m = scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    s = np.linalg.svd(m, compute_uv=False)
    if s[-1] < 1e-3 * s[0]:
        return
    t = operator(m)
    tp = cs.cauchy_dual(t)
    # T'*T = I and the dual map is an involution
    assert la.op_norm(la.adjoint(tp.matrix) @ m - np.eye(n)) <= 1e-8 * s[0] / s[-1]
    back = cs.cauchy_dual(tp).matrix
    assert la.op_norm(back - m) <= 1e-10 * max(1.0, s[0]) * (s[0] / s[-1])
