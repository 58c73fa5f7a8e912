import json

import numpy as np
import pytest

from concavelift import classify as cl
from concavelift import construct as cs
from concavelift import generate as gen
from concavelift import verify as vf
from concavelift.errors import (HypothesisNotMet, IsIsometric, NotConcave,
                                NotRegular, PreconditionFailed)
from concavelift.operators import operator
from concavelift.spaces import forward_shift, make_tower, space

from conftest import NILPOTENT, negative_instance, positive_instance

CHECKS = [vf.check_thm23, vf.check_thm31, vf.check_thm41, vf.check_thm46]


def test_verdict_agreement_logic():
    v = vf.TheoremVerdict.build("x", [("a", 0.0), ("b", True, 1.0)], 1e-8)
    assert v.agreement and v.holds
    v = vf.TheoremVerdict.build("x", [("a", 0.0), ("b", 1.0)], 1e-8)
    assert not v.agreement and not v.holds
    assert v.clause("b").residual == 1.0
    with pytest.raises(KeyError):
        v.clause("c")


def test_verdict_json_has_no_infinities():
    v = vf.TheoremVerdict.build("x", [("a", float("inf"))], 1e-8,
                                diagnostics={"k": np.float64(np.inf), 2: np.int64(3)})
    d = json.loads(json.dumps(v.to_dict()))
    assert d["clauses"][0]["residual"] is None
    assert d["diagnostics"] == {"k": None, "2": 3}


@pytest.mark.parametrize("check", CHECKS)
def test_positive_family_all_true(check, positive):
    v = check(positive)
    assert v.agreement and v.holds, v.verdicts()


@pytest.mark.parametrize("check", [vf.check_thm41, vf.check_thm46])
def test_nilpotent_family_all_false(check, negative):
    v = check(negative)
    assert v.agreement and not any(v.verdicts().values()), v.verdicts()


@pytest.mark.parametrize("check", [vf.check_thm23, vf.check_thm31])
def test_nilpotent_family_still_regular(check, negative):
    # scalar Delta keeps the operator regular, so these hold outright
    v = check(negative)
    assert v.agreement and v.holds


@pytest.mark.parametrize("check", CHECKS)
def test_brownian_all_true(check, brownian):
    assert check(brownian).holds


def test_gates_name_clauses():
    dirichlet = gen.gen_weighted_shift(gen.dirichlet_weights(20), 16)
    with pytest.raises(NotRegular) as exc:
        vf.check_thm31(dirichlet)
    assert exc.value.clause == "Delta_T-regular"
    with pytest.raises(NotConcave):
        vf.check_thm23(operator(0.5 * np.eye(2), space(("H", 2))))
    with pytest.raises(IsIsometric):
        vf.check_thm23(forward_shift(make_tower("V", 1, 6)))


def test_thm23_lifting_clause_on_nonregular_operator():
    # [[V, sigma J], [0, N]] with N nilpotent is concave but not regular; the
    # lifting built from the canonical blocks still has a projection defect,
    # S*S H in H and N(Delta_T) in N(Delta_S), so the lifting clause alone
    # does not force regularity
    t = gen.gen_isometric_coupling(NILPOTENT, 1.5, 12)
    v = vf.check_thm23(t).verdicts()
    assert list(v.values()) == [False, False, True]


def test_thm46_requires_hyperexpansive():
    t = gen.gen_isometric_coupling(gen.random_normal(np.random.default_rng(0), 2), 1.5, 12)
    # regular, and hyperexpansive because the compression is a normal contraction
    assert vf.check_thm46(t).agreement
    with pytest.raises(PreconditionFailed):
        vf.check_thm46(gen.gen_weighted_shift(gen.dirichlet_weights(20), 16))


@pytest.mark.parametrize("m", [2, 3, 4])
def test_prop33_agrees(m, positive, negative):
    assert vf.check_prop33(positive, m).agreement
    assert vf.check_prop33(negative, m).agreement
    with pytest.raises(ValueError):
        vf.check_prop33(positive, 1)


def test_thm34_positive_family_agrees(positive):
    v = vf.check_thm34(positive, M=6)
    assert v.agreement and v.holds


def test_thm34_nilpotent_pairs_at_order_8():
    # at order 8 the dual-side clauses still pass and the operator-side ones
    # fail; the cross-link only closes once the dual fails too
    v = vf.check_thm34(negative_instance(16), M=8).verdicts()
    vals = list(v.values())
    assert vals[0] == vals[2]
    assert vals[1] == vals[3]
    assert vals == [False, True, False, True]


@pytest.mark.parametrize("M", [9, 12])
def test_thm34_nilpotent_all_false_at_higher_order(M):
    v = vf.check_thm34(negative_instance(16), M=M)
    assert v.agreement and not v.holds


def test_thm34_dual_pairs_with_its_compression():
    # T' and its compression T'_0 fail one order apart, like T and T_hat
    t = negative_instance(16)
    tp = cs.cauchy_dual(t)
    assert cl.hyper_profile(tp, M=9, kind="contractive").upto(9)
    assert not cl.hyper_profile(tp, M=10, kind="contractive").upto(10)
    v = vf.check_thm34(t, M=9).verdicts()
    assert list(v.values())[1] is False and list(v.values())[3] is False


def test_thm34_verdicts_monotone_in_order():
    t = negative_instance(16)
    seen = [vf.check_thm34(t, M=m).verdicts() for m in (2, 5, 8, 12)]
    for a, b in zip(seen, seen[1:]):
        for va, vb in zip(a.values(), b.values()):
            assert va or not vb


def test_cor44b():
    rng = np.random.default_rng(2)
    ok = gen.gen_isometric_coupling(gen.random_normal(rng, 2), 1.5, 12)
    assert vf.check_cor44b(ok).holds
    bad = gen.gen_isometric_coupling(NILPOTENT, 1.5, 12)
    v = vf.check_cor44b(bad)
    assert v.agreement and not v.holds
    assert "literal_isometry_residual" in v.diagnostics
    with pytest.raises(HypothesisNotMet):
        vf.check_cor44b(gen.gen_regular_concave_scalar(NILPOTENT, 1.2, 12))


def test_thm41_diagnostics(positive):
    v = vf.check_thm41(positive)
    fa = v.diagnostics["first_assertion"]
    assert fa["holds"]
    assert max(fa["kernel"].values()) <= 1e-7
    formula = v.diagnostics["dual_defect_formula"]
    assert formula["derived"] < 1e-8
    assert formula["stated"] > 1e-3


def test_dual_defect_block_formula_on_negative_family(negative):
    formula = vf.check_thm41(negative).diagnostics["dual_defect_formula"]
    assert formula["derived"] < 1e-8


def test_thm46_reports_both_bracket_readings(positive):
    d = vf.check_thm46(positive).diagnostics
    assert set(d["a2_block_identity"]) == {"C*C_reading", "C*_reading"}
    assert max(d["kernel_A2_An"].values()) <= 1e-7


def test_theorem_registry():
    assert set(vf.THEOREMS) == {"2.3", "3.1", "3.3", "3.4", "4.1", "4.4b", "4.6"}


@pytest.mark.parametrize("seed", range(4))
def test_positive_family_random_seeds(seed):
    t = positive_instance(100 + seed, 16)
    for check in CHECKS:
        assert check(t).agreement
