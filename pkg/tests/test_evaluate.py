from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from oracles import formula_value, term_value, world_values
from pch.core import Atom, PostInt, Prob, Signature, Sum, Top
from pch.errors import FragmentError, ValidationError
from pch.evaluate import (
    apply_intervention,
    determine_values,
    eval_formula,
    eval_l2_sums_by_interventions,
    eval_term,
    joint_distribution,
    linearize,
    satisfies,
)
from pch.parser import load_model, parse_formula
from strategies import formulas, models, signatures, terms

F = Fraction


@pytest.fixture(scope="module")
def appb():
    from conftest import FIXTURES

    return load_model(FIXTURES / "appb.scm")


def val(scm, text):
    return eval_term(scm, parse_formula(f"{text} = 0", scm.signature).left)


class TestWorkedExample:
    def test_worlds(self, appb):
        assert determine_values(appb, (1, 1, 0)) == (0, 1, 0)
        assert determine_values(appb, (0, 0, 1)) == (1, 0, 1)

    def test_post_intervention_table(self, appb):
        sub = apply_intervention(appb, [("X", 1)])
        dist = joint_distribution(sub)
        zy = {}
        for (z, x, y), w in dist.items():
            assert x == 1
            zy[(z, y)] = zy.get((z, y), 0) + w
        assert zy == {(0, 0): F(45, 100), (0, 1): F(30, 100), (1, 0): F(10, 100), (1, 1): F(15, 100)}
        assert joint_distribution(appb, [("X", 1)]) == dist

    def test_satisfies(self, appb):
        e = PostInt((("X", 1),), Atom("Y", 1))
        assert satisfies(appb, (0, 0, 0), e)
        assert satisfies(appb, (0, 0, 0), parse_formula("P(X=0 & Y=0) = 0").left.event)

    def test_conditionals(self, appb):
        assert val(appb, "P(Y=1 | X=1)") == F(2, 5)
        assert val(appb, "P([X=1] Y=1 & (X=0 & Y=0))") == F(3, 20)
        assert val(appb, "P([X=1] Y=1 | X=0 & Y=0)") == F(5, 8)

    def test_interventional(self, appb):
        f = parse_formula("P([X=1] Y=1) > P([X=0] Y=1)")
        assert eval_formula(appb, f) is True
        assert val(appb, "sum x { P([X=x] Y=1) }") == F(17, 20)

    def test_sum_intervention_path(self, appb):
        f = parse_formula("sum x { P([X=x] Y=1) } = 17/20")
        (s,) = eval_l2_sums_by_interventions(appb, f).values()
        assert s == F(17, 20)


class TestThreeValued:
    def test_undefined_conditional(self, appb):
        f = parse_formula("P(Y=1 | Z=1 & X=1) = 0", appb.signature)
        assert eval_formula(appb, f) is None

    def test_false_dominates_undefined(self, appb):
        f = parse_formula("P(Y=1 | Z=1 & X=1) = 0 && P(T) = 0", appb.signature)
        assert eval_formula(appb, f) is False

    def test_true_dominates_undefined(self, appb):
        f = parse_formula("P(Y=1 | Z=1 & X=1) = 0 || P(T) = 1", appb.signature)
        assert eval_formula(appb, f) is True

    def test_negation_keeps_undefined(self, appb):
        f = parse_formula("~P(Y=1 | Z=1 & X=1) = 0", appb.signature)
        assert eval_formula(appb, f) is None

    def test_unknown_value_required(self, appb):
        f = parse_formula("?z <= 1", appb.signature)
        with pytest.raises(ValidationError):
            eval_formula(appb, f)
        assert eval_formula(appb, f, {"z": F(1, 2)}) is True


def test_sec3_pair(fixtures):
    m = load_model(fixtures / "sec3-m.scm")
    mp = load_model(fixtures / "sec3-mprime.scm")
    assert joint_distribution(m) == joint_distribution(mp)
    t = parse_formula("P([X1=1] X2=1) = 0", m.signature).left
    assert eval_term(m, t) == F(1, 2)
    assert eval_term(mp, t) == F(3, 4)
    phi = parse_formula("P([X1=1] X2=1) = P([X1=1] X2=0)", m.signature)
    assert eval_formula(m, phi) is True
    assert eval_formula(mp, phi) is False


class TestLinearize:
    def test_renames_binders(self):
        t = Sum("x", Sum("x", Prob(Atom("A", "x"))))
        ((coef, dummies, event),) = linearize(t)
        assert coef == 1 and len(dummies) == 2
        assert event == Atom("A", dummies[1])

    def test_rejects_products(self):
        t = parse_formula("P(A=1) * P(A=0) = 0").left
        with pytest.raises(FragmentError):
            linearize(t)

    def test_layer3_rejected_by_intervention_path(self):
        f = parse_formula("sum x { P([A=x] B=1 & [A=0] B=0) } = 0")
        with pytest.raises(FragmentError):
            eval_l2_sums_by_interventions(_model_ab(), f)


def _model_ab():
    import random

    from pch.random_models import random_scm

    return random_scm(Signature(2, ("A", "B")), random.Random(1))


@given(st.data())
def test_terms_match_oracle(data):
    sig = data.draw(signatures(max_vars=3, domains=(2, 3)))
    scm = data.draw(models(sig))
    layer = data.draw(st.sampled_from([1, 2, 3]))
    t = data.draw(terms(sig, layer=layer, terms_class="poly", conditionals=layer == 1))
    assert eval_term(scm, t) == term_value(scm, t)


@given(st.data())
def test_formulas_match_oracle(data):
    sig = data.draw(signatures(max_vars=3))
    scm = data.draw(models(sig))
    f = data.draw(formulas(sig, layer=data.draw(st.sampled_from([1, 2, 3])), conditionals=True))
    assert eval_formula(scm, f) == formula_value(scm, f)


@given(st.data())
def test_intervened_worlds_match_oracle(data):
    sig = data.draw(signatures(max_vars=4))
    scm = data.draw(models(sig))
    alpha = data.draw(st.dictionaries(st.sampled_from(sig.endogenous_vars), st.integers(0, 1)))
    for u, _ in scm.exo_dist:
        x = world_values(scm, u, alpha)
        e = PostInt(tuple(alpha.items()), Top()) if alpha else Top()
        for v in sig.endogenous_vars:
            body = Atom(v, x[v])
            ev = PostInt(tuple(alpha.items()), body) if alpha else body
            assert satisfies(scm, u, ev)
        assert satisfies(scm, u, e)


@given(st.data())
def test_algorithm1_path_agrees(data):
    sig = data.draw(signatures(max_vars=3))
    scm = data.draw(models(sig))
    f = data.draw(formulas(sig, layer=2, terms_class="lin"))
    got = eval_l2_sums_by_interventions(scm, f)
    for s, v in got.items():
        assert v == term_value(scm, s)
