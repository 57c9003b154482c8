import pytest
from hypothesis import given, strategies as st

from oracles import formula_value
from pch.core import Atom, CondProb, Const, Eq, Prob, Signature, Sum, Unknown, walk
from pch.errors import CapExceeded, FragmentError
from pch.parser import parse_formula
from pch.transform import eliminate_conditionals, expand_sums
from strategies import formulas, models, signatures


def test_expand_simple():
    f = parse_formula("sum x { P(A=x) } = 1")
    out = expand_sums(f)
    assert out == parse_formula("P(A=0) + P(A=1) = 1")


def test_expand_sum_free_identity():
    f = parse_formula("P(A=1) <= 1")
    assert expand_sums(f) is f


def test_expand_cap():
    t = Prob(Atom("A", "x"))
    for d in "xyzwv":
        t = Sum(d, t)
    with pytest.raises(CapExceeded):
        expand_sums(Eq(t, Const(1)), 3, max_size=50)


def test_eliminate_conditionals_shape():
    f = parse_formula("P(A=1 | B=1) = 1/2")
    out = eliminate_conditionals(f)
    assert not any(isinstance(n, CondProb) for n in walk(out))
    names = {n.name for n in walk(out) if isinstance(n, Unknown)}
    assert names == {"z1"}
    assert "P(A=1 & B=1) = ?z1 * P(B=1)" in str(out)


def test_eliminate_under_sum_rejected():
    f = Eq(Sum("x", CondProb(Atom("A", "x"), Atom("B", 1))), Const(1))
    with pytest.raises(FragmentError):
        eliminate_conditionals(f)


def test_repeated_conditionals_numbered():
    f = parse_formula("P(A=1 | B=1) = P(A=1 | B=1)")
    names = sorted(n.name for n in walk(eliminate_conditionals(f)) if isinstance(n, Unknown))
    assert set(names) == {"z1", "z2"}


@given(st.data())
def test_expansion_preserves_value(data):
    sig = data.draw(signatures(max_vars=3, domains=(2, 3)))
    f = data.draw(formulas(sig, layer=data.draw(st.sampled_from([1, 2, 3])), terms_class="poly"))
    out = expand_sums(f, sig.domain_size)
    assert not any(isinstance(n, Sum) for n in walk(out))
    scm = data.draw(models(sig))
    assert formula_value(scm, out) == formula_value(scm, f)


@given(st.data())
def test_elimination_preserves_truth(data):
    """With each unknown set to its conditional's value the rewrite agrees where defined."""
    sig = data.draw(signatures(max_vars=2))
    f = data.draw(formulas(sig, layer=1, sigma=False, conditionals=True))
    scm = data.draw(models(sig))
    out = eliminate_conditionals(f)
    conds = [n for n in walk(f) if isinstance(n, CondProb)]
    before = formula_value(scm, f)
    from oracles import term_value

    vals = {f"z{i + 1}": term_value(scm, c) for i, c in enumerate(conds)}
    if any(v is None for v in vals.values()):
        # some condition has probability zero: the side constraints fail
        assert formula_value(scm, out, {k: v or 0 for k, v in vals.items()}) is False
        return
    assert formula_value(scm, out, vals) == before


def test_signature_unchanged():
    sig = Signature(2, ("A", "B"))
    f = parse_formula("sum x { P(A=x & B=x) } = 1/2", sig)
    assert expand_sums(f).__class__ is Eq
