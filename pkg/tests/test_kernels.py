import itertools
import random

import pytest
from hypothesis import given, strategies as st

from oracles import count_by_enumeration, event_holds, world_values
from pch import _kernels_py, kernels
from pch.core import And, Atom, Not, Or, PostInt, Signature, Top
from pch.random_models import random_scm
from pch.solve import count_satisfying
from strategies import prop_events, signatures

try:
    from pch import _kernels as _compiled
except ImportError:  # pragma: no cover
    _compiled = None

BACKENDS = [_kernels_py] + ([_compiled] if _compiled else [])


def _holds(event, sig, x, dummies, y):
    env = dict(zip(dummies, y))
    vals = dict(zip(sig.endogenous_vars, x))

    def go(e):
        if isinstance(e, Top):
            return True
        if isinstance(e, Atom):
            v = env[e.value] if isinstance(e.value, str) else e.value
            return vals[e.var] == v
        if isinstance(e, Not):
            return not go(e.arg)
        if isinstance(e, And):
            return go(e.left) and go(e.right)
        if isinstance(e, Or):
            return go(e.left) or go(e.right)
        raise TypeError(e)

    return go(event)


def test_compiled_backend_present():
    assert _compiled is not None
    assert kernels.BACKEND in ("cython", "python")


def test_compile_rejects_interventions():
    e = PostInt((("A", 1),), Atom("A", 1))
    with pytest.raises(TypeError):
        kernels.compile_event(e, {"A": 0}, {})


def test_bytecode_shape():
    code = kernels.compile_event(Atom("A", "x"), {"A": 0}, {"x": 0})
    assert code == [kernels.ATOM_DUMMY, 0, 0]


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.__name__.rsplit(".", 1)[-1])
@given(data=st.data())
def test_count_table_matches_enumeration(backend, data):
    sig = data.draw(signatures(max_vars=3, domains=(2, 3)))
    k = data.draw(st.integers(0, 3))
    dummies = ("x", "y", "z")[:k]
    ev = data.draw(prop_events(sig, dummies, depth=3))
    code = kernels.compile_event(
        ev, {v: i for i, v in enumerate(sig.endogenous_vars)}, {d: i for i, d in enumerate(dummies)}
    )
    c, n = sig.domain_size, len(sig.endogenous_vars)
    table = backend.count_table(code, n, k, c)
    xs = list(itertools.product(range(c), repeat=n))
    assert len(table) == len(xs)
    for x, got in zip(xs, table):
        want = count_by_enumeration(lambda y: _holds(ev, sig, x, dummies, y), k, c)
        assert got == want
        assert backend.count_models(code, list(x), k, c) == want


@given(data=st.data())
def test_backends_agree_with_wrapper(data):
    sig = data.draw(signatures(max_vars=3))
    dummies = ("x", "y")
    ev = data.draw(prop_events(sig, dummies, depth=3))
    x = data.draw(st.tuples(*[st.integers(0, 1)] * len(sig.endogenous_vars)))
    fixed = dict(zip(sig.endogenous_vars, x))
    want = count_by_enumeration(lambda y: _holds(ev, sig, x, dummies, y), 2, 2)
    assert count_satisfying(ev, fixed, dummies) == want


def test_oracle_event_holds_agrees_on_worlds():

    sig = Signature(2, ("A", "B"))
    scm = random_scm(sig, random.Random(3))
    ev = Atom("A", "x")
    for u, _ in scm.exo_dist:
        w = world_values(scm, u)
        x = (w["A"], w["B"])
        for y in range(2):
            assert event_holds(scm, u, ev, {"x": y}) == _holds(ev, sig, x, ("x",), (y,))
