from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from pch.errors import CapExceeded
from pch.linear import Constraint, LinearSystem, negate_constraint, solve_linear_feasibility

F = Fraction


def system(*cs, variables=()):
    return LinearSystem(tuple(variables), tuple(Constraint(*c) for c in cs))


def check(sys_, point):
    assert point is not None
    assert all(c.holds(point) for c in sys_.constraints)


def test_simplex_point():
    s = system(({"p0": 1, "p1": 1}, "=", 1), ({"p0": -1}, "<=", 0), ({"p1": -1}, "<=", 0), ({"p1": 2}, "<=", 1))
    check(s, solve_linear_feasibility(s))


def test_needs_nonnegativity():
    # p0 + p1 = 1, p1 > 1 is feasible over the reals, infeasible over the simplex
    free = system(({"p0": 1, "p1": 1}, "=", 1), ({"p1": -1}, "<", -1))
    check(free, solve_linear_feasibility(free))
    boxed = system(
        ({"p0": 1, "p1": 1}, "=", 1), ({"p1": -1}, "<", -1), ({"p0": -1}, "<=", 0), ({"p1": -1}, "<=", 0)
    )
    assert solve_linear_feasibility(boxed) is None


def test_strictness_matters():
    weak = system(({"x": 1}, "<=", 0), ({"x": -1}, "<=", 0))
    assert solve_linear_feasibility(weak) == {"x": 0}
    strict = system(({"x": 1}, "<", 0), ({"x": -1}, "<=", 0))
    assert solve_linear_feasibility(strict) is None


def test_inconsistent_equalities():
    s = system(({"x": 1, "y": 1}, "=", 1), ({"x": 2, "y": 2}, "=", 3))
    assert solve_linear_feasibility(s) is None


def test_constant_rows():
    assert solve_linear_feasibility(system(({}, "<", 0))) is None
    assert solve_linear_feasibility(system(({}, "<=", 0), variables=("x",))) is not None


def test_unknown_relation():
    with pytest.raises(ValueError):
        Constraint({"x": 1}, ">", 0)


def test_cap():
    # many pairwise bounds blow up elimination
    cs = []
    names = [f"v{i}" for i in range(8)]
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            cs.append(({a: 1, b: -1}, "<=", i))
            cs.append(({a: -1, b: 1, names[0]: 1}, "<=", i + 1))
    with pytest.raises(CapExceeded):
        solve_linear_feasibility(system(*cs), max_constraints=10)


def test_negation_is_complement():
    c = Constraint({"x": 1, "y": -2}, "=", F(1, 3))
    alts = negate_constraint(c)
    for pt in ({"x": F(1, 3), "y": 0}, {"x": 1, "y": 0}, {"x": 0, "y": 0}):
        assert c.holds(pt) != any(a.holds(pt) for a in alts)


coef = st.fractions(min_value=-3, max_value=3, max_denominator=3)


@given(st.data())
def test_constructed_feasible_systems(data):
    n = data.draw(st.integers(1, 4))
    names = [f"v{i}" for i in range(n)]
    point = {v: data.draw(coef) for v in names}
    cs = []
    for _ in range(data.draw(st.integers(1, 7))):
        a = {v: data.draw(coef) for v in names}
        lhs = sum(a[v] * point[v] for v in names)
        rel = data.draw(st.sampled_from(["<=", "<", "="]))
        slack = data.draw(st.fractions(min_value=F(1, 5), max_value=2, max_denominator=5))
        rhs = lhs if rel == "=" else lhs + (slack if rel == "<" else data.draw(st.sampled_from([0, slack])))
        cs.append((a, rel, rhs))
    s = system(*cs, variables=names)
    check(s, solve_linear_feasibility(s))


@given(st.data())
def test_infeasibility_has_certificate(data):
    # x <= a and x >= b with b > a, embedded among random noise rows
    a = data.draw(coef)
    b = a + data.draw(st.fractions(min_value=F(1, 5), max_value=2, max_denominator=5))
    noise = [({"x": data.draw(coef), "y": data.draw(coef)}, "<=", 5) for _ in range(data.draw(st.integers(0, 4)))]
    s = system(({"x": 1}, "<=", a), ({"x": -1}, "<=", -b), *noise)
    assert solve_linear_feasibility(s) is None
