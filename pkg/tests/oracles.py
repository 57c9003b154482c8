"""Brute-force reference implementations used as test oracles.

Nothing here calls pch.evaluate or pch.solve; the SCM semantics are
re-derived directly from the mechanism tables.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

from pch.core import (
    Add,
    And,
    Atom,
    CondProb,
    Const,
    Eq,
    FAnd,
    FNot,
    FOr,
    Implies,
    Le,
    Lt,
    Mul,
    Neg,
    Not,
    Or,
    PostInt,
    Prob,
    Sum,
    Top,
)

# -- SCM semantics --------------------------------------------------------------


def world_values(scm, u, alpha=None):
    """Endogenous values for exogenous assignment ``u`` under intervention ``alpha``."""
    alpha = alpha or {}
    exo = dict(zip([n for n, _ in scm.exo_vars], u))
    vals = {}
    for v in scm.signature.endogenous_vars:
        if v in alpha:
            vals[v] = alpha[v]
            continue
        m = scm.mechanisms[v]
        key = tuple(vals[p] for p in m.endo_parents) + tuple(exo[p] for p in m.exo_parents)
        vals[v] = m.table[key]
    return vals


def _val(x, env):
    return env[x] if isinstance(x, str) else x


def event_holds(scm, u, e, env=None, alpha=None) -> bool:
    env = env or {}
    if isinstance(e, Top):
        return True
    if isinstance(e, Atom):
        return world_values(scm, u, alpha)[e.var] == _val(e.value, env)
    if isinstance(e, Not):
        return not event_holds(scm, u, e.arg, env, alpha)
    if isinstance(e, And):
        return event_holds(scm, u, e.left, env, alpha) and event_holds(scm, u, e.right, env, alpha)
    if isinstance(e, Or):
        return event_holds(scm, u, e.left, env, alpha) or event_holds(scm, u, e.right, env, alpha)
    if isinstance(e, PostInt):
        a = {v: _val(x, env) for v, x in e.intervention}
        return event_holds(scm, u, e.body, env, a)
    raise TypeError(e)


def prob(scm, e, env=None) -> Fraction:
    return sum((w for u, w in scm.exo_dist if event_holds(scm, u, e, env)), Fraction(0))


def term_value(scm, t, env=None, unknowns=None):
    """Exact value of a term, or None when a conditional is undefined."""
    env = env or {}
    if isinstance(t, Prob):
        return prob(scm, t.event, env)
    if isinstance(t, CondProb):
        den = prob(scm, t.condition, env)
        if den == 0:
            return None
        return prob(scm, And(t.event, t.condition), env) / den
    if isinstance(t, Const):
        return Fraction(t.value)
    if isinstance(t, Sum):
        total = Fraction(0)
        for v in range(scm.signature.domain_size):
            part = term_value(scm, t.body, {**env, t.dummy: v}, unknowns)
            if part is None:
                return None
            total += part
        return total
    if isinstance(t, (Add, Mul)):
        a = term_value(scm, t.left, env, unknowns)
        b = term_value(scm, t.right, env, unknowns)
        if a is None or b is None:
            return None
        return a + b if isinstance(t, Add) else a * b
    if isinstance(t, Neg):
        a = term_value(scm, t.arg, env, unknowns)
        return None if a is None else -a
    if type(t).__name__ == "Unknown":
        return Fraction(unknowns[t.name])
    raise TypeError(t)


def formula_value(scm, f, unknowns=None):
    """Strong Kleene three-valued truth."""
    if isinstance(f, (Le, Lt, Eq)):
        a, b = term_value(scm, f.left, unknowns=unknowns), term_value(scm, f.right, unknowns=unknowns)
        if a is None or b is None:
            return None
        return a <= b if isinstance(f, Le) else a < b if isinstance(f, Lt) else a == b
    if isinstance(f, FNot):
        v = formula_value(scm, f.arg, unknowns)
        return None if v is None else not v
    if isinstance(f, (FAnd, FOr, Implies)):
        a = formula_value(scm, f.left, unknowns)
        b = formula_value(scm, f.right, unknowns)
        if isinstance(f, Implies):
            a = None if a is None else not a
        if isinstance(f, FAnd):
            if a is False or b is False:
                return False
            return None if a is None or b is None else True
        if a is True or b is True:
            return True
        return None if a is None or b is None else False
    raise TypeError(f)


# -- source problems ----------------------------------------------------------------


def _lit(l, env):
    return env[abs(l)] if l > 0 else not env[abs(l)]


def cnf_true(clauses, env) -> bool:
    return all(any(_lit(l, env) for l in cl) for cl in clauses)


def sat_truth(n, clauses) -> bool:
    return any(
        cnf_true(clauses, dict(zip(range(1, n + 1), bits)))
        for bits in itertools.product((False, True), repeat=n)
    )


def qbf_truth(prefix, clauses, env=None) -> bool:
    """``prefix`` is a list of ("e"|"a", int var)."""
    env = env or {}
    if not prefix:
        return cnf_true(clauses, env)
    (q, v), rest = prefix[0], prefix[1:]
    results = (qbf_truth(rest, clauses, {**env, v: b}) for b in (False, True))
    return any(results) if q == "e" else all(results)


def emajsat_truth(xs, ys, phi) -> bool:
    """``phi(env) -> bool``; exists x with at least half the y-assignments satisfying phi."""
    for xb in itertools.product((False, True), repeat=len(xs)):
        count = sum(
            phi({**dict(zip(xs, xb)), **dict(zip(ys, yb))})
            for yb in itertools.product((False, True), repeat=len(ys))
        )
        if 2 * count >= 2 ** len(ys):
            return True
    return False


def epr_truth(exists_vars, forall_vars, relations, matrix) -> bool:
    """Truth over the universe {0, 1}; ``matrix(env, interp) -> bool``."""
    keys = {r: list(itertools.product((0, 1), repeat=k)) for r, k in relations.items()}
    names = list(relations)
    tables = [list(itertools.product((0, 1), repeat=len(keys[r]))) for r in names]
    for choice in itertools.product(*tables):
        interp = {r: dict(zip(keys[r], t)) for r, t in zip(names, choice)}
        for xs in itertools.product((0, 1), repeat=len(exists_vars)):
            env = dict(zip(exists_vars, xs))
            if all(
                matrix({**env, **dict(zip(forall_vars, ys))}, interp)
                for ys in itertools.product((0, 1), repeat=len(forall_vars))
            ):
                return True
    return False


def epr_matrix(p):
    """Turn a parsed EPR matrix into a callable for ``epr_truth``."""
    kind = type(p).__name__

    if kind == "PRel":
        return lambda env, I: bool(I[p.rel][tuple(env[a] for a in p.args)])
    if kind == "PEq":
        return lambda env, I: env[p.left] == env[p.right]
    if kind == "PNot":
        inner = epr_matrix(p.arg)
        return lambda env, I: not inner(env, I)
    parts = [epr_matrix(a) for a in p.args]
    if kind == "PAnd":
        return lambda env, I: all(f(env, I) for f in parts)
    return lambda env, I: any(f(env, I) for f in parts)


# -- counting -----------------------------------------------------------------------


def count_by_enumeration(event_fn, n_dummies, c) -> int:
    return sum(1 for y in itertools.product(range(c), repeat=n_dummies) if event_fn(y))


def scm_from_joint(sig, dist):
    """A model whose single exogenous variable picks the joint assignment directly.

    ``dist`` maps joint assignments (tuples in signature order) to weights.
    """
    from pch.core import Mechanism, Scm

    rows = [(x, w) for x, w in dist.items() if w]
    mech = {}
    for i, v in enumerate(sig.endogenous_vars):
        mech[v] = Mechanism((), ("U",), {(k,): x[i] for k, (x, _) in enumerate(rows)})
    return Scm(sig, (("U", len(rows)),), tuple(((k,), w) for k, (_, w) in enumerate(rows)), mech)
