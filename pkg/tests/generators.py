"""Seeded random generators for the fixed-size acceptance corpora.

Hypothesis drives the property tests; these produce exact counts of
reproducible instances.
"""

from __future__ import annotations

import itertools
import random
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
    Le,
    Lt,
    Mul,
    Not,
    Or,
    PostInt,
    Prob,
    Signature,
    Sum,
    Top,
    walk,
)

VARS = ("A", "B", "C")
DUMMIES = ("x", "y")


def signature(rng: random.Random, max_vars=3) -> Signature:
    return Signature(2, VARS[: rng.randint(1, max_vars)])


def prop_event(rng, sig, bound=(), depth=2, negation=True):
    kinds = ["atom", "atom", "top"]
    if depth > 0:
        kinds += ["and", "or", "not"] if negation else ["and"]
    kind = rng.choice(kinds)
    if kind == "top":
        return Top()
    if kind == "atom":
        return Atom(rng.choice(sig.endogenous_vars), rng.choice(list(sig.values) + list(bound)))
    if kind == "not":
        return Not(prop_event(rng, sig, bound, depth - 1, negation))
    a = prop_event(rng, sig, bound, depth - 1, negation)
    b = prop_event(rng, sig, bound, depth - 1, negation)
    return And(a, b) if kind == "and" else Or(a, b)


def sigma_term(rng, sig, max_sums=2, negation=True):
    """``sum x1 .. sum xk P(delta)`` with ``k <= max_sums``."""
    k = rng.randint(0, max_sums)
    bound = DUMMIES[:k]
    t = Prob(prop_event(rng, sig, bound, depth=rng.randint(0, 3), negation=negation))
    for d in reversed(bound):
        t = Sum(d, t)
    return t


def interventional_event(rng, sig, bound=()):
    n = rng.randint(1, len(sig.endogenous_vars))
    vs = rng.sample(list(sig.endogenous_vars), n)
    alpha = tuple((v, rng.choice(list(sig.values) + list(bound))) for v in vs)
    return PostInt(alpha, prop_event(rng, sig, bound, depth=rng.randint(0, 2)))


def l2_term(rng, sig, bound=(), depth=2):
    """Layer-2 linear term; sums are drawn often."""
    kinds = ["prob"]
    if depth > 0:
        kinds += ["sum", "sum", "add", "scale"] if len(bound) < 2 else ["add", "scale"]
    kind = rng.choice(kinds)
    if kind == "prob":
        return Prob(interventional_event(rng, sig, bound))
    if kind == "sum":
        d = DUMMIES[len(bound)]
        return Sum(d, l2_term(rng, sig, bound + (d,), depth - 1))
    if kind == "add":
        return Add(l2_term(rng, sig, bound, depth - 1), l2_term(rng, sig, bound, depth - 1))
    return Mul(Const(Fraction(rng.randint(-3, 3), rng.randint(1, 3))), l2_term(rng, sig, bound, depth - 1))


def l2_formula(rng, sig):
    """A layer-2 lin<sum> formula guaranteed to contain a sum."""
    while True:
        rel = rng.choice([Le, Lt, Eq])
        f = rel(l2_term(rng, sig), l2_term(rng, sig) if rng.random() < 0.5 else Const(Fraction(rng.randint(0, 4), 2)))
        if rng.random() < 0.4:
            g = rng.choice([Le, Lt])(l2_term(rng, sig), l2_term(rng, sig))
            f = rng.choice([FAnd, FOr])(f, g)
        if any(isinstance(n, Sum) for n in walk(f)):
            return f


def negfree_formula(rng, sig):
    def term():
        if rng.random() < 0.3:
            return Add(sigma_term(rng, sig, negation=False), sigma_term(rng, sig, negation=False))
        return sigma_term(rng, sig, negation=False)

    def cmp():
        rel = rng.choice([Le, Lt, Eq])
        rhs = term() if rng.random() < 0.6 else Const(Fraction(rng.randint(0, 8), 4))
        return rel(term(), rhs)

    f = cmp()
    for _ in range(rng.randint(0, 2)):
        f = FAnd(f, cmp())
    return f


def l1_formula_with_conditionals(rng, sig):
    """Layer-1 linear formula with conditionals and sums (conditionals outside sums)."""

    def term():
        r = rng.random()
        if r < 0.35:
            return CondProb(prop_event(rng, sig, depth=1), prop_event(rng, sig, depth=1))
        if r < 0.7:
            return sigma_term(rng, sig)
        return Const(Fraction(rng.randint(0, 4), 4))

    rel = rng.choice([Le, Lt, Eq])
    f = rel(term(), term())
    if rng.random() < 0.5:
        f = rng.choice([FAnd, FOr])(f, rng.choice([Le, Lt])(term(), term()))
    if rng.random() < 0.2:
        f = FNot(f)
    return f


def distribution(rng, sig, zero_share=0.3):
    xs = list(itertools.product(sig.values, repeat=len(sig.endogenous_vars)))
    ws = [0 if rng.random() < zero_share else rng.randint(1, 9) for _ in xs]
    if not any(ws):
        ws[rng.randrange(len(ws))] = 1
    total = sum(ws)
    return {x: Fraction(w, total) for x, w in zip(xs, ws)}

