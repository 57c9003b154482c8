"""Exact semantics of events, terms and formulas over a structural causal model.

Term values are ``Fraction`` or ``None``; ``None`` stands for an undefined
value (a conditional probability whose condition has probability zero).
Formulas evaluate to ``True``, ``False`` or ``None`` under strong Kleene
logic.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from fractions import Fraction
from typing import Mapping, Sequence

from .core import (
    Add,
    And,
    Atom,
    CondProb,
    Const,
    Eq,
    Event,
    FAnd,
    FNot,
    FOr,
    Formula,
    Implies,
    Le,
    Lt,
    Mechanism,
    Mul,
    Neg,
    Node,
    Not,
    Or,
    PostInt,
    Prob,
    Scm,
    Sum,
    Term,
    Top,
    Unknown,
    has_postint,
    substitute_dummy,
    walk,
)
from .errors import FragmentError, UnboundDummy, ValidationError

Valuation = Fraction | None
Assignment = tuple[int, ...]

__all__ = [
    "determine_values",
    "apply_intervention",
    "satisfies",
    "eval_term",
    "eval_formula",
    "eval_l2_sums_by_interventions",
    "joint_distribution",
    "Evaluator",
]


def _compute(scm: Scm, u: Assignment, overrides: Mapping[int, int] | None = None, x=None, start=0):
    """World values in causal order; positions in ``overrides`` are forced.

    When ``x`` is given, positions before ``start`` are copied from it.
    """
    out = list(x[:start]) if x is not None else []
    for i in range(start, len(scm.compiled)):
        if overrides and i in overrides:
            out.append(overrides[i])
            continue
        endo_idx, exo_idx, table = scm.compiled[i]
        key = tuple(out[j] for j in endo_idx) + tuple(u[k] for k in exo_idx)
        out.append(table[key])
    return tuple(out)


def determine_values(scm: Scm, u: Sequence[int]) -> Assignment:
    """Endogenous values forced by the exogenous assignment ``u``."""
    return _compute(scm, tuple(u))


def _closed_alpha(scm: Scm, alpha) -> dict[int, int]:
    out = {}
    for var, val in alpha:
        if isinstance(val, str):
            raise UnboundDummy(f"intervention value {val!r} is a free dummy")
        out[scm.var_index[var]] = val
    return out


def apply_intervention(scm: Scm, alpha) -> Scm:
    """The submodel where each intervened variable has a constant mechanism."""
    alpha = tuple(alpha)
    if not alpha:
        return scm
    mechs = dict(scm.mechanisms)
    for var, val in alpha:
        if isinstance(val, str):
            raise UnboundDummy(f"intervention value {val!r} is a free dummy")
        mechs[var] = Mechanism.constant(val)
    return Scm(scm.signature, scm.exo_vars, scm.exo_dist, mechs)


def _holds(e: Event, x: Assignment, vi: Mapping[str, int]) -> bool:
    if isinstance(e, Atom):
        if isinstance(e.value, str):
            raise UnboundDummy(f"dummy {e.value!r} is free", e)
        return x[vi[e.var]] == e.value
    if isinstance(e, Top):
        return True
    if isinstance(e, Not):
        return not _holds(e.arg, x, vi)
    if isinstance(e, And):
        return _holds(e.left, x, vi) and _holds(e.right, x, vi)
    if isinstance(e, Or):
        return _holds(e.left, x, vi) or _holds(e.right, x, vi)
    raise TypeError(f"not a propositional event: {e!r}")


class _World:
    """One exogenous assignment with lazily computed intervened worlds."""

    __slots__ = ("scm", "u", "cache")

    def __init__(self, scm: Scm, u: Assignment):
        self.scm = scm
        self.u = u
        self.cache: dict[tuple, Assignment] = {(): _compute(scm, u)}

    def under(self, alpha) -> Assignment:
        key = tuple(sorted(alpha))
        x = self.cache.get(key)
        if x is None:
            x = _compute(self.scm, self.u, _closed_alpha(self.scm, key))
            self.cache[key] = x
        return x

    def sat(self, e: Event) -> bool:
        vi = self.scm.var_index
        if isinstance(e, PostInt):
            return _holds(e.body, self.under(e.intervention), vi)
        if isinstance(e, Atom) or isinstance(e, Top):
            return _holds(e, self.cache[()], vi)
        if isinstance(e, Not):
            return not self.sat(e.arg)
        if isinstance(e, And):
            return self.sat(e.left) and self.sat(e.right)
        if isinstance(e, Or):
            return self.sat(e.left) or self.sat(e.right)
        raise TypeError(f"not an event: {e!r}")


def satisfies(scm: Scm, u: Sequence[int], psi: Event) -> bool:
    """Whether the world ``u`` satisfies the (closed) event ``psi``."""
    return _World(scm, tuple(u)).sat(psi)


def joint_distribution(scm: Scm, alpha=()) -> dict[Assignment, Fraction]:
    """Distribution of the endogenous variables, optionally after intervening."""
    over = _closed_alpha(scm, alpha)
    dist: dict[Assignment, Fraction] = defaultdict(Fraction)
    for u, w in scm.worlds:
        dist[_compute(scm, u, over)] += w
    return dict(dist)


class Evaluator:
    """Term and formula evaluation over one model, memoizing event probabilities."""

    def __init__(self, scm: Scm, unknowns: Mapping[str, Fraction] | None = None):
        self.scm = scm
        self.unknowns = dict(unknowns or {})
        self._worlds = [(_World(scm, u), w) for u, w in scm.worlds]
        self._prob: dict[Event, Fraction] = {}

    def prob(self, e: Event) -> Fraction:
        p = self._prob.get(e)
        if p is None:
            p = sum((w for world, w in self._worlds if world.sat(e)), Fraction(0))
            self._prob[e] = p
        return p

    def term(self, t: Term) -> Valuation:
        if isinstance(t, Prob):
            return self.prob(t.event)
        if isinstance(t, CondProb):
            den = self.prob(t.condition)
            if den == 0:
                return None
            return self.prob(And(t.event, t.condition)) / den
        if isinstance(t, Const):
            return t.value
        if isinstance(t, Sum):
            total = Fraction(0)
            for v in self.scm.signature.values:
                part = self.term(substitute_dummy(t.body, t.dummy, v))
                if part is None:
                    return None
                total += part
            return total
        if isinstance(t, Add):
            a, b = self.term(t.left), self.term(t.right)
            return None if a is None or b is None else a + b
        if isinstance(t, Neg):
            a = self.term(t.arg)
            return None if a is None else -a
        if isinstance(t, Mul):
            a, b = self.term(t.left), self.term(t.right)
            return None if a is None or b is None else a * b
        if isinstance(t, Unknown):
            if t.name not in self.unknowns:
                raise ValidationError(f"no value for unknown ?{t.name}", t)
            return Fraction(self.unknowns[t.name])
        raise TypeError(f"not a term: {t!r}")

    def formula(self, f: Formula) -> bool | None:
        if isinstance(f, (Le, Lt, Eq)):
            a, b = self.term(f.left), self.term(f.right)
            if a is None or b is None:
                return None
            if isinstance(f, Le):
                return a <= b
            if isinstance(f, Lt):
                return a < b
            return a == b
        if isinstance(f, FNot):
            return _not(self.formula(f.arg))
        if isinstance(f, FAnd):
            return _and(self.formula(f.left), self.formula(f.right))
        if isinstance(f, FOr):
            return _not(_and(_not(self.formula(f.left)), _not(self.formula(f.right))))
        if isinstance(f, Implies):
            return _not(_and(self.formula(f.left), _not(self.formula(f.right))))
        raise TypeError(f"not a formula: {f!r}")


def _not(a):
    return None if a is None else not a


def _and(a, b):
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def eval_term(scm: Scm, term: Term, unknowns=None) -> Valuation:
    return Evaluator(scm, unknowns).term(term)


def eval_formula(scm: Scm, formula: Formula, unknowns=None) -> bool | None:
    return Evaluator(scm, unknowns).formula(formula)


# -- Algorithm 1 path -------------------------------------------------------


def _const_value(t: Term) -> Fraction:
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Neg):
        return -_const_value(t.arg)
    if isinstance(t, Add):
        return _const_value(t.left) + _const_value(t.right)
    if isinstance(t, Mul):
        return _const_value(t.left) * _const_value(t.right)
    if isinstance(t, Sum):
        raise FragmentError("constant sums are not supported here")
    raise FragmentError(f"{type(t).__name__} is not a constant")


def _is_const(t: Term) -> bool:
    return not any(isinstance(n, (Prob, CondProb, Unknown, Sum)) for n in walk(t))


def linearize(term: Term, dummies: tuple[str, ...] = (), counter=None):
    """Split a lin<sum> term into ``(coef, dummies, event)`` atoms.

    ``event`` is ``None`` for a constant atom.  Binders are renamed to fresh
    ``#k`` names so shadowing cannot confuse the substitution later on.
    """
    if counter is None:
        counter = itertools.count()
    if isinstance(term, Prob):
        return [(Fraction(1), dummies, term.event)]
    if isinstance(term, Sum):
        fresh = f"#{next(counter)}"
        body = substitute_dummy(term.body, term.dummy, fresh)
        return linearize(body, dummies + (fresh,), counter)
    if isinstance(term, Add):
        return linearize(term.left, dummies, counter) + linearize(term.right, dummies, counter)
    if isinstance(term, Neg):
        return [(-c, d, e) for c, d, e in linearize(term.arg, dummies, counter)]
    if isinstance(term, Const):
        return [(term.value, dummies, None)]
    if isinstance(term, Mul):
        if _is_const(term.left):
            k, rest = _const_value(term.left), term.right
        elif _is_const(term.right):
            k, rest = _const_value(term.right), term.left
        else:
            raise FragmentError("product of two non-constant terms is not linear")
        return [(k * c, d, e) for c, d, e in linearize(rest, dummies, counter)]
    if isinstance(term, CondProb):
        raise FragmentError("conditional probabilities are not linear")
    raise FragmentError(f"cannot linearize {type(term).__name__}")


def _maximal_sums(node: Node) -> list[Sum]:
    out: dict[Sum, None] = {}

    def visit(n):
        if isinstance(n, Sum):
            out.setdefault(n, None)
            return
        for f in getattr(n, "__dataclass_fields__", {}):
            ch = getattr(n, f)
            if isinstance(ch, Node):
                visit(ch)

    visit(node)
    return list(out)


def _substitute_all(e: Event, dummies, values):
    for d, v in zip(dummies, values):
        e = substitute_dummy(e, d, v)
    return e


def eval_l2_sums_by_interventions(scm: Scm, formula: Node) -> dict[Sum, Fraction]:
    """Value of every outermost sum, computed by simulating interventions.

    For each world of positive weight the simulation walks the causal order
    and, at each variable, either leaves it alone or fixes it to each value,
    recomputing later variables when the fixed value differs from the
    current one.  At the end of the order it credits the world's weight to
    every substituted atom whose intervention equals the simulated one and
    whose body holds in the simulated values.
    """
    c = scm.signature.domain_size
    vi = scm.var_index
    sums = _maximal_sums(formula)

    # atom id -> (coef, {canonical alpha: [(body event, multiplicity)]})
    atoms = []
    constants: dict[int, Fraction] = defaultdict(Fraction)
    owner = []
    for s_idx, s in enumerate(sums):
        for coef, dummies, event in linearize(s):
            if event is None:
                constants[s_idx] += coef * c ** len(dummies)
                continue
            if has_postint(event) and not isinstance(event, PostInt):
                raise FragmentError("primitive is a counterfactual (layer 3) event")
            groups: dict[tuple, dict[Event, int]] = defaultdict(lambda: defaultdict(int))
            for values in itertools.product(range(c), repeat=len(dummies)):
                sub = _substitute_all(event, dummies, values)
                if isinstance(sub, PostInt):
                    alpha = tuple(sorted({(vi[v], x) for v, x in sub.intervention}))
                    body = sub.body
                else:
                    alpha, body = (), sub
                groups[alpha][body] += 1
            atoms.append((coef, {a: list(g.items()) for a, g in groups.items()}))
            owner.append(s_idx)

    counters = [Fraction(0)] * len(atoms)
    n = len(scm.order)

    for u, p_u in scm.worlds:

        def simulate(i, alpha, x):
            if i == n:
                key = tuple(alpha)
                for j, (_, groups) in enumerate(atoms):
                    for body, mult in groups.get(key, ()):
                        if _holds(body, x, vi):
                            counters[j] += mult * p_u
                return
            simulate(i + 1, alpha, x)
            for v in range(c):
                over = dict(alpha)
                over[i] = v
                y = x if v == x[i] else _compute(scm, u, over, x, i)
                simulate(i + 1, alpha + [(i, v)], y)

        simulate(0, [], _compute(scm, u))

    out = {}
    for s_idx, s in enumerate(sums):
        out[s] = constants[s_idx] + sum(
            (atoms[j][0] * counters[j] for j in range(len(atoms)) if owner[j] == s_idx),
            Fraction(0),
        )
    return out
