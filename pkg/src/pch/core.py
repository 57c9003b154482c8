"""Domain types: signatures, structural causal models, events, terms, formulas.

All nodes are frozen dataclasses.  Source spans ride along on every node but
take no part in equality or hashing, so a parsed tree compares equal to one
built by hand.
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Mapping, Union

from .errors import (
    DuplicateAssignment,
    IncompleteTable,
    InconsistentIntervention,
    ModelError,
    NameClash,
    NestedIntervention,
    NonPropositionalCondition,
    NonRecursiveMechanism,
    UnboundDummy,
    UnknownVariable,
    ValidationError,
    ValueOutOfRange,
    WeightSumNotOne,
)

#: an atom's right-hand side: a constant from Val or the name of a dummy
Value = Union[int, str]

RESERVED_NAMES = frozenset({"P", "T", "sum"})


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError("span start after end")


def _span():
    return field(default=None, compare=False, repr=False)


class Node:
    """Common base of events, terms and formulas."""

    __slots__ = ()

    def __str__(self) -> str:
        from .parser import print_node

        return print_node(self)


class Event(Node):
    __slots__ = ()


class Term(Node):
    __slots__ = ()


class Formula(Node):
    __slots__ = ()


# -- events ---------------------------------------------------------------


@dataclass(frozen=True)
class Top(Event):
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Atom(Event):
    var: str
    value: Value
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Not(Event):
    arg: Event
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class And(Event):
    left: Event
    right: Event
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Or(Event):
    """Event disjunction; sugar for ``!(!a & !b)``."""

    left: Event
    right: Event
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class PostInt(Event):
    intervention: tuple[tuple[str, Value], ...]
    body: Event
    span: SourceSpan | None = _span()

    def __post_init__(self):
        object.__setattr__(self, "intervention", tuple((v, x) for v, x in self.intervention))


# -- terms ----------------------------------------------------------------


@dataclass(frozen=True)
class Prob(Term):
    event: Event
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class CondProb(Term):
    event: Event
    condition: Event
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Sum(Term):
    dummy: str
    body: Term
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Add(Term):
    left: Term
    right: Term
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Neg(Term):
    arg: Term
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Mul(Term):
    left: Term
    right: Term
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Const(Term):
    value: Fraction
    span: SourceSpan | None = _span()

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Unknown(Term):
    """A real-valued unknown; only produced by conditional elimination."""

    name: str
    span: SourceSpan | None = _span()


# -- formulas -------------------------------------------------------------


@dataclass(frozen=True)
class Le(Formula):
    left: Term
    right: Term
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Lt(Formula):
    left: Term
    right: Term
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Eq(Formula):
    left: Term
    right: Term
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class FNot(Formula):
    arg: Formula
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class FAnd(Formula):
    left: Formula
    right: Formula
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class FOr(Formula):
    left: Formula
    right: Formula
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula
    span: SourceSpan | None = _span()


# -- generic traversal ----------------------------------------------------


def children(node: Node) -> tuple[Node, ...]:
    return tuple(
        getattr(node, f.name)
        for f in dataclasses.fields(node)
        if isinstance(getattr(node, f.name), Node)
    )


def walk(node: Node) -> Iterator[Node]:
    """Pre-order traversal."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))


def map_children(node: Node, fn) -> Node:
    changes = {}
    for f in dataclasses.fields(node):
        child = getattr(node, f.name)
        if isinstance(child, Node):
            new = fn(child)
            if new is not child:
                changes[f.name] = new
    return dataclasses.replace(node, **changes) if changes else node


def conj(items, empty: Formula | None = None) -> Formula:
    """Left-nested conjunction of formulas."""
    items = list(items)
    if not items:
        if empty is None:
            raise ValueError("empty conjunction")
        return empty
    out = items[0]
    for f in items[1:]:
        out = FAnd(out, f)
    return out


def event_conj(items) -> Event:
    items = list(items)
    if not items:
        return Top()
    out = items[0]
    for e in items[1:]:
        out = And(out, e)
    return out


def event_disj(items) -> Event:
    items = list(items)
    if not items:
        return Not(Top())
    out = items[0]
    for e in items[1:]:
        out = Or(out, e)
    return out


def add_all(terms) -> Term:
    terms = list(terms)
    if not terms:
        return Const(0)
    out = terms[0]
    for t in terms[1:]:
        out = Add(out, t)
    return out


# -- signature and models -------------------------------------------------


@dataclass(frozen=True)
class Signature:
    domain_size: int
    endogenous_vars: tuple[str, ...]
    dummy_vars: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "endogenous_vars", tuple(self.endogenous_vars))
        object.__setattr__(self, "dummy_vars", frozenset(self.dummy_vars))
        if self.domain_size < 2:
            raise ValueError("domain size must be at least 2")
        if len(set(self.endogenous_vars)) != len(self.endogenous_vars):
            raise ValueError("duplicate endogenous variable names")
        clash = self.dummy_vars & set(self.endogenous_vars)
        if clash:
            raise ValueError(f"dummy names clash with variables: {sorted(clash)}")

    @property
    def values(self) -> range:
        return range(self.domain_size)

    def with_dummies(self, names) -> "Signature":
        return Signature(self.domain_size, self.endogenous_vars, self.dummy_vars | set(names))


@dataclass(frozen=True, eq=False)
class Mechanism:
    """Deterministic function of a variable, stored as a lookup table.

    Table keys are the endogenous parent values followed by the exogenous
    parent values, in the order the parents are listed.
    """

    endo_parents: tuple[str, ...]
    exo_parents: tuple[str, ...]
    table: Mapping[tuple[int, ...], int]

    def __post_init__(self):
        object.__setattr__(self, "endo_parents", tuple(self.endo_parents))
        object.__setattr__(self, "exo_parents", tuple(self.exo_parents))
        object.__setattr__(self, "table", dict(self.table))

    @classmethod
    def constant(cls, value: int) -> "Mechanism":
        return cls((), (), {(): value})

    def __eq__(self, other):
        if not isinstance(other, Mechanism):
            return NotImplemented
        return (self.endo_parents, self.exo_parents, self.table) == (
            other.endo_parents,
            other.exo_parents,
            other.table,
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Scm:
    """Finite structural causal model.

    The causal order is the order of ``signature.endogenous_vars``; each
    mechanism may only read variables earlier in that order.
    """

    signature: Signature
    exo_vars: tuple[tuple[str, int], ...]
    exo_dist: tuple[tuple[tuple[int, ...], Fraction], ...]
    mechanisms: Mapping[str, Mechanism]

    def __post_init__(self):
        object.__setattr__(self, "exo_vars", tuple((n, int(s)) for n, s in self.exo_vars))
        object.__setattr__(
            self, "exo_dist", tuple((tuple(u), Fraction(w)) for u, w in self.exo_dist)
        )
        object.__setattr__(self, "mechanisms", dict(self.mechanisms))
        self._check()

    def _check(self) -> None:
        names = [n for n, _ in self.exo_vars]
        if len(set(names)) != len(names):
            raise ModelError("duplicate exogenous variable names")
        if set(names) & set(self.signature.endogenous_vars):
            raise ModelError("exogenous and endogenous names overlap")
        sizes = dict(self.exo_vars)
        if any(s < 1 for s in sizes.values()):
            raise ModelError("exogenous domains must be non-empty")

        seen = set()
        total = Fraction(0)
        for u, w in self.exo_dist:
            if len(u) != len(names):
                raise ModelError(f"exogenous assignment {u} is not total")
            for (name, size), val in zip(self.exo_vars, u):
                if not 0 <= val < size:
                    raise ModelError(f"value {val} out of range for {name}")
            if u in seen:
                raise DuplicateAssignment(f"exogenous assignment {u} listed twice")
            if w < 0:
                raise ModelError(f"negative weight {w}")
            seen.add(u)
            total += w
        if total != 1:
            raise WeightSumNotOne(total)

        order = self.signature.endogenous_vars
        if set(self.mechanisms) != set(order):
            raise ModelError("mechanisms must be given for exactly the endogenous variables")
        c = self.signature.domain_size
        for i, var in enumerate(order):
            mech = self.mechanisms[var]
            earlier = set(order[:i])
            for p in mech.endo_parents:
                if p not in earlier:
                    raise NonRecursiveMechanism(
                        f"{var} reads {p}, which does not precede it in the causal order"
                    )
            for p in mech.exo_parents:
                if p not in sizes:
                    raise ModelError(f"{var} reads unknown exogenous variable {p}")
            domains = [range(c)] * len(mech.endo_parents) + [
                range(sizes[p]) for p in mech.exo_parents
            ]
            for key in itertools.product(*domains):
                out = mech.table.get(key)
                if out is None:
                    raise IncompleteTable(f"mechanism of {var} has no entry for {key}")
                if not 0 <= out < c:
                    raise ModelError(f"mechanism of {var} outputs {out}, outside Val")

    @property
    def order(self) -> tuple[str, ...]:
        return self.signature.endogenous_vars

    @cached_property
    def exo_index(self) -> dict[str, int]:
        return {n: i for i, (n, _) in enumerate(self.exo_vars)}

    @cached_property
    def var_index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.order)}

    @cached_property
    def compiled(self) -> tuple[tuple[tuple[int, ...], tuple[int, ...], dict], ...]:
        """Per variable: endogenous parent positions, exogenous parent positions, table."""
        vi, ei = self.var_index, self.exo_index
        return tuple(
            (
                tuple(vi[p] for p in m.endo_parents),
                tuple(ei[p] for p in m.exo_parents),
                m.table,
            )
            for m in (self.mechanisms[v] for v in self.order)
        )

    @cached_property
    def worlds(self) -> tuple[tuple[tuple[int, ...], Fraction], ...]:
        """Exogenous assignments with positive weight."""
        return tuple((u, w) for u, w in self.exo_dist if w > 0)


@dataclass(frozen=True)
class Document:
    """A formula together with the signature it is written over."""

    signature: Signature
    formula: Formula
    comments: tuple[str, ...] = ()


# -- substitution ---------------------------------------------------------


def substitute_dummy(node: Node, dummy: str, value: int) -> Node:
    """Replace free occurrences of ``dummy`` by ``value`` (``t[v/x]``).

    A ``Sum`` that rebinds the same dummy shadows it and is left alone.
    """
    if isinstance(node, Sum) and node.dummy == dummy:
        return node
    if isinstance(node, Atom):
        return dataclasses.replace(node, value=value) if node.value == dummy else node
    if isinstance(node, PostInt):
        body = substitute_dummy(node.body, dummy, value)
        alpha = tuple((v, value if x == dummy else x) for v, x in node.intervention)
        if body is node.body and alpha == node.intervention:
            return node
        return dataclasses.replace(node, intervention=alpha, body=body)
    return map_children(node, lambda ch: substitute_dummy(ch, dummy, value))


def free_dummies(node: Node) -> frozenset[str]:
    if isinstance(node, Atom):
        return frozenset([node.value]) if isinstance(node.value, str) else frozenset()
    if isinstance(node, Sum):
        return free_dummies(node.body) - {node.dummy}
    out = frozenset()
    if isinstance(node, PostInt):
        out = frozenset(x for _, x in node.intervention if isinstance(x, str))
    for ch in children(node):
        out |= free_dummies(ch)
    return out


def variables(node: Node) -> set[str]:
    out = set()
    for n in walk(node):
        if isinstance(n, Atom):
            out.add(n.var)
        elif isinstance(n, PostInt):
            out.update(v for v, _ in n.intervention)
    return out


def has_postint(node: Node) -> bool:
    return any(isinstance(n, PostInt) for n in walk(node))


# -- validation -----------------------------------------------------------


def _check_value(value, sig: Signature, bound: frozenset, node):
    if isinstance(value, str):
        if value not in bound:
            raise UnboundDummy(f"dummy {value!r} is not bound by an enclosing sum", node)
    elif not (isinstance(value, int) and 0 <= value < sig.domain_size):
        raise ValueOutOfRange(f"value {value!r} is outside Val = 0..{sig.domain_size - 1}", node)


def _check_var(var: str, sig: Signature, node):
    if var not in sig.endogenous_vars:
        raise UnknownVariable(f"variable {var!r} is not declared", node)


def _validate_event(e: Event, sig, bound, inside_postint: bool):
    if isinstance(e, Top):
        return
    if isinstance(e, Atom):
        _check_var(e.var, sig, e)
        _check_value(e.value, sig, bound, e)
    elif isinstance(e, PostInt):
        if inside_postint:
            raise NestedIntervention("interventions may not be nested", e)
        assigned: dict[str, Value] = {}
        for var, val in e.intervention:
            _check_var(var, sig, e)
            _check_value(val, sig, bound, e)
            if var in assigned and assigned[var] != val:
                raise InconsistentIntervention(
                    f"intervention assigns {var} both {assigned[var]!r} and {val!r}", e
                )
            assigned[var] = val
        _validate_event(e.body, sig, bound, True)
    else:
        for ch in children(e):
            _validate_event(ch, sig, bound, inside_postint)


def _validate(node: Node, sig: Signature, bound: frozenset, allow_unknowns: bool):
    if isinstance(node, Sum):
        if node.dummy in sig.endogenous_vars:
            raise NameClash(f"dummy {node.dummy!r} clashes with a variable name", node)
        _validate(node.body, sig, bound | {node.dummy}, allow_unknowns)
    elif isinstance(node, Prob):
        _validate_event(node.event, sig, bound, False)
    elif isinstance(node, CondProb):
        if has_postint(node.condition):
            raise NonPropositionalCondition(
                "the condition of a conditional probability must be propositional", node
            )
        _validate_event(node.event, sig, bound, False)
        _validate_event(node.condition, sig, bound, False)
    elif isinstance(node, Unknown):
        if not allow_unknowns:
            raise ValidationError(f"unknown ?{node.name} outside an arithmetic system", node)
    elif isinstance(node, Const):
        pass
    else:
        for ch in children(node):
            _validate(ch, sig, bound, allow_unknowns)


def validate(formula: Formula, sig: Signature, *, allow_unknowns: bool = False) -> Formula:
    """Check well-formedness of ``formula`` over ``sig`` and return it.

    Raises the ``ValidationError`` subclass naming the first offending node.
    """
    _validate(formula, sig, frozenset(), allow_unknowns)
    return formula


# -- fragments ------------------------------------------------------------

_TERM_RANK = {"base": 0, "lin": 1, "poly": 2}


@dataclass(frozen=True)
class FragmentTag:
    layer: int
    terms: str
    has_sigma: bool

    @property
    def label(self) -> str:
        return f"{self.terms}<sum>" if self.has_sigma else self.terms

    def __str__(self) -> str:
        return f"L{self.layer} {self.label}"


def event_layer(e: Event) -> int:
    if not has_postint(e):
        return 1
    if isinstance(e, PostInt):
        return 2
    return 3


def _is_constant_term(t: Term) -> bool:
    return not any(isinstance(n, (Prob, CondProb, Unknown)) for n in walk(t))


def classify_fragment(formula: Node) -> FragmentTag:
    """Least (layer, term class, sigma) fragment whose grammar derives the formula.

    Conditional probabilities count as basic terms at the layer of their
    main event.  Multiplying by a constant-only factor is linear.
    """
    layer, rank, sigma = 1, 0, False
    for n in walk(formula):
        if isinstance(n, Sum):
            sigma = True
        elif isinstance(n, (Add, Neg, Const, Unknown)):
            rank = max(rank, 1)
        elif isinstance(n, Mul):
            linear = _is_constant_term(n.left) or _is_constant_term(n.right)
            rank = max(rank, 1 if linear else 2)
        elif isinstance(n, (Prob, CondProb)):
            layer = max(layer, event_layer(n.event))
    terms = next(k for k, v in _TERM_RANK.items() if v == rank)
    return FragmentTag(layer, terms, sigma)


# -- desugaring -----------------------------------------------------------


def desugar(node: Node) -> Node:
    """Rewrite =, <, ||, -> and event-level | into <=, ~, && and !, &."""
    node = map_children(node, desugar)
    if isinstance(node, Eq):
        return FAnd(Le(node.left, node.right), Le(node.right, node.left), span=node.span)
    if isinstance(node, Lt):
        return FNot(Le(node.right, node.left), span=node.span)
    if isinstance(node, FOr):
        return FNot(FAnd(FNot(node.left), FNot(node.right)), span=node.span)
    if isinstance(node, Implies):
        return FNot(FAnd(node.left, FNot(node.right)), span=node.span)
    if isinstance(node, Or):
        return Not(And(Not(node.left), Not(node.right)), span=node.span)
    return node


def primitives(node: Node) -> list[Term]:
    """Distinct Prob/CondProb nodes, in first-occurrence order."""
    seen = {}
    for n in walk(node):
        if isinstance(n, (Prob, CondProb)) and n not in seen:
            seen[n] = None
    return list(seen)
