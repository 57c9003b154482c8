"""Compilers from classical hard problems into causal-hierarchy formulas.

* 3-SAT          -> layer 1, base, no sums (each variable x becomes P(X=1) > 0)
* E-MajSat       -> layer 1, base with sums
* QBF            -> layer 2, sums over interventions plus a causal-order gadget
* EPR sentences  -> layer 3, sums over counterfactual inequalities

Source formats are DIMACS CNF, DIMACS with ``x``/``y`` lines for E-MajSat,
QDIMACS, and a small text syntax for EPR (see ``parse_epr``).

Integer constants default to ``Const`` nodes; ``unary=True`` spells them as
sums of ``P(T)`` instead, and zero as the probability of a contradiction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

from .core import (
    Add,
    And,
    Atom,
    Const,
    Document,
    Eq,
    Event,
    FNot,
    FOr,
    Formula,
    Le,
    Lt,
    Node,
    Not,
    Or,
    PostInt,
    Prob,
    Signature,
    Sum,
    Term,
    Top,
    conj,
    map_children,
    validate,
)
from .errors import ArityError, DomainError, NameClash, SourceFormatError

ORDER_VAR = "_C"

__all__ = [
    "PVar",
    "PNot",
    "PAnd",
    "POr",
    "PEq",
    "PRel",
    "Cnf",
    "prop_eval",
    "EMajSatInstance",
    "Qbf",
    "EprSentence",
    "reduce_sat3_to_l1",
    "reduce_emajsat_to_l1",
    "reduce_qbf_to_l2",
    "reduce_epr_to_l3",
    "encode_causal_order",
    "epr_natural_bounds",
    "parse_dimacs",
    "parse_emajsat",
    "parse_qdimacs",
    "parse_epr",
]


# -- propositional source formulas ----------------------------------------------


@dataclass(frozen=True)
class PVar:
    name: str


@dataclass(frozen=True)
class PNot:
    arg: "Prop"


@dataclass(frozen=True)
class PAnd:
    args: tuple


@dataclass(frozen=True)
class POr:
    args: tuple


@dataclass(frozen=True)
class PEq:
    """Equality of two first-order variables (EPR only)."""

    left: str
    right: str


@dataclass(frozen=True)
class PRel:
    """Relation atom (EPR only)."""

    rel: str
    args: tuple


Prop = Union[PVar, PNot, PAnd, POr, PEq, PRel]


def prop_eval(p: Prop, env, relations=None) -> bool:
    """Truth of ``p``; ``env`` maps names to bools (or domain values for EPR)."""
    if isinstance(p, PVar):
        return bool(env[p.name])
    if isinstance(p, PNot):
        return not prop_eval(p.arg, env, relations)
    if isinstance(p, PAnd):
        return all(prop_eval(a, env, relations) for a in p.args)
    if isinstance(p, POr):
        return any(prop_eval(a, env, relations) for a in p.args)
    if isinstance(p, PEq):
        return env[p.left] == env[p.right]
    if isinstance(p, PRel):
        return bool(relations[p.rel][tuple(env[a] for a in p.args)])
    raise TypeError(p)


def _prop_names(p: Prop) -> set[str]:
    if isinstance(p, PVar):
        return {p.name}
    if isinstance(p, PNot):
        return _prop_names(p.arg)
    if isinstance(p, (PAnd, POr)):
        return set().union(*(_prop_names(a) for a in p.args)) if p.args else set()
    if isinstance(p, PEq):
        return {p.left, p.right}
    if isinstance(p, PRel):
        return set(p.args)
    raise TypeError(p)


# -- source instances -----------------------------------------------------------


@dataclass(frozen=True)
class Cnf:
    n_vars: int
    clauses: tuple[tuple[int, ...], ...]

    def as_prop(self) -> Prop:
        return PAnd(
            tuple(
                POr(tuple(PVar(str(abs(l))) if l > 0 else PNot(PVar(str(abs(l)))) for l in cl))
                for cl in self.clauses
            )
        )


@dataclass(frozen=True)
class EMajSatInstance:
    """``exists x . #y phi >= 2^(|y|-1)``"""

    x_vars: tuple[str, ...]
    y_vars: tuple[str, ...]
    phi: Prop

    def __post_init__(self):
        names = set(self.x_vars) | set(self.y_vars)
        if len(names) != len(self.x_vars) + len(self.y_vars):
            raise SourceFormatError("x and y variables must be distinct")
        extra = _prop_names(self.phi) - names
        if extra:
            raise SourceFormatError(f"phi mentions undeclared variables {sorted(extra)}")


@dataclass(frozen=True)
class Qbf:
    prefix: tuple[tuple[str, str], ...]  # ("e" | "a", name)
    matrix: Prop

    def __post_init__(self):
        names = [v for _, v in self.prefix]
        if len(set(names)) != len(names):
            raise SourceFormatError("prefix variables must be distinct")
        if any(q not in ("e", "a") for q, _ in self.prefix):
            raise SourceFormatError("quantifiers are 'e' or 'a'")
        extra = _prop_names(self.matrix) - set(names)
        if extra:
            raise SourceFormatError(f"matrix mentions unquantified variables {sorted(extra)}")


@dataclass(frozen=True)
class EprSentence:
    """``exists x forall y psi`` over equalities and relation atoms."""

    exists_vars: tuple[str, ...]
    forall_vars: tuple[str, ...]
    matrix: Prop

    def __post_init__(self):
        names = list(self.exists_vars) + list(self.forall_vars)
        if len(set(names)) != len(names):
            raise SourceFormatError("quantified variables must be distinct")
        for nm in names + [r.rel for r in _rel_atoms(self.matrix)]:
            if "_" in nm or not nm.isidentifier():
                raise SourceFormatError(f"identifier {nm!r} may not contain '_'")
        extra = _prop_names(self.matrix) - set(names)
        if extra:
            raise SourceFormatError(f"matrix mentions unquantified variables {sorted(extra)}")
        arity: dict[str, int] = {}
        for r in _rel_atoms(self.matrix):
            if arity.setdefault(r.rel, len(r.args)) != len(r.args):
                raise ArityError(f"relation {r.rel} used with arities {arity[r.rel]} and {len(r.args)}")

    @property
    def relations(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in _rel_atoms(self.matrix):
            out.setdefault(r.rel, len(r.args))
        return out


def _rel_atoms(p: Prop) -> list[PRel]:
    """Relation occurrences, left to right."""
    if isinstance(p, PRel):
        return [p]
    if isinstance(p, PNot):
        return _rel_atoms(p.arg)
    if isinstance(p, (PAnd, POr)):
        return [r for a in p.args for r in _rel_atoms(a)]
    return []


# -- shared helpers -----------------------------------------------------------


def _require_binary(c: int) -> None:
    if c != 2:
        raise DomainError(f"this reduction is defined for binary values only (got c={c})")


def _integer(k: int, unary: bool, dummy_prefix: str = "t", witness_var: str | None = None) -> Term:
    """The integer ``k`` as a constant or, with ``unary``, as sums of P(T)."""
    if not unary:
        return Const(k)
    if k == 0:
        if witness_var is None:
            raise ValueError("unary zero needs a variable for the contradiction")
        return Prob(And(Atom(witness_var, 0), Not(Atom(witness_var, 0))))
    if k & (k - 1):
        # not a power of two: add powers of two
        out = None
        bit = 0
        while k:
            if k & 1:
                part = _integer(1 << bit, True, f"{dummy_prefix}{bit}_")
                out = part if out is None else _add(out, part)
            k >>= 1
            bit += 1
        return out
    t: Term = Prob(Top())
    for i in reversed(range(k.bit_length() - 1)):
        t = Sum(f"{dummy_prefix}{i + 1}", t)
    return t


def _add(a: Term, b: Term) -> Term:
    return Add(a, b)


def _sums(dummies: Sequence[str], body: Term) -> Term:
    for d in reversed(list(dummies)):
        body = Sum(d, body)
    return body


def _lit_event(p: Prop, var_of) -> Event:
    """Propositional source formula -> event, positive literal x as X=1."""
    if isinstance(p, PVar):
        return Atom(var_of[p.name], 1)
    if isinstance(p, PNot) and isinstance(p.arg, PVar):
        return Atom(var_of[p.arg.name], 0)
    if isinstance(p, PNot):
        return Not(_lit_event(p.arg, var_of))
    if isinstance(p, (PAnd, POr)):
        if not p.args:
            return Top() if isinstance(p, PAnd) else Not(Top())
        out = _lit_event(p.args[0], var_of)
        for a in p.args[1:]:
            nxt = _lit_event(a, var_of)
            out = And(out, nxt) if isinstance(p, PAnd) else Or(out, nxt)
        return out
    raise SourceFormatError(f"unexpected {type(p).__name__} in a propositional formula")


def _finish(sig: Signature, f: Formula) -> Document:
    validate(f, sig)
    return Document(sig, f)


# -- 3-SAT ------------------------------------------------------------------


def reduce_sat3_to_l1(cnf: Cnf, unary: bool = False) -> Document:
    """Clause by clause: x becomes ``P(X=1) > 0`` and not-x its negation.

    With ``unary`` the zero is spelled ``P(X=1 & !X=1)`` and the empty CNF
    and empty clause become ``P(T) = P(T)`` and ``P(T) < P(T)``.
    """
    names = tuple(f"X{i}" for i in range(1, cnf.n_vars + 1))
    sig = Signature(2, names)
    one = Prob(Top()) if unary else Const(1)
    zero = Prob(Top()) if unary else Const(0)

    def lit(l: int) -> Formula:
        var = f"X{abs(l)}"
        pos = Lt(_integer(0, unary, witness_var=var), Prob(Atom(var, 1)))
        return pos if l > 0 else FNot(pos)

    clauses = []
    for cl in cnf.clauses:
        if not cl:
            clauses.append(Lt(Prob(Top()), zero))
            continue
        f = lit(cl[0])
        for l in cl[1:]:
            f = FOr(f, lit(l))
        clauses.append(f)
    return _finish(sig, conj(clauses, empty=Eq(Prob(Top()), one)))


# -- E-MajSat -----------------------------------------------------------------


def reduce_emajsat_to_l1(inst: EMajSatInstance, domain_size: int = 2) -> Document:
    """``sum y1..yn P(phi') >= sum t1..t(n-1) P(T)``.

    ``phi'`` reads x_i as ``Xi=0`` and y_i as ``Yi=yi`` for the dummy yi.
    """
    _require_binary(domain_size)
    nx, ny = len(inst.x_vars), len(inst.y_vars)
    xs = tuple(f"X{i}" for i in range(1, nx + 1))
    ys = tuple(f"Y{i}" for i in range(1, ny + 1))
    dummies = tuple(f"y{i}" for i in range(1, ny + 1))
    sig = Signature(2, xs + ys)
    atom_of = {v: Atom(X, 0) for v, X in zip(inst.x_vars, xs)}
    atom_of.update({v: Atom(Y, d) for v, Y, d in zip(inst.y_vars, ys, dummies)})

    def tr(p: Prop) -> Event:
        if isinstance(p, PVar):
            return atom_of[p.name]
        if isinstance(p, PNot):
            return Not(tr(p.arg))
        if isinstance(p, (PAnd, POr)):
            if not p.args:
                return Top() if isinstance(p, PAnd) else Not(Top())
            out = tr(p.args[0])
            for a in p.args[1:]:
                out = And(out, tr(a)) if isinstance(p, PAnd) else Or(out, tr(a))
            return out
        raise SourceFormatError(f"unexpected {type(p).__name__} in phi")

    lhs = _sums(dummies, Prob(tr(inst.phi)))
    if ny == 0:
        rhs: Term = Const(Fraction(1, 2))
    else:
        rhs = _sums([f"t{i}" for i in range(1, ny)], Prob(Top()))
    return _finish(sig, Le(rhs, lhs))


# -- causal order gadget and QBF ------------------------------------------------


def encode_causal_order(variables: Sequence[str], c: int = 2, control: str = ORDER_VAR, unary: bool = False) -> list[Formula]:
    """Equations forcing ``variables`` to appear in this causal order.

    Under ``[control=1, V_(j-1)=k]`` the next variable must equal ``k`` with
    probability one, for every value ``k``.  Primitives of the rest of the
    formula are expected to carry ``[control=0]`` (see ``add_intervention``).
    """
    if control in variables:
        raise NameClash(f"order variable {control!r} clashes with a variable name")
    out = []
    for prev, cur in zip(variables, variables[1:]):
        for k in range(c):
            out.append(Eq(Prob(PostInt(((control, 1), (prev, k)), Atom(cur, k))), _integer(1, unary)))
    return out


def add_intervention(node: Node, var: str, value: int) -> Node:
    """Prefix every primitive event with ``[var=value]``."""
    if isinstance(node, Prob):
        e = node.event
        if isinstance(e, PostInt):
            return Prob(PostInt(((var, value),) + e.intervention, e.body), span=node.span)
        return Prob(PostInt(((var, value),), e), span=node.span)
    return map_children(node, lambda ch: add_intervention(ch, var, value))


def reduce_qbf_to_l2(q: Qbf, domain_size: int = 2, unary: bool = False) -> Document:
    """``sum y P([y] psi') = 2^k`` plus the order gadget over the prefix.

    Prefix variable i becomes ``Xi``; universal ones are summed over via the
    dummy ``xi`` and intervened on.  Positive literals read ``Xi=1`` and
    negative literals ``Xi=0``.
    """
    _require_binary(domain_size)
    names = tuple(f"X{i}" for i in range(1, len(q.prefix) + 1))
    var_of = {v: X for (_, v), X in zip(q.prefix, names)}
    universal = [(X, f"x{i}") for i, ((qq, _), X) in enumerate(zip(q.prefix, names), 1) if qq == "a"]
    psi = _lit_event(q.matrix, var_of)
    main_event = PostInt(tuple((X, d) for X, d in universal), psi)
    k = len(universal)
    lhs = _sums([d for _, d in universal], Prob(main_event))
    main: Formula = Eq(lhs, _integer(2**k, unary))
    gadget = encode_causal_order(names, 2, ORDER_VAR, unary)
    if gadget:
        main = add_intervention(main, ORDER_VAR, 0)
        sig = Signature(2, names + (ORDER_VAR,))
    else:
        sig = Signature(2, names)
    return _finish(sig, conj(gadget + [main]))


# -- EPR ------------------------------------------------------------------------


def _neq(a: tuple, b: tuple) -> Event:
    """``[alpha]A != [beta]B`` for binary values; ``a = (A, alpha)``."""
    va, ia = a
    vb, ib = b

    def side(var, alpha, k):
        return PostInt(alpha, Atom(var, k)) if alpha else Atom(var, k)

    same = Or(
        And(side(va, ia, 0), side(vb, ib, 0)),
        And(side(va, ia, 1), side(vb, ib, 1)),
    )
    return Not(same)


def reduce_epr_to_l3(
    s: EprSentence, domain_size: int = 2, unary: bool = False, independence: str = "total"
) -> Document:
    """Constraint families for relations, occurrences, consistency, x/y order, and the main sum.

    ``independence="total"`` (default) states that intervening on the universal
    variables never changes an existential one.  ``independence="literal"`` keeps the
    variant that intervenes on every other variable as well; it only rules
    out direct dependence and so admits models where an existential
    variable tracks a universal one through another variable.
    """
    _require_binary(domain_size)
    if independence not in ("total", "literal"):
        raise ValueError("independence must be 'total' or 'literal'")
    rels = s.relations
    occs = _rel_atoms(s.matrix)

    xvar = {v: f"X_{v}" for v in s.exists_vars}
    yvar = {v: f"Y_{v}" for v in s.forall_vars}
    fo = {**xvar, **yvar}
    names: list[str] = list(xvar.values()) + list(yvar.values())
    zvars: dict[str, list[str]] = {}
    for r, k in rels.items():
        names.append(f"R_{r}")
        zvars[r] = [f"Z{l}_{r}" for l in range(1, k + 1)]
        names.extend(zvars[r])
    occ_var = []
    for j, occ in enumerate(occs, 1):
        v = f"R_{occ.rel}_{j}"
        occ_var.append(v)
        names.append(v)
    sig = Signature(2, tuple(names))
    vdummy = {v: f"v{i}" for i, v in enumerate(names)}
    zero = _integer(0, unary, witness_var=names[0]) if names else Const(0)

    def all_but(excluded: Iterable[str], override=None):
        excluded = set(excluded)
        override = override or {}
        return tuple((v, override.get(v, vdummy[v])) for v in names if v not in excluded)

    constraints: list[Formula] = []
    # relation depends only on its argument variables
    for r in rels:
        R = f"R_{r}"
        lhs = ((R, tuple((z, vdummy[z]) for z in zvars[r])))
        rhs = ((R, all_but([R])))
        constraints.append(Eq(_sums(list(vdummy.values()), Prob(_neq(lhs, rhs))), zero))
    # each occurrence depends only on its argument variables
    for occ, Rj in zip(occs, occ_var):
        args = tuple(dict.fromkeys(fo[a] for a in occ.args))
        lhs = (Rj, tuple((a, vdummy[a]) for a in args))
        rhs = (Rj, all_but([Rj]))
        constraints.append(Eq(_sums(list(vdummy.values()), Prob(_neq(lhs, rhs))), zero))
    # occurrence and relation agree on equal arguments
    for occ, Rj in zip(occs, occ_var):
        distinct = list(dict.fromkeys(occ.args))
        tdummy = {a: f"t{i}" for i, a in enumerate(distinct, 1)}
        lhs = (Rj, tuple((fo[a], tdummy[a]) for a in distinct))
        rhs = (f"R_{occ.rel}", tuple((z, tdummy[a]) for z, a in zip(zvars[occ.rel], occ.args)))
        constraints.append(Eq(_sums(list(tdummy.values()), Prob(_neq(lhs, rhs))), zero))
    # existential variables do not depend on universal ones
    ys = list(yvar.values())
    ydummy = {y: f"y{i}" for i, y in enumerate(ys, 1)}
    wdummy = {y: f"w{i}" for i, y in enumerate(ys, 1)}
    for X in xvar.values():
        if independence == "literal":
            lhs = (X, all_but([X]))
            rhs = (X, all_but([X], {y: wdummy[y] for y in ys}))
            dummies = list(vdummy.values()) + list(wdummy.values())
        else:
            lhs = (X, tuple((y, ydummy[y]) for y in ys))
            rhs = (X, tuple((y, wdummy[y]) for y in ys))
            dummies = list(ydummy.values()) + list(wdummy.values())
        constraints.append(Eq(_sums(dummies, Prob(_neq(lhs, rhs))), zero))

    # main condition
    occ_iter = iter(occ_var)

    def tr(p: Prop) -> Event:
        if isinstance(p, PRel):
            return Atom(next(occ_iter), 1)
        if isinstance(p, PEq):
            a, b = fo[p.left], fo[p.right]
            return Or(And(Atom(a, 0), Atom(b, 0)), And(Atom(a, 1), Atom(b, 1)))
        if isinstance(p, PNot):
            return Not(tr(p.arg))
        if isinstance(p, (PAnd, POr)):
            if not p.args:
                return Top() if isinstance(p, PAnd) else Not(Top())
            out = tr(p.args[0])
            for a in p.args[1:]:
                out = And(out, tr(a)) if isinstance(p, PAnd) else Or(out, tr(a))
            return out
        raise SourceFormatError(f"unexpected {type(p).__name__}")

    psi = tr(s.matrix)
    main = Eq(
        _sums([ydummy[y] for y in ys], Prob(PostInt(tuple((y, ydummy[y]) for y in ys), psi))),
        _integer(2 ** len(ys), unary),
    )
    constraints.append(main)
    return _finish(sig, conj(constraints))


def epr_natural_bounds(s: EprSentence):
    """Bounds under which the EPR search is complete.

    A true sentence has a witness in which quantified and ``Z`` variables are
    parentless, ``R_r`` reads its ``Z`` variables and each occurrence reads
    its argument variables, so the search is restricted to that shape.
    In-degree is capped at the largest arity.
    """
    from .solve import Bounds

    fo = {v: f"X_{v}" for v in s.exists_vars} | {v: f"Y_{v}" for v in s.forall_vars}
    allowed: list[tuple[str, tuple[str, ...]]] = [(v, ()) for v in fo.values()]
    for r, k in s.relations.items():
        zs = tuple(f"Z{l}_{r}" for l in range(1, k + 1))
        allowed.append((f"R_{r}", zs))
        allowed.extend((z, ()) for z in zs)
    for j, occ in enumerate(_rel_atoms(s.matrix), 1):
        allowed.append((f"R_{occ.rel}_{j}", tuple(dict.fromkeys(fo[a] for a in occ.args))))
    return Bounds(max_in_degree=max(s.relations.values(), default=0), allowed_parents=tuple(allowed))


# -- source formats ---------------------------------------------------------------


def _int_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("#") or line.startswith("%"):
            continue
        yield lineno, line


def _clause_ints(tokens, lineno):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise SourceFormatError(f"line {lineno}: expected integers") from None


def _parse_cnf_like(text: str, prefix_kinds: str):
    n_vars = n_clauses = None
    prefixes = []
    clauses = []
    current: list[int] = []
    for lineno, line in _int_lines(text):
        parts = line.split()
        if parts[0] == "p":
            if len(parts) != 4 or parts[1] != "cnf":
                raise SourceFormatError(f"line {lineno}: expected 'p cnf <vars> <clauses>'")
            try:
                n_vars, n_clauses = int(parts[2]), int(parts[3])
            except ValueError:
                raise SourceFormatError(f"line {lineno}: header counts must be integers") from None
            if n_vars < 0 or n_clauses < 0:
                raise SourceFormatError(f"line {lineno}: header counts must be non-negative")
            continue
        if parts[0] in prefix_kinds:
            nums = _clause_ints(parts[1:], lineno)
            if not nums or nums[-1] != 0:
                raise SourceFormatError(f"line {lineno}: quantifier line must end with 0")
            prefixes.append((parts[0], nums[:-1]))
            continue
        for v in _clause_ints(parts, lineno):
            if v == 0:
                clauses.append(tuple(current))
                current = []
            else:
                current.append(v)
    if current:
        raise SourceFormatError("last clause is not terminated by 0")
    if n_vars is None:
        raise SourceFormatError("missing 'p cnf' header")
    if len(clauses) != n_clauses:
        raise SourceFormatError(f"header declares {n_clauses} clauses, found {len(clauses)}")
    for cl in clauses:
        for l in cl:
            if abs(l) > n_vars:
                raise SourceFormatError(f"literal {l} exceeds declared variable count {n_vars}")
    return n_vars, prefixes, tuple(clauses)


def parse_dimacs(text: str) -> Cnf:
    n, _, clauses = _parse_cnf_like(text, "")
    return Cnf(n, clauses)


def parse_emajsat(text: str) -> EMajSatInstance:
    """DIMACS plus ``x <ids> 0`` and ``y <ids> 0`` lines naming the split."""
    n, prefixes, clauses = _parse_cnf_like(text, "xy")
    xs = [str(v) for kind, vs in prefixes if kind == "x" for v in vs]
    ys = [str(v) for kind, vs in prefixes if kind == "y" for v in vs]
    declared = set(xs) | set(ys)
    missing = {str(v) for v in range(1, n + 1)} - declared
    if missing:
        raise SourceFormatError(f"variables {sorted(missing, key=int)} are in neither the x nor the y line")
    return EMajSatInstance(tuple(xs), tuple(ys), Cnf(n, clauses).as_prop())


def parse_qdimacs(text: str) -> Qbf:
    """QDIMACS; variables used but not quantified become outermost existentials."""
    n, prefixes, clauses = _parse_cnf_like(text, "ae")
    prefix = [(kind, str(v)) for kind, vs in prefixes for v in vs]
    bound = {v for _, v in prefix}
    used = sorted({abs(l) for cl in clauses for l in cl})
    free = [("e", str(v)) for v in used if str(v) not in bound]
    return Qbf(tuple(free + prefix), Cnf(n, clauses).as_prop())


_EPR_TOKEN = re.compile(r"\s*(?:(<->|->|!=|[()!&|=,.])|([A-Za-z][A-Za-z0-9_]*))")


def parse_epr(text: str) -> EprSentence:
    """Parse ``exists x1 x2. forall y. <matrix>``.

    The matrix uses ``!``, ``&``, ``|``, ``->``, ``<->``, ``a = b``,
    ``a != b`` and relation atoms ``R(a, b)``.  Existential blocks must come
    before universal ones.
    """
    text = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _EPR_TOKEN.match(text, pos)
        if m is None:
            raise SourceFormatError(f"unexpected character {text[pos:].lstrip()[:1]!r}")
        toks.append(m.group(1) or m.group(2))
        pos = m.end()
    toks.append(None)
    i = 0

    def peek():
        return toks[i]

    def take(expected=None):
        nonlocal i
        t = toks[i]
        if expected is not None and t != expected:
            raise SourceFormatError(f"expected {expected!r}, got {t!r}")
        i += 1
        return t

    exists, forall = [], []
    seen_forall = False
    while peek() in ("exists", "forall"):
        q = take()
        if q == "exists" and seen_forall:
            raise SourceFormatError("existential quantifiers must precede universal ones")
        seen_forall |= q == "forall"
        block = []
        while peek() not in (".", None):
            block.append(take())
        take(".")
        if not block:
            raise SourceFormatError(f"empty {q} block")
        (exists if q == "exists" else forall).extend(block)

    def name():
        t = take()
        if t is None or not re.fullmatch(r"[A-Za-z][A-Za-z0-9_]*", t):
            raise SourceFormatError(f"expected a name, got {t!r}")
        return t

    def iff():
        a = imp()
        if peek() == "<->":
            take()
            b = imp()
            return PAnd((POr((PNot(a), b)), POr((a, PNot(b)))))
        return a

    def imp():
        a = disj()
        if peek() == "->":
            take()
            return POr((PNot(a), imp()))
        return a

    def disj():
        args = [conj_()]
        while peek() == "|":
            take()
            args.append(conj_())
        return args[0] if len(args) == 1 else POr(tuple(args))

    def conj_():
        args = [unary()]
        while peek() == "&":
            take()
            args.append(unary())
        return args[0] if len(args) == 1 else PAnd(tuple(args))

    def unary():
        if peek() == "!":
            take()
            return PNot(unary())
        if peek() == "(":
            take()
            f = iff()
            take(")")
            return f
        a = name()
        if peek() == "(":
            take()
            args = [name()]
            while peek() == ",":
                take()
                args.append(name())
            take(")")
            return PRel(a, tuple(args))
        if peek() == "=":
            take()
            return PEq(a, name())
        if peek() == "!=":
            take()
            return PNot(PEq(a, name()))
        raise SourceFormatError(f"expected a relation atom or an equality after {a!r}")

    matrix = iff()
    if peek() is not None:
        raise SourceFormatError(f"unexpected {peek()!r} after the matrix")
    return EprSentence(tuple(exists), tuple(forall), matrix)
