"""Bounded satisfiability and validity checking.

Every model is a mixture of deterministic models, so a formula whose terms
are linear in probabilities becomes a linear feasibility problem over the
mixture weights once the value of every atomic sum is known for each
deterministic "column":

* layer 1: a column is a joint assignment of the endogenous variables;
* layers 2 and 3: a column is a deterministic mechanism profile.  Profiles
  are enumerated lazily: a parent set or a table entry is only chosen when
  evaluating some atom actually needs it.

Boolean structure is handled branch by branch in disjunctive normal form.
A satisfiable branch has a witness supported on at most ``rows + 1``
columns (Caratheodory), which bounds the support sets tried.

Formulas with conditionals or genuine products go to a grid search over
rational mixture weights with bounded denominators; that search can only
answer Sat or Unknown.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Callable, Mapping

from .core import (
    Add,
    And,
    Atom,
    CondProb,
    Const,
    Event,
    FAnd,
    FNot,
    Formula,
    Le,
    Mechanism,
    Mul,
    Neg,
    Not,
    Or,
    PostInt,
    Prob,
    Scm,
    Signature,
    Sum,
    Term,
    Top,
    Unknown as UnknownTerm,
    classify_fragment,
    desugar,
    substitute_dummy,
    walk,
)
from .errors import CapExceeded, FragmentError
from .evaluate import Evaluator, eval_formula, eval_l2_sums_by_interventions, eval_term, linearize
from .kernels import compile_event, count_models, count_table
from .linear import EQ, LE, LT, Constraint, LinearSystem, solve_linear_feasibility

__all__ = [
    "Bounds",
    "Sat",
    "UnsatWithinBounds",
    "Unknown",
    "NotValid",
    "ValidWithinBounds",
    "count_satisfying",
    "decompose_sum_l1",
    "marginalize_negfree",
    "check_sat",
    "check_sat_l1",
    "check_sat_l1_negfree",
    "check_sat_causal",
    "check_validity",
]


# -- bounds and verdicts -----------------------------------------------------


@dataclass(frozen=True)
class Bounds:
    """Search limits.  ``m`` defaults to the number of distinct atoms plus one.

    ``allowed_parents`` optionally restricts, per variable name, which
    variables may appear among its parents in the layer-2/3 search; listed
    variables draw parents only from their candidates, others are free.
    """

    m: int | None = None
    max_in_degree: int | None = None
    allowed_parents: tuple[tuple[str, tuple[str, ...]], ...] | None = None
    max_columns: int = 1 << 16
    max_nodes: int = 2_000_000
    max_leaves: int = 200_000
    max_subsets: int = 500_000
    max_branches: int = 10_000
    fm_cap: int = 20_000
    denom_cap: int = 6
    max_grid_points: int = 2_000_000
    max_dummy_assignments: int = 1 << 22
    jobs: int = 1

    def resolved(self, n_atoms: int) -> "Bounds":
        need = n_atoms + 1
        if self.m is None:
            return replace(self, m=need)
        if self.m < need:
            raise ValueError(f"support bound m={self.m} is below atoms + 1 = {need}")
        return self

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Sat:
    witness: Scm
    bounds: Bounds
    unknowns: Mapping[str, Fraction] = field(default_factory=dict)
    verdict = "sat"


@dataclass(frozen=True)
class UnsatWithinBounds:
    bounds: Bounds
    verdict = "unsat"


@dataclass(frozen=True)
class Unknown:
    bounds: Bounds
    reason: str
    verdict = "unknown"


@dataclass(frozen=True)
class NotValid:
    witness: Scm
    bounds: Bounds
    unknowns: Mapping[str, Fraction] = field(default_factory=dict)
    verdict = "not-valid"


@dataclass(frozen=True)
class ValidWithinBounds:
    bounds: Bounds
    verdict = "valid"


class WitnessError(AssertionError):
    """A constructed witness failed re-verification (an internal bug)."""


# -- counting ----------------------------------------------------------------


def count_satisfying(delta: Event, fixed: Mapping[str, int], dummies, c: int = 2, cap: int = 1 << 22) -> int:
    """Number of dummy assignments under which ``delta`` holds at ``fixed``."""
    dummies = list(dummies)
    if c ** len(dummies) > cap:
        raise CapExceeded("dummy assignments", cap)
    var_index = {v: i for i, v in enumerate(fixed)}
    code = compile_event(delta, var_index, {d: i for i, d in enumerate(dummies)})
    return count_models(code, list(fixed.values()), len(dummies), c)


def _peel(term: Term) -> tuple[tuple[str, ...], Event]:
    """``sum x1 ... sum xk P(delta)`` -> fresh dummy names and the event."""
    dummies = []
    while isinstance(term, Sum):
        fresh = f"#{len(dummies)}"
        term = substitute_dummy(term.body, term.dummy, fresh)
        dummies.append(fresh)
    if not isinstance(term, Prob):
        raise FragmentError("expected nested sums over a single probability")
    return tuple(dummies), term.event


def decompose_sum_l1(sum_term: Term, sig: Signature) -> dict[tuple[int, ...], int]:
    """Count of satisfying dummy assignments for every joint assignment.

    For every distribution p over joint assignments the term's value is
    ``sum(p[x] * counts[x])``.
    """
    dummies, event = _peel(sum_term)
    if any(isinstance(n, PostInt) for n in walk(event)):
        raise FragmentError("decomposition applies to layer-1 terms only")
    c, n = sig.domain_size, len(sig.endogenous_vars)
    code = compile_event(
        event, {v: i for i, v in enumerate(sig.endogenous_vars)}, {d: i for i, d in enumerate(dummies)}
    )
    counts = count_table(code, n, len(dummies), c)
    return dict(zip(itertools.product(range(c), repeat=n), counts))


# -- atoms, literals, branches ----------------------------------------------


class _Atoms:
    """Distinct atomic sums ``(k dummies, event)`` with canonical dummy names."""

    def __init__(self):
        self.index: dict[tuple[int, Event], int] = {}
        self.items: list[tuple[int, Event]] = []

    def add(self, dummies, event) -> int:
        for i, d in enumerate(dummies):
            event = substitute_dummy(event, d, f"${i}")
        key = (len(dummies), event)
        j = self.index.get(key)
        if j is None:
            j = self.index[key] = len(self.items)
            self.items.append(key)
        return j


@dataclass
class _Lin:
    """``sum(coefs[j] * S_j) + const`` compared with 0."""

    coefs: dict[int, Fraction]
    const: Fraction


def _linear_forms(f: Formula, c: int, atoms: _Atoms) -> dict[Le, _Lin]:
    counter = itertools.count()
    forms: dict[Le, _Lin] = {}
    for node in walk(f):
        if isinstance(node, Le) and node not in forms:
            coefs: dict[int, Fraction] = {}
            const = Fraction(0)
            for coef, dummies, event in linearize(Add(node.left, Neg(node.right)), counter=counter):
                if event is None:
                    const += coef * c ** len(dummies)
                else:
                    j = atoms.add(dummies, event)
                    coefs[j] = coefs.get(j, 0) + coef
            forms[node] = _Lin({j: a for j, a in coefs.items() if a != 0}, const)
    return forms


def _dnf(f: Formula, pos: bool = True):
    if isinstance(f, Le):
        yield ((pos, f),)
    elif isinstance(f, FNot):
        yield from _dnf(f.arg, not pos)
    elif isinstance(f, FAnd):
        if pos:
            for a in _dnf(f.left, True):
                for b in _dnf(f.right, True):
                    yield a + b
        else:
            yield from _dnf(f.left, False)
            yield from _dnf(f.right, False)
    else:
        raise TypeError(f"unexpected node {type(f).__name__} after desugaring")


def _branches(f: Formula, cap: int) -> list[tuple[tuple[bool, Le], ...]]:
    out, seen = [], set()
    for br in _dnf(f):
        lits = tuple(dict.fromkeys(br))
        key = frozenset(lits)
        if key in seen:
            continue
        seen.add(key)
        if any((not p, le) in key for p, le in lits):
            continue
        out.append(lits)
        if len(out) > cap:
            raise CapExceeded("dnf branches", cap)
    return out


def _top_conjuncts(f: Formula):
    if isinstance(f, FAnd):
        yield from _top_conjuncts(f.left)
        yield from _top_conjuncts(f.right)
    elif isinstance(f, FNot) and isinstance(f.arg, FNot):
        yield from _top_conjuncts(f.arg.arg)
    elif isinstance(f, Le):
        yield (True, f)
    elif isinstance(f, FNot) and isinstance(f.arg, Le):
        yield (False, f.arg)


def _forced(f: Formula, forms, atoms: _Atoms, c: int) -> dict[int, str]:
    """Atoms every support column must pin to 0 or to its maximum."""
    out: dict[int, str] = {}
    for pos, le in _top_conjuncts(f):
        lin = forms[le]
        if not pos or len(lin.coefs) != 1:
            continue
        (j, a), = lin.coefs.items()
        bound = -lin.const / a
        top = c ** atoms.items[j][0]
        if a > 0 and bound <= 0:
            out[j] = "zero"
        elif a < 0 and bound >= top:
            out[j] = "max"
    return out


# -- linear programme over columns ----------------------------------------------


def _rows_for(branch, forms) -> list[tuple[_Lin, bool]]:
    """Each literal as ``lin <= 0`` (non-strict) or ``-lin < 0`` (strict)."""
    rows = []
    for pos, le in branch:
        lin = forms[le]
        if pos:
            rows.append((lin, False))
        else:
            rows.append((_Lin({j: -a for j, a in lin.coefs.items()}, -lin.const), True))
    return rows


def _h(lin: _Lin, vec) -> Fraction:
    return sum((a * vec[j] for j, a in lin.coefs.items()), lin.const)


def _single_ok(rows, vec) -> bool:
    for lin, strict in rows:
        v = _h(lin, vec)
        if v > 0 or (strict and v == 0):
            return False
    return True


def _solve_subset(hs, strict_flags, subset, fm_cap):
    names = [f"p{i}" for i in subset]
    cons = [Constraint({nm: 1 for nm in names}, EQ, 1)]
    cons += [Constraint({nm: -1}, LE, 0) for nm in names]
    for h, strict in zip(hs, strict_flags):
        cons.append(Constraint({nm: h[i] for nm, i in zip(names, subset)}, LT if strict else LE, 0))
    sol = solve_linear_feasibility(LinearSystem(tuple(names), tuple(cons)), fm_cap)
    if sol is None:
        return None
    return [(i, sol[nm]) for nm, i in zip(names, subset) if sol[nm] != 0]


def _branch_lp(rows, vecs, m, bounds: Bounds, accept: Callable[[list[int]], bool]):
    """Find mixture weights over ``vecs`` meeting every row.

    Returns ``[(column index, weight)]`` or ``None``.  ``accept`` vetoes
    supports that cannot share one model (used for causal orders).
    """
    cols = list(range(len(vecs)))
    hs = [[_h(lin, vecs[i]) for i in range(len(vecs))] for lin, _ in rows]
    strict = [s for _, s in rows]
    live_rows = list(range(len(rows)))

    changed = True
    while changed and cols:
        changed = False
        for r in list(live_rows):
            vals = [hs[r][i] for i in cols]
            if all(v >= 0 for v in vals):
                if strict[r]:
                    return None
                keep = [i for i in cols if hs[r][i] == 0]
                if len(keep) != len(cols):
                    cols, changed = keep, True
                live_rows.remove(r)
            elif all(v <= 0 for v in vals) and not strict[r]:
                live_rows.remove(r)
    if not cols:
        return None

    rep: dict[tuple, list[int]] = {}
    for i in cols:
        rep.setdefault(tuple(hs[r][i] for r in live_rows), []).append(i)
    uniq = list(rep)
    hrows = [[key[k] for key in uniq] for k in range(len(live_rows))]
    sflags = [strict[r] for r in live_rows]

    def realise(sol):
        # map back to original columns, trying alternative representatives
        choices = [rep[uniq[i]] for i, _ in sol]
        for combo in itertools.islice(itertools.product(*choices), 256):
            if len(set(combo)) == len(combo) and accept(list(combo)):
                return [(ci, w) for ci, (_, w) in zip(combo, sol)]
        return None

    for k, key in enumerate(uniq):
        if all(v < 0 if s else v <= 0 for v, s in zip(key, sflags)):
            res = realise([(k, Fraction(1))])
            if res:
                return res

    kmax = min(m, len(live_rows) + 1, len(uniq))
    if kmax < 2:
        return None
    if len(uniq) <= 8:
        sol = _solve_subset(hrows, sflags, list(range(len(uniq))), bounds.fm_cap)
        if sol is None:
            return None
        if len(sol) <= kmax:
            res = realise(sol)
            if res:
                return res
    tried = 0
    for size in range(2, kmax + 1):
        for subset in itertools.combinations(range(len(uniq)), size):
            tried += 1
            if tried > bounds.max_subsets:
                raise CapExceeded("support subsets", bounds.max_subsets)
            sol = _solve_subset(hrows, sflags, list(subset), bounds.fm_cap)
            if sol:
                res = realise(sol)
                if res:
                    return res
    return None


# -- witnesses ----------------------------------------------------------------


def _fresh_exo(sig: Signature) -> str:
    name = "U"
    while name in sig.endogenous_vars:
        name += "_"
    return name


def _witness_l1(sig: Signature, support: list[tuple[tuple[int, ...], Fraction]]) -> Scm:
    u = _fresh_exo(sig)
    mechs = {
        v: Mechanism((), (u,), {(k,): x[i] for k, (x, _) in enumerate(support)})
        for i, v in enumerate(sig.endogenous_vars)
    }
    dist = tuple(((k,), w) for k, (_, w) in enumerate(support))
    return Scm(Signature(sig.domain_size, sig.endogenous_vars), ((u, len(support)),), dist, mechs)


@dataclass(frozen=True)
class _ProfileRep:
    parents: tuple  # per variable index: tuple of parent indices or None
    table: Mapping  # (var, key) -> value

    @property
    def edges(self) -> frozenset:
        return frozenset((p, v) for v, ps in enumerate(self.parents) if ps for p in ps)


def _topo(n: int, edges) -> list[int] | None:
    indeg = [0] * n
    succ = [[] for _ in range(n)]
    for p, v in edges:
        indeg[v] += 1
        succ[p].append(v)
    ready = sorted(i for i in range(n) if indeg[i] == 0)
    out = []
    while ready:
        i = ready.pop(0)
        out.append(i)
        for v in succ[i]:
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)
                ready.sort()
    return out if len(out) == n else None


def _witness_causal(sig: Signature, support: list[tuple[_ProfileRep, Fraction]]) -> Scm:
    names = sig.endogenous_vars
    n, c = len(names), sig.domain_size
    edges = frozenset().union(*(r.edges for r, _ in support))
    order = _topo(n, edges)
    if order is None:
        raise WitnessError("support profiles do not share a causal order")
    pos = {v: k for k, v in enumerate(order)}
    u = _fresh_exo(sig)
    mechs = {}
    for v in range(n):
        ups = sorted({p for r, _ in support for p in (r.parents[v] or ())}, key=pos.__getitem__)
        table = {}
        for vals in itertools.product(range(c), repeat=len(ups)):
            at = dict(zip(ups, vals))
            for k, (r, _) in enumerate(support):
                ps = r.parents[v] or ()
                table[vals + (k,)] = r.table.get((v, tuple(at[p] for p in ps)), 0)
        mechs[names[v]] = Mechanism(tuple(names[p] for p in ups), (u,), table)
    new_sig = Signature(c, tuple(names[i] for i in order))
    dist = tuple(((k,), w) for k, (_, w) in enumerate(support))
    return Scm(new_sig, ((u, len(support)),), dist, mechs)


def _verified(scm: Scm, formula: Formula, unknowns=None) -> Scm:
    if eval_formula(scm, formula, unknowns) is not True:
        raise WitnessError("constructed witness does not satisfy the formula")
    return scm


def _crosscheck_l2(scm: Scm, formula: Formula) -> None:
    tag = classify_fragment(formula)
    if tag.layer != 2 or any(isinstance(n, (CondProb, UnknownTerm)) for n in walk(formula)):
        return
    try:
        sums = eval_l2_sums_by_interventions(scm, formula)
    except FragmentError:
        return
    for s, value in sums.items():
        if eval_term(scm, s) != value:
            raise WitnessError("simulated-intervention sums disagree with direct evaluation")


# -- layer 1 ---------------------------------------------------------------


def _prepare(formula: Formula, sig: Signature):
    f = desugar(formula)
    for n in walk(f):
        if isinstance(n, (CondProb, UnknownTerm)):
            raise FragmentError("conditional probabilities and unknowns need the polynomial search")
    atoms = _Atoms()
    forms = _linear_forms(f, sig.domain_size, atoms)
    return f, atoms, forms


def _l1_linear(formula, sig, bounds, columns_for_atom) -> object:
    f, atoms, forms = _prepare(formula, sig)
    if any(isinstance(n, PostInt) for n in walk(f)):
        raise FragmentError("interventions require the causal solver")
    bounds = (bounds or Bounds()).resolved(len(atoms.items))
    c, n = sig.domain_size, len(sig.endogenous_vars)
    if c ** n > bounds.max_columns:
        return Unknown(bounds, f"{c}^{n} joint assignments exceed the column cap {bounds.max_columns}")
    assignments = list(itertools.product(range(c), repeat=n))
    try:
        per_atom = [columns_for_atom(k, ev) for k, ev in atoms.items]
        vecs = [tuple(col[i] for col in per_atom) for i in range(len(assignments))]
        for branch in _branches(f, bounds.max_branches):
            sol = _branch_lp(_rows_for(branch, forms), vecs, bounds.m, bounds, lambda s: True)
            if sol:
                support = [(assignments[i], w) for i, w in sol]
                return Sat(_verified(_witness_l1(sig, support), formula), bounds)
    except CapExceeded as e:
        return Unknown(bounds, str(e))
    return UnsatWithinBounds(bounds)


def check_sat_l1(formula: Formula, sig: Signature, bounds: Bounds | None = None):
    """Bounded-complete check for layer-1 linear formulas (with or without sums)."""
    tag = classify_fragment(formula)
    if tag.layer != 1 or tag.terms == "poly":
        raise FragmentError(f"check_sat_l1 handles layer-1 base/lin formulas, got {tag}")
    c, n = sig.domain_size, len(sig.endogenous_vars)
    vi = {v: i for i, v in enumerate(sig.endogenous_vars)}
    cap = (bounds or Bounds()).max_dummy_assignments

    def counts(k, ev):
        if c ** k > cap:
            raise CapExceeded("dummy assignments", cap)
        code = compile_event(ev, vi, {f"${i}": i for i in range(k)})
        return count_table(code, n, k, c)

    return _l1_linear(formula, sig, bounds, counts)


def _conjuncts(e: Event):
    if isinstance(e, And):
        yield from _conjuncts(e.left)
        yield from _conjuncts(e.right)
    else:
        yield e


def _negfree_parts(k: int, ev: Event):
    """Constant atoms and, per dummy, the variables it binds; ``None`` on contradiction."""
    consts: dict[str, int] = {}
    binds: list[list[str]] = [[] for _ in range(k)]
    for a in _conjuncts(ev):
        if isinstance(a, Top):
            continue
        if not isinstance(a, Atom):
            raise FragmentError("negation-free events are conjunctions of atoms")
        if isinstance(a.value, str):
            binds[int(a.value[1:])].append(a.var)
        else:
            if consts.get(a.var, a.value) != a.value:
                return None
            consts[a.var] = a.value
    return consts, binds


def _check_negfree(formula: Formula):
    for n in walk(formula):
        if isinstance(n, (Prob, CondProb)):
            for e in walk(n):
                if isinstance(e, (Not, Or)):
                    raise FragmentError("negation inside a primitive event")


def check_sat_l1_negfree(formula: Formula, sig: Signature, bounds: Bounds | None = None):
    """Layer-1 check for negation-free primitives without the brute-force counter.

    A negation-free event is a conjunction of atoms, so its count at a joint
    assignment factorises: zero if two constants clash or a constant
    disagrees, and otherwise one factor per dummy, equal to ``c`` when the
    dummy is unused and to 0 or 1 depending on whether the variables it
    binds agree.
    """
    _check_negfree(formula)
    tag = classify_fragment(formula)
    if tag.layer != 1 or tag.terms == "poly":
        raise FragmentError(f"negation-free path handles layer-1 base/lin formulas, got {tag}")
    c = sig.domain_size
    vi = {v: i for i, v in enumerate(sig.endogenous_vars)}
    assignments = list(itertools.product(range(c), repeat=len(sig.endogenous_vars)))

    def counts(k, ev):
        parts = _negfree_parts(k, ev)
        if parts is None:
            return [0] * len(assignments)
        consts, binds = parts
        free = sum(1 for b in binds if not b)
        scale = c ** free
        out = []
        for x in assignments:
            ok = all(x[vi[v]] == a for v, a in consts.items()) and all(
                len({x[vi[v]] for v in b}) == 1 for b in binds if b
            )
            out.append(scale if ok else 0)
        return out

    return _l1_linear(formula, sig, bounds, counts)


def marginalize_negfree(term: Term, sig: Signature) -> Term:
    """Remove sums whose dummies bind at most one variable of a negation-free event.

    ``sum x { P(X=x & Y=1) }`` becomes ``P(Y=1)``; an unused dummy becomes a
    factor ``c``.  Sums that tie two variables together are left alone.
    """
    if not isinstance(term, Sum):
        return term
    dummies, event = _peel(term)
    renamed = event
    for i, d in enumerate(dummies):
        renamed = substitute_dummy(renamed, d, f"${i}")
    parts = _negfree_parts(len(dummies), renamed)
    if parts is None:
        return Const(0)
    consts, binds = parts
    if any(len(b) > 1 for b in binds):
        return term
    # a dummy bound to a variable that also carries a constant pins the dummy
    kept = [Atom(v, a) for v, a in consts.items()]
    free = sum(1 for b in binds if not b)
    body = Prob(kept[0] if len(kept) == 1 else _and_all(kept)) if kept else Prob(Top())
    return body if free == 0 else Mul(Const(sig.domain_size ** free), body)


def _and_all(items):
    out = items[0]
    for e in items[1:]:
        out = And(out, e)
    return out


# -- lazy deterministic profiles (layers 2 and 3) ------------------------------

_ATOM, _NOT, _AND, _OR, _TOP, _INT = range(6)
_EMPTY: dict = {}


class _Need(Exception):
    __slots__ = ("kind", "var", "key", "state")

    def __init__(self, kind, var, key):
        self.kind, self.var, self.key = kind, var, key
        self.state = None


class _Prune(Exception):
    pass


def _compile_profile_event(e: Event, vi) -> tuple:
    if isinstance(e, Atom):
        return (_ATOM, vi[e.var], e.value)
    if isinstance(e, Top):
        return (_TOP,)
    if isinstance(e, Not):
        return (_NOT, _compile_profile_event(e.arg, vi))
    if isinstance(e, And):
        return (_AND, _compile_profile_event(e.left, vi), _compile_profile_event(e.right, vi))
    if isinstance(e, Or):
        return (_OR, _compile_profile_event(e.left, vi), _compile_profile_event(e.right, vi))
    if isinstance(e, PostInt):
        key = tuple(sorted({(vi[v], x) for v, x in e.intervention}))
        return (_INT, key, dict(key), _compile_profile_event(e.body, vi))
    raise TypeError(f"cannot compile {type(e).__name__}")


def _targets(e, out: set) -> set:
    tag = e[0]
    if tag == _ATOM:
        out.add(e[1])
    elif tag == _INT:
        _targets(e[3], out)
    elif tag != _TOP:
        for sub in e[1:]:
            _targets(sub, out)
    return out


def _atom_order(atoms, forced) -> list[int]:
    """Forced atoms first, each adding the fewest variables not yet read.

    Checking constraints that share variables back to back lets a bad
    table choice fail before unrelated choices multiply it.
    """
    reads = [set().union(*(_targets(ev, set()) for ev, _ in subs)) if subs else set() for subs in atoms]
    left = sorted(j for j in range(len(atoms)) if j in forced)
    order, seen = [], set()
    while left:
        j = min(left, key=lambda j: (len(reads[j] - seen), j))
        left.remove(j)
        order.append(j)
        seen |= reads[j]
    return order + [j for j in range(len(atoms)) if j not in forced]


class _ProfileSearch:
    """Depth-first enumeration of partial deterministic profiles.

    ``atoms`` is a list of ``[(compiled event, multiplicity)]`` per atom and
    ``forced`` maps atom positions to "zero"/"max".  Leaves are yielded as
    ``(count vector, _ProfileRep)``.
    """

    def __init__(self, n, c, atoms, forced, max_in_degree, bounds: Bounds, allowed=None):
        self.n, self.c = n, c
        self.allowed = allowed or [None] * n
        self.atoms = atoms
        self.order = _atom_order(atoms, forced)
        self.forced = forced
        self.maxes = [sum(m for _, m in subs) for subs in atoms]
        self.d = n - 1 if max_in_degree is None else min(max_in_degree, n - 1)
        self.parents: list = [None] * n
        self.table: dict = {}
        self.bounds = bounds
        self.nodes = 0

    def _value(self, v, alpha, cache):
        if v in alpha:
            return alpha[v]
        r = cache.get(v)
        if r is not None:
            return r
        ps = self.parents[v]
        if ps is None:
            raise _Need(0, v, None)
        key = tuple([self._value(p, alpha, cache) for p in ps]) if ps else ()
        r = self.table.get((v, key))
        if r is None:
            raise _Need(1, v, key)
        cache[v] = r
        return r

    def _sat(self, e, alpha, cache, ctx):
        tag = e[0]
        if tag == _ATOM:
            return self._value(e[1], alpha, cache) == e[2]
        if tag == _AND:
            return self._sat(e[1], alpha, cache, ctx) and self._sat(e[2], alpha, cache, ctx)
        if tag == _NOT:
            return not self._sat(e[1], alpha, cache, ctx)
        if tag == _OR:
            return self._sat(e[1], alpha, cache, ctx) or self._sat(e[2], alpha, cache, ctx)
        if tag == _TOP:
            return True
        sub = ctx.get(e[1])
        if sub is None:
            sub = ctx[e[1]] = {}
        return self._sat(e[3], e[2], sub, ctx)

    def _evaluate(self, state):
        """Resume evaluation from ``state = (pos, sub, partial, done)``."""
        pos, s0, partial, done = state
        done = list(done)
        for p in range(pos, len(self.order)):
            j = self.order[p]
            subs = self.atoms[j]
            force = self.forced.get(j)
            count = partial if p == pos else 0
            for s in range(s0 if p == pos else 0, len(subs)):
                ev, mult = subs[s]
                ctx = {(): {}}
                try:
                    hit = self._sat(ev, _EMPTY, ctx[()], ctx)
                except _Need as need:
                    need.state = (p, s, count, tuple(done))
                    raise
                if hit:
                    if force == "zero":
                        raise _Prune()
                    count += mult
                elif force == "max":
                    raise _Prune()
            done.append(count)
        vec = [0] * len(self.atoms)
        for p, j in enumerate(self.order):
            vec[j] = done[p]
        return tuple(vec)

    def _descendants(self, v):
        children = [[] for _ in range(self.n)]
        for w, ps in enumerate(self.parents):
            if ps:
                for p in ps:
                    children[p].append(w)
        seen, stack = set(), [v]
        while stack:
            for w in children[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen

    def _parent_options(self, v):
        desc = self._descendants(v)
        cand = self.allowed[v]
        allowed = [w for w in range(self.n) if w != v and w not in desc and (cand is None or w in cand)]
        for size in range(0, min(self.d, len(allowed)) + 1):
            yield from itertools.combinations(allowed, size)

    def _degenerate(self, v):
        """True if v's table is complete and ignores one of its parents.

        Such a profile duplicates one with the smaller parent set, which is
        enumerated first and is acyclic whenever this one is.
        """
        ps = self.parents[v]
        if not ps:
            return False
        keys = list(itertools.product(range(self.c), repeat=len(ps)))
        tab = self.table
        if any((v, k) not in tab for k in keys):
            return False
        for i in range(len(ps)):
            if all(
                tab[(v, k)] == tab[(v, k[:i] + (x,) + k[i + 1 :])]
                for k in keys
                if k[i] == 0
                for x in range(1, self.c)
            ):
                return True
        return False

    def leaves(self):
        yield from self._rec((0, 0, 0, ()))

    def _rec(self, state):
        self.nodes += 1
        if self.nodes > self.bounds.max_nodes:
            raise CapExceeded("profile search nodes", self.bounds.max_nodes)
        try:
            vec = self._evaluate(state)
        except _Prune:
            return
        except _Need as need:
            if need.kind == 0:
                for ps in self._parent_options(need.var):
                    self.parents[need.var] = ps
                    yield from self._rec(need.state)
                self.parents[need.var] = None
            else:
                slot = (need.var, need.key)
                for val in range(self.c):
                    self.table[slot] = val
                    if not self._degenerate(need.var):
                        yield from self._rec(need.state)
                del self.table[slot]
            return
        yield vec, _ProfileRep(tuple(self.parents), dict(self.table))


def _allowed(sig: Signature, bounds: Bounds):
    if not bounds.allowed_parents:
        return None
    vi = {v: i for i, v in enumerate(sig.endogenous_vars)}
    out = [None] * len(vi)
    for v, ps in bounds.allowed_parents:
        if v not in vi or any(p not in vi for p in ps):
            raise ValueError(f"allowed parents for {v!r} name unknown variables")
        out[vi[v]] = frozenset(vi[p] for p in ps)
    return out


def _template(e: Event, vi, di) -> tuple:
    """Like ``_compile_profile_event`` with dummies left as ``-1 - index``."""

    def val(x):
        return -1 - di[x] if isinstance(x, str) else x

    if isinstance(e, Atom):
        return (_ATOM, vi[e.var], val(e.value))
    if isinstance(e, Top):
        return (_TOP,)
    if isinstance(e, Not):
        return (_NOT, _template(e.arg, vi, di))
    if isinstance(e, (And, Or)):
        return (_AND if isinstance(e, And) else _OR, _template(e.left, vi, di), _template(e.right, vi, di))
    if isinstance(e, PostInt):
        return (_INT, tuple((vi[v], val(x)) for v, x in e.intervention), _template(e.body, vi, di))
    raise TypeError(f"cannot compile {type(e).__name__}")


def _fill(t, ys) -> tuple:
    tag = t[0]
    if tag == _ATOM:
        x = t[2]
        return (_ATOM, t[1], ys[-1 - x] if x < 0 else x)
    if tag == _TOP:
        return t
    if tag == _NOT:
        return (_NOT, _fill(t[1], ys))
    if tag == _INT:
        key = tuple(sorted({(v, ys[-1 - x] if x < 0 else x) for v, x in t[1]}))
        return (_INT, key, _fill(t[2], ys))
    return (tag, _fill(t[1], ys), _fill(t[2], ys))


def _finish_compiled(t) -> tuple:
    tag = t[0]
    if tag == _INT:
        return (_INT, t[1], dict(t[1]), _finish_compiled(t[2]))
    if tag == _NOT:
        return (_NOT, _finish_compiled(t[1]))
    if tag in (_AND, _OR):
        return (tag, _finish_compiled(t[1]), _finish_compiled(t[2]))
    return t


def _profile_atoms(items, sig: Signature, cap: int):
    vi = {v: i for i, v in enumerate(sig.endogenous_vars)}
    c = sig.domain_size
    out = []
    for k, ev in items:
        if c ** k > cap:
            raise CapExceeded("dummy assignments", cap)
        tmpl = _template(ev, vi, {f"${i}": i for i in range(k)})
        mult: dict[tuple, int] = {}
        for values in itertools.product(range(c), repeat=k):
            e = _fill(tmpl, values)
            mult[e] = mult.get(e, 0) + 1
        out.append([(_finish_compiled(e), m) for e, m in mult.items()])
    return out


def _collect_leaves(search: _ProfileSearch, bounds: Bounds, on_new=None):
    """Distinct count vectors with up to a few representatives each."""
    reps: dict[tuple, list[_ProfileRep]] = {}
    edge_sets: dict[tuple, set] = {}
    for vec, rep in search.leaves():
        lst = reps.get(vec)
        if lst is None:
            if len(reps) >= bounds.max_leaves:
                raise CapExceeded("distinct profile leaves", bounds.max_leaves)
            reps[vec] = [rep]
            edge_sets[vec] = {rep.edges}
            if on_new is not None:
                found = on_new(vec, rep)
                if found is not None:
                    return reps, found
        elif len(lst) < 8 and rep.edges not in edge_sets[vec]:
            lst.append(rep)
            edge_sets[vec].add(rep.edges)
    return reps, None


def check_sat_causal(formula: Formula, sig: Signature, bounds: Bounds | None = None):
    """Bounded check over mixtures of deterministic profiles (layers 2 and 3)."""
    f, atoms, forms = _prepare(formula, sig)
    bounds = (bounds or Bounds()).resolved(len(atoms.items))
    c, n = sig.domain_size, len(sig.endogenous_vars)
    try:
        branches = _branches(f, bounds.max_branches)
        if not branches:
            return UnsatWithinBounds(bounds)
        forced = _forced(f, forms, atoms, c)
        compiled = _profile_atoms(atoms.items, sig, bounds.max_dummy_assignments)
        search = _ProfileSearch(n, c, compiled, forced, bounds.max_in_degree, bounds, _allowed(sig, bounds))
        branch_rows = [_rows_for(br, forms) for br in branches]

        def on_new(vec, rep):
            for rows in branch_rows:
                if _single_ok(rows, vec):
                    return rep
            return None

        reps, found = _collect_leaves(search, bounds, on_new)
        if found is not None:
            return _causal_sat(sig, formula, [(found, Fraction(1))], bounds)
        vecs = list(reps)
        for rows in branch_rows:
            sol = _branch_lp(rows, vecs, bounds.m, bounds, accept_factory(reps, vecs, n))
            if sol:
                chosen = _choose_reps(reps, vecs, [i for i, _ in sol], n)
                support = [(r, w) for r, (_, w) in zip(chosen, sol)]
                return _causal_sat(sig, formula, support, bounds)
    except CapExceeded as e:
        return Unknown(bounds, str(e))
    return UnsatWithinBounds(bounds)


def _choose_reps(reps, vecs, idx, n):
    lists = [reps[vecs[i]] for i in idx]
    for combo in itertools.islice(itertools.product(*lists), 4096):
        if _topo(n, frozenset().union(*(r.edges for r in combo))) is not None:
            return list(combo)
    return None


def accept_factory(reps, vecs, n):
    def accept(support):
        return _choose_reps(reps, vecs, support, n) is not None

    return accept


def _causal_sat(sig, formula, support, bounds):
    scm = _verified(_witness_causal(sig, support), formula)
    _crosscheck_l2(scm, formula)
    return Sat(scm, bounds)


# -- polynomial / conditional search -------------------------------------------


class _GridEval(Evaluator):
    def __init__(self, probs: Mapping[Event, Fraction], unknowns=None):
        self.unknowns = dict(unknowns or {})
        self._p = probs

    def prob(self, e):
        return self._p[e]


def _needed_events(f) -> list[Event]:
    out: dict[Event, None] = {}
    for n in walk(f):
        if isinstance(n, Prob):
            out.setdefault(n.event, None)
        elif isinstance(n, CondProb):
            out.setdefault(And(n.event, n.condition), None)
            out.setdefault(n.condition, None)
    return list(out)


def _affine(t, probs):
    """Value of ``t`` as ``{unknown name: coef, None: const}``; ``None`` if undefined."""
    if isinstance(t, Prob):
        return {None: probs[t.event]}
    if isinstance(t, Const):
        return {None: t.value}
    if isinstance(t, UnknownTerm):
        return {t.name: Fraction(1)}
    if isinstance(t, CondProb):
        den = probs[t.condition]
        return None if den == 0 else {None: probs[And(t.event, t.condition)] / den}
    if isinstance(t, Neg):
        a = _affine(t.arg, probs)
        return None if a is None else {k: -v for k, v in a.items()}
    if isinstance(t, Add):
        a, b = _affine(t.left, probs), _affine(t.right, probs)
        if a is None or b is None:
            return None
        out = dict(a)
        for k, v in b.items():
            out[k] = out.get(k, 0) + v
        return out
    if isinstance(t, Mul):
        a, b = _affine(t.left, probs), _affine(t.right, probs)
        if a is None or b is None:
            return None
        if set(a) - {None} and set(b) - {None}:
            raise FragmentError("product of two unknowns")
        if set(a) - {None}:
            a, b = b, a
        k = a.get(None, Fraction(0))
        return {key: k * v for key, v in b.items()}
    raise TypeError(f"unexpected term {type(t).__name__}")


def _solve_unknowns(branches, probs, names):
    for br in branches:
        cons = []
        ok = True
        for pos, le in br:
            a = _affine(le.left, probs)
            b = _affine(le.right, probs)
            if a is None or b is None:
                ok = False
                break
            diff = dict(a)
            for k, v in b.items():
                diff[k] = diff.get(k, 0) - v
            const = diff.pop(None, Fraction(0))
            if pos:
                cons.append(Constraint(diff, LE, -const))
            else:
                cons.append(Constraint({k: -v for k, v in diff.items()}, LT, const))
        if not ok:
            continue
        sol = solve_linear_feasibility(LinearSystem(tuple(names), tuple(cons)))
        if sol is not None:
            return sol
    return None


def _compositions(d: int, s: int):
    """Ordered tuples of ``s`` positive integers summing to ``d`` with gcd 1."""
    for cuts in itertools.combinations(range(1, d), s - 1):
        parts = [b - a for a, b in zip((0,) + cuts, cuts + (d,))]
        if math.gcd(*parts) == 1:
            yield parts


def check_sat_poly(formula: Formula, sig: Signature, bounds: Bounds | None = None):
    """Grid search for formulas with conditionals, products or unknowns (Sat or Unknown)."""
    from .transform import expand_sums

    c, n = sig.domain_size, len(sig.endogenous_vars)
    bounds = bounds or Bounds()
    try:
        f = desugar(expand_sums(formula, c))
        events = _needed_events(f)
        bounds = bounds.resolved(len(events))
        names = sorted({t.name for t in walk(f) if isinstance(t, UnknownTerm)})
        branches = _branches(f, bounds.max_branches) if names else None
        layer1 = not any(isinstance(x, PostInt) for x in walk(f))
        if layer1:
            if c ** n > bounds.max_columns:
                return Unknown(bounds, f"{c}^{n} joint assignments exceed the column cap")
            vi = {v: i for i, v in enumerate(sig.endogenous_vars)}
            codes = [compile_event(e, vi, {}) for e in events]
            cols = []
            seen = set()
            for x in itertools.product(range(c), repeat=n):
                vec = tuple(count_models(code, x, 0, c) for code in codes)
                if vec not in seen:
                    seen.add(vec)
                    cols.append((vec, x))
        else:
            compiled = _profile_atoms([(0, e) for e in events], sig, bounds.max_dummy_assignments)
            search = _ProfileSearch(n, c, compiled, {}, bounds.max_in_degree, bounds, _allowed(sig, bounds))
            reps, _ = _collect_leaves(search, bounds)
            cols = [(vec, lst) for vec, lst in reps.items()]

        points = 0
        for d in range(1, bounds.denom_cap + 1):
            for s in range(1, min(bounds.m, len(cols), d) + 1):
                for subset in itertools.combinations(range(len(cols)), s):
                    if not layer1:
                        reps_choice = _choose_reps(
                            {i: cols[i][1] for i in subset}, list(range(len(cols))), list(subset), n
                        )
                        if reps_choice is None:
                            continue
                    for parts in _compositions(d, s):
                        points += 1
                        if points > bounds.max_grid_points:
                            raise CapExceeded("grid points", bounds.max_grid_points)
                        weights = [Fraction(p, d) for p in parts]
                        probs = {
                            e: sum((w * cols[i][0][k] for i, w in zip(subset, weights)), Fraction(0))
                            for k, e in enumerate(events)
                        }
                        if names:
                            z = _solve_unknowns(branches, probs, names)
                            if z is None:
                                continue
                        else:
                            z = None
                            if _GridEval(probs).formula(f) is not True:
                                continue
                        if layer1:
                            scm = _witness_l1(sig, [(cols[i][1], w) for i, w in zip(subset, weights)])
                        else:
                            scm = _witness_causal(sig, list(zip(reps_choice, weights)))
                        return Sat(_verified(scm, formula, z), bounds, z or {})
    except CapExceeded as e:
        return Unknown(bounds, str(e))
    return Unknown(
        bounds,
        f"no witness with denominators <= {bounds.denom_cap} and support <= {bounds.m} (denominator cap reached)",
    )


# -- dispatch -----------------------------------------------------------------


def _needs_poly(formula: Formula) -> bool:
    tag = classify_fragment(formula)
    return tag.terms == "poly" or any(isinstance(n, (CondProb, UnknownTerm)) for n in walk(formula))


def check_sat(formula: Formula, sig: Signature, bounds: Bounds | None = None):
    """Route to the solver matching the formula's fragment."""
    if _needs_poly(formula):
        return check_sat_poly(formula, sig, bounds)
    if classify_fragment(formula).layer == 1:
        return check_sat_l1(formula, sig, bounds)
    return check_sat_causal(formula, sig, bounds)


def check_validity(formula: Formula, sig: Signature, bounds: Bounds | None = None):
    """Dual of ``check_sat``: a model of the negation is a counterexample."""
    v = check_sat(FNot(formula), sig, bounds)
    if isinstance(v, Sat):
        return NotValid(v.witness, v.bounds, v.unknowns)
    if isinstance(v, UnsatWithinBounds):
        return ValidWithinBounds(v.bounds)
    return v
