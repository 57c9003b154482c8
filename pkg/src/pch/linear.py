"""Exact rational linear feasibility by Fourier-Motzkin elimination.

Equalities are eliminated first by substitution.  Inequalities carry a
strictness bit through every combination, and the witness is rebuilt by
back-substitution, choosing a point inside each (possibly open) interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .errors import CapExceeded

LE, LT, EQ = "<=", "<", "="

__all__ = ["Constraint", "LinearSystem", "solve_linear_feasibility", "negate_constraint"]


@dataclass(frozen=True)
class Constraint:
    """``sum(coeffs[v] * v) rel rhs``"""

    coeffs: Mapping[str, Fraction]
    rel: str
    rhs: Fraction

    def __post_init__(self):
        if self.rel not in (LE, LT, EQ):
            raise ValueError(f"unknown relation {self.rel!r}")
        object.__setattr__(
            self, "coeffs", {v: Fraction(a) for v, a in self.coeffs.items() if a != 0}
        )
        object.__setattr__(self, "rhs", Fraction(self.rhs))

    def lhs(self, point: Mapping[str, Fraction]) -> Fraction:
        return sum((a * point.get(v, 0) for v, a in self.coeffs.items()), Fraction(0))

    def holds(self, point: Mapping[str, Fraction]) -> bool:
        s = self.lhs(point)
        if self.rel == LE:
            return s <= self.rhs
        if self.rel == LT:
            return s < self.rhs
        return s == self.rhs


def negate_constraint(c: Constraint) -> list[Constraint]:
    """Alternatives whose disjunction is the negation of ``c``."""
    flipped = {v: -a for v, a in c.coeffs.items()}
    if c.rel == LE:
        return [Constraint(flipped, LT, -c.rhs)]
    if c.rel == LT:
        return [Constraint(flipped, LE, -c.rhs)]
    return [Constraint(c.coeffs, LT, c.rhs), Constraint(flipped, LT, -c.rhs)]


@dataclass(frozen=True)
class LinearSystem:
    variables: tuple[str, ...]
    constraints: tuple[Constraint, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "constraints", tuple(self.constraints))


# internal row: (coeff dict, strict flag, rhs) meaning sum <= rhs or < rhs


def _normalize(coeffs: dict, strict: bool, rhs: Fraction, order: dict):
    """Scale so the first coefficient (in variable order) has magnitude one."""
    first = min(coeffs, key=order.__getitem__)
    k = abs(coeffs[first])
    key = tuple(sorted(((v, a / k) for v, a in coeffs.items()), key=lambda p: order[p[0]]))
    return key, strict, rhs / k


def _dedupe(rows, order):
    best: dict[tuple, tuple[bool, Fraction]] = {}
    for coeffs, strict, rhs in rows:
        key, strict, rhs = _normalize(coeffs, strict, rhs, order)
        old = best.get(key)
        if old is None or rhs < old[1] or (rhs == old[1] and strict and not old[0]):
            best[key] = (strict, rhs)
    return [(dict(key), s, r) for key, (s, r) in best.items()]


def _pick(lo, lo_strict, hi, hi_strict) -> Fraction:
    """A point of the interval, preferring zero, then a closed endpoint."""
    def ok(x):
        if lo is not None and (x < lo or (lo_strict and x == lo)):
            return False
        if hi is not None and (x > hi or (hi_strict and x == hi)):
            return False
        return True

    if ok(Fraction(0)):
        return Fraction(0)
    if lo is not None and not lo_strict:
        return lo
    if hi is not None and not hi_strict:
        return hi
    if lo is not None and hi is not None:
        return (lo + hi) / 2
    if lo is not None:
        return lo + 1
    return hi - 1


def solve_linear_feasibility(
    system: LinearSystem, max_constraints: int = 20000
) -> dict[str, Fraction] | None:
    """A rational point satisfying every constraint, or ``None`` if infeasible.

    Raises ``CapExceeded`` when elimination produces more than
    ``max_constraints`` rows.
    """
    order = {v: i for i, v in enumerate(system.variables)}
    for c in system.constraints:
        for v in c.coeffs:
            if v not in order:
                order[v] = len(order)

    eqs = [(dict(c.coeffs), c.rhs) for c in system.constraints if c.rel == EQ]
    rows = [(dict(c.coeffs), c.rel == LT, c.rhs) for c in system.constraints if c.rel != EQ]

    # Gaussian substitution: v = const - sum(coef * others)
    subs: list[tuple[str, dict, Fraction]] = []
    while eqs:
        coeffs, rhs = eqs.pop()
        if not coeffs:
            if rhs != 0:
                return None
            continue
        v = min(coeffs, key=order.__getitem__)
        a = coeffs.pop(v)
        expr = {w: b / a for w, b in coeffs.items()}
        const = rhs / a

        def apply(cf: dict, r: Fraction):
            b = cf.pop(v, None)
            if b is None:
                return cf, r
            for w, e in expr.items():
                nv = cf.get(w, 0) - b * e
                if nv:
                    cf[w] = nv
                else:
                    cf.pop(w, None)
            return cf, r - b * const

        eqs = [apply(cf, r) for cf, r in eqs]
        rows = [(lambda cr, s: (cr[0], s, cr[1]))(apply(cf, r), s) for cf, s, r in rows]
        subs.append((v, expr, const))

    eliminated: list[tuple[str, list]] = []
    while True:
        live = []
        for cf, strict, rhs in rows:
            if not cf:
                if rhs < 0 or (strict and rhs == 0):
                    return None
            else:
                live.append((cf, strict, rhs))
        rows = _dedupe(live, order) if live else []
        if not rows:
            break
        if len(rows) > max_constraints:
            raise CapExceeded("fm_constraints", max_constraints)
        counts: dict[str, list[int]] = {}
        for cf, _, _ in rows:
            for v, a in cf.items():
                pn = counts.setdefault(v, [0, 0])
                pn[0 if a > 0 else 1] += 1
        v = min(counts, key=lambda w: (counts[w][0] * counts[w][1], order[w]))
        pos = [r for r in rows if r[0].get(v, 0) > 0]
        neg = [r for r in rows if r[0].get(v, 0) < 0]
        rest = [r for r in rows if v not in r[0]]
        eliminated.append((v, pos + neg))
        combined = []
        for pc, ps, pr in pos:
            a = pc[v]
            for nc, ns, nr in neg:
                b = -nc[v]
                cf = {}
                for w in set(pc) | set(nc):
                    if w == v:
                        continue
                    val = pc.get(w, 0) / a + nc.get(w, 0) / b
                    if val:
                        cf[w] = val
                combined.append((cf, ps or ns, pr / a + nr / b))
        if len(rest) + len(combined) > max_constraints:
            raise CapExceeded("fm_constraints", max_constraints)
        rows = rest + combined

    point: dict[str, Fraction] = {}
    for v, bounds in reversed(eliminated):
        lo = hi = None
        lo_s = hi_s = False
        for cf, strict, rhs in bounds:
            a = cf[v]
            rest = sum((b * point.get(w, 0) for w, b in cf.items() if w != v), Fraction(0))
            bound = (rhs - rest) / a
            if a > 0:
                if hi is None or bound < hi or (bound == hi and strict):
                    hi, hi_s = bound, strict
            else:
                if lo is None or bound > lo or (bound == lo and strict):
                    lo, lo_s = bound, strict
        point[v] = _pick(lo, lo_s, hi, hi_s)
    for v, expr, const in reversed(subs):
        point[v] = const - sum((e * point.get(w, 0) for w, e in expr.items()), Fraction(0))
    for v in order:
        point.setdefault(v, Fraction(0))

    for c in system.constraints:
        if not c.holds(point):
            raise AssertionError(f"back-substitution produced a point violating {c}")
    return {v: point[v] for v in order}
