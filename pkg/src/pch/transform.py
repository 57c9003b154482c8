"""Formula transformations: sum expansion and division elimination."""

from __future__ import annotations

from .core import (
    And,
    CondProb,
    Const,
    Eq,
    FNot,
    Formula,
    Mul,
    Node,
    Prob,
    Sum,
    Unknown,
    add_all,
    children,
    conj,
    map_children,
    substitute_dummy,
    walk,
)
from .errors import CapExceeded, FragmentError

__all__ = ["expand_sums", "eliminate_conditionals"]

DEFAULT_EXPANSION_CAP = 200_000


def _estimate(node: Node, c: int) -> int:
    if isinstance(node, Sum):
        return c * _estimate(node.body, c) + (c - 1)
    return 1 + sum(_estimate(ch, c) for ch in children(node))


def _expand(node: Node, c: int) -> Node:
    if isinstance(node, Sum):
        return add_all(_expand(substitute_dummy(node.body, node.dummy, v), c) for v in range(c))
    return map_children(node, lambda ch: _expand(ch, c))


def expand_sums(formula: Node, domain_size: int = 2, max_size: int = DEFAULT_EXPANSION_CAP) -> Node:
    """Replace every sum by the explicit addition of its ``c`` instances.

    Raises ``CapExceeded`` when the expanded tree would exceed ``max_size``
    nodes.  Sum-free input is returned as is.
    """
    if not any(isinstance(n, Sum) for n in walk(formula)):
        return formula
    size = _estimate(formula, domain_size)
    if size > max_size:
        raise CapExceeded("expansion size", max_size)
    return _expand(formula, domain_size)


def eliminate_conditionals(formula: Formula, prefix: str = "z") -> Formula:
    """Replace each conditional by a fresh unknown and add its defining constraints.

    Every occurrence of ``P(a | b)`` becomes ``?zK`` together with the side
    conditions ``P(a & b) = ?zK * P(b)`` and ``~(P(b) = 0)``, conjoined after
    the rewritten formula.  Occurrences are numbered left to right; repeated
    occurrences get distinct unknowns.
    """
    if not any(isinstance(n, CondProb) for n in walk(formula)):
        return formula
    for n in walk(formula):
        if isinstance(n, Sum) and any(isinstance(m, CondProb) for m in walk(n)):
            raise FragmentError("expand sums before eliminating conditionals under them")

    sides: list[Formula] = []
    counter = [0]

    def rewrite(node: Node) -> Node:
        if isinstance(node, CondProb):
            counter[0] += 1
            z = Unknown(f"{prefix}{counter[0]}", span=node.span)
            den = Prob(node.condition)
            sides.append(Eq(Prob(And(node.event, node.condition)), Mul(z, den)))
            sides.append(FNot(Eq(den, Const(0))))
            return z
        return map_children(node, rewrite)

    main = rewrite(formula)
    return conj([main] + sides)
