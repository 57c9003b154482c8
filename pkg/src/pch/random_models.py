"""Seeded random SCMs with exact weights, for probes and tests."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from .core import Mechanism, Scm, Signature


def random_distribution(rng: random.Random, k: int, max_weight: int = 9) -> list[Fraction]:
    """``k`` positive rationals summing to one."""
    raw = [rng.randint(1, max_weight) for _ in range(k)]
    total = sum(raw)
    return [Fraction(r, total) for r in raw]


def random_scm(
    sig: Signature,
    rng: random.Random,
    n_exo: int = 2,
    exo_size: int = 2,
    max_endo_parents: int | None = None,
    zero_weights: bool = False,
) -> Scm:
    """A random model whose causal order is the declared variable order.

    Each variable gets a random subset of earlier variables and of the
    exogenous variables as parents and a uniformly random table.  With
    ``zero_weights`` some exogenous assignments receive probability zero.
    """
    c = sig.domain_size
    exo = tuple((f"U{i}", exo_size) for i in range(1, n_exo + 1))
    assignments = list(itertools.product(range(exo_size), repeat=n_exo))
    weights = random_distribution(rng, len(assignments))
    if zero_weights and len(assignments) > 1:
        for i in rng.sample(range(len(assignments)), rng.randint(0, len(assignments) - 1)):
            weights[i] = Fraction(0)
        total = sum(weights)
        weights = [w / total for w in weights]
    dist = tuple((u, w) for u, w in zip(assignments, weights) if w)
    mechs = {}
    for i, v in enumerate(sig.endogenous_vars):
        earlier = list(sig.endogenous_vars[:i])
        k = rng.randint(0, len(earlier) if max_endo_parents is None else min(max_endo_parents, len(earlier)))
        endo_p = tuple(sorted(rng.sample(earlier, k), key=earlier.index))
        exo_p = tuple(n for n, _ in exo if rng.random() < 0.6)
        sizes = [c] * len(endo_p) + [exo_size] * len(exo_p)
        table = {key: rng.randrange(c) for key in itertools.product(*[range(s) for s in sizes])}
        mechs[v] = Mechanism(endo_p, exo_p, table)
    return Scm(sig, exo, dist, mechs)
