"""Compare the compiled and pure-Python counting kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both backends must give identical count tables; the script exits non-zero
if they differ or the compiled extension is missing.
"""

from __future__ import annotations

import argparse
import sys
import time

from pch import _kernels_py
from pch.core import Prob, Signature, Sum, walk
from pch.kernels import compile_event
from pch.parser import parse_formula

CASES = [
    # (label, domain size, formula text holding one sum term)
    ("3 vars, 2 dummies", 2, "sum x { sum y { P((A=x | B=y) & !(C=x & A=y)) } } = 0"),
    ("4 vars, 3 dummies", 3, "sum x { sum y { sum z { P(((A=x & B=y) | (C=z & !D=x) | (A=z & D=y))) } } } = 0"),
    ("5 vars, 4 dummies", 3, "sum w { sum x { sum y { sum z { P((A=w | B=x) & (C=y | D=z) & !(E=w & A=z)) } } } } = 0"),
]


def _case(c: int, text: str):
    f = parse_formula(text)
    sig = Signature(c, tuple(sorted({n.var for n in walk(f) if hasattr(n, "var")})))
    term = next(n for n in walk(f) if isinstance(n, Sum))
    dummies = []
    while isinstance(term, Sum):
        dummies.append(term.dummy)
        term = term.body
    assert isinstance(term, Prob)
    vi = {v: i for i, v in enumerate(sig.endogenous_vars)}
    di = {d: i for i, d in enumerate(dummies)}
    return compile_event(term.event, vi, di), len(vi), len(di)


def _time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    try:
        from pch import _kernels as compiled
    except ImportError:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        return 1
    print(f"{'case':<22}{'python (s)':>12}{'cython (s)':>12}{'speedup':>10}")
    for label, c, text in CASES:
        code, n_vars, n_dummies = _case(c, text)
        py = _kernels_py.count_table(code, n_vars, n_dummies, c)
        cy = list(compiled.count_table(code, n_vars, n_dummies, c))
        if py != cy:
            print(f"{label}: backends disagree")
            return 1
        tp = _time(lambda: _kernels_py.count_table(code, n_vars, n_dummies, c), args.repeat)
        tc = _time(lambda: compiled.count_table(code, n_vars, n_dummies, c), args.repeat)
        print(f"{label:<22}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
