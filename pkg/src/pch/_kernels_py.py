"""Pure-Python counting kernels; same interface as the compiled ``_kernels``.

Events are compiled to a postfix bytecode of ints:

    TOP                      push true
    ATOM_CONST var val       push x[var] == val
    ATOM_DUMMY var d         push x[var] == y[d]
    NOT / AND / OR           usual stack operations
"""

from __future__ import annotations

TOP, ATOM_CONST, ATOM_DUMMY, NOT, AND, OR = range(6)


def _run(code, x, y) -> bool:
    stack = []
    push, pop = stack.append, stack.pop
    i, n = 0, len(code)
    while i < n:
        op = code[i]
        if op == ATOM_CONST:
            push(x[code[i + 1]] == code[i + 2])
            i += 3
        elif op == ATOM_DUMMY:
            push(x[code[i + 1]] == y[code[i + 2]])
            i += 3
        elif op == NOT:
            push(not pop())
            i += 1
        elif op == AND:
            b = pop()
            push(pop() and b)
            i += 1
        elif op == OR:
            b = pop()
            push(pop() or b)
            i += 1
        elif op == TOP:
            push(True)
            i += 1
        else:
            raise ValueError(f"bad opcode {op}")
    return stack[-1]


def _assignments(k, c):
    y = [0] * k
    while True:
        yield y
        j = k - 1
        while j >= 0 and y[j] == c - 1:
            y[j] = 0
            j -= 1
        if j < 0:
            return
        y[j] += 1


def count_models(code, fixed, n_dummies: int, c: int) -> int:
    """Number of dummy assignments in Val^n_dummies satisfying the event at ``fixed``."""
    code = list(code)
    x = list(fixed)
    return sum(1 for y in _assignments(n_dummies, c) if _run(code, x, y))


def count_table(code, n_vars: int, n_dummies: int, c: int) -> list[int]:
    """``count_models`` for every joint assignment, in lexicographic order."""
    code = list(code)
    ys = [list(y) for y in _assignments(n_dummies, c)]
    out = []
    for x in _assignments(n_vars, c):
        out.append(sum(1 for y in ys if _run(code, x, y)))
    return out
