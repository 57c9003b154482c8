# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled counting kernels; see ``_kernels_py`` for the bytecode format."""

from libc.stdlib cimport malloc, free

cdef enum:
    TOP = 0
    ATOM_CONST = 1
    ATOM_DUMMY = 2
    NOT = 3
    AND = 4
    OR = 5


cdef inline bint _run(const int* code, int n, const int* x, const int* y, char* stack) except -1:
    cdef int i = 0
    cdef int sp = 0
    cdef int op
    while i < n:
        op = code[i]
        if op == ATOM_CONST:
            stack[sp] = x[code[i + 1]] == code[i + 2]
            sp += 1
            i += 3
        elif op == ATOM_DUMMY:
            stack[sp] = x[code[i + 1]] == y[code[i + 2]]
            sp += 1
            i += 3
        elif op == NOT:
            stack[sp - 1] = not stack[sp - 1]
            i += 1
        elif op == AND:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] and stack[sp]
            i += 1
        elif op == OR:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] or stack[sp]
            i += 1
        elif op == TOP:
            stack[sp] = 1
            sp += 1
            i += 1
        else:
            raise ValueError("bad opcode %d" % op)
    return stack[sp - 1]


cdef inline bint _advance(int* y, int k, int c):
    cdef int j = k - 1
    while j >= 0 and y[j] == c - 1:
        y[j] = 0
        j -= 1
    if j < 0:
        return False
    y[j] += 1
    return True


cdef long _count(const int* code, int n, const int* x, int* y, int k, int c, char* stack) except -1:
    cdef long total = 0
    cdef int j
    for j in range(k):
        y[j] = 0
    while True:
        if _run(code, n, x, y, stack):
            total += 1
        if not _advance(y, k, c):
            break
    return total


def count_models(code, fixed, int n_dummies, int c):
    cdef int n = len(code)
    cdef int nv = len(fixed)
    cdef int* cc = <int*>malloc((n + 1) * sizeof(int))
    cdef int* x = <int*>malloc((nv + 1) * sizeof(int))
    cdef int* y = <int*>malloc((n_dummies + 1) * sizeof(int))
    cdef char* stack = <char*>malloc(n + 1)
    cdef int i
    try:
        for i in range(n):
            cc[i] = code[i]
        for i in range(nv):
            x[i] = fixed[i]
        return _count(cc, n, x, y, n_dummies, c, stack)
    finally:
        free(cc)
        free(x)
        free(y)
        free(stack)


def count_table(code, int n_vars, int n_dummies, int c):
    cdef int n = len(code)
    cdef int* cc = <int*>malloc((n + 1) * sizeof(int))
    cdef int* x = <int*>malloc((n_vars + 1) * sizeof(int))
    cdef int* y = <int*>malloc((n_dummies + 1) * sizeof(int))
    cdef char* stack = <char*>malloc(n + 1)
    cdef int i
    out = []
    try:
        for i in range(n):
            cc[i] = code[i]
        for i in range(n_vars):
            x[i] = 0
        while True:
            out.append(_count(cc, n, x, y, n_dummies, c, stack))
            if not _advance(x, n_vars, c):
                break
        return out
    finally:
        free(cc)
        free(x)
        free(y)
        free(stack)
