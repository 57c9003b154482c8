"""Backend selection for the counting kernels.

The compiled extension is used when it imports; setting ``PCH_PURE_PYTHON=1``
forces the pure-Python fallback.  ``BACKEND`` names the active one.
"""

from __future__ import annotations

import os

from . import _kernels_py
from ._kernels_py import AND, ATOM_CONST, ATOM_DUMMY, NOT, OR, TOP
from .core import And, Atom, Event, Not, Or, Top

if os.environ.get("PCH_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

count_models = _impl.count_models
count_table = _impl.count_table


def compile_event(event: Event, var_index: dict, dummy_index: dict) -> list[int]:
    """Postfix bytecode for a propositional event."""
    code: list[int] = []

    def emit(e):
        if isinstance(e, Top):
            code.append(TOP)
        elif isinstance(e, Atom):
            if isinstance(e.value, str):
                code.extend((ATOM_DUMMY, var_index[e.var], dummy_index[e.value]))
            else:
                code.extend((ATOM_CONST, var_index[e.var], e.value))
        elif isinstance(e, Not):
            emit(e.arg)
            code.append(NOT)
        elif isinstance(e, (And, Or)):
            emit(e.left)
            emit(e.right)
            code.append(AND if isinstance(e, And) else OR)
        else:
            raise TypeError(f"cannot compile {type(e).__name__}; event must be propositional")

    emit(event)
    return code
