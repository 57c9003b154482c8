"""Text syntax for formulas, JSON model files, and the matching printers.

Formula files look like::

    domain 2; vars X, Y;
    P(Y=1 | X=1) = 2/5 && sum x { P([X=x] Y=1) } <= 1

Events use ``&``, ``!`` and ``|``; formulas use ``&&``, ``~``, ``||`` and
``->``.  Inside ``P(...)`` a bare ``|`` is the conditioning bar, so an event
disjunction there needs its own parentheses: ``P((A=1 | B=1))``.
"""

from __future__ import annotations

import bisect
import json
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .core import (
    RESERVED_NAMES,
    Add,
    And,
    Atom,
    CondProb,
    Const,
    Document,
    Eq,
    Event,
    FAnd,
    FNot,
    FOr,
    Formula,
    Implies,
    Le,
    Lt,
    Mechanism,
    Mul,
    Neg,
    Node,
    Not,
    Or,
    PostInt,
    Prob,
    Scm,
    Signature,
    SourceSpan,
    Sum,
    Top,
    Unknown,
    validate,
    walk,
)
from .errors import DuplicateAssignment, ModelError, ParseError

__all__ = [
    "parse_formula",
    "parse_document",
    "load_document",
    "print_formula",
    "print_node",
    "print_document",
    "parse_model",
    "load_model",
    "dump_model",
]

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<unk>\?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>&&|\|\||->|<=|>=|!=|[-+*/<>=&|!~()\[\]{},;])
    """,
    re.X,
)

_RELOPS = ("<=", "<", "=", ">=", ">", "!=")
_AFTER_TERM = frozenset(_RELOPS) | {"+", "-", "*", "/"}


@dataclass(frozen=True)
class _Tok:
    kind: str  # num | name | unk | op | eof
    text: str
    start: int
    end: int


class _Source:
    def __init__(self, text: str):
        self.text = text
        self.line_starts = [0] + [m.end() for m in re.finditer(r"\n", text)]
        self.ascii = text.isascii()

    def _byte(self, i: int) -> int:
        return i if self.ascii else len(self.text[:i].encode("utf-8"))

    def span(self, start: int, end: int) -> SourceSpan:
        line = bisect.bisect_right(self.line_starts, start)
        col = start - self.line_starts[line - 1] + 1
        return SourceSpan(line, col, self._byte(start), self._byte(end))


def _tokenize(src: _Source) -> list[_Tok]:
    text = src.text
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", src.span(pos, pos + 1))
        kind = m.lastgroup
        if kind != "ws":
            out.append(_Tok(kind, m.group(), m.start(), m.end()))
        pos = m.end()
    out.append(_Tok("eof", "", len(text), len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.src = _Source(text)
        self.toks = _tokenize(self.src)
        self.i = 0
        self._paren_memo: dict[int, object] = {}

    # -- token helpers --
    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind in ("op", "name") and t.text == text

    def next(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, message: str, expected=()):
        t = self.peek()
        raise ParseError(message, self.src.span(t.start, t.end), expected)

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            got = self.peek().text or "end of input"
            self.fail(f"unexpected {got!r}", [text])
        return self.next()

    def name(self, what: str = "name") -> str:
        t = self.peek()
        if t.kind != "name":
            self.fail(f"expected a {what}, got {t.text or 'end of input'!r}", [what])
        if t.text in RESERVED_NAMES:
            self.fail(f"{t.text!r} is reserved and cannot be used as a {what}", [what])
        return self.next().text

    def sp(self, start_tok: _Tok) -> SourceSpan:
        end = self.toks[self.i - 1].end if self.i > 0 else start_tok.end
        return self.src.span(start_tok.start, max(end, start_tok.start))

    # -- document --
    def header(self):
        domain, names = None, None
        if self.at("domain") and self.peek(1).kind == "num":
            self.next()
            tok = self.next()
            if not tok.text.isdigit():
                self.i -= 1
                self.fail("domain size must be an integer", ["integer"])
            domain = int(tok.text)
            self.expect(";")
        if self.at("vars") and self.peek(1).text == ";":
            self.next()
            self.next()
            names = []
        elif self.at("vars") and self.peek(1).kind == "name":
            self.next()
            names = [self.name("variable name")]
            while self.accept(","):
                names.append(self.name("variable name"))
            self.expect(";")
        return domain, names

    def document(self):
        domain, names = self.header()
        f = self.formula()
        self.accept(";")
        if self.peek().kind != "eof":
            self.fail(f"unexpected {self.peek().text!r} after formula", ["end of input"])
        return domain, names, f

    # -- formulas --
    def formula(self) -> Formula:
        start = self.peek()
        left = self.f_or()
        if self.accept("->"):
            right = self.formula()
            return Implies(left, right, span=self.sp(start))
        return left

    def f_or(self) -> Formula:
        start = self.peek()
        left = self.f_and()
        while self.accept("||"):
            left = FOr(left, self.f_and(), span=self.sp(start))
        return left

    def f_and(self) -> Formula:
        start = self.peek()
        left = self.f_not()
        while self.accept("&&"):
            left = FAnd(left, self.f_not(), span=self.sp(start))
        return left

    def f_not(self) -> Formula:
        start = self.peek()
        if self.accept("~"):
            return FNot(self.f_not(), span=self.sp(start))
        return self.f_atom()

    def _paren_formula(self):
        """Try ``( formula )`` at the current position; memoized per offset."""
        key = self.i
        if key in self._paren_memo:
            res = self._paren_memo[key]
            if isinstance(res, ParseError):
                raise res
            f, j = res
            self.i = j
            return f
        try:
            self.expect("(")
            f = self.formula()
            self.expect(")")
        except ParseError as e:
            self._paren_memo[key] = e
            raise
        self._paren_memo[key] = (f, self.i)
        return f

    def f_atom(self) -> Formula:
        if not self.at("("):
            return self.comparison()
        save = self.i
        err = None
        try:
            f = self._paren_formula()
            if not (self.peek().kind == "op" and self.peek().text in _AFTER_TERM):
                return f
        except ParseError as e:
            err = e
        self.i = save
        try:
            return self.comparison()
        except ParseError as e2:
            if err is not None and err.span.start > e2.span.start:
                raise err
            raise

    def comparison(self) -> Formula:
        start = self.peek()
        left = self.term()
        t = self.peek()
        if not (t.kind == "op" and t.text in _RELOPS):
            self.fail(f"expected a comparison, got {t.text or 'end of input'!r}", _RELOPS)
        op = self.next().text
        right = self.term()
        span = self.sp(start)
        if op == "<=":
            return Le(left, right, span=span)
        if op == "<":
            return Lt(left, right, span=span)
        if op == "=":
            return Eq(left, right, span=span)
        if op == ">=":
            return Le(right, left, span=span)
        if op == ">":
            return Lt(right, left, span=span)
        return FNot(Eq(left, right, span=span), span=span)

    # -- terms --
    def term(self):
        start = self.peek()
        left = self.t_mul()
        while self.at("+") or self.at("-"):
            minus = self.next().text == "-"
            rstart = self.peek()
            right = self.t_mul()
            if minus:
                right = Neg(right, span=self.sp(rstart))
            left = Add(left, right, span=self.sp(start))
        return left

    def t_mul(self):
        start = self.peek()
        left = self.t_unary()
        while self.accept("*"):
            left = Mul(left, self.t_unary(), span=self.sp(start))
        return left

    def t_unary(self):
        start = self.peek()
        if self.at("-"):
            self.next()
            if self.peek().kind == "num":
                value = self.number()
                return Const(-value, span=self.sp(start))
            return Neg(self.t_unary(), span=self.sp(start))
        return self.t_primary()

    def number(self) -> Fraction:
        start = self.peek()
        value = Fraction(self.next().text)
        if self.accept("/"):
            if self.peek().kind != "num":
                self.fail("expected a denominator", ["number"])
            den = Fraction(self.next().text)
            if den == 0:
                raise ParseError("zero denominator", self.sp(start))
            value /= den
        return value

    def t_primary(self):
        start = self.peek()
        if start.kind == "num":
            return Const(self.number(), span=self.sp(start))
        if start.kind == "unk":
            self.next()
            return Unknown(start.text[1:], span=self.sp(start))
        if self.at("P"):
            self.next()
            self.expect("(")
            ev = self.e_and()
            if self.accept("|"):
                cond = self.e_and()
                self.expect(")")
                return CondProb(ev, cond, span=self.sp(start))
            self.expect(")")
            return Prob(ev, span=self.sp(start))
        if self.at("sum"):
            self.next()
            dummy = self.name("dummy name")
            self.expect("{")
            body = self.term()
            self.expect("}")
            return Sum(dummy, body, span=self.sp(start))
        if self.accept("("):
            t = self.term()
            self.expect(")")
            return t
        self.fail(
            f"expected a term, got {start.text or 'end of input'!r}",
            ["P", "sum", "(", "-", "number", "?unknown"],
        )

    # -- events --
    def e_full(self) -> Event:
        start = self.peek()
        left = self.e_and()
        while self.accept("|"):
            left = Or(left, self.e_and(), span=self.sp(start))
        return left

    def e_and(self) -> Event:
        start = self.peek()
        left = self.e_pre()
        while self.accept("&"):
            left = And(left, self.e_pre(), span=self.sp(start))
        return left

    def e_pre(self) -> Event:
        start = self.peek()
        if self.accept("!"):
            return Not(self.e_pre(), span=self.sp(start))
        if self.accept("["):
            pairs = []
            if not self.at("]"):
                pairs.append(self.assignment())
                while self.accept(","):
                    pairs.append(self.assignment())
            self.expect("]")
            body = self.e_pre()
            return PostInt(tuple(pairs), body, span=self.sp(start))
        return self.e_prim()

    def assignment(self):
        var = self.name("variable name")
        self.expect("=")
        return var, self.value()

    def value(self):
        t = self.peek()
        if t.kind == "num":
            if not t.text.isdigit():
                self.fail("values must be integers", ["integer"])
            return int(self.next().text)
        if t.kind == "name":
            return self.name("dummy name")
        self.fail(f"expected a value, got {t.text or 'end of input'!r}", ["integer", "dummy name"])

    def e_prim(self) -> Event:
        start = self.peek()
        if self.accept("T"):
            return Top(span=self.sp(start))
        if self.accept("("):
            e = self.e_full()
            self.expect(")")
            return e
        if start.kind == "name":
            var, val = self.assignment()
            return Atom(var, val, span=self.sp(start))
        self.fail(
            f"expected an event, got {start.text or 'end of input'!r}",
            ["T", "(", "!", "[", "variable name"],
        )


def _infer_signature(f: Formula, domain: int | None, names) -> Signature:
    order: dict[str, None] = {}
    top = 1
    binders = set()
    for n in walk(f):
        if isinstance(n, Atom):
            order.setdefault(n.var, None)
            if isinstance(n.value, int):
                top = max(top, n.value)
        elif isinstance(n, PostInt):
            for v, x in n.intervention:
                order.setdefault(v, None)
                if isinstance(x, int):
                    top = max(top, x)
        elif isinstance(n, Sum):
            binders.add(n.dummy)
    if names is None:
        names = list(order)
    if domain is None:
        domain = max(2, top + 1)
    return Signature(domain, tuple(names), frozenset(binders - set(names)))


def parse_document(text: str, signature: Signature | None = None, *, check: bool = True) -> Document:
    """Parse a formula file (optional header plus one formula).

    The header wins over ``signature``; with neither, the signature is
    inferred from the formula (variables in first-occurrence order, domain
    size large enough for every constant and at least 2).
    """
    p = _Parser(text)
    domain, names, f = p.document()
    if domain is None and names is None and signature is not None:
        binders = {n.dummy for n in walk(f) if isinstance(n, Sum)}
        sig = signature.with_dummies(binders - set(signature.endogenous_vars))
    else:
        if domain is None and signature is not None:
            domain = signature.domain_size
        try:
            sig = _infer_signature(f, domain, names)
        except ValueError as e:
            raise ParseError(str(e)) from None
    if check:
        validate(f, sig, allow_unknowns=True)
    comments = tuple(
        line.strip() for line in text.splitlines() if line.strip().startswith("#!pch")
    )
    return Document(sig, f, comments)


def parse_formula(text: str, signature: Signature | None = None, *, check: bool = True) -> Formula:
    return parse_document(text, signature, check=check).formula


def load_document(path, signature: Signature | None = None) -> Document:
    return parse_document(Path(path).read_text(encoding="utf-8"), signature)


# -- printing -------------------------------------------------------------


def _const(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _ev(e: Event, level: int) -> str:
    # levels: 1 or, 2 and, 3 prefix
    if isinstance(e, Top):
        return "T"
    if isinstance(e, Atom):
        return f"{e.var}={e.value}"
    if isinstance(e, Not):
        return "!" + _ev(e.arg, 3)
    if isinstance(e, PostInt):
        alpha = ", ".join(f"{v}={x}" for v, x in e.intervention)
        return f"[{alpha}] " + _ev(e.body, 3)
    if isinstance(e, And):
        s = f"{_ev(e.left, 2)} & {_ev(e.right, 3)}"
        return s if level <= 2 else f"({s})"
    if isinstance(e, Or):
        s = f"{_ev(e.left, 1)} | {_ev(e.right, 2)}"
        return s if level <= 1 else f"({s})"
    raise TypeError(f"not an event: {e!r}")


def _term(t, level: int) -> str:
    # levels: 1 add, 2 mul, 3 unary, 4 primary
    if isinstance(t, Prob):
        return f"P({_ev(t.event, 2)})"
    if isinstance(t, CondProb):
        return f"P({_ev(t.event, 2)} | {_ev(t.condition, 2)})"
    if isinstance(t, Sum):
        return f"sum {t.dummy} {{ {_term(t.body, 1)} }}"
    if isinstance(t, Unknown):
        return f"?{t.name}"
    if isinstance(t, Const):
        return _const(t.value)
    if isinstance(t, Neg):
        inner = f"({_term(t.arg, 1)})" if isinstance(t.arg, Const) else _term(t.arg, 3)
        s = "-" + inner
        return s if level <= 3 else f"({s})"
    if isinstance(t, Mul):
        s = f"{_term(t.left, 2)} * {_term(t.right, 3)}"
        return s if level <= 2 else f"({s})"
    if isinstance(t, Add):
        if isinstance(t.right, Neg):
            s = f"{_term(t.left, 1)} - {_term(t.right.arg, 2)}"
        else:
            s = f"{_term(t.left, 1)} + {_term(t.right, 2)}"
        return s if level <= 1 else f"({s})"
    raise TypeError(f"not a term: {t!r}")


def _fm(f: Formula, level: int) -> str:
    # levels: 1 implies, 2 or, 3 and, 4 not/atomic
    if isinstance(f, (Le, Lt, Eq)):
        op = {Le: "<=", Lt: "<", Eq: "="}[type(f)]
        return f"{_term(f.left, 1)} {op} {_term(f.right, 1)}"
    if isinstance(f, FNot):
        return "~" + _fm(f.arg, 4)
    if isinstance(f, FAnd):
        s = f"{_fm(f.left, 3)} && {_fm(f.right, 4)}"
        return s if level <= 3 else f"({s})"
    if isinstance(f, FOr):
        s = f"{_fm(f.left, 2)} || {_fm(f.right, 3)}"
        return s if level <= 2 else f"({s})"
    if isinstance(f, Implies):
        s = f"{_fm(f.left, 2)} -> {_fm(f.right, 1)}"
        return s if level <= 1 else f"({s})"
    raise TypeError(f"not a formula: {f!r}")


def print_node(node: Node) -> str:
    if isinstance(node, Formula):
        return _fm(node, 1)
    if isinstance(node, Event):
        return _ev(node, 1)
    return _term(node, 1)


def print_formula(formula: Formula) -> str:
    return _fm(formula, 1)


def print_document(doc: Document) -> str:
    sig = doc.signature
    lines = list(doc.comments)
    lines.append(f"domain {sig.domain_size}; vars {', '.join(sig.endogenous_vars)};".replace("vars ;", "vars;"))
    lines.append(print_formula(doc.formula))
    return "\n".join(lines) + "\n"


# -- model files ----------------------------------------------------------


def _weight(raw) -> Fraction:
    if isinstance(raw, bool) or isinstance(raw, float):
        raise ModelError(f"weight {raw!r} must be an exact rational string such as \"3/100\"")
    try:
        return Fraction(raw)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ModelError(f"cannot read weight {raw!r}") from None


def _int(raw, what: str) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ModelError(f"{what} must be an integer, got {raw!r}")
    return raw


def model_from_dict(data: dict) -> Scm:
    try:
        domain = _int(data["domain"], "domain")
        endo = list(data["endogenous"])
        exo = [(n, _int(s, f"size of {n}")) for n, s in data["exogenous"].items()]
        dist_raw = data["distribution"]
        mech_raw = data["mechanisms"]
    except KeyError as e:
        raise ModelError(f"model file lacks field {e.args[0]!r}") from None
    try:
        sig = Signature(domain, tuple(endo))
    except ValueError as e:
        raise ModelError(str(e)) from None
    exo_names = [n for n, _ in exo]

    dist = []
    for entry in dist_raw:
        assignment = entry["assignment"]
        if set(assignment) != set(exo_names):
            raise ModelError(f"assignment {assignment} is not total over {exo_names}")
        u = tuple(_int(assignment[n], n) for n in exo_names)
        dist.append((u, _weight(entry["weight"])))

    mechanisms = {}
    for var in endo:
        if var not in mech_raw:
            raise ModelError(f"no mechanism for {var}")
        m = mech_raw[var]
        endo_p = tuple(m.get("endo_parents", ()))
        exo_p = tuple(m.get("exo_parents", ()))
        parents = endo_p + exo_p
        table = {}
        for row in m["table"]:
            inputs = row.get("inputs", {})
            if set(inputs) != set(parents):
                raise ModelError(f"table row {inputs} of {var} does not match its parents")
            key = tuple(_int(inputs[p], p) for p in parents)
            if key in table:
                raise DuplicateAssignment(f"mechanism of {var} lists inputs {inputs} twice")
            table[key] = _int(row["output"], "output")
        mechanisms[var] = Mechanism(endo_p, exo_p, table)
    extra = set(mech_raw) - set(endo)
    if extra:
        raise ModelError(f"mechanisms given for undeclared variables {sorted(extra)}")
    return Scm(sig, tuple(exo), tuple(dist), mechanisms)


def parse_model(text: str) -> Scm:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelError(f"model file is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ModelError("model file must hold a JSON object")
    return model_from_dict(data)


def load_model(path) -> Scm:
    return parse_model(Path(path).read_text(encoding="utf-8"))


def model_to_dict(scm: Scm) -> dict:
    exo_names = [n for n, _ in scm.exo_vars]
    mechs = {}
    for var in scm.order:
        m = scm.mechanisms[var]
        parents = m.endo_parents + m.exo_parents
        rows = [
            {"inputs": dict(zip(parents, key)), "output": out}
            for key, out in sorted(m.table.items())
        ]
        mechs[var] = {
            "endo_parents": list(m.endo_parents),
            "exo_parents": list(m.exo_parents),
            "table": rows,
        }
    return {
        "domain": scm.signature.domain_size,
        "endogenous": list(scm.order),
        "exogenous": dict(scm.exo_vars),
        "distribution": [
            {"assignment": dict(zip(exo_names, u)), "weight": _const(w)} for u, w in scm.exo_dist
        ],
        "mechanisms": mechs,
    }


def dump_model(scm: Scm) -> str:
    return json.dumps(model_to_dict(scm), indent=2) + "\n"
