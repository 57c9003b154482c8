"""Command-line front end: ``pch eval|sat|valid|reduce|transform|classify``.

Exit codes:

=====  ==========================================================
0      true / sat / valid / success
1      false / unsat within bounds / not valid
2      parse, validation, model or source-format error
3      undefined (eval only)
4      unknown: a search cap or the denominator cap was hit
5      a witness or probe failed re-verification (internal error)
=====  ==========================================================
"""

from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
import time
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from . import __version__
from .core import Const, Eq, Le, Lt, Node, classify_fragment, desugar, walk
from .core import Unknown as UnknownTerm
from .errors import CapExceeded, PchError
from .evaluate import Evaluator, eval_formula
from .parser import load_model, model_to_dict, parse_document, parse_model, print_document, print_node
from .random_models import random_scm
from .reduce import (
    epr_natural_bounds,
    parse_dimacs,
    parse_emajsat,
    parse_epr,
    parse_qdimacs,
    reduce_emajsat_to_l1,
    reduce_epr_to_l3,
    reduce_qbf_to_l2,
    reduce_sat3_to_l1,
)
from .solve import (
    Bounds,
    NotValid,
    Sat,
    Unknown,
    check_sat,
    check_sat_causal,
    check_sat_l1,
    check_sat_l1_negfree,
    check_sat_poly,
    check_validity,
)
from .transform import eliminate_conditionals, expand_sums

EXIT_TRUE, EXIT_FALSE, EXIT_ERROR, EXIT_UNDEFINED, EXIT_UNKNOWN, EXIT_VERIFY = 0, 1, 2, 3, 4, 5

REDUCTION_VERSION = "1"
PROBE_MODELS = 20

_BOUND_KEYS = {
    "m": "m",
    "indeg": "max_in_degree",
    "columns": "max_columns",
    "nodes": "max_nodes",
    "leaves": "max_leaves",
    "subsets": "max_subsets",
    "branches": "max_branches",
    "fm": "fm_cap",
    "grid": "max_grid_points",
    "denom": "denom_cap",
}

_SOLVERS = {
    "l1": check_sat_l1,
    "negfree": check_sat_l1_negfree,
    "causal": check_sat_causal,
    "poly": check_sat_poly,
}


class _VerifyError(Exception):
    pass


def parse_bounds(spec: str | None, base: Bounds | None = None) -> Bounds:
    """``"m=4,indeg=1"`` -> Bounds; keys are listed in ``_BOUND_KEYS``."""
    b = base or Bounds()
    if not spec:
        return b
    changes = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        key, sep, raw = part.partition("=")
        if not sep or (key.strip() not in _BOUND_KEYS and key.strip() != "parents"):
            raise argparse.ArgumentTypeError(
                f"bad bound {part!r}; use key=int with key in {', '.join(_BOUND_KEYS)}, or parents=VAR:P1+P2;VAR2:"
            )
        if key.strip() == "parents":
            changes["allowed_parents"] = _parse_parents(raw.strip())
            continue
        try:
            changes[_BOUND_KEYS[key.strip()]] = int(raw)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bound {key} needs an integer, got {raw!r}") from None
    return replace(b, **changes)


def _read_document(path, sig=None):
    """Parse a formula file; errors are prefixed with the file name."""
    try:
        return parse_document(Path(path).read_text(encoding="utf-8"), sig)
    except PchError as e:
        msg = str(e)
        e.args = (f"{path}:{msg}" if msg[:1].isdigit() else f"{path}: {msg}",)
        raise


def format_parents(allowed) -> str:
    """``(("R", ("Z1", "Z2")), ("X", ()))`` -> ``"R:Z1+Z2;X:"``"""
    return ";".join(f"{v}:{'+'.join(ps)}" for v, ps in allowed)


def _parse_parents(raw: str):
    out = []
    for entry in raw.split(";"):
        v, sep, ps = entry.partition(":")
        if not sep or not v.strip():
            raise argparse.ArgumentTypeError(f"bad parents entry {entry!r}; use VAR:P1+P2;VAR2:")
        out.append((v.strip(), tuple(p.strip() for p in ps.split("+") if p.strip())))
    return tuple(out)


def _provenance_bounds(comments) -> str:
    parts = []
    for line in comments:
        rest = line[len("#!pch"):].strip()
        if rest.startswith("bounds "):
            parts.append(rest[len("bounds "):].strip())
    return ",".join(parts)


def _bounds_for(args, doc) -> Bounds:
    b = parse_bounds(_provenance_bounds(doc.comments))
    b = parse_bounds(args.bounds, b)
    if args.denom_cap is not None:
        b = replace(b, denom_cap=args.denom_cap)
    if args.jobs is not None:
        b = replace(b, jobs=args.jobs)
    return b


def _fmt(v) -> str:
    if v is None:
        return "undefined"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return str(v)


def _emit(args, report: dict, text_lines: list[str]) -> None:
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print("\n".join(text_lines))


def _base_report(args, started: float) -> dict:
    return {"command": ["pch"] + list(args.argv), "elapsed": round(time.perf_counter() - started, 6)}


def _text_tail(report: dict) -> list[str]:
    lines = []
    if report.get("bounds"):
        lines.append("bounds: " + ", ".join(f"{k}={v}" for k, v in sorted(report["bounds"].items())))
    lines.append(f"elapsed: {report['elapsed']:.3f}s")
    return lines


def _comparisons(f: Node):
    for n in walk(f):
        if isinstance(n, (Le, Lt, Eq)):
            yield n


# -- eval ------------------------------------------------------------------------


def cmd_eval(args) -> int:
    started = time.perf_counter()
    scm = load_model(args.model)
    doc = _read_document(args.formula, scm.signature)
    unknowns = {k: Fraction(v) for k, v in (args.unknown or [])}
    ev = Evaluator(scm, unknowns)
    terms = []
    seen = set()
    for cmp_ in _comparisons(doc.formula):
        for side in (cmp_.left, cmp_.right):
            if isinstance(side, Const):
                continue
            text = print_node(side)
            if text not in seen:
                seen.add(text)
                terms.append((text, ev.term(side)))
    result = ev.formula(doc.formula)
    report = _base_report(args, started)
    report.update({"terms": [{"term": t, "value": _fmt(v)} for t, v in terms], "result": _fmt(result)})
    lines = [f"{t} = {_fmt(v)}" for t, v in terms] + [f"result: {_fmt(result)}"] + _text_tail(report)
    _emit(args, report, lines)
    return {True: EXIT_TRUE, False: EXIT_FALSE, None: EXIT_UNDEFINED}[result]


# -- sat / valid -----------------------------------------------------------------


def _witness_path(args, suffix: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path(args.formula).with_suffix(suffix)


def _write_witness(path: Path, scm, unknowns) -> None:
    data = model_to_dict(scm)
    if unknowns:
        data["unknowns"] = {k: _fmt(Fraction(v)) for k, v in sorted(unknowns.items())}
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def _reverify(path: Path, formula, want_true: bool) -> None:
    text = path.read_text(encoding="utf-8")
    scm = parse_model(text)
    unknowns = {k: Fraction(v) for k, v in json.loads(text).get("unknowns", {}).items()}
    value = eval_formula(scm, formula, unknowns)
    if (value is True) != want_true:
        raise _VerifyError(f"witness {path} evaluates to {_fmt(value)}")


def _solve(args, doc, bounds):
    if args.solver == "auto":
        return check_sat(doc.formula, doc.signature, bounds)
    return _SOLVERS[args.solver](doc.formula, doc.signature, bounds)


def cmd_sat(args) -> int:
    started = time.perf_counter()
    doc = _read_document(args.formula)
    bounds = _bounds_for(args, doc)
    res = _solve(args, doc, bounds)
    report = _base_report(args, started)
    report["verdict"] = res.verdict
    report["fragment"] = str(classify_fragment(doc.formula))
    report["bounds"] = {k: v for k, v in res.bounds.as_dict().items() if v is not None}
    if isinstance(res, Sat):
        path = _witness_path(args, ".witness.scm")
        _write_witness(path, res.witness, res.unknowns)
        _reverify(path, doc.formula, want_true=True)
        report["witness"] = str(path)
        if res.unknowns:
            report["unknowns"] = {k: _fmt(Fraction(v)) for k, v in sorted(res.unknowns.items())}
    if isinstance(res, Unknown):
        report["reason"] = res.reason
    report["elapsed"] = round(time.perf_counter() - started, 6)
    lines = [f"verdict: {res.verdict}", f"fragment: {report['fragment']}"]
    if "witness" in report:
        lines.append(f"witness: {report['witness']}")
    if "reason" in report:
        lines.append(f"reason: {report['reason']}")
    _emit(args, report, lines + _text_tail(report))
    return {"sat": EXIT_TRUE, "unsat": EXIT_FALSE}.get(res.verdict, EXIT_UNKNOWN)


def cmd_valid(args) -> int:
    started = time.perf_counter()
    doc = _read_document(args.formula)
    bounds = _bounds_for(args, doc)
    res = check_validity(doc.formula, doc.signature, bounds)
    report = _base_report(args, started)
    report["verdict"] = res.verdict
    report["fragment"] = str(classify_fragment(doc.formula))
    report["bounds"] = {k: v for k, v in res.bounds.as_dict().items() if v is not None}
    if isinstance(res, NotValid):
        path = _witness_path(args, ".counterexample.scm")
        _write_witness(path, res.witness, res.unknowns)
        _reverify(path, doc.formula, want_true=False)
        report["witness"] = str(path)
    if isinstance(res, Unknown):
        report["reason"] = res.reason
    report["elapsed"] = round(time.perf_counter() - started, 6)
    lines = [f"verdict: {res.verdict}", f"fragment: {report['fragment']}"]
    if "witness" in report:
        lines.append(f"counterexample: {report['witness']}")
    if "reason" in report:
        lines.append(f"reason: {report['reason']}")
    _emit(args, report, lines + _text_tail(report))
    return {"valid": EXIT_TRUE, "not-valid": EXIT_FALSE}.get(res.verdict, EXIT_UNKNOWN)


# -- reduce ------------------------------------------------------------------------


def reduce_source(problem: str, text: str, unary: bool = False, independence: str = "total"):
    """Parse a source instance and reduce it; returns ``(Document, extra provenance lines)``."""
    extra = []
    if problem == "sat3":
        doc = reduce_sat3_to_l1(parse_dimacs(text), unary=unary)
    elif problem == "emajsat":
        doc = reduce_emajsat_to_l1(parse_emajsat(text))
    elif problem == "qbf":
        doc = reduce_qbf_to_l2(parse_qdimacs(text), unary=unary)
    elif problem == "epr":
        s = parse_epr(text)
        doc = reduce_epr_to_l3(s, unary=unary, independence=independence)
        nb = epr_natural_bounds(s)
        extra.append(f"#!pch bounds indeg={nb.max_in_degree}")
        if independence == "total":
            extra.append(f"#!pch bounds parents={format_parents(nb.allowed_parents)}")
    else:
        raise ValueError(problem)
    return doc, extra


def cmd_reduce(args) -> int:
    started = time.perf_counter()
    src_path = Path(args.input)
    text = src_path.read_text(encoding="utf-8")
    doc, extra = reduce_source(args.problem, text, unary=args.unary, independence=args.independence)
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    header = [
        f"#!pch reduce {args.problem} version {REDUCTION_VERSION} (pch {__version__})",
        f"#!pch source {src_path.name} sha256 {digest}",
    ]
    header += [f"#!pch | {line}" for line in text.splitlines() if line.strip()]
    header += extra
    out_doc = replace(doc, comments=tuple(header))
    rendered = print_document(out_doc)
    if not args.out:
        sys.stdout.write(rendered)
        return EXIT_TRUE
    Path(args.out).write_text(rendered, encoding="utf-8")
    report = _base_report(args, started)
    report.update(
        {
            "output": args.out,
            "fragment": str(classify_fragment(doc.formula)),
            "variables": len(doc.signature.endogenous_vars),
            "size": sum(1 for _ in walk(doc.formula)),
        }
    )
    lines = [
        f"output: {args.out}",
        f"fragment: {report['fragment']}",
        f"variables: {report['variables']}",
        f"size: {report['size']}",
        f"elapsed: {report['elapsed']:.3f}s",
    ]
    _emit(args, report, lines)
    return EXIT_TRUE


# -- transform ----------------------------------------------------------------------


def probe_expansion(before, after, sig, n_models: int = PROBE_MODELS, seed: int = 0) -> int:
    """Compare formula values before and after sum expansion on seeded random models."""
    rng = random.Random(seed)
    for _ in range(n_models):
        scm = random_scm(sig, rng)
        if eval_formula(scm, before) != eval_formula(scm, after):
            raise _VerifyError("sum expansion changed the formula value on a probe model")
    return n_models


def cmd_transform(args) -> int:
    started = time.perf_counter()
    doc = _read_document(args.input)
    f = doc.formula
    probes = 0
    if args.op == "expand-sums":
        out = expand_sums(f, doc.signature.domain_size)
        if not any(isinstance(n, UnknownTerm) for n in walk(f)):
            probes = probe_expansion(f, out, doc.signature)
    elif args.op == "eliminate-conditionals":
        out = eliminate_conditionals(f)
    else:
        out = desugar(f)
    out_doc = replace(doc, formula=out, signature=doc.signature)
    rendered = print_document(out_doc)
    if not args.out:
        sys.stdout.write(rendered)
        return EXIT_TRUE
    Path(args.out).write_text(rendered, encoding="utf-8")
    report = _base_report(args, started)
    report.update({"output": args.out, "op": args.op, "probes": probes})
    lines = [f"output: {args.out}", f"op: {args.op}"]
    if probes:
        lines.append(f"probes: {probes} models agree")
    _emit(args, report, lines + _text_tail(report))
    return EXIT_TRUE


# -- classify ------------------------------------------------------------------------


def cmd_classify(args) -> int:
    started = time.perf_counter()
    doc = _read_document(args.formula)
    tag = classify_fragment(doc.formula)
    report = _base_report(args, started)
    report.update({"layer": tag.layer, "terms": tag.terms, "has_sigma": tag.has_sigma, "fragment": str(tag)})
    _emit(args, report, [f"fragment: {tag}"])
    return EXIT_TRUE


# -- entry point ------------------------------------------------------------------------


def _unknown_pair(raw: str):
    name, sep, value = raw.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("expected name=value")
    try:
        return name.lstrip("?"), Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"bad rational {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable report")
    common.add_argument("--out", help="output path")
    common.add_argument("--bounds", help="comma-separated key=int, keys: " + ", ".join(_BOUND_KEYS))
    common.add_argument("--denom-cap", type=int, help="largest denominator tried by the polynomial search")
    common.add_argument("--jobs", type=int, help="accepted for compatibility; the search is sequential")

    p = argparse.ArgumentParser(prog="pch", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"pch {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", parents=[common], help="evaluate a formula on a model")
    e.add_argument("model")
    e.add_argument("formula")
    e.add_argument("--unknown", action="append", type=_unknown_pair, help="value for ?name, as name=p/q")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sat", parents=[common], help="bounded satisfiability")
    s.add_argument("formula")
    s.add_argument("--solver", choices=["auto"] + sorted(_SOLVERS), default="auto")
    s.set_defaults(func=cmd_sat)

    v = sub.add_parser("valid", parents=[common], help="bounded validity")
    v.add_argument("formula")
    v.set_defaults(func=cmd_valid)

    r = sub.add_parser("reduce", parents=[common], help="compile a source instance to a formula")
    r.add_argument("problem", choices=["sat3", "emajsat", "qbf", "epr"])
    r.add_argument("input")
    r.add_argument("--unary", action="store_true", help="spell integer constants with P(T)")
    r.add_argument(
        "--independence", choices=["total", "literal"], default="total", help="EPR x/y independence variant"
    )
    r.set_defaults(func=cmd_reduce)

    t = sub.add_parser("transform", parents=[common], help="rewrite a formula file")
    t.add_argument("op", choices=["expand-sums", "eliminate-conditionals", "desugar"])
    t.add_argument("input")
    t.set_defaults(func=cmd_transform)

    c = sub.add_parser("classify", parents=[common], help="report the fragment of a formula")
    c.add_argument("formula")
    c.set_defaults(func=cmd_classify)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code not in (0, None) else EXIT_TRUE
    args.argv = argv
    try:
        return args.func(args)
    except CapExceeded as e:
        print(f"pch: unknown: {e}", file=sys.stderr)
        return EXIT_UNKNOWN
    except (PchError, argparse.ArgumentTypeError, ValueError) as e:
        print(f"pch: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except _VerifyError as e:
        print(f"pch: verification failed: {e}", file=sys.stderr)
        return EXIT_VERIFY
    except OSError as e:
        print(f"pch: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
