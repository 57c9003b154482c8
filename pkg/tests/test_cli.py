import json
import shutil

import pytest

from oracles import formula_value
from pch.cli import EXIT_ERROR, EXIT_FALSE, EXIT_TRUE, EXIT_UNDEFINED, EXIT_UNKNOWN, main, parse_bounds
from pch.parser import load_model, parse_document


@pytest.fixture
def work(tmp_path, fixtures):
    for name in ("appb.scm", "footnote3.pch"):
        shutil.copy(fixtures / name, tmp_path / name)
    return tmp_path


def write(path, text):
    path.write_text(text)
    return str(path)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestEval:
    def test_true(self, work, capsys):
        f = write(work / "f.pch", "P(Y=1 | X=0) = 2/5")
        code, out, _ = run(capsys, "eval", work / "appb.scm", f)
        assert code == EXIT_TRUE
        assert "P(Y=1 | X=0) = 2/5" in out
        assert "result: true" in out.splitlines()

    def test_false(self, work, capsys):
        f = write(work / "f.pch", "P([X=1] Y=1) < P([X=0] Y=1)")
        assert run(capsys, "eval", work / "appb.scm", f)[0] == EXIT_FALSE

    def test_undefined(self, work, capsys):
        f = write(work / "f.pch", "P(Y=1 | Z=1 & X=1) = 0")
        code, out, _ = run(capsys, "eval", work / "appb.scm", f)
        assert code == EXIT_UNDEFINED and "undefined" in out

    def test_unknown_values(self, work, capsys):
        f = write(work / "f.pch", "P(Y=1 | X=0) = ?z")
        assert run(capsys, "eval", "--unknown", "z=2/5", work / "appb.scm", f)[0] == EXIT_TRUE
        assert run(capsys, "eval", "--unknown", "z=1/2", work / "appb.scm", f)[0] == EXIT_FALSE

    def test_parse_error_reports_location(self, work, capsys):
        f = write(work / "f.pch", "P(Y=1) = \n  1 &&")
        code, _, err = run(capsys, "eval", work / "appb.scm", f)
        assert code == EXIT_ERROR
        assert f"{f}:2:" in err

    def test_missing_file(self, work, capsys):
        assert run(capsys, "eval", work / "appb.scm", work / "nope.pch")[0] == EXIT_ERROR


class TestSatValid:
    def test_footnote(self, work, capsys):
        f = work / "footnote3.pch"
        code, out, _ = run(capsys, "sat", f)
        assert code == EXIT_TRUE
        witness = work / "footnote3.witness.scm"
        assert witness.exists() and str(witness) in out
        doc = parse_document(f.read_text())
        assert formula_value(load_model(witness), doc.formula) is True
        assert run(capsys, "valid", f)[0] == EXIT_TRUE

    def test_counterexample(self, work, capsys):
        f = write(work / "g.pch", "P(X=1) = 1")
        assert run(capsys, "valid", f)[0] == EXIT_FALSE
        cex = load_model(work / "g.counterexample.scm")
        assert formula_value(cex, parse_document((work / "g.pch").read_text()).formula) is False

    def test_unsat(self, work, capsys):
        f = write(work / "u.pch", "P(X=1) > 1")
        code, out, _ = run(capsys, "sat", f)
        assert code == EXIT_FALSE and "unsat" in out

    def test_unknown(self, work, capsys):
        f = write(work / "q.pch", "P(X=1) * P(X=1) = 1/2")
        assert run(capsys, "sat", f)[0] == EXIT_UNKNOWN

    def test_witness_with_unknowns(self, work, capsys):
        f = write(work / "z.pch", "P(X=1) = ?z && ?z > 1/2")
        out_path = work / "w.scm"
        assert run(capsys, "sat", "--out", out_path, f)[0] == EXIT_TRUE
        data = json.loads(out_path.read_text())
        z = data["unknowns"]["z"]
        assert run(capsys, "eval", "--unknown", f"z={z}", out_path, f)[0] == EXIT_TRUE

    def test_solver_choice(self, work, capsys):
        f = write(work / "n.pch", "P(X=1 & Y=1) = 1/2")
        assert run(capsys, "sat", "--solver", "negfree", f)[0] == EXIT_TRUE
        g = write(work / "m.pch", "P(!X=1) = 1/2")
        assert run(capsys, "sat", "--solver", "negfree", g)[0] == EXIT_ERROR

    def test_bounds_too_small(self, work, capsys):
        f = write(work / "b.pch", "P(X=1) = 1/2 && P(Y=1) = 1/3")
        code, _, err = run(capsys, "sat", "--bounds", "m=1", f)
        assert code == EXIT_ERROR and "m=1" in err

    def test_json_report_stable(self, work, capsys):
        f = work / "footnote3.pch"
        a = json.loads(run(capsys, "sat", "--json", f)[1])
        b = json.loads(run(capsys, "sat", "--json", f)[1])
        a.pop("elapsed"), b.pop("elapsed")
        assert a == b
        assert a["verdict"] == "sat" and a["fragment"] == "L1 lin<sum>"


class TestReduce:
    def test_qbf_round_trip(self, work, fixtures, capsys):
        src = fixtures / "qbf" / "forall_exists_iff.qdimacs"
        code, out, _ = run(capsys, "reduce", "qbf", src)
        assert code == EXIT_TRUE
        lines = out.splitlines()
        assert lines[0].startswith("#!pch reduce qbf version 1")
        assert lines[1].startswith("#!pch source forall_exists_iff.qdimacs sha256 ")
        f = write(work / "r.pch", out)
        assert run(capsys, "sat", f)[0] == EXIT_TRUE

    def test_reduce_deterministic(self, fixtures, capsys):
        src = fixtures / "sat3" / "exactly_one.cnf"
        assert run(capsys, "reduce", "sat3", src)[1] == run(capsys, "reduce", "sat3", src)[1]

    def test_epr_carries_bounds(self, work, capsys):
        src = write(work / "s.epr", "exists x. forall y. R(x, y) & !R(y, x)\n")
        code, out, _ = run(capsys, "reduce", "epr", src)
        assert "#!pch bounds indeg=2" in out and "#!pch bounds parents=" in out
        f = write(work / "s.pch", out)
        assert run(capsys, "sat", f)[0] == EXIT_FALSE

    def test_epr_literal_variant_has_no_shape(self, work, capsys):
        src = write(work / "s.epr", "exists x. x = x\n")
        out = run(capsys, "reduce", "--independence", "literal", "epr", src)[1]
        assert "parents=" not in out

    def test_bad_source(self, work, capsys):
        src = write(work / "bad.epr", "exists x y. R(x) & R(x, y)\n")
        code, _, err = run(capsys, "reduce", "epr", src)
        assert code == EXIT_ERROR and "arit" in err

    def test_out_report(self, work, fixtures, capsys):
        out_path = work / "o.pch"
        code, out, _ = run(capsys, "reduce", "--out", out_path, "emajsat", fixtures / "emajsat" / "minority.cnf")
        assert code == EXIT_TRUE and out_path.exists()
        assert run(capsys, "sat", out_path)[0] == EXIT_FALSE


class TestTransformClassify:
    def test_expand(self, work, capsys):
        out_path = work / "e.pch"
        code, out, _ = run(capsys, "transform", "--out", out_path, "expand-sums", work / "footnote3.pch")
        assert code == EXIT_TRUE and "probes: 20" in out
        assert "sum" not in out_path.read_text().split("\n", 1)[1]
        assert run(capsys, "valid", out_path)[0] == EXIT_TRUE

    def test_eliminate(self, work, capsys):
        f = write(work / "c.pch", "P(X=1 | Y=1) = 1/2")
        code, out, _ = run(capsys, "transform", "eliminate-conditionals", f)
        assert code == EXIT_TRUE and "?z1" in out

    def test_classify(self, work, capsys):
        f = write(work / "k.pch", "sum x { P([X=x] Y=1) } = 1")
        code, out, _ = run(capsys, "classify", "--json", f)
        assert json.loads(out)["fragment"] == "L2 lin<sum>"


def test_parse_bounds():
    b = parse_bounds("m=4,indeg=1,parents=A:;B:A")
    assert (b.m, b.max_in_degree, b.allowed_parents) == (4, 1, (("A", ()), ("B", ("A",))))
    with pytest.raises(Exception):
        parse_bounds("speed=3")
