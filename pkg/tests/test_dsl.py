"""Tests for the spec language parser, validator and printer."""

import pytest

from coop_analyzer.dsl import SpecModel, format_spec, load_spec, parse_prop_expr, parse_spec, validate_spec
from coop_analyzer.errors import SpecSyntaxError
from coop_analyzer.logic import Atom
from coop_analyzer.spec_paths import resolve_spec_path

_SPEC = """
axiom stCnvx(F) => cnvx(F);

pattern dscnt(ro F, X; S) {
    do(self) & stCnvx(F) -> do(S) & min(F, X);
    do(self) -> do(S);
}

pattern done(;) {
    do(self) -> do(self);
}

solver 1 = dscnt(f, x; 2);
solver 2 = done(;);
initial do(1) & stCnvx(f);
query finish { given do(1); exists do(2) & min(f, x); }
"""


def _codes(text: str) -> list[str]:
    return [diag.code for diag in validate_spec(parse_spec(text))]


def test_parse_builds_patterns_instances_and_queries() -> None:
    """Every declaration lands in the model in order."""
    model = parse_spec(_SPEC)
    assert list(model.patterns) == ["dscnt", "done"]
    assert [param.read_only for param in model.patterns["dscnt"].data_params] == [True, False]
    assert [(decl.index, decl.pattern) for decl in model.instances] == [(1, "dscnt"), (2, "done")]
    assert str(model.initial) == "do(1) & stCnvx(f)"
    assert model.predicates == {"stCnvx": 1, "cnvx": 1, "min": 2}
    assert model.queries["finish"].exists[0].atoms == (Atom("do", (2,)), Atom("min", ("f", "x")))


def test_bundled_specs_are_valid() -> None:
    """Both example specs parse and validate cleanly."""
    for name in ("naive_qp", "simplex_hc"):
        model = load_spec(resolve_spec_path(name))
        assert validate_spec(model) == []
        assert len(model.instances) == 4


def test_format_then_parse_round_trip() -> None:
    """Printing a model and parsing it back yields the same model."""
    for text in (_SPEC, resolve_spec_path("naive_qp").read_text(), resolve_spec_path("simplex_hc").read_text()):
        model = parse_spec(text)
        assert parse_spec(format_spec(model)) == model


def test_syntax_errors_carry_locations() -> None:
    """The parser reports line and column of the offending token."""
    with pytest.raises(SpecSyntaxError) as excinfo:
        parse_spec("pattern p(;) {\n    do(self) -> do(self)\n}\n")
    assert excinfo.value.location is not None
    assert (excinfo.value.location.line, excinfo.value.location.column) == (3, 1)
    assert str(excinfo.value).startswith("3:1: expected ';'")


@pytest.mark.parametrize(
    "text, message",
    [
        ("solver 1 = p(a; 1)", "expected ';'"),
        ("pattern p(;) { do(self) -> do(self); }\npattern p(;) { do(self) -> do(self); }", "duplicate pattern"),
        ("pattern p(X;) { do(self) & q(X) -> do(self); do(self) & q(X, X) -> do(self); }", "arity"),
        ("pattern p(;) { do(self) & do(self) -> do(self); }", "only allowed as a control atom"),
        ("bogus;", "expected one of"),
        ("pattern p(; S) { do(self) -> do(T); }", "not a control parameter"),
    ],
)
def test_malformed_specs_are_rejected(text: str, message: str) -> None:
    """Structural errors surface as SpecSyntaxError."""
    with pytest.raises(SpecSyntaxError, match=message):
        parse_spec(text)


def test_missing_catch_all_is_a_totality_diagnostic() -> None:
    """Patterns need a rule whose precondition is only do(self)."""
    text = _SPEC.replace("    do(self) -> do(S);\n", "")
    assert _codes(text) == ["totality"]


def test_solver_indexing_diagnostics() -> None:
    """Gaps and duplicates in solver indices are reported."""
    text = _SPEC.replace("solver 2 = done(;);", "solver 1 = done(;);")
    assert "indexing" in _codes(text)
    text = _SPEC.replace("solver 2 = done(;);", "solver 3 = done(;);")
    assert "indexing" in _codes(text)


def test_unknown_pattern_and_control_target_diagnostics() -> None:
    """Instances must name declared patterns and valid solver indices."""
    assert _codes(_SPEC.replace("solver 2 = done(;);", "solver 2 = nope(;);")) == ["unknown-pattern"]
    assert _codes(_SPEC.replace("dscnt(f, x; 2)", "dscnt(f, x; 7)")) == ["instantiation"]


def test_query_atom_diagnostics() -> None:
    """Query and initial atoms must be declared and occur in the pipeline."""
    assert "unknown-predicate" in _codes(_SPEC.replace("exists do(2) & min(f, x);", "exists do(2) & tree(i);"))
    assert "unknown-atom" in _codes(_SPEC.replace("exists do(2) & min(f, x);", "exists do(2) & min(g, x);"))
    assert "indexing" in _codes(_SPEC.replace("given do(1);", "given do(9);"))


def test_initial_needs_a_do_atom() -> None:
    """An initial context without do(k) is rejected."""
    assert _codes(_SPEC.replace("initial do(1) & stCnvx(f);", "initial stCnvx(f);")) == ["initial"]
    assert _codes(_SPEC.replace("initial do(1) & stCnvx(f);", "initial do(1) & do(2);")) == ["initial"]


def test_parse_prop_expr() -> None:
    """Standalone conjunctions accept true and do atoms."""
    assert parse_prop_expr("true").atoms == ()
    assert parse_prop_expr("do(3) & ok(l)").atoms == (Atom("do", (3,)), Atom("ok", ("l",)))
    with pytest.raises(SpecSyntaxError):
        parse_prop_expr("do(3) ok(l)")


def test_comments_are_ignored() -> None:
    """# starts a comment that runs to the end of the line."""
    model = parse_spec("# leading\npattern done(;) { # trailing\n do(self) -> do(self); }\nsolver 1 = done(;);")
    assert validate_spec(model) == []


def test_empty_text_is_an_empty_valid_model() -> None:
    """Nothing declared parses to the default model with no diagnostics."""
    model = parse_spec("")
    assert model == SpecModel()
    assert validate_spec(model) == []
    assert format_spec(model) == ""
