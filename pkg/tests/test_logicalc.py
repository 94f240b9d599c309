"""Tests for LogiCalc export and evaluation."""

import pytest

from coop_analyzer.abstraction import AbstractSolver, PropertySpace, generate_properties, synthesize_abstract_solver
from coop_analyzer.dsl import load_spec, parse_prop_expr
from coop_analyzer.errors import LogiCalcError, MissingInitialError
from coop_analyzer.fixpoint import least_feasible_set
from coop_analyzer.logic import Atom
from coop_analyzer.logicalc import (
    data_coding,
    decode_members,
    eval_logicalc,
    evaluate,
    export_logicalc,
    format_value,
    parse_expression,
    parse_logicalc,
    property_code,
)
from coop_analyzer.spec_paths import resolve_spec_path

# Hand-written sharpness constraints with their own coding, including the missing commas
# between a few tuples of F1star and F2star.
_SHARPNESS = r"""
treeI  = 0; okL  = 1; okI      = 2; treeIokL    = 3;
okIokL = 4; true = 5; treeIokI = 6; treeIokLokI = 7;
Cdata = { treeI, okL, okI, treeIokL,
          okIokL, true, treeIokI, treeIokLokI };
F1star = {
        ((1, treeI),       (2, treeIokL)),
        ((1, okL),         (2, okL)),
        ((1, okI),         (2, okIokL)),
        ((1, treeIokL),    (2, treeIokL)),
        ((1, okIokL),      (2, okIokL)),
        ((1, true),        (2, okL)),
        ((1, treeIokI),    (2, treeIokLokI))
        ((1, treeIokLokI), (2, treeIokLokI)) } \/
{ ((i1, z1), (i1, z1)) | i1 in { 2, 3, 4 }, z1 in Cdata };
F2star = {
        ((2, treeI),       (3, treeIokI)),
        ((2, okL),         (3, okL)),
        ((2, okI),         (3, okI)),
        ((2, treeIokL),    (3, treeIokLokI)),
        ((2, okIokL),      (3, okIokL)),
        ((2, true),        (3, true)),
        ((2, treeIokI),    (3, treeIokI))
        ((2, treeIokLokI), (3, treeIokLokI)) } \/
{ ((i2, z2), (i2, z2)) | i2 in { 1, 3, 4 }, z2 in Cdata };
F3star = { ((3, z3), (i3, z3)) | z3 in Cdata, i3 in { 1, 4 } };
F4star = { ((4, z4), (4, z4)) | z4 in Cdata };
img1 = { c11 | (c1, c11) in F1star; c1 in p };
img2 = { c22 | (c2, c22) in F2star; c2 in p };
img3 = { c33 | (c3, c33) in F3star; c3 in p };
img4 = { c44 | (c4, c44) in F4star; c4 in p };
p = { c0 } \/ img1 \/ img2 \/ img3 \/ img4;
"""

_REFERENCE_DATA = {
    "treeI": {"tree(i)"},
    "okL": {"ok(l)"},
    "okI": {"ok(i)"},
    "treeIokL": {"tree(i)", "ok(l)"},
    "okIokL": {"ok(i)", "ok(l)"},
    "true": set(),
    "treeIokI": {"tree(i)", "ok(i)"},
    "treeIokLokI": {"tree(i)", "ok(l)", "ok(i)"},
}


def _analyze(name: str) -> tuple[PropertySpace, list[AbstractSolver]]:
    model = load_spec(resolve_spec_path(name))
    theory = model.theory()
    instances = model.instantiate(theory)
    space = generate_properties(instances, theory)
    return space, [synthesize_abstract_solver(instance, space) for instance in instances]


def _id(space: PropertySpace, text: str) -> int:
    return space.lookup(space.theory.close(parse_prop_expr(text).atoms)).id


def test_prime_factor_example() -> None:
    """x is recovered as the prime factors of y = {6, 10, 15}."""
    model = parse_logicalc(
        "x subset { 2, 3, 5, 7 };\n"
        "y = { i * j | i in x; j in x; i + 1 <= j };\n"
        "y = { 6, 10, 15 }\n"
    )
    bindings = eval_logicalc(model)
    assert bindings["x"] == frozenset({2, 3, 5})
    assert bindings["y"] == frozenset({6, 10, 15})


def test_prime_factor_example_with_given_x() -> None:
    """With x bound, y is computed and the constraints are checked."""
    model = parse_logicalc("x = { 2, 3, 5 }; y = { i * j | i in x; j in x; i + 1 <= j };")
    assert eval_logicalc(model)["y"] == frozenset({6, 10, 15})
    with pytest.raises(LogiCalcError, match="constraint violated"):
        eval_logicalc(parse_logicalc("x = { 2, 3 }; x subset { 2 };"))


def test_unsatisfiable_search_raises() -> None:
    """No subset of the bound satisfies the constraints."""
    model = parse_logicalc("x subset { 2, 3 }; y = { i * j | i in x; j in x; i + 1 <= j }; y = { 10 };")
    with pytest.raises(LogiCalcError, match="no values"):
        eval_logicalc(model)


def test_reference_sharpness_constraints_evaluate_to_the_feasible_set() -> None:
    """Saturating p from c0 = (1, true) gives do(1), and ok(l) at every stage."""
    bindings = eval_logicalc(parse_logicalc(_SHARPNESS), c0=(1, 5))
    assert bindings["p"] == frozenset({(1, 5), (1, 1), (2, 1), (3, 1), (4, 1)})


def test_synthesized_solvers_match_reference_relations() -> None:
    """Under a name mapping, each F<k>star equals the synthesized solver on its own index."""
    space, solvers = _analyze("simplex_hc")
    reference = eval_logicalc(parse_logicalc(_SHARPNESS), c0=(1, 5))
    by_code = {reference[name]: atoms for name, atoms in _REFERENCE_DATA.items()}

    def _reference_id(pair: tuple[int, int]) -> int:
        index, code = pair
        atoms = " & ".join([f"do({index})", *sorted(by_code[code])])
        return _id(space, atoms)

    counts = {}
    for solver in solvers:
        k = solver.solver_index
        relation = reference[f"F{k}star"]
        expected = {
            (_reference_id(source), _reference_id(target)) for source, target in relation if source[0] == k
        }
        actual = {(a, b) for a, b in solver.pairs() if space[a].do_index == k}
        assert actual == expected, f"F{k}star"
        counts[k] = len(actual)
    assert counts == {1: 8, 2: 8, 3: 16, 4: 8}


@pytest.mark.parametrize("name", ["naive_qp", "simplex_hc"])
def test_export_round_trip_reproduces_feasible_set(name: str) -> None:
    """export, parse and evaluate give the same feasible set as the fixpoint engine."""
    space, solvers = _analyze(name)
    start = _id(space, "do(1)")
    text = export_logicalc(space, solvers, c0=start)
    bindings = eval_logicalc(parse_logicalc(text))
    assert decode_members(space, bindings["p"]) == set(least_feasible_set(solvers, start).members)


def test_export_without_initial_takes_c0_from_the_caller() -> None:
    """Without a c0 line the value comes from the caller."""
    space, solvers = _analyze("simplex_hc")
    text = export_logicalc(space, solvers)
    assert "c0 =" not in text
    start = _id(space, "do(1) & tree(i)")
    bindings = eval_logicalc(parse_logicalc(text), c0=property_code(space, start))
    assert decode_members(space, bindings["p"]) == set(least_feasible_set(solvers, start).members)


def test_export_layout() -> None:
    """Codes follow canonical data order and every solver gets an image equation."""
    space, solvers = _analyze("simplex_hc")
    coding = data_coding(space)
    assert list(coding) == ["true", "okI", "okL", "treeI", "okIokL", "okItreeI", "okLtreeI", "okIokLtreeI"]
    assert [code for code, _data in coding.values()] == list(range(8))
    text = export_logicalc(space, solvers, c0=_id(space, "do(1)"))
    assert "F3star = {" in text
    assert "img4 = { c44 | (c4, c44) in F4star; c4 in p };" in text
    assert "c0 = (1, true);" in text
    assert text.rstrip().endswith("p = { c0 } \\/ img1 \\/ img2 \\/ img3 \\/ img4;")
    assert coding["okLtreeI"][1].atoms == frozenset({Atom("ok", ("l",)), Atom("tree", ("i",))})


def test_export_is_deterministic() -> None:
    """Two exports of the same pipeline are identical."""
    space, solvers = _analyze("naive_qp")
    assert export_logicalc(space, solvers, 0) == export_logicalc(*_analyze("naive_qp"), 0)


def test_expressions_and_formatting() -> None:
    """Arithmetic, tuples, unions and nested sets."""
    assert evaluate(parse_expression("1 + 2 * 3 - 4"), {}) == 3
    assert evaluate(parse_expression("{ 1, 2 } \\/ { 2, 3 }"), {}) == frozenset({1, 2, 3})
    value = evaluate(parse_expression("{ (1, { 2 }), (0, {}) }"), {})
    assert format_value(value) == "{ (0, {}), (1, { 2 }) }"
    assert evaluate(parse_expression("{ a | (a, b) in r; b <= 1 }"), {"r": frozenset({(5, 1), (6, 2)})}) == {5}


def test_repeated_pattern_variable_acts_as_a_join() -> None:
    """A generator variable bound earlier filters later generators."""
    env = {"r": frozenset({(1, 2), (2, 3)}), "s": frozenset({2})}
    assert evaluate(parse_expression("{ (a, b) | (a, b) in r; b in s }"), env) == frozenset({(1, 2)})


@pytest.mark.parametrize("text", ["x = a /\\ b;", "x = 4 / 2;", "x = { 1 } \\ { 1 };", "3 >= 2;", "x = 1 # 2;"])
def test_unsupported_features_are_rejected(text: str) -> None:
    """Only the supported fragment parses."""
    with pytest.raises(LogiCalcError, match="unsupported"):
        parse_logicalc(text)


def test_syntax_errors_carry_locations() -> None:
    """Parse errors report line and column."""
    with pytest.raises(LogiCalcError) as excinfo:
        parse_logicalc("x = 1;\ny = { 1, ;")
    assert excinfo.value.location is not None
    assert excinfo.value.location.line == 2


def test_non_monotone_equation_is_rejected() -> None:
    """Saturation requires every round to grow p."""
    with pytest.raises(LogiCalcError, match="non-monotone"):
        eval_logicalc(parse_logicalc("p = { 1 | z in { 0 }; p <= {} };"))


def test_unknown_name_without_bound_is_unsupported() -> None:
    """Unknown sets need a ground subset bound to be searched."""
    with pytest.raises(LogiCalcError, match="subset"):
        eval_logicalc(parse_logicalc("y = { 1 } \\/ x;"))


def test_several_unknown_sets_are_unsupported() -> None:
    """Only one unknown set is searched for."""
    model = parse_logicalc("x subset { 1 }; y subset { 2 }; z = x \\/ y; z = { 1, 2 };")
    with pytest.raises(LogiCalcError, match="several unknown sets"):
        eval_logicalc(model)


def test_decode_rejects_foreign_tuples() -> None:
    """Tuples that code no property are reported."""
    space, _solvers = _analyze("naive_qp")
    with pytest.raises(LogiCalcError):
        decode_members(space, frozenset({(9, 0)}))


def test_union_with_empty_set() -> None:
    """p = { 0 } \\/ {} evaluates to { 0 }."""
    assert eval_logicalc(parse_logicalc("p = { 0 } \\/ {};"))["p"] == frozenset({0})


def test_all_identity_pipeline_keeps_only_c0() -> None:
    """With identity relations the recursive equation never grows past c0."""
    model = parse_logicalc(
        "F1star = { ((1, z1), (1, z1)) | z1 in { 0, 1 } };\n"
        "img1 = { c11 | (c1, c11) in F1star; c1 in p };\n"
        "p = { c0 } \\/ img1;\n"
    )
    assert eval_logicalc(model, c0=(1, 0))["p"] == frozenset({(1, 0)})


def test_missing_c0_has_its_own_error() -> None:
    """An export without a c0 line needs the value from the caller."""
    space, solvers = _analyze("simplex_hc")
    with pytest.raises(MissingInitialError, match="c0"):
        eval_logicalc(parse_logicalc(export_logicalc(space, solvers)))


_RELATION = frozenset((a, b) for a in range(6) for b in range(6) if (3 * a + b) % 4 != 0)
_FILTER = frozenset({0, 2, 3, 5})


@pytest.mark.parametrize(
    "text, expected",
    [
        ("{ a | (a, b) in r }", {a for a, _b in _RELATION}),
        ("{ (a, b + 1) | (a, b) in r; b in s; a <= b }", {(a, b + 1) for a, b in _RELATION if b in _FILTER and a <= b}),
        ("{ (a, c) | (a, b) in r; (b, c) in r }", {(a, c) for a, b in _RELATION for b2, c in _RELATION if b == b2}),
        ("{ a * b | a in s, b in s; a + 1 <= b }", {a * b for a in _FILTER for b in _FILTER if a + 1 <= b}),
        ("{ (a, a) | (a, b) in r; (b, a) in r }", {(a, a) for a, b in _RELATION if (b, a) in _RELATION}),
    ],
)
def test_comprehensions_agree_with_enumeration(text: str, expected: set) -> None:
    """Comprehensions give what nested loops over the same sets give."""
    assert evaluate(parse_expression(text), {"r": _RELATION, "s": _FILTER}) == frozenset(expected)
