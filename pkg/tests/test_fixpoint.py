"""Tests for the least feasible set, reverse queries and the concrete oracle."""

import itertools

import pytest

from coop_analyzer.abstraction import AbstractSolver, PropertySpace, generate_properties, synthesize_abstract_solver
from coop_analyzer.dsl import SpecModel, load_spec, parse_prop_expr
from coop_analyzer.fixpoint import (
    FeasibleSet,
    ForbidClause,
    Query,
    QuerySolution,
    check_fixpoint,
    check_fun,
    concrete_oracle_check,
    derivation_path,
    img,
    kleene_iterates,
    least_feasible_set,
    solve_reverse_query,
)
from coop_analyzer.logic import implies
from coop_analyzer.patterns import Instance
from coop_analyzer.spec_paths import resolve_spec_path


def _analyze(name: str) -> tuple[SpecModel, list[Instance], PropertySpace, list[AbstractSolver]]:
    model = load_spec(resolve_spec_path(name))
    theory = model.theory()
    instances = model.instantiate(theory)
    space = generate_properties(instances, theory)
    return model, instances, space, [synthesize_abstract_solver(instance, space) for instance in instances]


def _id(space: PropertySpace, text: str) -> int:
    return space.lookup(space.theory.close(parse_prop_expr(text).atoms)).id


def _renderings(space: PropertySpace, ids) -> set[str]:
    return {str(space[property_id]) for property_id in ids}


def test_simplex_hc_feasible_set() -> None:
    """From do(1) the loop only ever establishes ok(l)."""
    _model, _instances, space, solvers = _analyze("simplex_hc")
    feasible = least_feasible_set(solvers, _id(space, "do(1)"))
    assert _renderings(space, feasible) == {
        "do(1)",
        "do(1) & ok(l)",
        "do(2) & ok(l)",
        "do(3) & ok(l)",
        "do(4) & ok(l)",
    }


def test_naive_qp_feasible_set() -> None:
    """Five members, one of them a do(4) property without min(f,x)."""
    _model, _instances, space, solvers = _analyze("naive_qp")
    feasible = least_feasible_set(solvers, _id(space, "do(1)"))
    assert _renderings(space, feasible) == {
        "do(1)",
        "do(2) & cnvx(f)",
        "do(3)",
        "do(4) & min(f,x)",
        "do(4) & cnvx(f)",
    }
    finals = [prop for prop in feasible.properties() if prop.do_index == 4]
    assert any("min" not in prop.conjunction.render() for prop in finals)


def test_done_only_start_stays_put() -> None:
    """The terminal solver maps do(4) to itself."""
    _model, _instances, space, solvers = _analyze("naive_qp")
    start = _id(space, "do(4)")
    assert least_feasible_set(solvers, start).members == frozenset({start})


def test_kleene_iterates_grow_monotonically() -> None:
    """Each iterate contains the previous one and the last is a fixpoint."""
    _model, _instances, space, solvers = _analyze("simplex_hc")
    start = _id(space, "do(1)")
    iterates = list(kleene_iterates(solvers, start))
    assert iterates[0].members == frozenset({start})
    for previous, following in zip(iterates, iterates[1:]):
        assert previous.members < following.members
    assert check_fixpoint(solvers, start, iterates[-1])


@pytest.mark.parametrize("name", ["naive_qp", "simplex_hc"])
def test_every_least_feasible_set_is_a_fixpoint(name: str) -> None:
    """The saturated set solves the feasible-set equation from every start."""
    _model, _instances, space, solvers = _analyze(name)
    for prop in space:
        assert check_fixpoint(solvers, prop.id, least_feasible_set(solvers, prop.id))


def test_check_fixpoint_rejects_non_solutions() -> None:
    """{c0} alone is not closed under the solvers."""
    _model, _instances, space, solvers = _analyze("naive_qp")
    start = _id(space, "do(1)")
    assert not check_fixpoint(solvers, start, FeasibleSet(frozenset({start}), space))


def test_img_of_empty_set_is_empty() -> None:
    """Images are taken elementwise."""
    _model, _instances, space, solvers = _analyze("naive_qp")
    assert img(solvers[0], FeasibleSet(frozenset(), space)).members == frozenset()


def test_minimizer_query_needs_strict_convexity() -> None:
    """Only strictly convex starts avoid finishing without the minimizer."""
    model, _instances, space, solvers = _analyze("naive_qp")
    solutions = solve_reverse_query(solvers, space, model.query("minimizer"))
    assert _renderings(space, [sol.c0 for sol in solutions]) == {
        "do(1) & stCnvx(f)",
        "do(1) & min(f,x) & stCnvx(f)",
    }
    assert len(solutions) == 2
    assert all(sol.witnesses == () for sol in solutions)


def test_sharp_query_has_six_solutions() -> None:
    """ok(i) at the end needs ok(i) or tree(i) at the start."""
    model, _instances, space, solvers = _analyze("simplex_hc")
    solutions = solve_reverse_query(solvers, space, model.query("sharp"))
    assert len(solutions) == 6
    by_final: dict[str, set[str]] = {}
    for sol in solutions:
        (witness,) = sol.witnesses
        by_final.setdefault(str(space[witness]), set()).add(str(space[sol.c0]))
    assert by_final == {
        "do(4) & ok(i) & ok(l)": {"do(1) & ok(i)", "do(1) & ok(i) & ok(l)"},
        "do(4) & ok(i) & ok(l) & tree(i)": {
            "do(1) & tree(i)",
            "do(1) & ok(i) & tree(i)",
            "do(1) & ok(l) & tree(i)",
            "do(1) & ok(i) & ok(l) & tree(i)",
        },
    }


def test_parallel_query_matches_sequential() -> None:
    """jobs only changes how candidates are scheduled."""
    model, _instances, space, solvers = _analyze("simplex_hc")
    query = model.query("sharp")
    assert solve_reverse_query(solvers, space, query, jobs=4) == solve_reverse_query(solvers, space, query)


def test_query_without_clauses_accepts_every_candidate() -> None:
    """An empty query has one solution per property."""
    _model, _instances, space, solvers = _analyze("naive_qp")
    assert [sol.c0 for sol in solve_reverse_query(solvers, space, Query())] == list(range(len(space)))


def test_forbid_unless_clause() -> None:
    """forbid do(4) unless min rejects starts reaching do(4) & cnvx(f)."""
    _model, _instances, space, solvers = _analyze("naive_qp")
    theory = space.theory
    do4 = theory.close(parse_prop_expr("do(4)").atoms)
    with_min = theory.close(parse_prop_expr("min(f, x)").atoms)
    query = Query(givens=(theory.close(parse_prop_expr("do(3)").atoms),), forbids=(ForbidClause(do4, with_min),))
    assert [space[sol.c0].do_index for sol in solve_reverse_query(solvers, space, query)] == [3] * 6
    query = Query(givens=(theory.close(parse_prop_expr("do(2)").atoms),), forbids=(ForbidClause(do4, with_min),))
    assert _renderings(space, [sol.c0 for sol in solve_reverse_query(solvers, space, query)]) == {
        "do(2) & stCnvx(f)",
        "do(2) & min(f,x) & stCnvx(f)",
    }


def test_exists_clause_produces_witness_combinations() -> None:
    """One witness per exists clause, every combination reported."""
    _model, _instances, space, solvers = _analyze("naive_qp")
    theory = space.theory
    start = theory.close(parse_prop_expr("do(1)").atoms)
    final = theory.close(parse_prop_expr("do(4)").atoms)
    query = Query(givens=(start,), exists=(final,))
    solutions = [sol for sol in solve_reverse_query(solvers, space, query) if sol.c0 == _id(space, "do(1)")]
    assert solutions == [
        QuerySolution(_id(space, "do(1)"), (_id(space, "do(4) & cnvx(f)"),)),
        QuerySolution(_id(space, "do(1)"), (_id(space, "do(4) & min(f,x)"),)),
    ]


@pytest.mark.parametrize("name", ["naive_qp", "simplex_hc"])
def test_concrete_ticks_are_covered(name: str) -> None:
    """The concrete oracle finds no uncovered tick for the synthesized solvers."""
    _model, instances, _space, solvers = _analyze(name)
    report = concrete_oracle_check(instances, solvers)
    assert report.ok, [str(violation) for violation in report.violations]
    assert report.transitions_checked > 0


@pytest.mark.parametrize("name", ["naive_qp", "simplex_hc"])
def test_deleting_any_pair_is_detected(name: str) -> None:
    """Each single-pair deletion breaks totality, coverage or some feasible set."""
    _model, instances, space, solvers = _analyze(name)
    baseline = {prop.id: least_feasible_set(solvers, prop.id).members for prop in space}
    for position, solver in enumerate(solvers):
        for source, target in solver.pairs():
            mutated = list(solvers)
            mutated[position] = solver.without_pair(source, target)
            if not check_fun(mutated[position]):
                continue
            if not concrete_oracle_check(instances, mutated).ok:
                continue
            changed = any(least_feasible_set(mutated, prop.id).members != baseline[prop.id] for prop in space)
            assert changed, f"deleting ({source}, {target}) from F{solver.solver_index}* went unnoticed"


def test_derivation_path_explains_uncertain_outcome() -> None:
    """do(4) & cnvx(f) is reached via the convexity test and descent."""
    _model, _instances, space, solvers = _analyze("naive_qp")
    path = derivation_path(solvers, _id(space, "do(1)"), _id(space, "do(4) & cnvx(f)"))
    assert path == [(1, _id(space, "do(2) & cnvx(f)")), (2, _id(space, "do(4) & cnvx(f)"))]


def test_derivation_path_edge_cases() -> None:
    """Same start and target gives no ticks; unreachable targets give None."""
    _model, _instances, space, solvers = _analyze("naive_qp")
    start = _id(space, "do(1)")
    assert derivation_path(solvers, start, start) == []
    assert derivation_path(solvers, start, _id(space, "do(4) & stCnvx(f)")) is None


@pytest.mark.parametrize("name", ["naive_qp", "simplex_hc"])
def test_least_feasible_set_is_minimal(name: str) -> None:
    """Dropping any member other than c0 leaves a set that is no longer a fixpoint."""
    _model, _instances, space, solvers = _analyze(name)
    for prop in space:
        feasible = least_feasible_set(solvers, prop.id)
        assert check_fixpoint(solvers, prop.id, feasible)
        for member in feasible.members - {prop.id}:
            assert not check_fixpoint(solvers, prop.id, FeasibleSet(feasible.members - {member}, space))


def _enumerate_solutions(solvers: list[AbstractSolver], space: PropertySpace, query: Query) -> set[QuerySolution]:
    found: set[QuerySolution] = set()
    for start in space:
        if not all(implies(start.conjunction, given) for given in query.givens):
            continue
        members = least_feasible_set(solvers, start.id).properties()
        rejected = any(
            implies(member.conjunction, clause.match)
            and (clause.unless is None or not implies(member.conjunction, clause.unless))
            for member in members
            for clause in query.forbids
        )
        if rejected:
            continue
        for combo in itertools.product(members, repeat=len(query.exists)):
            if all(implies(witness.conjunction, wanted) for witness, wanted in zip(combo, query.exists)):
                found.add(QuerySolution(start.id, tuple(witness.id for witness in combo)))
    return found


@pytest.mark.parametrize(("name", "query_name"), [("naive_qp", "minimizer"), ("simplex_hc", "sharp")])
def test_bundled_queries_match_enumeration(name: str, query_name: str) -> None:
    """The solver agrees with checking every start and witness tuple directly."""
    model, _instances, space, solvers = _analyze(name)
    query = model.query(query_name)
    solutions = solve_reverse_query(solvers, space, query)
    assert len(solutions) == len(set(solutions))
    assert set(solutions) == _enumerate_solutions(solvers, space, query)


def test_two_exists_clauses_match_enumeration() -> None:
    """Witness tuples for several exists clauses cover the full product."""
    _model, _instances, space, solvers = _analyze("naive_qp")
    theory = space.theory
    query = Query(
        givens=(theory.close(parse_prop_expr("do(1)").atoms),),
        forbids=(ForbidClause(theory.close(parse_prop_expr("do(3) & min(f, x)").atoms)),),
        exists=(
            theory.close(parse_prop_expr("do(4)").atoms),
            theory.close(parse_prop_expr("do(2) & cnvx(f)").atoms),
        ),
    )
    expected = _enumerate_solutions(solvers, space, query)
    assert expected
    assert set(solve_reverse_query(solvers, space, query)) == expected
