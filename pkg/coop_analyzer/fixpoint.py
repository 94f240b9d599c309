"""Set-constraint solving over the property space.

The feasible-set approximation is the least P with
``P = {c0} ∪ img(F1*, P) ∪ ... ∪ img(Fn*, P)``.
"""

from __future__ import annotations

import itertools
import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .abstraction import AbstractSolver, ContextProperty, PropertySpace, firing_rules
from .logic import Conjunction, implies
from .patterns import Instance, classify_atoms

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeasibleSet:
    members: frozenset[int]
    space: PropertySpace = field(compare=False, repr=False)

    def __contains__(self, property_id: object) -> bool:
        return property_id in self.members

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.members))

    def properties(self) -> list[ContextProperty]:
        return [self.space[property_id] for property_id in self]


@dataclass(frozen=True)
class ForbidClause:
    """Reject a candidate if some feasible member implies `match` but not `unless`."""
    match: Conjunction
    unless: Conjunction | None = None


@dataclass(frozen=True)
class Query:
    givens: tuple[Conjunction, ...] = ()
    forbids: tuple[ForbidClause, ...] = ()
    exists: tuple[Conjunction, ...] = ()


@dataclass(frozen=True)
class QuerySolution:
    c0: int
    witnesses: tuple[int, ...] = ()


def img(solver: AbstractSolver, feasible: FeasibleSet) -> FeasibleSet:
    """Image of a set of properties under one abstract solver."""
    members: set[int] = set()
    for property_id in feasible.members:
        members |= solver.image_of(property_id)
    return FeasibleSet(frozenset(members), feasible.space)


def _step(solvers: Sequence[AbstractSolver], c0: int, current: FeasibleSet) -> FeasibleSet:
    members = {c0}
    for solver in solvers:
        members |= img(solver, current).members
    return FeasibleSet(frozenset(members), current.space)


def kleene_iterates(solvers: Sequence[AbstractSolver], c0: int) -> Iterator[FeasibleSet]:
    """Yield P0 = {c0}, P1, ... until the iteration stabilizes (last item is the fixpoint)."""
    space = solvers[0].space
    current = FeasibleSet(frozenset({c0}), space)
    yield current
    while True:
        following = _step(solvers, c0, current)
        if following == current:
            return
        yield following
        current = following


def least_feasible_set(solvers: Sequence[AbstractSolver], c0: int) -> FeasibleSet:
    """Least solution of the feasible-set constraint, saturated from {c0}."""
    result = FeasibleSet(frozenset({c0}), solvers[0].space)
    for round_no, result in enumerate(kleene_iterates(solvers, c0), start=1):
        logger.debug("Kleene round %d: %d members", round_no, len(result))
    return result


def check_fun(solver: AbstractSolver) -> bool:
    """True iff every property of the space has a nonempty image."""
    return all(solver.image_of(prop.id) for prop in solver.space)


def check_fixpoint(solvers: Sequence[AbstractSolver], c0: int, p: FeasibleSet) -> bool:
    """True iff `p` satisfies ``p = {c0} ∪ ⋃ img(F*_s, p)``."""
    return _step(solvers, c0, p).members == p.members


def _violates(member: Conjunction, clause: ForbidClause) -> bool:
    if not implies(member, clause.match):
        return False
    return clause.unless is None or not implies(member, clause.unless)


def _evaluate_candidate(
    solvers: Sequence[AbstractSolver], space: PropertySpace, query: Query, c0: ContextProperty
) -> list[QuerySolution]:
    feasible = least_feasible_set(solvers, c0.id)
    members = feasible.properties()
    for member in members:
        for clause in query.forbids:
            if _violates(member.conjunction, clause):
                return []
    witness_lists: list[list[int]] = []
    for requirement in query.exists:
        witnesses = [member.id for member in members if implies(member.conjunction, requirement)]
        if not witnesses:
            return []
        witness_lists.append(witnesses)
    return [QuerySolution(c0.id, tuple(combo)) for combo in itertools.product(*witness_lists)]


def solve_reverse_query(
    solvers: Sequence[AbstractSolver], space: PropertySpace, query: Query, *, jobs: int = 1
) -> list[QuerySolution]:
    """
    Every initial property (with witnesses) satisfying `query`.

    Candidates are the properties implying all givens; each is kept when its
    least feasible set passes every forbid clause and has a witness for every
    exists clause.
    """
    candidates = [
        prop for prop in space if all(implies(prop.conjunction, given) for given in query.givens)
    ]
    logger.debug("Reverse query: %d candidate initial properties", len(candidates))
    if jobs > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_candidate = list(pool.map(lambda prop: _evaluate_candidate(solvers, space, query, prop), candidates))
    else:
        per_candidate = [_evaluate_candidate(solvers, space, query, prop) for prop in candidates]
    return [solution for solutions in per_candidate for solution in solutions]


def derivation_path(
    solvers: Sequence[AbstractSolver], c0: int, target: int
) -> list[tuple[int, int]] | None:
    """
    Shortest tick sequence from `c0` to `target` as (solver index, property id) steps.

    Returns an empty list when target is c0 and None when target is not feasible.
    """
    if target == c0:
        return []
    ordered = sorted(solvers, key=lambda solver: solver.solver_index)
    parents: dict[int, tuple[int, int]] = {}
    queue = deque([c0])
    seen = {c0}
    while queue:
        current = queue.popleft()
        for solver in ordered:
            for successor in sorted(solver.image_of(current)):
                if successor in seen:
                    continue
                seen.add(successor)
                parents[successor] = (current, solver.solver_index)
                if successor == target:
                    path: list[tuple[int, int]] = []
                    node = target
                    while node != c0:
                        previous, index = parents[node]
                        path.append((index, node))
                        node = previous
                    return list(reversed(path))
                queue.append(successor)
    return None


@dataclass(frozen=True)
class OracleViolation:
    solver_index: int
    source: Conjunction
    target: Conjunction

    def __str__(self) -> str:
        return f"F{self.solver_index}*: concrete tick {self.source} => {self.target} is not covered"


@dataclass
class OracleReport:
    transitions_checked: int = 0
    violations: list[OracleViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _concrete_successors(instance: Instance, context: Conjunction) -> Iterable[Conjunction]:
    """
    Concrete contexts one tick of `instance` can produce from `context`.

    The most specific satisfied rules fire; read-write atoms the
    postcondition does not re-establish may each survive or vanish.
    """
    theory = instance.theory
    ro_part, rw_part = classify_atoms(instance, context)
    rw_atoms = sorted(rw_part.atoms, key=lambda atom: atom.sort_key())
    for fired in firing_rules(instance.rules, context):
        for size in range(len(rw_atoms) + 1):
            for kept in itertools.combinations(rw_atoms, size):
                yield theory.close((*ro_part.atoms, *kept, *fired.post.atoms))


def _covered(solver: AbstractSolver, source: Conjunction, target: Conjunction) -> bool:
    for prop in solver.space:
        if not implies(source, prop.conjunction):
            continue
        for image_id in solver.image_of(prop.id):
            if implies(target, solver.space[image_id].conjunction):
                return True
    return False


def concrete_oracle_check(instances: Sequence[Instance], solvers: Sequence[AbstractSolver]) -> OracleReport:
    """
    Check that every concrete tick is covered by the abstract solvers.

    Concrete contexts are (do index, closed atom set) pairs over the pipeline's
    atom universe, which coincide with the exact members of the property
    space. A solver that is not called leaves the context unchanged.
    """
    report = OracleReport()
    by_index = {instance.index: instance for instance in instances}
    for solver in solvers:
        instance = by_index[solver.solver_index]
        for context in solver.space:
            if context.do_index == instance.index:
                successors = set(_concrete_successors(instance, context.conjunction))
            else:
                successors = {context.conjunction}
            for successor in sorted(successors, key=Conjunction.sort_key):
                report.transitions_checked += 1
                if not _covered(solver, context.conjunction, successor):
                    report.violations.append(OracleViolation(solver.solver_index, context.conjunction, successor))
    logger.info(
        "Concrete oracle: %d transitions checked, %d violations",
        report.transitions_checked,
        len(report.violations),
    )
    return report
