"""Context-property space and synthesis of abstract solvers."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import PatternError, PropertySpaceError
from .logic import Atom, Conjunction, Theory, conjoin, do_atom, equivalent, implies, strictly_implies
from .patterns import GroundRule, Instance, classify_atoms, collect_data_atoms

logger = logging.getLogger(__name__)

DEFAULT_MAX_PROPERTIES = 100_000


@dataclass(frozen=True)
class ContextProperty:
    """A cluster ``do(k) & C`` of contexts."""
    id: int
    do_index: int
    data: Conjunction
    conjunction: Conjunction = field(compare=False)

    def __str__(self) -> str:
        return self.conjunction.render()


class PropertySpace:
    """The numbered, pairwise non-equivalent context properties of a pipeline."""

    def __init__(self, properties: Sequence[ContextProperty], data_conjunctions: Sequence[Conjunction], theory: Theory) -> None:
        self.properties: tuple[ContextProperty, ...] = tuple(properties)
        self.data_conjunctions: tuple[Conjunction, ...] = tuple(data_conjunctions)
        self.theory = theory
        self._lookup: dict[Conjunction, int] = {prop.conjunction: prop.id for prop in self.properties}

    @property
    def solver_count(self) -> int:
        return max((prop.do_index for prop in self.properties), default=0)

    def __len__(self) -> int:
        return len(self.properties)

    def __iter__(self) -> Iterator[ContextProperty]:
        return iter(self.properties)

    def __getitem__(self, property_id: int) -> ContextProperty:
        return self.properties[property_id]

    def find(self, conjunction: Conjunction) -> ContextProperty | None:
        property_id = self._lookup.get(conjunction)
        return None if property_id is None else self.properties[property_id]

    def lookup(self, conjunction: Conjunction) -> ContextProperty:
        """Member equivalent to `conjunction`; raises if there is none."""
        found = self.find(conjunction)
        if found is None:
            raise PropertySpaceError(f"'{conjunction}' is not a context property of this pipeline.")
        return found

    def with_do(self, index: int) -> list[ContextProperty]:
        return [prop for prop in self.properties if prop.do_index == index]


def _closed_data_sets(theory: Theory, universe: Sequence[Atom], budget: int) -> list[Conjunction]:
    """Every closure-distinct conjunction over `universe`, by worklist expansion from ``true``."""
    start = theory.close(())
    seen: dict[Conjunction, None] = {start: None}
    worklist = [start]
    while worklist:
        current = worklist.pop()
        for atom in universe:
            if atom in current.atoms:
                continue
            grown = conjoin(current, theory.close((atom,)))
            if grown in seen:
                continue
            seen[grown] = None
            if len(seen) > budget:
                raise PropertySpaceError(f"more than {budget} data conjunctions")
            worklist.append(grown)
    return sorted(seen, key=Conjunction.sort_key)


def generate_properties(
    instances: Sequence[Instance],
    theory: Theory | None = None,
    max_properties: int = DEFAULT_MAX_PROPERTIES,
) -> PropertySpace:
    """
    Build ``do(k) & C`` for every solver index k and every closure-distinct C.

    Numbering is doIndex-major, then canonical data order.
    """
    if theory is None:
        theory = instances[0].theory if instances else Theory()
    solver_count = len(instances)
    universe = sorted(theory.close(collect_data_atoms(instances)).atoms, key=lambda atom: atom.sort_key())
    budget = max_properties // solver_count if solver_count else max_properties
    too_many = PropertySpaceError(
        f"More than {max_properties} context properties over {len(universe)} data atoms; "
        "raise --max-properties or shrink the atom universe."
    )
    try:
        data_sets = _closed_data_sets(theory, universe, budget)
    except PropertySpaceError:
        raise too_many from None
    # The search above starts from `true`, which is never checked against the budget.
    if solver_count * len(data_sets) > max_properties:
        raise too_many
    properties: list[ContextProperty] = []
    for index in range(1, solver_count + 1):
        for data in data_sets:
            conjunction = conjoin(theory.close((do_atom(index),)), data)
            properties.append(ContextProperty(id=len(properties), do_index=index, data=data, conjunction=conjunction))
    logger.info(
        "Generated %d context properties (%d solvers x %d data conjunctions over %d atoms)",
        len(properties),
        solver_count,
        len(data_sets),
        len(universe),
    )
    return PropertySpace(properties, data_sets, theory)


def firing_rules(rules: Sequence[GroundRule], rho: Conjunction) -> list[GroundRule]:
    """The specificity-maximal rules whose precondition is implied by `rho`."""
    candidates = [rule for rule in rules if implies(rho, rule.pre)]
    return [
        rule for rule in candidates if not any(strictly_implies(other.pre, rule.pre) for other in candidates)
    ]


def _prune(branches: Iterable[Conjunction]) -> list[Conjunction]:
    """Dedupe by equivalence and drop branches that strictly imply another branch."""
    unique: list[Conjunction] = []
    for branch in branches:
        if branch.is_false or any(equivalent(branch, kept) for kept in unique):
            continue
        unique.append(branch)
    return [branch for branch in unique if not any(strictly_implies(branch, other) for other in unique)]


def image_of_property(instance: Instance, c: ContextProperty, space: PropertySpace) -> tuple[ContextProperty, ...]:
    """
    Image of one context property under the abstract solver of `instance`.

    Each rule refines `c` by its precondition; the refinement fires its most
    specific matching rules, keeping its read-only atoms; strictly stronger
    branches are pruned.
    """
    if c.do_index != instance.index:
        return (c,)
    branches: list[Conjunction] = []
    for rule in instance.rules:
        rho = conjoin(c.conjunction, rule.pre)
        if rho.is_false:
            continue
        ro_part, _ = classify_atoms(instance, rho)
        for fired in firing_rules(instance.rules, rho):
            branches.append(conjoin(ro_part, fired.post))
    survivors = _prune(branches)
    if not survivors:
        raise PatternError(
            f"Pattern {instance.pattern.name} at solver {instance.index} has no image for '{c}'; "
            "add a catch-all rule."
        )
    return tuple(sorted({space.lookup(branch) for branch in survivors}, key=lambda prop: prop.id))


@dataclass(frozen=True)
class AbstractSolver:
    """A relation on property ids; total when every id has a nonempty image."""
    solver_index: int
    space: PropertySpace = field(compare=False, repr=False)
    image: Mapping[int, frozenset[int]]
    name: str = ""

    def image_of(self, property_id: int) -> frozenset[int]:
        return self.image.get(property_id, frozenset())

    def pairs(self) -> list[tuple[int, int]]:
        return sorted((source, target) for source, targets in self.image.items() for target in targets)

    def without_pair(self, source: int, target: int) -> "AbstractSolver":
        """Copy of this solver with one pair removed."""
        image = dict(self.image)
        image[source] = frozenset(self.image_of(source) - {target})
        return AbstractSolver(self.solver_index, self.space, image, self.name)


def synthesize_abstract_solver(instance: Instance, space: PropertySpace) -> AbstractSolver:
    """The abstract solver F*_s of `instance` over `space`."""
    image = {
        prop.id: frozenset(target.id for target in image_of_property(instance, prop, space))
        for prop in space
    }
    solver = AbstractSolver(instance.index, space, image, instance.pattern.name)
    logger.debug(
        "Synthesized F%d* (%s): %d non-identity pairs",
        instance.index,
        instance.pattern.name,
        sum(1 for source, target in solver.pairs() if source != target),
    )
    return solver


def solver_from_pairs(
    space: PropertySpace, solver_index: int, pairs: Iterable[tuple[int, int]], name: str = ""
) -> AbstractSolver:
    """A hand-written abstract solver; ids without pairs get an empty image."""
    image: dict[int, set[int]] = {prop.id: set() for prop in space}
    for source, target in pairs:
        if source not in image or target not in image:
            raise PropertySpaceError(f"Pair ({source}, {target}) references an unknown property id.")
        image[source].add(target)
    return AbstractSolver(solver_index, space, {key: frozenset(value) for key, value in image.items()}, name)
