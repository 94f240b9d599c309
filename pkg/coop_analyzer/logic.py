"""Ground atoms, implication axioms and canonical conjunctions.

A conjunction is stored implication-closed, so two equivalent conjunctions
compare equal. Axioms are single-premise atom implications
(``stCnvx(F) => cnvx(F)``); distinct ``do`` atoms are mutually exclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, MutableMapping, Union

from .errors import LogicError

Value = Union[str, int]

DO = "do"


def _value_key(value: Value) -> tuple[int, int, str]:
    """Order solver indices before names, both naturally."""
    if isinstance(value, int):
        return (0, value, "")
    return (1, 0, value)


@dataclass(frozen=True)
class Atom:
    """A ground predicate application such as ``min(f, x)`` or ``do(2)``."""
    predicate: str
    args: tuple[Value, ...]

    @property
    def is_do(self) -> bool:
        return self.predicate == DO

    def sort_key(self) -> tuple[str, tuple[tuple[int, int, str], ...]]:
        return (self.predicate, tuple(_value_key(arg) for arg in self.args))

    def __str__(self) -> str:
        return f"{self.predicate}({','.join(str(arg) for arg in self.args)})"


def do_atom(index: int) -> Atom:
    """Build the control atom ``do(index)``."""
    return Atom(DO, (index,))


def check_atom(atom: Atom, arities: MutableMapping[str, int] | None = None) -> None:
    """
    Validate an atom's shape and record its predicate's arity.

    The first use of a predicate declares its arity in `arities`; later uses
    must agree. ``do`` is reserved: arity 1, a positive solver index argument.
    """
    if not atom.predicate:
        raise LogicError("Atom predicate must be a nonempty identifier.")
    if not atom.args:
        raise LogicError(f"Atom {atom.predicate}() needs at least one argument.")
    if atom.is_do:
        if len(atom.args) != 1:
            raise LogicError(f"Predicate 'do' has arity 1, got {len(atom.args)} in {atom}.")
        index = atom.args[0]
        if not isinstance(index, int) or isinstance(index, bool) or index < 1:
            raise LogicError(f"The argument of 'do' must be a positive solver index, got {index!r}.")
        return
    for arg in atom.args:
        if isinstance(arg, str) and not arg:
            raise LogicError(f"Empty argument in atom {atom.predicate}.")
    if arities is None:
        return
    declared = arities.setdefault(atom.predicate, len(atom.args))
    if declared != len(atom.args):
        raise LogicError(
            f"Predicate '{atom.predicate}' declared with arity {declared}, used with arity {len(atom.args)}."
        )


@dataclass(frozen=True)
class ImplicationAxiom:
    """
    Atom-implication schema ``premise => conclusion``.

    Every argument of both atoms is a variable; variables of the conclusion
    must occur in the premise.
    """
    premise: Atom
    conclusion: Atom

    def __post_init__(self) -> None:
        if self.premise.is_do or self.conclusion.is_do:
            raise LogicError("Axioms may not mention the reserved predicate 'do'.")
        missing = [var for var in self.conclusion.args if var not in self.premise.args]
        if missing:
            names = ", ".join(str(var) for var in missing)
            raise LogicError(f"Axiom {self}: conclusion variables not bound by the premise: {names}.")

    def fire(self, atom: Atom) -> Atom | None:
        """Return the conclusion instance triggered by `atom`, if it matches the premise."""
        if atom.predicate != self.premise.predicate or len(atom.args) != len(self.premise.args):
            return None
        binding: dict[Value, Value] = {}
        for var, value in zip(self.premise.args, atom.args):
            bound = binding.setdefault(var, value)
            if bound != value:
                return None
        return Atom(self.conclusion.predicate, tuple(binding[var] for var in self.conclusion.args))

    def __str__(self) -> str:
        return f"{self.premise} => {self.conclusion}"


@dataclass(frozen=True)
class Conjunction:
    """
    Canonical conjunction of ground atoms.

    `atoms` is implication-closed; `shown` holds the implication-maximal atoms
    used for display and takes no part in equality.
    """
    atoms: frozenset[Atom] = frozenset()
    is_false: bool = False
    shown: frozenset[Atom] = field(default=frozenset(), compare=False, repr=False)

    @property
    def is_true(self) -> bool:
        return not self.is_false and not self.atoms

    @property
    def do_atom(self) -> Atom | None:
        for atom in self.atoms:
            if atom.is_do:
                return atom
        return None

    @property
    def do_index(self) -> int | None:
        atom = self.do_atom
        return None if atom is None else int(atom.args[0])

    @property
    def data(self) -> "Conjunction":
        """The conjunction without its ``do`` atom."""
        if self.is_false:
            return self
        return Conjunction(
            frozenset(atom for atom in self.atoms if not atom.is_do),
            False,
            frozenset(atom for atom in self.shown if not atom.is_do),
        )

    def sorted_atoms(self) -> list[Atom]:
        return sorted(self.atoms, key=Atom.sort_key)

    def sort_key(self) -> tuple[int, tuple[tuple[str, tuple[tuple[int, int, str], ...]], ...]]:
        """Canonical order: fewer atoms first, then atom-wise."""
        return (len(self.atoms), tuple(atom.sort_key() for atom in self.sorted_atoms()))

    def render(self) -> str:
        """Display form: ``do`` first, then implication-maximal data atoms."""
        if self.is_false:
            return "FALSE"
        if not self.atoms:
            return "true"
        visible = sorted(self.shown, key=lambda atom: (not atom.is_do, atom.sort_key()))
        return " & ".join(str(atom) for atom in visible)

    def __str__(self) -> str:
        return self.render()


TRUE = Conjunction()
FALSE = Conjunction(frozenset(), True)


class Theory:
    """The implication axioms and predicate arities of one spec."""

    def __init__(self, axioms: Iterable[ImplicationAxiom] = (), arities: Mapping[str, int] | None = None) -> None:
        self.axioms: tuple[ImplicationAxiom, ...] = tuple(axioms)
        self.arities: dict[str, int] = dict(arities or {})
        self._by_predicate: dict[str, list[ImplicationAxiom]] = {}
        for axiom in self.axioms:
            check_atom(axiom.premise, self.arities)
            check_atom(axiom.conclusion, self.arities)
            self._by_predicate.setdefault(axiom.premise.predicate, []).append(axiom)
        self._consequences: dict[Atom, frozenset[Atom]] = {}

    def consequences(self, atom: Atom) -> frozenset[Atom]:
        """Closure of the single atom `atom` (including itself)."""
        cached = self._consequences.get(atom)
        if cached is not None:
            return cached
        closed = {atom}
        worklist = [atom]
        while worklist:
            current = worklist.pop()
            for axiom in self._by_predicate.get(current.predicate, ()):
                derived = axiom.fire(current)
                if derived is not None and derived not in closed:
                    closed.add(derived)
                    worklist.append(derived)
        result = frozenset(closed)
        self._consequences[atom] = result
        return result

    def maximal_atoms(self, atoms: frozenset[Atom]) -> frozenset[Atom]:
        """Atoms of `atoms` not strictly implied by another member."""
        shown: set[Atom] = set()
        for atom in atoms:
            dominated = any(
                other != atom and atom in self.consequences(other) and other not in self.consequences(atom)
                for other in atoms
            )
            if not dominated:
                shown.add(atom)
        return frozenset(shown)

    def close(self, atoms: Iterable[Atom]) -> Conjunction:
        """Implication closure; two distinct ``do`` atoms collapse to FALSE."""
        closed: set[Atom] = set()
        for atom in atoms:
            check_atom(atom, self.arities)
            closed |= self.consequences(atom)
        if len({atom for atom in closed if atom.is_do}) > 1:
            return FALSE
        frozen = frozenset(closed)
        return Conjunction(frozen, False, self.maximal_atoms(frozen))

    def restrict(self, atoms: Iterable[Atom]) -> Conjunction:
        """A conjunction over exactly `atoms`, without closing it."""
        frozen = frozenset(atoms)
        return Conjunction(frozen, False, self.maximal_atoms(frozen))


def close_atoms(
    atoms: Iterable[Atom],
    axioms: Iterable[ImplicationAxiom] = (),
    arities: MutableMapping[str, int] | None = None,
) -> Conjunction:
    """Canonical, implication-closed conjunction of `atoms` under `axioms`."""
    theory = Theory(axioms, arities)
    result = theory.close(atoms)
    if arities is not None:
        arities.update(theory.arities)
    return result


def conjoin(a: Conjunction, b: Conjunction) -> Conjunction:
    """
    Conjunction of two canonical conjunctions.

    Axioms have a single premise, so the union of two closed sets is closed.
    """
    if a.is_false or b.is_false:
        return FALSE
    union = a.atoms | b.atoms
    if len({atom for atom in union if atom.is_do}) > 1:
        return FALSE
    hidden = (a.atoms - a.shown) | (b.atoms - b.shown)
    return Conjunction(union, False, (a.shown | b.shown) - hidden)


def implies(strong: Conjunction, weak: Conjunction) -> bool:
    """True iff `strong` ∧ `weak` is equivalent to `strong`."""
    if strong.is_false:
        return True
    if weak.is_false:
        return False
    return weak.atoms <= strong.atoms


def strictly_implies(strong: Conjunction, weak: Conjunction) -> bool:
    return implies(strong, weak) and not implies(weak, strong)


def equivalent(a: Conjunction, b: Conjunction) -> bool:
    """Equivalence of canonical conjunctions is equality of their closures."""
    return a.is_false == b.is_false and a.atoms == b.atoms
