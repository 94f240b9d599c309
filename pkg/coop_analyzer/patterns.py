"""Solver patterns and their instantiation at a pipeline position."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import LogicError, PatternError, SourceLocation
from .logic import Atom, Conjunction, Theory, Value, do_atom

SELF = "self"


@dataclass(frozen=True)
class DataParam:
    name: str
    read_only: bool = False

    def __str__(self) -> str:
        return f"ro {self.name}" if self.read_only else self.name


@dataclass(frozen=True)
class Rule:
    """
    ``do(self) & pre -> do(target) & post`` over the pattern's parameters.

    `pre` and `post` hold data atoms only; `target` is a control parameter
    or ``self``.
    """
    pre: tuple[Atom, ...]
    target: str
    post: tuple[Atom, ...]
    location: SourceLocation | None = field(default=None, compare=False)

    @property
    def is_catch_all(self) -> bool:
        return not self.pre

    def __str__(self) -> str:
        lhs = " & ".join([f"do({SELF})", *(str(atom) for atom in self.pre)])
        rhs = " & ".join([f"do({self.target})", *(str(atom) for atom in self.post)])
        return f"{lhs} -> {rhs}"


@dataclass(frozen=True)
class Pattern:
    """A solver description: formal parameters plus an ordered rule list."""
    name: str
    data_params: tuple[DataParam, ...]
    ctrl_params: tuple[str, ...]
    rules: tuple[Rule, ...]
    location: SourceLocation | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        names = [param.name for param in self.data_params] + list(self.ctrl_params)
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise PatternError(f"Pattern {self.name}: duplicate parameter(s) {', '.join(duplicates)}.", self.location)
        if SELF in names:
            raise PatternError(f"Pattern {self.name}: '{SELF}' is reserved and cannot be a parameter.", self.location)
        if not self.rules:
            raise PatternError(f"Pattern {self.name} has no rules.", self.location)
        data_names = {param.name for param in self.data_params}
        for rule in self.rules:
            if rule.target != SELF and rule.target not in self.ctrl_params:
                raise PatternError(
                    f"Pattern {self.name}: rule target '{rule.target}' is not a control parameter.",
                    rule.location or self.location,
                )
            for atom in (*rule.pre, *rule.post):
                if atom.is_do:
                    raise PatternError(
                        f"Pattern {self.name}: 'do' may only occur once on each side of a rule.",
                        rule.location or self.location,
                    )
                unbound = [arg for arg in atom.args if arg != SELF and arg not in data_names]
                if unbound:
                    raise PatternError(
                        f"Pattern {self.name}: unbound variable '{unbound[0]}' in {atom}.",
                        rule.location or self.location,
                    )

    @property
    def has_catch_all(self) -> bool:
        return any(rule.is_catch_all for rule in self.rules)

    @property
    def read_write_params(self) -> tuple[str, ...]:
        return tuple(param.name for param in self.data_params if not param.read_only)


@dataclass(frozen=True)
class GroundRule:
    pre: Conjunction
    post: Conjunction
    rule: Rule = field(compare=False)

    def __str__(self) -> str:
        return f"{self.pre} -> {self.post}"


@dataclass(frozen=True)
class Instance:
    """A pattern bound to solver index `index` with concrete arguments."""
    index: int
    pattern: Pattern
    data_args: tuple[Value, ...]
    ctrl_args: tuple[int, ...]
    rules: tuple[GroundRule, ...]
    theory: Theory = field(compare=False, repr=False)

    @property
    def rw_values(self) -> frozenset[Value]:
        """Values bound to data parameters that are not read-only."""
        return frozenset(
            value for param, value in zip(self.pattern.data_params, self.data_args) if not param.read_only
        )

    def __str__(self) -> str:
        data = ", ".join(str(arg) for arg in self.data_args)
        ctrl = ", ".join(str(arg) for arg in self.ctrl_args)
        return f"{self.pattern.name}({data}; {ctrl})"


def instantiate(
    pattern: Pattern,
    index: int,
    data_args: Sequence[Value],
    ctrl_args: Sequence[int],
    theory: Theory | None = None,
    solver_count: int | None = None,
) -> Instance:
    """
    Ground every rule of `pattern` for the solver at `index`.

    ``self`` maps to `index`, data parameters to `data_args`, control
    parameters to `ctrl_args`. Rule order is preserved.
    """
    theory = theory or Theory()
    if index < 1 or (solver_count is not None and index > solver_count):
        raise PatternError(f"Solver index {index} is out of range.")
    if len(data_args) != len(pattern.data_params):
        raise PatternError(
            f"Pattern {pattern.name} takes {len(pattern.data_params)} data argument(s), got {len(data_args)}."
        )
    if len(ctrl_args) != len(pattern.ctrl_params):
        raise PatternError(
            f"Pattern {pattern.name} takes {len(pattern.ctrl_params)} control argument(s), got {len(ctrl_args)}."
        )
    for target in ctrl_args:
        if target < 1 or (solver_count is not None and target > solver_count):
            raise PatternError(f"Pattern {pattern.name}: control argument {target} is not a solver index.")

    binding: dict[str, Value] = {SELF: index}
    binding.update({param.name: value for param, value in zip(pattern.data_params, data_args)})
    targets: dict[str, int] = {SELF: index}
    targets.update(dict(zip(pattern.ctrl_params, ctrl_args)))

    def _ground(atoms: Iterable[Atom]) -> list[Atom]:
        return [Atom(atom.predicate, tuple(binding[str(arg)] for arg in atom.args)) for atom in atoms]

    ground_rules: list[GroundRule] = []
    for rule in pattern.rules:
        try:
            pre = theory.close([do_atom(index), *_ground(rule.pre)])
            post = theory.close([do_atom(targets[rule.target]), *_ground(rule.post)])
        except LogicError as exc:
            raise PatternError(f"Pattern {pattern.name}: {exc.message}", rule.location) from exc
        if pre.is_false:
            raise PatternError(f"Pattern {pattern.name}: precondition of '{rule}' is FALSE.", rule.location)
        ground_rules.append(GroundRule(pre=pre, post=post, rule=rule))
    return Instance(
        index=index,
        pattern=pattern,
        data_args=tuple(data_args),
        ctrl_args=tuple(ctrl_args),
        rules=tuple(ground_rules),
        theory=theory,
    )


def collect_data_atoms(instances: Iterable[Instance]) -> frozenset[Atom]:
    """All non-``do`` atoms occurring in any ground pre- or postcondition."""
    atoms: set[Atom] = set()
    for instance in instances:
        for rule in instance.rules:
            atoms |= rule.pre.data.atoms
            atoms |= rule.post.data.atoms
    return frozenset(atoms)


def classify_atoms(instance: Instance, c: Conjunction) -> tuple[Conjunction, Conjunction]:
    """
    Split the data atoms of `c` into (read-only part, read-write part).

    An atom is read-write when it mentions a value bound to a data parameter
    of `instance` that is not marked ``ro``.
    """
    rw_values = instance.rw_values
    ro: list[Atom] = []
    rw: list[Atom] = []
    for atom in c.data.atoms:
        (rw if any(arg in rw_values for arg in atom.args) else ro).append(atom)
    return instance.theory.restrict(ro), instance.theory.restrict(rw)
