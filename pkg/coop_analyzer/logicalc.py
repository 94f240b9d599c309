"""Export to, and evaluation of, a fragment of the LogiCalc set language.

The fragment covers integers, tuples, finite sets, comprehensions
``{ e | x in S; (a, b) in R, a + 1 <= b }``, union ``\\/``, ``+ - *``,
``=`` and ``subset``. One equation may be recursive; it is solved by
saturation from the empty set, which yields the least solution.
"""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Sequence, Union

from .abstraction import AbstractSolver, PropertySpace
from .errors import LogiCalcError, MissingInitialError, SourceLocation
from .logic import Conjunction

logger = logging.getLogger(__name__)

LCValue = Union[int, tuple, frozenset]

RECURSIVE_NAME = "p"
INITIAL_NAME = "c0"
MAX_SATURATION_ROUNDS = 100_000
MAX_SEARCH_ASSIGNMENTS = 1 << 16

_TOKEN_PATTERN = re.compile(
    r"""
    (?P<newline>\n)
    | (?P<space>[ \t\r\f\v]+)
    | (?P<unsupported>/\\|\\(?!/)|>=|<(?!=)|>|!=|[/%^#~:\[\]])
    | (?P<union>\\/)
    | (?P<le><=)
    | (?P<int>\d+)
    | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<punct>[(){},;|=+\-*])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"in", "subset"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    location: SourceLocation


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        match = _TOKEN_PATTERN.match(text, pos)
        location = SourceLocation(line, pos - line_start + 1)
        if match is None:
            raise LogiCalcError(f"unexpected character {text[pos]!r}", location)
        kind = match.lastgroup or ""
        if kind == "unsupported":
            raise LogiCalcError(f"unsupported LogiCalc feature '{match.group()}'", location)
        pos = match.end()
        if kind == "newline":
            line, line_start = line + 1, pos
        elif kind != "space":
            if kind == "name" and match.group() in _KEYWORDS:
                kind = "keyword"
            tokens.append(_Token(kind, match.group(), location))
    tokens.append(_Token("eof", "", SourceLocation(line, pos - line_start + 1)))
    return tokens


# Expression tree


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class Name:
    name: str
    location: SourceLocation | None = field(default=None, compare=False)


@dataclass(frozen=True)
class TupleExpr:
    items: tuple["Expr", ...]


@dataclass(frozen=True)
class SetLit:
    items: tuple["Expr", ...]


@dataclass(frozen=True)
class Generator:
    pattern: "Expr"
    source: "Expr"


@dataclass(frozen=True)
class Guard:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Comprehension:
    head: "Expr"
    qualifiers: tuple[Union[Generator, Guard], ...]


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[IntLit, Name, TupleExpr, SetLit, Comprehension, BinOp]


@dataclass(frozen=True)
class Statement:
    """``left = right`` or ``left subset right``."""
    op: str
    left: Expr
    right: Expr
    location: SourceLocation | None = field(default=None, compare=False)

    @property
    def defines(self) -> str | None:
        return self.left.name if self.op == "=" and isinstance(self.left, Name) else None


@dataclass
class LCModel:
    statements: list[Statement] = field(default_factory=list)

    def definitions(self) -> dict[str, Statement]:
        """First ``name = expr`` statement per name; later ones are constraints."""
        found: dict[str, Statement] = {}
        for statement in self.statements:
            name = statement.defines
            if name is not None and name not in found:
                found[name] = statement
        return found


class _Parser:
    def __init__(self, text: str) -> None:
        self._tokens = _tokenize(text)
        self._pos = 0

    def _peek(self, offset: int = 0) -> _Token:
        return self._tokens[min(self._pos + offset, len(self._tokens) - 1)]

    def _advance(self) -> _Token:
        token = self._peek()
        self._pos += 1
        return token

    def _at(self, text: str) -> bool:
        token = self._peek()
        return token.kind != "eof" and token.text == text

    def _expect(self, text: str) -> _Token:
        if not self._at(text):
            token = self._peek()
            found = "end of input" if token.kind == "eof" else f"'{token.text}'"
            raise LogiCalcError(f"expected '{text}', found {found}", token.location)
        return self._advance()

    def _accept(self, text: str) -> bool:
        if self._at(text):
            self._advance()
            return True
        return False

    def model(self) -> LCModel:
        statements: list[Statement] = []
        while self._peek().kind != "eof":
            statements.append(self._statement())
        return LCModel(statements)

    def _statement(self) -> Statement:
        location = self._peek().location
        left = self.expr()
        if self._accept("="):
            op = "="
        elif self._accept("subset"):
            op = "subset"
        else:
            token = self._peek()
            raise LogiCalcError(f"expected '=' or 'subset', found '{token.text}'", token.location)
        right = self.expr()
        # Statements are ';'-terminated; the final one may omit it.
        if not self._accept(";") and self._peek().kind != "eof":
            self._expect(";")
        return Statement(op, left, right, location)

    def expr(self) -> Expr:
        left = self._additive()
        while self._accept("\\/"):
            left = BinOp("\\/", left, self._additive())
        return left

    def _additive(self) -> Expr:
        left = self._product()
        while self._at("+") or self._at("-"):
            op = self._advance().text
            left = BinOp(op, left, self._product())
        return left

    def _product(self) -> Expr:
        left = self._primary()
        while self._accept("*"):
            left = BinOp("*", left, self._primary())
        return left

    def _primary(self) -> Expr:
        token = self._peek()
        if token.kind == "int":
            self._advance()
            return IntLit(int(token.text))
        if token.kind == "name":
            self._advance()
            return Name(token.text, token.location)
        if self._accept("("):
            items = [self.expr()]
            while self._accept(","):
                items.append(self.expr())
            self._expect(")")
            return items[0] if len(items) == 1 else TupleExpr(tuple(items))
        if self._accept("{"):
            return self._set_body()
        found = "end of input" if token.kind == "eof" else f"'{token.text}'"
        raise LogiCalcError(f"expected an expression, found {found}", token.location)

    def _set_body(self) -> Expr:
        if self._accept("}"):
            return SetLit(())
        first = self.expr()
        if self._accept("|"):
            qualifiers = [self._qualifier()]
            while self._accept(";") or self._accept(","):
                qualifiers.append(self._qualifier())
            self._expect("}")
            return Comprehension(first, tuple(qualifiers))
        items = [first]
        while not self._accept("}"):
            # A missing comma between two tuple elements is tolerated.
            if not self._accept(",") and not self._at("("):
                self._expect("}")
            items.append(self.expr())
        return SetLit(tuple(items))

    def _qualifier(self) -> Union[Generator, Guard]:
        left = self.expr()
        if self._accept("in"):
            _check_pattern(left, self._peek().location)
            return Generator(left, self.expr())
        if self._accept("<="):
            return Guard(left, self.expr())
        token = self._peek()
        raise LogiCalcError(f"expected 'in' or '<=' in comprehension, found '{token.text}'", token.location)


def _check_pattern(expr: Expr, location: SourceLocation) -> None:
    if isinstance(expr, Name):
        return
    if isinstance(expr, TupleExpr):
        for item in expr.items:
            _check_pattern(item, location)
        return
    raise LogiCalcError("generator patterns must be names or tuples of names", location)


def parse_logicalc(text: str) -> LCModel:
    """Parse fragment text into statements; raises LogiCalcError with a location."""
    return _Parser(text).model()


def parse_expression(text: str) -> Expr:
    parser = _Parser(text)
    expr = parser.expr()
    if parser._peek().kind != "eof":
        token = parser._peek()
        raise LogiCalcError(f"unexpected '{token.text}' after expression", token.location)
    return expr


# Evaluation


def _free_names(expr: Expr, bound: frozenset[str] = frozenset()) -> set[str]:
    if isinstance(expr, IntLit):
        return set()
    if isinstance(expr, Name):
        return set() if expr.name in bound else {expr.name}
    if isinstance(expr, (TupleExpr, SetLit)):
        return set().union(*(_free_names(item, bound) for item in expr.items))
    if isinstance(expr, BinOp):
        return _free_names(expr.left, bound) | _free_names(expr.right, bound)
    free: set[str] = set()
    local = set(bound)
    for qualifier in expr.qualifiers:
        if isinstance(qualifier, Generator):
            free |= _free_names(qualifier.source, frozenset(local))
            local |= _pattern_names(qualifier.pattern)
        else:
            free |= _free_names(qualifier.left, frozenset(local)) | _free_names(qualifier.right, frozenset(local))
    return free | _free_names(expr.head, frozenset(local))


def _pattern_names(expr: Expr) -> set[str]:
    if isinstance(expr, Name):
        return {expr.name}
    assert isinstance(expr, TupleExpr)
    return set().union(*(_pattern_names(item) for item in expr.items))


def _match(pattern: Expr, value: LCValue, env: dict[str, LCValue], local: set[str]) -> dict[str, LCValue] | None:
    """Bind pattern names against `value`; names already local act as equality tests."""
    if isinstance(pattern, Name):
        if pattern.name in local:
            return env if env[pattern.name] == value else None
        extended = dict(env)
        extended[pattern.name] = value
        local.add(pattern.name)
        return extended
    assert isinstance(pattern, TupleExpr)
    if not isinstance(value, tuple) or len(value) != len(pattern.items):
        return None
    current: dict[str, LCValue] | None = env
    for item, component in zip(pattern.items, value):
        if current is None:
            return None
        current = _match(item, component, current, local)
    return current


def _as_set(value: LCValue, what: str) -> frozenset:
    if not isinstance(value, frozenset):
        raise LogiCalcError(f"{what} must be a set, got {format_value(value)}")
    return value


def _as_int(value: LCValue, op: str) -> int:
    if not isinstance(value, int):
        raise LogiCalcError(f"operator '{op}' needs integers, got {format_value(value)}")
    return value


def evaluate(expr: Expr, env: Mapping[str, LCValue]) -> LCValue:
    """Evaluate a ground expression under `env`."""
    if isinstance(expr, IntLit):
        return expr.value
    if isinstance(expr, Name):
        if expr.name not in env:
            raise LogiCalcError(f"unbound name '{expr.name}'", expr.location)
        return env[expr.name]
    if isinstance(expr, TupleExpr):
        return tuple(evaluate(item, env) for item in expr.items)
    if isinstance(expr, SetLit):
        return frozenset(evaluate(item, env) for item in expr.items)
    if isinstance(expr, BinOp):
        left, right = evaluate(expr.left, env), evaluate(expr.right, env)
        if expr.op == "\\/":
            return _as_set(left, "left operand of \\/") | _as_set(right, "right operand of \\/")
        a, b = _as_int(left, expr.op), _as_int(right, expr.op)
        return a + b if expr.op == "+" else a - b if expr.op == "-" else a * b
    return frozenset(_comprehension(expr, dict(env)))


def _comprehension(expr: Comprehension, env: dict[str, LCValue]) -> Iterator[LCValue]:
    def _solve(index: int, scope: dict[str, LCValue], local: set[str]) -> Iterator[LCValue]:
        if index == len(expr.qualifiers):
            yield evaluate(expr.head, scope)
            return
        qualifier = expr.qualifiers[index]
        if isinstance(qualifier, Guard):
            left, right = evaluate(qualifier.left, scope), evaluate(qualifier.right, scope)
            if type(left) is not type(right):
                raise LogiCalcError(f"cannot compare {format_value(left)} <= {format_value(right)}")
            if left <= right:  # type: ignore[operator]
                yield from _solve(index + 1, scope, local)
            return
        source = _as_set(evaluate(qualifier.source, scope), "generator source")
        for element in sorted(source, key=_value_key):
            names = set(local)
            extended = _match(qualifier.pattern, element, scope, names)
            if extended is not None:
                yield from _solve(index + 1, extended, names)

    yield from _solve(0, env, set())


def _dependency_cycle(definitions: Mapping[str, Statement]) -> set[str]:
    """Names that depend on themselves through other definitions."""
    deps = {name: _free_names(stmt.right) & definitions.keys() for name, stmt in definitions.items()}

    def _reach(start: str) -> set[str]:
        seen: set[str] = set()
        stack = list(deps[start])
        while stack:
            name = stack.pop()
            if name not in seen:
                seen.add(name)
                stack.extend(deps[name])
        return seen

    reach = {name: _reach(name) for name in definitions}
    cyclic = {name for name in definitions if name in reach[name]}
    for a in cyclic:
        if not cyclic <= reach[a] | {a}:
            raise LogiCalcError("only one recursive equation is supported")
    return cyclic


class _ConstraintViolated(LogiCalcError):
    pass


def _depends_on(name: str, targets: set[str], definitions: Mapping[str, Statement]) -> bool:
    seen: set[str] = set()
    stack = [name]
    while stack:
        current = stack.pop()
        for dep in _free_names(definitions[current].right) & definitions.keys():
            if dep in targets:
                return True
            if dep not in seen:
                seen.add(dep)
                stack.append(dep)
    return False


def _check_constraint(statement: Statement, env: Mapping[str, LCValue]) -> None:
    left, right = evaluate(statement.left, env), evaluate(statement.right, env)
    holds = left == right if statement.op == "=" else _as_set(left, "subset operand") <= _as_set(right, "subset operand")
    if not holds:
        raise _ConstraintViolated(
            f"constraint violated: {format_value(left)} {statement.op} {format_value(right)}", statement.location
        )


def _unknowns(model: LCModel, definitions: Mapping[str, Statement], c0: LCValue | None) -> list[str]:
    names: set[str] = set()
    for statement in model.statements:
        names |= _free_names(statement.right)
        if statement.defines is None:
            names |= _free_names(statement.left)
    names -= definitions.keys()
    if c0 is not None:
        names.discard(INITIAL_NAME)
    return sorted(names)


def _search_domains(
    model: LCModel, definitions: Mapping[str, Statement], unknowns: Sequence[str], c0: LCValue | None
) -> list[list[frozenset]]:
    """Candidate values of each unknown: every subset of the ground set it is bounded by."""
    env: dict[str, LCValue] = {} if c0 is None else {INITIAL_NAME: c0}
    blocked = set(unknowns)
    for name, statement in definitions.items():
        if not _free_names(statement.right) & blocked and _free_names(statement.right) <= env.keys():
            env[name] = evaluate(statement.right, env)
        else:
            blocked.add(name)
    domains: list[list[frozenset]] = []
    for unknown in unknowns:
        bound = next(
            (
                st for st in model.statements
                if st.op == "subset" and st.left == Name(unknown) and _free_names(st.right) <= env.keys()
            ),
            None,
        )
        if bound is None:
            raise LogiCalcError(
                f"solving for unknown set '{unknown}' needs a ground '{unknown} subset ...' bound"
            )
        universe = sorted_values(_as_set(evaluate(bound.right, env), f"bound of {unknown}"))
        domains.append(
            [frozenset(combo) for size in range(len(universe) + 1) for combo in itertools.combinations(universe, size)]
        )
    return domains


def eval_logicalc(model: LCModel, c0: LCValue | None = None) -> dict[str, LCValue]:
    """
    Evaluate every equation and return all bindings.

    `c0`, when given, binds the name ``c0`` before evaluation. The recursive
    equation (``p`` if recursive, else the last one in the cycle) is solved by
    saturation; its companions are recomputed each round. A single name that is
    never defined but bounded by ``name subset <ground set>`` is searched for
    over the subsets of that set, smallest first; the first value meeting every
    constraint wins.
    """
    definitions = model.definitions()
    unknowns = _unknowns(model, definitions, c0)
    if not unknowns:
        return _evaluate_all(model, definitions, {} if c0 is None else {INITIAL_NAME: c0})
    if INITIAL_NAME in unknowns and not any(
        statement.op == "subset" and statement.left == Name(INITIAL_NAME) for statement in model.statements
    ):
        raise MissingInitialError(f"'{INITIAL_NAME}' is used but neither defined nor given a value")
    if len(unknowns) > 1:
        raise LogiCalcError(f"unsupported: searching over several unknown sets ({', '.join(unknowns)})")
    domains = _search_domains(model, definitions, unknowns, c0)
    total = 1
    for domain in domains:
        total *= len(domain)
    if total > MAX_SEARCH_ASSIGNMENTS:
        raise LogiCalcError(f"search space of {total} assignments for {', '.join(unknowns)} is too large")
    for values in itertools.product(*domains):
        seed: dict[str, LCValue] = dict(zip(unknowns, values))
        if c0 is not None:
            seed[INITIAL_NAME] = c0
        try:
            env = _evaluate_all(model, definitions, seed)
        except _ConstraintViolated:
            continue
        logger.debug("Found %s", ", ".join(f"{name} = {format_value(env[name])}" for name in unknowns))
        return env
    raise LogiCalcError(f"no values of {', '.join(unknowns)} satisfy the constraints")


def _evaluate_all(model: LCModel, definitions: Mapping[str, Statement], seed: Mapping[str, LCValue]) -> dict[str, LCValue]:
    env: dict[str, LCValue] = dict(seed)
    cyclic = _dependency_cycle(definitions)
    if cyclic:
        target = RECURSIVE_NAME if RECURSIVE_NAME in cyclic else [n for n in definitions if n in cyclic][-1]
    else:
        target = None
    downstream = {
        name for name in definitions if name not in cyclic and _depends_on(name, cyclic, definitions)
    }

    def _define(name: str) -> None:
        if name in seed:
            return
        env[name] = evaluate(definitions[name].right, env)

    for name in definitions:
        if name not in cyclic and name not in downstream:
            _define(name)
    if target is not None:
        companions = [name for name in definitions if name in cyclic and name != target]
        env[target] = frozenset()
        for round_no in range(1, MAX_SATURATION_ROUNDS + 1):
            for name in companions:
                _define(name)
            previous = _as_set(env[target], f"recursive equation {target}")
            current = _as_set(evaluate(definitions[target].right, env), f"recursive equation {target}")
            if not previous <= current:
                raise LogiCalcError(f"non-monotone equation for '{target}'", definitions[target].location)
            env[target] = current
            if current == previous:
                logger.debug("Saturated %s after %d rounds (%d elements)", target, round_no, len(current))
                break
        else:
            raise LogiCalcError(f"equation for '{target}' did not saturate", definitions[target].location)
        for name in companions:
            _define(name)
    for name in definitions:
        if name in downstream:
            _define(name)
    for statement in model.statements:
        if statement.defines is not None and definitions[statement.defines] is statement:
            continue
        _check_constraint(statement, env)
    return env


def _value_key(value: Any) -> tuple:
    if isinstance(value, int):
        return (0, value)
    if isinstance(value, tuple):
        return (1, len(value), tuple(_value_key(item) for item in value))
    return (2, len(value), tuple(sorted(_value_key(item) for item in value)))


def sorted_values(values: frozenset) -> list[LCValue]:
    return sorted(values, key=_value_key)


def format_value(value: LCValue) -> str:
    if isinstance(value, int):
        return str(value)
    if isinstance(value, tuple):
        return "(" + ", ".join(format_value(item) for item in value) + ")"
    return "{ " + ", ".join(format_value(item) for item in sorted_values(value)) + " }" if value else "{}"


# Export


def _data_name(data: Conjunction) -> str:
    if not data.atoms:
        return "true"
    parts: list[str] = []
    for atom in sorted(data.shown or data.atoms, key=lambda atom: atom.sort_key()):
        args = "".join(str(arg)[:1].upper() + str(arg)[1:] for arg in atom.args)
        parts.append(re.sub(r"[^A-Za-z0-9_]", "_", atom.predicate) + args)
    name = "".join(parts)
    return name if re.match(r"[A-Za-z_]", name) else f"d_{name}"


def data_coding(space: PropertySpace) -> dict[str, tuple[int, Conjunction]]:
    """Name -> (integer code, data conjunction), in canonical data order."""
    reserved = {"Cdata", "p", "c0"} | _KEYWORDS
    coding: dict[str, tuple[int, Conjunction]] = {}
    for code, data in enumerate(space.data_conjunctions):
        name = _data_name(data)
        while name in coding or name in reserved or re.fullmatch(r"(F\d+star|img\d+|[iz]\d+|c\d+)", name):
            name += "_"
        coding[name] = (code, data)
    return coding


def property_code(space: PropertySpace, property_id: int) -> tuple[int, int]:
    """The ``(do index, data code)`` tuple standing for a property."""
    prop = space[property_id]
    return (prop.do_index, space.data_conjunctions.index(prop.data))


def _chunks(items: Sequence[str], size: int) -> Iterator[Sequence[str]]:
    for start in range(0, len(items), size):
        yield items[start : start + size]


def export_logicalc(space: PropertySpace, solvers: Sequence[AbstractSolver], c0: int | None = None) -> str:
    """
    Render the constraint system as LogiCalc text.

    Pairs leaving a solver's own index are listed explicitly; the identity on
    every other index is a comprehension over ``Cdata``.
    """
    coding = data_coding(space)
    names = {code: name for name, (code, _) in coding.items()}
    lines: list[str] = []
    bindings = [f"{name} = {code};" for name, (code, _) in coding.items()]
    lines.extend(" ".join(chunk) for chunk in _chunks(bindings, 4))
    cdata = [name for name in coding]
    cdata_lines = [", ".join(chunk) for chunk in _chunks(cdata, 4)]
    lines.append("Cdata = { " + (",\n          ".join(cdata_lines)) + " };")

    def _ref(property_id: int) -> str:
        index, code = property_code(space, property_id)
        return f"({index}, {names[code]})"

    indices = sorted(solver.solver_index for solver in solvers)
    for solver in sorted(solvers, key=lambda item: item.solver_index):
        k = solver.solver_index
        own = [(a, b) for a, b in solver.pairs() if space[a].do_index == k]
        width = max((len(_ref(a)) for a, _ in own), default=0) + 1
        rendered = [f"        ({(_ref(a) + ',').ljust(width)} {_ref(b)})" for a, b in own]
        block = f"F{k}star = {{\n" + ",\n".join(rendered) + " }"
        others = [index for index in indices if index != k]
        if others:
            block += (
                f" \\/\n{{ ((i{k}, z{k}), (i{k}, z{k})) | i{k} in {{ {', '.join(str(i) for i in others)} }}, "
                f"z{k} in Cdata }}"
            )
        lines.append(block + ";")
    for k in indices:
        lines.append(f"img{k} = {{ c{k}{k} | (c{k}, c{k}{k}) in F{k}star; c{k} in p }};")
    if c0 is not None:
        lines.append(f"c0 = {_ref(c0)};")
    lines.append("p = { c0 }" + "".join(f" \\/ img{k}" for k in indices) + ";")
    return "\n".join(lines) + "\n"


def decode_members(space: PropertySpace, members: frozenset) -> set[int]:
    """Map ``(do index, data code)`` tuples back to property ids."""
    lookup = {property_code(space, prop.id): prop.id for prop in space}
    decoded: set[int] = set()
    for member in members:
        if member not in lookup:
            raise LogiCalcError(f"{format_value(member)} does not code a context property")
        decoded.add(lookup[member])
    return decoded
