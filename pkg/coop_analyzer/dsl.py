"""Parser, validator and printer for ``.csa`` analyzer specs.

A spec declares solver patterns, implication axioms, the pipeline
instances, an optional initial context and named reverse queries::

    axiom stCnvx(F) => cnvx(F);
    pattern dscnt(ro F, X; S) {
        do(self) & stCnvx(F) -> do(S) & min(F, X);
        do(self) -> do(S);
    }
    solver 2 = dscnt(f, x; 4);
    initial do(1);
    query minimizer { given do(1); forbid do(4) unless min(f, x); }
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import Diagnostic, LogicError, PatternError, SourceLocation, SpecSyntaxError
from .fixpoint import ForbidClause, Query
from .logic import DO, Atom, Conjunction, ImplicationAxiom, Theory, Value, check_atom
from .patterns import SELF, DataParam, Instance, Pattern, Rule, collect_data_atoms, instantiate

_TOKEN_PATTERN = re.compile(
    r"""
    (?P<newline>\n)
    | (?P<space>[ \t\r\f\v]+)
    | (?P<comment>\#[^\n]*)
    | (?P<arrow>->)
    | (?P<implies>=>)
    | (?P<int>\d+)
    | (?P<name>[A-Za-z_][A-Za-z0-9_?']*)
    | (?P<punct>[(){};,&=])
    """,
    re.VERBOSE,
)

_ITEM_KEYWORDS = ("pattern", "axiom", "solver", "initial", "query")


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    location: SourceLocation


def _tokenize(text: str) -> Iterator[_Token]:
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        match = _TOKEN_PATTERN.match(text, pos)
        location = SourceLocation(line, pos - line_start + 1)
        if match is None:
            raise SpecSyntaxError(f"unexpected character {text[pos]!r}", location)
        kind = match.lastgroup or ""
        pos = match.end()
        if kind == "newline":
            line, line_start = line + 1, pos
        elif kind not in {"space", "comment"}:
            yield _Token("punct" if kind in {"arrow", "implies"} else kind, match.group(), location)
    yield _Token("eof", "", SourceLocation(line, pos - line_start + 1))


@dataclass(frozen=True)
class PropExpr:
    """A written conjunction: its atoms in source order (empty for ``true``)."""
    atoms: tuple[Atom, ...]
    location: SourceLocation | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return " & ".join(str(atom) for atom in self.atoms) if self.atoms else "true"


@dataclass(frozen=True)
class InstanceDecl:
    index: int
    pattern: str
    data_args: tuple[str, ...]
    ctrl_args: tuple[int, ...]
    location: SourceLocation | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ForbidDecl:
    match: PropExpr
    unless: PropExpr | None = None


@dataclass(frozen=True)
class QueryDecl:
    name: str
    givens: tuple[PropExpr, ...] = ()
    forbids: tuple[ForbidDecl, ...] = ()
    exists: tuple[PropExpr, ...] = ()
    location: SourceLocation | None = field(default=None, compare=False)

    def expressions(self) -> list[PropExpr]:
        exprs = [*self.givens, *self.exists]
        for forbid in self.forbids:
            exprs.append(forbid.match)
            if forbid.unless is not None:
                exprs.append(forbid.unless)
        return exprs


@dataclass
class SpecModel:
    """Everything a spec file declares, in declaration order."""
    predicates: dict[str, int] = field(default_factory=dict)
    patterns: dict[str, Pattern] = field(default_factory=dict)
    axioms: list[ImplicationAxiom] = field(default_factory=list)
    instances: list[InstanceDecl] = field(default_factory=list)
    initial: PropExpr | None = None
    queries: dict[str, QueryDecl] = field(default_factory=dict)

    def theory(self) -> Theory:
        return Theory(self.axioms, self.predicates)

    def conjunction(self, expr: PropExpr, theory: Theory | None = None) -> Conjunction:
        return (theory or self.theory()).close(expr.atoms)

    def query(self, name: str, theory: Theory | None = None) -> Query:
        """The reverse query `name` with its conjunctions canonicalized."""
        theory = theory or self.theory()
        decl = self.queries[name]
        return Query(
            givens=tuple(theory.close(expr.atoms) for expr in decl.givens),
            forbids=tuple(
                ForbidClause(
                    theory.close(forbid.match.atoms),
                    None if forbid.unless is None else theory.close(forbid.unless.atoms),
                )
                for forbid in decl.forbids
            ),
            exists=tuple(theory.close(expr.atoms) for expr in decl.exists),
        )

    def instantiate(self, theory: Theory | None = None) -> list[Instance]:
        """Ground every declared solver, ordered by index."""
        theory = theory or self.theory()
        solver_count = len(self.instances)
        instances: list[Instance] = []
        for decl in sorted(self.instances, key=lambda item: item.index):
            pattern = self.patterns.get(decl.pattern)
            if pattern is None:
                raise PatternError(f"solver {decl.index} uses unknown pattern '{decl.pattern}'", decl.location)
            try:
                instances.append(
                    instantiate(pattern, decl.index, decl.data_args, decl.ctrl_args, theory, solver_count)
                )
            except PatternError as exc:
                raise PatternError(f"solver {decl.index}: {exc.message}", exc.location or decl.location) from exc
        return instances


class _SpecParser:
    def __init__(self, text: str) -> None:
        self._tokens = list(_tokenize(text))
        self._pos = 0
        self._model = SpecModel()
        self._ground_exprs: list[PropExpr] = []

    def _peek(self, offset: int = 0) -> _Token:
        return self._tokens[min(self._pos + offset, len(self._tokens) - 1)]

    def _advance(self) -> _Token:
        token = self._peek()
        self._pos += 1
        return token

    def _error(self, message: str, token: _Token | None = None) -> SpecSyntaxError:
        token = token or self._peek()
        found = "end of input" if token.kind == "eof" else f"'{token.text}'"
        return SpecSyntaxError(f"{message}, found {found}", token.location)

    def _at(self, text: str) -> bool:
        token = self._peek()
        return token.kind in {"punct", "name"} and token.text == text

    def _expect(self, text: str) -> _Token:
        if not self._at(text):
            raise self._error(f"expected '{text}'")
        return self._advance()

    def _accept(self, text: str) -> bool:
        if self._at(text):
            self._advance()
            return True
        return False

    def _name(self, what: str = "identifier") -> _Token:
        if self._peek().kind != "name":
            raise self._error(f"expected {what}")
        return self._advance()

    def _int(self) -> int:
        if self._peek().kind != "int":
            raise self._error("expected solver index")
        return int(self._advance().text)

    def parse(self) -> SpecModel:
        while self._peek().kind != "eof":
            token = self._peek()
            if token.kind != "name" or token.text not in _ITEM_KEYWORDS:
                raise self._error("expected one of " + ", ".join(_ITEM_KEYWORDS))
            getattr(self, f"_parse_{token.text}")()
        self._check_ground_arities()
        return self._model

    def _declare(self, atom: Atom, location: SourceLocation) -> None:
        try:
            check_atom(atom, self._model.predicates)
        except LogicError as exc:
            raise SpecSyntaxError(exc.message, location) from exc

    def _atom(self, ground: bool) -> Atom:
        start = self._name("predicate")
        if start.text == DO:
            raise self._error("'do' is only allowed as a control atom", start)
        self._expect("(")
        args: list[Value] = [self._name("argument").text]
        while self._accept(","):
            args.append(self._name("argument").text)
        self._expect(")")
        atom = Atom(start.text, tuple(args))
        if not ground:
            self._declare(atom, start.location)
        return atom

    def _parse_pattern(self) -> None:
        keyword = self._advance()
        name = self._name("pattern name")
        if name.text in self._model.patterns:
            raise SpecSyntaxError(f"duplicate pattern '{name.text}'", name.location)
        self._expect("(")
        data_params: list[DataParam] = []
        if not self._at(";"):
            data_params.append(self._data_param())
            while self._accept(","):
                data_params.append(self._data_param())
        self._expect(";")
        ctrl_params: list[str] = []
        if not self._at(")"):
            ctrl_params.append(self._name("control parameter").text)
            while self._accept(","):
                ctrl_params.append(self._name("control parameter").text)
        self._expect(")")
        self._expect("{")
        rules = [self._rule()]
        while not self._at("}"):
            rules.append(self._rule())
        self._expect("}")
        try:
            pattern = Pattern(name.text, tuple(data_params), tuple(ctrl_params), tuple(rules), keyword.location)
        except PatternError as exc:
            raise SpecSyntaxError(exc.message, exc.location or keyword.location) from exc
        self._model.patterns[pattern.name] = pattern

    def _data_param(self) -> DataParam:
        first = self._name("data parameter")
        if first.text == "ro" and self._peek().kind == "name":
            return DataParam(self._advance().text, read_only=True)
        return DataParam(first.text)

    def _rule(self) -> Rule:
        start = self._expect("do")
        self._expect("(")
        self._expect(SELF)
        self._expect(")")
        pre: list[Atom] = []
        while self._accept("&"):
            pre.append(self._atom(ground=False))
        self._expect("->")
        self._expect("do")
        self._expect("(")
        target = self._name("solver parameter or 'self'").text
        self._expect(")")
        post: list[Atom] = []
        while self._accept("&"):
            post.append(self._atom(ground=False))
        self._expect(";")
        return Rule(tuple(pre), target, tuple(post), start.location)

    def _parse_axiom(self) -> None:
        keyword = self._advance()
        premise = self._atom(ground=False)
        self._expect("=>")
        conclusion = self._atom(ground=False)
        self._expect(";")
        try:
            self._model.axioms.append(ImplicationAxiom(premise, conclusion))
        except LogicError as exc:
            raise SpecSyntaxError(exc.message, keyword.location) from exc

    def _parse_solver(self) -> None:
        keyword = self._advance()
        index = self._int()
        self._expect("=")
        pattern = self._name("pattern name").text
        self._expect("(")
        data_args: list[str] = []
        if not self._at(";"):
            data_args.append(self._name("data value").text)
            while self._accept(","):
                data_args.append(self._name("data value").text)
        self._expect(";")
        ctrl_args: list[int] = []
        if not self._at(")"):
            ctrl_args.append(self._int())
            while self._accept(","):
                ctrl_args.append(self._int())
        self._expect(")")
        self._expect(";")
        self._model.instances.append(
            InstanceDecl(index, pattern, tuple(data_args), tuple(ctrl_args), keyword.location)
        )

    def _parse_initial(self) -> None:
        keyword = self._advance()
        if self._model.initial is not None:
            raise SpecSyntaxError("duplicate initial declaration", keyword.location)
        self._model.initial = self._prop_expr()
        self._expect(";")

    def _parse_query(self) -> None:
        keyword = self._advance()
        name = self._name("query name")
        if name.text in self._model.queries:
            raise SpecSyntaxError(f"duplicate query '{name.text}'", name.location)
        self._expect("{")
        givens: list[PropExpr] = []
        forbids: list[ForbidDecl] = []
        exists: list[PropExpr] = []
        while not self._at("}"):
            if self._accept("given"):
                givens.append(self._prop_expr())
            elif self._accept("forbid"):
                match = self._prop_expr()
                unless = self._prop_expr() if self._accept("unless") else None
                forbids.append(ForbidDecl(match, unless))
            elif self._accept("exists"):
                exists.append(self._prop_expr())
            else:
                raise self._error("expected 'given', 'forbid' or 'exists'")
            self._expect(";")
        self._expect("}")
        self._model.queries[name.text] = QueryDecl(
            name.text, tuple(givens), tuple(forbids), tuple(exists), keyword.location
        )

    def _conjunct(self) -> Atom:
        if self._at(DO) and self._peek(1).text == "(":
            self._advance()
            self._expect("(")
            index = self._int()
            self._expect(")")
            return Atom(DO, (index,))
        return self._atom(ground=True)

    def _prop_expr(self) -> PropExpr:
        location = self._peek().location
        atoms: list[Atom] = []
        if self._at("true") and self._peek(1).text != "(":
            self._advance()
        else:
            atoms.append(self._conjunct())
        while self._accept("&"):
            atoms.append(self._conjunct())
        expr = PropExpr(tuple(atoms), location)
        self._ground_exprs.append(expr)
        return expr

    def _check_ground_arities(self) -> None:
        """Ground atoms must agree with declared arities; unknown predicates are left to validation."""
        for expr in self._ground_exprs:
            for atom in expr.atoms:
                declared = self._model.predicates.get(atom.predicate)
                if not atom.is_do and declared is not None and declared != len(atom.args):
                    raise SpecSyntaxError(
                        f"predicate '{atom.predicate}' has arity {declared}, used with arity {len(atom.args)}",
                        expr.location,
                    )


def parse_spec(text: str) -> SpecModel:
    """Parse spec text; raises SpecSyntaxError with a location."""
    return _SpecParser(text).parse()


def parse_prop_expr(text: str) -> PropExpr:
    """Parse a standalone conjunction such as ``do(1) & tree(i)``."""
    parser = _SpecParser(text)
    expr = parser._prop_expr()
    if parser._peek().kind != "eof":
        raise parser._error("unexpected input after conjunction")
    return expr


def load_spec(path: Path) -> SpecModel:
    return parse_spec(path.read_text(encoding="utf-8"))


def validate_spec(model: SpecModel) -> list[Diagnostic]:
    """
    Check a parsed model; an empty list means it is analyzable.

    Covers catch-all rules, instance indexing, instantiation, the initial
    context and query atoms.
    """
    diagnostics: list[Diagnostic] = []
    for pattern in model.patterns.values():
        if not pattern.has_catch_all:
            diagnostics.append(
                Diagnostic(
                    "totality",
                    f"pattern {pattern.name} has no catch-all rule (a rule whose precondition is only do(self))",
                    pattern.location,
                )
            )

    solver_count = len(model.instances)
    seen: set[int] = set()
    for decl in model.instances:
        if decl.index in seen:
            diagnostics.append(Diagnostic("indexing", f"solver {decl.index} is declared twice", decl.location))
        elif not 1 <= decl.index <= solver_count:
            diagnostics.append(
                Diagnostic("indexing", f"solver index {decl.index} is outside 1..{solver_count}", decl.location)
            )
        seen.add(decl.index)
    for missing in sorted(set(range(1, solver_count + 1)) - seen):
        diagnostics.append(Diagnostic("indexing", f"no solver declared for index {missing}"))

    theory = model.theory()
    universe: frozenset[Atom] | None = None
    if not any(diag.code == "indexing" for diag in diagnostics):
        try:
            universe = theory.close(collect_data_atoms(model.instantiate(theory))).atoms
        except PatternError as exc:
            code = "unknown-pattern" if "unknown pattern" in exc.message else "instantiation"
            diagnostics.append(Diagnostic(code, exc.message, exc.location))

    def _check_expr(expr: PropExpr, what: str) -> Conjunction | None:
        for atom in expr.atoms:
            if atom.is_do:
                if not 1 <= int(atom.args[0]) <= solver_count:
                    diagnostics.append(Diagnostic("indexing", f"{what}: {atom} names no solver", expr.location))
                    return None
            elif atom.predicate not in model.predicates:
                diagnostics.append(
                    Diagnostic("unknown-predicate", f"{what}: predicate '{atom.predicate}' is not declared", expr.location)
                )
                return None
        try:
            conjunction = theory.close(expr.atoms)
        except LogicError as exc:
            diagnostics.append(Diagnostic("arity", f"{what}: {exc.message}", expr.location))
            return None
        if universe is not None:
            outside = sorted((conjunction.data.atoms - universe), key=Atom.sort_key)
            if outside:
                diagnostics.append(
                    Diagnostic(
                        "unknown-atom",
                        f"{what}: {outside[0]} does not occur in any instantiated pattern",
                        expr.location,
                    )
                )
                return None
        return conjunction

    if model.initial is not None:
        initial = _check_expr(model.initial, "initial context")
        if initial is not None and (initial.is_false or initial.do_index is None):
            diagnostics.append(
                Diagnostic(
                    "initial",
                    f"initial context '{model.initial}' must contain exactly one do(k) atom",
                    model.initial.location,
                )
            )
    for decl in model.queries.values():
        for expr in decl.expressions():
            _check_expr(expr, f"query {decl.name}")
    return diagnostics


def _params(data: str, ctrl: str) -> str:
    return f"{data}; {ctrl}" if ctrl else f"{data};"


def format_spec(model: SpecModel) -> str:
    """Render a model back to spec text; parsing the result yields an equal model."""
    blocks: list[str] = []
    if model.axioms:
        blocks.append("\n".join(f"axiom {axiom};" for axiom in model.axioms))
    for pattern in model.patterns.values():
        data = ", ".join(str(param) for param in pattern.data_params)
        ctrl = ", ".join(pattern.ctrl_params)
        lines = [f"pattern {pattern.name}({_params(data, ctrl)}) {{"]
        lines.extend(f"    {rule};" for rule in pattern.rules)
        lines.append("}")
        blocks.append("\n".join(lines))
    if model.instances:
        blocks.append(
            "\n".join(
                f"solver {decl.index} = {decl.pattern}("
                f"{_params(', '.join(decl.data_args), ', '.join(str(arg) for arg in decl.ctrl_args))});"
                for decl in model.instances
            )
        )
    if model.initial is not None:
        blocks.append(f"initial {model.initial};")
    for decl in model.queries.values():
        lines = [f"query {decl.name} {{"]
        lines.extend(f"    given {expr};" for expr in decl.givens)
        for forbid in decl.forbids:
            unless = "" if forbid.unless is None else f" unless {forbid.unless}"
            lines.append(f"    forbid {forbid.match}{unless};")
        lines.extend(f"    exists {expr};" for expr in decl.exists)
        lines.append("}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")
