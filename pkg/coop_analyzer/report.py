"""Analysis reports and their text/JSON renderings."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

from .abstraction import AbstractSolver, PropertySpace
from .errors import Diagnostic, SourceLocation
from .fixpoint import FeasibleSet, QuerySolution


class OutputFormat(str, Enum):
    text = "text"
    json = "json"


@dataclass(frozen=True)
class PropertyRow:
    id: int
    rendering: str


@dataclass(frozen=True)
class SolverRow:
    index: int
    pattern: str
    pairs: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class FeasibleRow:
    initial: int
    members: tuple[int, ...]


@dataclass(frozen=True)
class QueryRow:
    name: str
    solutions: tuple[QuerySolution, ...]


@dataclass
class AnalysisReport:
    """
    What one command computed. ``None`` marks a section the command did not
    compute; the text rendering omits it and JSON shows ``null``.
    """
    properties: list[PropertyRow] | None = None
    solvers: list[SolverRow] | None = None
    feasible: FeasibleRow | None = None
    queries: list[QueryRow] | None = None
    diagnostics: list[Diagnostic] | None = field(default=None)


def build_report(
    *,
    space: PropertySpace | None = None,
    solvers: Sequence[AbstractSolver] | None = None,
    feasible: tuple[int, FeasibleSet] | None = None,
    queries: Iterable[tuple[str, Sequence[QuerySolution]]] | None = None,
    diagnostics: Sequence[Diagnostic] | None = None,
) -> AnalysisReport:
    """Collect analysis results into a report with ids from the property table."""
    report = AnalysisReport()
    if space is not None:
        report.properties = [PropertyRow(prop.id, str(prop)) for prop in space]
    if solvers is not None:
        report.solvers = [
            SolverRow(solver.solver_index, solver.name, tuple(solver.pairs()))
            for solver in sorted(solvers, key=lambda item: item.solver_index)
        ]
    if feasible is not None:
        initial, members = feasible
        report.feasible = FeasibleRow(initial, tuple(sorted(members.members)))
    if queries is not None:
        report.queries = [
            QueryRow(name, tuple(sorted(solutions, key=lambda sol: (sol.c0, sol.witnesses))))
            for name, solutions in queries
        ]
    if diagnostics is not None:
        report.diagnostics = list(diagnostics)
    return report


def _ids(values: Sequence[int]) -> str:
    return ",".join(str(value) for value in values) if values else "-"


def render_text(report: AnalysisReport) -> str:
    """Line-oriented rendering; every section starts with a counting header."""
    lines: list[str] = []
    if report.properties is not None:
        lines.append(f"{len(report.properties)} context properties")
        lines.extend(f"property {row.id}: {row.rendering}" for row in report.properties)
    if report.solvers is not None:
        lines.append(f"{len(report.solvers)} solvers")
        for solver in report.solvers:
            lines.append(f"solver {solver.index} {solver.pattern or '-'}: {len(solver.pairs)} pairs")
            lines.extend(f"pair {solver.index}: {a} -> {b}" for a, b in solver.pairs)
    if report.feasible is not None:
        lines.append(f"feasible from {report.feasible.initial} ({len(report.feasible.members)} members)")
        rendering = {row.id: row.rendering for row in report.properties or []}
        for member in report.feasible.members:
            suffix = f": {rendering[member]}" if member in rendering else ""
            lines.append(f"member {member}{suffix}")
    if report.queries is not None:
        for query in report.queries:
            lines.append(f"query {query.name}: {len(query.solutions)} solutions")
            lines.extend(
                f"solution {query.name}: c0={sol.c0} witnesses={_ids(sol.witnesses)}" for sol in query.solutions
            )
    if report.diagnostics is not None:
        lines.append(f"{len(report.diagnostics)} diagnostics")
        lines.extend(f"diagnostic: {diag}" for diag in report.diagnostics)
    return "\n".join(lines) + ("\n" if lines else "")


def _diagnostic_json(diag: Diagnostic) -> dict[str, Any]:
    location = None if diag.location is None else {"line": diag.location.line, "column": diag.location.column}
    return {"severity": diag.severity, "code": diag.code, "message": diag.message, "location": location}


def report_to_dict(report: AnalysisReport) -> dict[str, Any]:
    return {
        "properties": None
        if report.properties is None
        else [{"id": row.id, "rendering": row.rendering} for row in report.properties],
        "solvers": None
        if report.solvers is None
        else [
            {"index": row.index, "pattern": row.pattern, "pairs": [list(pair) for pair in row.pairs]}
            for row in report.solvers
        ],
        "feasible": None
        if report.feasible is None
        else {"initial": report.feasible.initial, "members": list(report.feasible.members)},
        "queries": None
        if report.queries is None
        else [
            {
                "name": row.name,
                "solutions": [{"c0": sol.c0, "witnesses": list(sol.witnesses)} for sol in row.solutions],
            }
            for row in report.queries
        ],
        "diagnostics": None if report.diagnostics is None else [_diagnostic_json(d) for d in report.diagnostics],
    }


def render_json(report: AnalysisReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def render(report: AnalysisReport, output_format: OutputFormat) -> str:
    return render_json(report) if output_format == OutputFormat.json else render_text(report)


_PATTERNS = {
    "properties": re.compile(r"^(\d+) context properties$"),
    "property": re.compile(r"^property (\d+): (.*)$"),
    "solvers": re.compile(r"^(\d+) solvers$"),
    "solver": re.compile(r"^solver (\d+) (\S+): (\d+) pairs$"),
    "pair": re.compile(r"^pair (\d+): (\d+) -> (\d+)$"),
    "feasible": re.compile(r"^feasible from (\d+) \((\d+) members\)$"),
    "member": re.compile(r"^member (\d+)(?:: .*)?$"),
    "query": re.compile(r"^query (\S+): (\d+) solutions$"),
    "solution": re.compile(r"^solution (\S+): c0=(\d+) witnesses=(\S+)$"),
    "diagnostics": re.compile(r"^(\d+) diagnostics$"),
    "diagnostic": re.compile(r"^diagnostic: (?:(\d+):(\d+): )?(\w+)\[([\w-]+)\]: (.*)$"),
}


def parse_text_report(text: str) -> AnalysisReport:
    """Rebuild a report from :func:`render_text` output."""
    report = AnalysisReport()
    solver_rows: list[tuple[int, str, list[tuple[int, int]]]] = []
    feasible: tuple[int, list[int]] | None = None
    query_rows: list[tuple[str, list[QuerySolution]]] = []
    for number, line in enumerate(text.splitlines(), start=1):
        kind, match = next(
            ((kind, m) for kind, pattern in _PATTERNS.items() if (m := pattern.match(line))), (None, None)
        )
        if kind is None or match is None:
            raise ValueError(f"line {number}: unrecognized report line {line!r}")
        if kind == "properties":
            report.properties = []
        elif kind == "property":
            assert report.properties is not None
            report.properties.append(PropertyRow(int(match[1]), match[2]))
        elif kind == "solvers":
            report.solvers = []
        elif kind == "solver":
            solver_rows.append((int(match[1]), "" if match[2] == "-" else match[2], []))
        elif kind == "pair":
            solver_rows[-1][2].append((int(match[2]), int(match[3])))
        elif kind == "feasible":
            feasible = (int(match[1]), [])
        elif kind == "member":
            assert feasible is not None
            feasible[1].append(int(match[1]))
        elif kind == "query":
            query_rows.append((match[1], []))
        elif kind == "solution":
            witnesses = () if match[3] == "-" else tuple(int(value) for value in match[3].split(","))
            query_rows[-1][1].append(QuerySolution(int(match[2]), witnesses))
        elif kind == "diagnostics":
            report.diagnostics = []
        else:
            assert report.diagnostics is not None
            location = None if match[1] is None else SourceLocation(int(match[1]), int(match[2]))
            report.diagnostics.append(Diagnostic(match[4], match[5], location, match[3]))
    if report.solvers is not None:
        report.solvers = [SolverRow(index, name, tuple(pairs)) for index, name, pairs in solver_rows]
    if feasible is not None:
        report.feasible = FeasibleRow(feasible[0], tuple(feasible[1]))
    if query_rows:
        report.queries = [QueryRow(name, tuple(solutions)) for name, solutions in query_rows]
    return report


def render_trace(
    space: PropertySpace, initial: int, target: int, path: Sequence[tuple[int, int]] | None, output_format: OutputFormat
) -> str:
    """Render a derivation path found by ``derivation_path``."""
    if output_format == OutputFormat.json:
        payload = {
            "from": initial,
            "to": target,
            "reachable": path is not None,
            "ticks": [{"solver": index, "property": prop} for index, prop in path or []],
        }
        return json.dumps(payload, indent=2) + "\n"
    if path is None:
        return f"trace from {initial} to {target}: unreachable\n"
    lines = [f"trace from {initial} to {target}: {len(path)} ticks", f"start {initial}: {space[initial]}"]
    lines.extend(f"tick {step}: solver {index} -> {prop}: {space[prop]}" for step, (index, prop) in enumerate(path, 1))
    return "\n".join(lines) + "\n"
