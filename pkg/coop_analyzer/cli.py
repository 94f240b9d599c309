"""CLI commands for analyzing pipelines of cooperating constraint solvers."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, NoReturn, Optional

import typer

from .abstraction import AbstractSolver, PropertySpace, generate_properties, synthesize_abstract_solver
from .analysis_log import configure_logging
from .config import Config
from .dsl import PropExpr, SpecModel, load_spec, parse_prop_expr, validate_spec
from .errors import AnalysisError, Diagnostic, LogiCalcError, MissingInitialError
from .fixpoint import (
    check_fun,
    concrete_oracle_check,
    derivation_path,
    least_feasible_set,
    solve_reverse_query,
)
from .logic import Theory
from .logicalc import (
    LCValue,
    decode_members,
    eval_logicalc,
    evaluate,
    export_logicalc,
    format_value,
    parse_expression,
    parse_logicalc,
    sorted_values,
)
from .patterns import Instance
from .report import OutputFormat, build_report, render, render_trace
from .spec_paths import bundled_specs, resolve_spec_path

app = typer.Typer(help="coop-analyzer - static analysis of cooperating constraint solvers")

_FORMAT_OPTION = typer.Option(OutputFormat.text, "--format", help="Report format")
_MAX_PROPERTIES_OPTION = typer.Option(
    None, "--max-properties", min=1, help="Abort when the property space would exceed this size"
)
_DEBUG_OPTION = typer.Option(False, "--debug", help="Mirror debug logging to stderr")
_INITIAL_OPTION = typer.Option(None, "--initial", help="Initial context, e.g. 'do(1) & tree(i)'")


@dataclass
class _Pipeline:
    model: SpecModel
    theory: Theory
    instances: list[Instance]
    space: PropertySpace
    solvers: list[AbstractSolver]


def _fail(message: str, code: int = 1) -> NoReturn:
    typer.echo(message, err=True)
    raise typer.Exit(code=code)


def _located(source: object, exc: AnalysisError) -> str:
    return f"{source}:{exc}" if exc.location is not None else f"{source}: {exc}"


def _setup(debug: bool, max_properties: Optional[int] = None, jobs: Optional[int] = None) -> Config:
    """Load config, apply flag overrides and configure logging for this run."""
    try:
        config = Config.load()
    except RuntimeError as exc:
        _fail(f"Config error: {exc}")
    if max_properties is not None:
        config.max_properties = max_properties
    if jobs is not None:
        config.jobs = jobs
    configure_logging(config, debug=debug)
    return config


def _load_model(spec: str) -> tuple[Path, SpecModel]:
    try:
        path = resolve_spec_path(spec)
    except FileNotFoundError as exc:
        _fail(str(exc), code=2)
    try:
        return path, load_spec(path)
    except AnalysisError as exc:
        _fail(_located(path, exc))


def _analyze(model: SpecModel, config: Config) -> _Pipeline:
    theory = model.theory()
    instances = model.instantiate(theory)
    space = generate_properties(instances, theory, config.max_properties)
    solvers = [synthesize_abstract_solver(instance, space) for instance in instances]
    return _Pipeline(model, theory, instances, space, solvers)


def _pipeline(spec: str, config: Config) -> _Pipeline:
    """Parse, validate and synthesize; any diagnostic ends the run with exit 1."""
    path, model = _load_model(spec)
    diagnostics = validate_spec(model)
    if diagnostics:
        for diagnostic in diagnostics:
            typer.echo(f"{path}:{diagnostic}" if diagnostic.location else f"{path}: {diagnostic}", err=True)
        raise typer.Exit(code=1)
    try:
        return _analyze(model, config)
    except AnalysisError as exc:
        _fail(_located(path, exc))


def _property_id(pipeline: _Pipeline, expr: PropExpr, what: str) -> int:
    try:
        conjunction = pipeline.model.conjunction(expr, pipeline.theory)
        return pipeline.space.lookup(conjunction).id
    except AnalysisError as exc:
        _fail(f"Invalid {what} '{expr}': {exc.message}")


def _parse_expr_option(raw: str, what: str) -> PropExpr:
    try:
        return parse_prop_expr(raw)
    except AnalysisError as exc:
        _fail(f"Invalid {what} '{raw}': {exc}", code=2)


def _initial_id(pipeline: _Pipeline, initial: Optional[str], *, required: bool = True) -> Optional[int]:
    """`--initial` wins over the spec's ``initial`` declaration."""
    expr = _parse_expr_option(initial, "--initial") if initial is not None else pipeline.model.initial
    if expr is None:
        if required:
            _fail("No initial context: pass --initial or declare 'initial' in the spec.", code=2)
        return None
    return _property_id(pipeline, expr, "initial context")


@app.command()
def check(
    spec: str = typer.Argument(..., help="Spec file or bundled example name"),
    output_format: OutputFormat = _FORMAT_OPTION,
    max_properties: Optional[int] = _MAX_PROPERTIES_OPTION,
    debug: bool = _DEBUG_OPTION,
) -> None:
    """Validate a spec, synthesize its solvers and cross-check them against concrete ticks."""
    config = _setup(debug, max_properties)
    _path, model = _load_model(spec)
    diagnostics = validate_spec(model)
    if not diagnostics:
        try:
            pipeline = _analyze(model, config)
        except AnalysisError as exc:
            diagnostics.append(Diagnostic("analysis", exc.message, exc.location))
        else:
            for solver in pipeline.solvers:
                if not check_fun(solver):
                    diagnostics.append(
                        Diagnostic("totality", f"abstract solver F{solver.solver_index}* is not total")
                    )
            oracle = concrete_oracle_check(pipeline.instances, pipeline.solvers)
            diagnostics.extend(Diagnostic("coverage", str(violation)) for violation in oracle.violations)
    typer.echo(render(build_report(diagnostics=diagnostics), output_format), nl=False)
    if diagnostics:
        raise typer.Exit(code=1)


@app.command()
def properties(
    spec: str = typer.Argument(..., help="Spec file or bundled example name"),
    output_format: OutputFormat = _FORMAT_OPTION,
    max_properties: Optional[int] = _MAX_PROPERTIES_OPTION,
    debug: bool = _DEBUG_OPTION,
) -> None:
    """Print the numbered context-property table."""
    config = _setup(debug, max_properties)
    pipeline = _pipeline(spec, config)
    typer.echo(render(build_report(space=pipeline.space), output_format), nl=False)


@app.command()
def solvers(
    spec: str = typer.Argument(..., help="Spec file or bundled example name"),
    output_format: OutputFormat = _FORMAT_OPTION,
    max_properties: Optional[int] = _MAX_PROPERTIES_OPTION,
    debug: bool = _DEBUG_OPTION,
) -> None:
    """Print every synthesized abstract solver as a list of property-id pairs."""
    config = _setup(debug, max_properties)
    pipeline = _pipeline(spec, config)
    report = build_report(space=pipeline.space, solvers=pipeline.solvers)
    typer.echo(render(report, output_format), nl=False)


@app.command()
def reach(
    spec: str = typer.Argument(..., help="Spec file or bundled example name"),
    initial: Optional[str] = _INITIAL_OPTION,
    output_format: OutputFormat = _FORMAT_OPTION,
    max_properties: Optional[int] = _MAX_PROPERTIES_OPTION,
    debug: bool = _DEBUG_OPTION,
) -> None:
    """Print the least feasible set reachable from the initial context."""
    config = _setup(debug, max_properties)
    pipeline = _pipeline(spec, config)
    c0 = _initial_id(pipeline, initial)
    assert c0 is not None
    feasible = least_feasible_set(pipeline.solvers, c0)
    report = build_report(space=pipeline.space, feasible=(c0, feasible))
    typer.echo(render(report, output_format), nl=False)


@app.command()
def query(
    spec: str = typer.Argument(..., help="Spec file or bundled example name"),
    name: str = typer.Argument(..., help="Query declared in the spec"),
    output_format: OutputFormat = _FORMAT_OPTION,
    max_properties: Optional[int] = _MAX_PROPERTIES_OPTION,
    jobs: Optional[int] = typer.Option(None, "--jobs", min=1, help="Evaluate candidates in parallel"),
    debug: bool = _DEBUG_OPTION,
) -> None:
    """Find every initial context (with witnesses) satisfying a reverse query."""
    config = _setup(debug, max_properties, jobs)
    pipeline = _pipeline(spec, config)
    if name not in pipeline.model.queries:
        available = ", ".join(pipeline.model.queries) or "none"
        _fail(f"Unknown query '{name}' (declared: {available})", code=2)
    solutions = solve_reverse_query(
        pipeline.solvers, pipeline.space, pipeline.model.query(name, pipeline.theory), jobs=config.jobs
    )
    report = build_report(space=pipeline.space, queries=[(name, solutions)])
    typer.echo(render(report, output_format), nl=False)


@app.command()
def trace(
    spec: str = typer.Argument(..., help="Spec file or bundled example name"),
    target: str = typer.Argument(..., help="Context property to explain, e.g. 'do(4) & cnvx(f)'"),
    initial: Optional[str] = _INITIAL_OPTION,
    output_format: OutputFormat = _FORMAT_OPTION,
    max_properties: Optional[int] = _MAX_PROPERTIES_OPTION,
    debug: bool = _DEBUG_OPTION,
) -> None:
    """Show a shortest sequence of abstract ticks leading to a feasible property."""
    config = _setup(debug, max_properties)
    pipeline = _pipeline(spec, config)
    c0 = _initial_id(pipeline, initial)
    assert c0 is not None
    target_id = _property_id(pipeline, _parse_expr_option(target, "target"), "target")
    path = derivation_path(pipeline.solvers, c0, target_id)
    typer.echo(render_trace(pipeline.space, c0, target_id, path, output_format), nl=False)


@app.command(name="export-logicalc")
def export_logicalc_command(
    spec: str = typer.Argument(..., help="Spec file or bundled example name"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write here instead of stdout"),
    initial: Optional[str] = _INITIAL_OPTION,
    max_properties: Optional[int] = _MAX_PROPERTIES_OPTION,
    debug: bool = _DEBUG_OPTION,
) -> None:
    """Export the feasible-set constraints as LogiCalc text."""
    config = _setup(debug, max_properties)
    pipeline = _pipeline(spec, config)
    c0 = _initial_id(pipeline, initial, required=False)
    text = export_logicalc(pipeline.space, pipeline.solvers, c0)
    if output is None:
        typer.echo(text, nl=False)
        return
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(text, encoding="utf-8")
    typer.echo(f"Wrote {output}")


def _lc_json(value: LCValue) -> Any:
    if isinstance(value, int):
        return value
    if isinstance(value, tuple):
        return [_lc_json(item) for item in value]
    return [_lc_json(item) for item in sorted_values(value)]


@app.command(name="eval-logicalc")
def eval_logicalc_command(
    file: Path = typer.Argument(..., help="LogiCalc file"),
    c0: Optional[str] = typer.Option(None, "--c0", help="Value bound to c0, e.g. '(1, 5)'"),
    show: list[str] = typer.Option(["p"], "--show", help="Names to print (repeatable)"),
    spec: Optional[str] = typer.Option(
        None, "--spec", help="Decode the printed sets as context properties of this spec"
    ),
    output_format: OutputFormat = _FORMAT_OPTION,
    debug: bool = _DEBUG_OPTION,
) -> None:
    """Evaluate a LogiCalc file, solving its recursive equation by saturation."""
    config = _setup(debug)
    try:
        text = file.read_text(encoding="utf-8")
    except OSError as exc:
        _fail(f"Cannot read {file}: {exc}", code=2)
    c0_value: Optional[LCValue] = None
    if c0 is not None:
        try:
            c0_value = evaluate(parse_expression(c0), {})
        except LogiCalcError as exc:
            _fail(f"Invalid --c0 '{c0}': {exc}", code=2)
    try:
        bindings = eval_logicalc(parse_logicalc(text), c0_value)
    except MissingInitialError:
        _fail(f"{file} has no 'c0 = ...' line; pass the initial property with --c0, e.g. --c0 '(1, 0)'", code=2)
    except LogiCalcError as exc:
        _fail(_located(file, exc))
    missing = [name for name in show if name not in bindings]
    if missing:
        _fail(f"Not defined in {file}: {', '.join(missing)}", code=2)
    pipeline = _pipeline(spec, config) if spec is not None else None

    decoded: dict[str, list[int]] = {}
    if pipeline is not None:
        for name in show:
            value = bindings[name]
            if not isinstance(value, frozenset):
                _fail(f"'{name}' is not a set and cannot be decoded", code=1)
            try:
                decoded[name] = sorted(decode_members(pipeline.space, value))
            except LogiCalcError as exc:
                _fail(f"'{name}': {exc}")

    if output_format == OutputFormat.json:
        payload = {name: decoded[name] if name in decoded else _lc_json(bindings[name]) for name in show}
        typer.echo(json.dumps(payload, indent=2))
        return
    for name in show:
        if pipeline is None or name not in decoded:
            typer.echo(f"{name} = {format_value(bindings[name])}")
            continue
        typer.echo(f"{name}: {len(decoded[name])} members")
        for member in decoded[name]:
            typer.echo(f"member {member}: {pipeline.space[member]}")


@app.command(name="list-examples")
def list_examples() -> None:
    """List the example specs bundled with the package."""
    names = bundled_specs()
    if not names:
        typer.echo("No bundled examples found.")
        raise typer.Exit(code=0)
    typer.echo("Bundled examples:")
    for name in names:
        typer.echo(f"- {name}")


if __name__ == "__main__":
    app()
