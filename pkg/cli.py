"""``pgcl`` command line: wp, check, transform and mdp pipelines over ``.pgcl`` files."""
import logging
import sys
from pathlib import Path

import click
from rich.console import Console
from rich.markup import escape
from rich.syntax import Syntax
from rich.table import Table

from config import Config
from services.mdp import AnalysisOptions
from services.parser import load_file, parse_expectation
from services.pipelines import DIRECTIONS, WP_TRANSFORMERS, run_check, run_mdp, run_transform, run_wp
from utils.errors import PgclError
from utils.helpers import humanize_duration, parse_assignment, to_json
from utils.log import configure_logging

logger = logging.getLogger(__name__)

console = Console()
err_console = Console(stderr=True)


def _options(ctx: click.Context) -> AnalysisOptions:
    return AnalysisOptions(**ctx.obj["analysis"])


def _expectation(text, source):
    return parse_expectation(text, source.domain) if text else None


def _emit(ctx: click.Context, report: dict, render) -> None:
    if ctx.obj["json"]:
        click.echo(to_json(report, pretty=True))
    else:
        render(report)
        _render_footer(report)
    ctx.exit(0 if report["verdict"] else 1)


def _render_values(report: dict, title: str = "values") -> None:
    if not report["values"]:
        return
    table = Table(title=title)
    table.add_column("state")
    table.add_column("value", justify="right")
    with_escape = any("escape_mass" in row for row in report["values"])
    if with_escape:
        table.add_column("escape", justify="right")
    for row in report["values"]:
        state = ", ".join(f"{k}={v}" for k, v in row["state"].items())
        cells = [state, row["value"]]
        if with_escape:
            cells.append(row.get("escape_mass", ""))
        table.add_row(*cells)
    console.print(table)


def _render_footer(report: dict) -> None:
    for item in report["counterexamples"]:
        console.print(f"[red]counterexample[/red] ({item.get('check', '?')}): {item.get('counterexample')}")
    for warning in report["warnings"]:
        console.print(f"[yellow]warning:[/yellow] {escape(warning)}")
    verdict = "[green]PASS[/green]" if report["verdict"] else "[red]FAIL[/red]"
    elapsed = humanize_duration(report["timing_ms"] / 1000)
    console.print(f"{verdict}  ({elapsed}, {report['domain_size']} domain states)")


class PgclGroup(click.Group):
    """Maps analysis errors to exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except PgclError as exc:
            if ctx.obj and ctx.obj.get("json"):
                click.echo(to_json({"verdict": False, **exc.to_dict()}, pretty=True))
            else:
                err_console.print(f"[red]{type(exc).__name__}:[/red] {exc.message}")
            logger.debug("command failed", exc_info=True)
            ctx.exit(exc.exit_code)


@click.group(cls=PgclGroup)
@click.option("--json", "as_json", is_flag=True, help="Print the report as JSON.")
@click.option("--budget", type=int, default=None, help="Maximum number of MDP configurations.")
@click.option("--epsilon", type=float, default=None, help="Value-iteration convergence threshold.")
@click.option("--escape", type=click.Choice(["error", "stop"]), default=None,
              help="What happens when an assignment leaves the declared domain.")
@click.option("--log-level", default=None, help="Logging level (default from PGCL_LOG_LEVEL).")
@click.pass_context
def pgcl(ctx, as_json, budget, epsilon, escape, log_level):
    """Verify and synthesize strategies for nondeterministic probabilistic programs."""
    configure_logging(log_level or Config.LOG_LEVEL)
    analysis = Config.analysis_options()
    overrides = {"budget": budget, "epsilon": epsilon, "escape": escape}
    analysis.update({k: v for k, v in overrides.items() if v is not None})
    ctx.obj = {"json": as_json, "analysis": analysis}


@pgcl.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--transformer", "-t", type=click.Choice(WP_TRANSFORMERS), default="dwp", show_default=True)
@click.option("--post", help="Postexpectation (defaults to the file's 'post').")
@click.option("--eval", "eval_states", multiple=True, metavar="x=1,y=2", help="Evaluate at this state.")
@click.pass_context
def wp(ctx, file, transformer, post, eval_states):
    """Compute the preexpectation of FILE."""
    source = load_file(file)
    try:
        states = [parse_assignment(text) for text in eval_states]
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--eval")
    report = run_wp(source, transformer, _expectation(post, source), states)

    def render(report):
        console.print(escape(f"{report['transformer']}(program, {report['post']}) ="))
        console.print(f"  [bold]{escape(report['preexpectation'])}[/bold]")
        _render_values(report)

    _emit(ctx, report, render)


@pgcl.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--provider", "-p", type=click.Choice(["superinv", "dast-subinv", "dpast-subinv"]))
@click.option("--direction", "-d", type=click.Choice(DIRECTIONS))
@click.option("--post", help="Postexpectation (defaults to the file's 'post').")
@click.option("--threshold", help="Compare the program's bound against this expectation.")
@click.pass_context
def check(ctx, file, provider, direction, post, threshold):
    """Check the loop invariants of FILE."""
    source = load_file(file)
    report = run_check(source, provider, direction, _expectation(post, source),
                       _expectation(threshold, source), _options(ctx))

    def render(report):
        table = Table(title=f"{report['provider']} ({report['direction']} bound, {report['transformer']})")
        table.add_column("loop")
        table.add_column("check")
        table.add_column("result")
        for record in report["loops"]:
            mark = "[green]ok[/green]" if record["inequality"]["holds"] else "[red]fails[/red]"
            table.add_row(record["loop"], record["inequality"]["description"], mark)
            for name, side in record["side_conditions"].items():
                holds = side.get("holds", True) if isinstance(side, dict) else bool(side)
                table.add_row("", name, "[green]ok[/green]" if holds else "[red]fails[/red]")
            for message in record["messages"]:
                table.add_row("", "note", escape(message))
        if report["threshold"] is not None:
            mark = "[green]ok[/green]" if report["threshold"]["holds"] else "[red]fails[/red]"
            table.add_row("program", report["threshold"]["description"], mark)
        console.print(table)

    _emit(ctx, report, render)


@pgcl.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--direction", "-d", type=click.Choice(DIRECTIONS))
@click.option("--post", help="Postexpectation (defaults to the file's 'post').")
@click.option("--determinize", "bias", flag_value="left", default=None, help="Break ties for the first branch.")
@click.option("--determinize-right", "bias", flag_value="right", help="Break ties for the second branch.")
@click.option("--oracle/--no-oracle", default=True, show_default=True,
              help="Compare values before and after on the operational MDP.")
@click.option("--output", "-o", type=click.Path(dir_okay=False, path_type=Path),
              help="Write the transformed file here.")
@click.pass_context
def transform(ctx, file, direction, post, bias, oracle, output):
    """Strengthen the guards of FILE so only optimal choices remain."""
    source = load_file(file)
    report = run_transform(source, direction, _expectation(post, source), bias, oracle, _options(ctx))
    if output is not None:
        output.write_text(report["program"], encoding="utf-8")
        logger.info(f"Wrote transformed program to {output}")

    def render(report):
        console.print(Syntax(report["program"], "text", word_wrap=True))
        if report["simplified"] != report["program"]:
            console.print("[dim]simplified guards:[/dim]")
            console.print(Syntax(report["simplified"], "text", word_wrap=True))
        for item in report["disabled_branches"]:
            console.print(f"[cyan]never enabled:[/cyan] {item['branch']} branch at {item['locus']}")
        if report["oracle"]:
            table = Table(title="oracle")
            for column in ("state", "original", "refined_worst", "refined_best", "ok"):
                table.add_column(column)
            for row in report["oracle"]:
                state = ", ".join(f"{k}={v}" for k, v in row["state"].items())
                table.add_row(state, row["original"], row["refined_worst"], row["refined_best"], str(row["ok"]))
            console.print(table)

    _emit(ctx, report, render)


@pgcl.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--post", help="Reward on termination (defaults to the file's 'post').")
@click.option("--mode", "-m", type=click.Choice(["min", "max"]))
@click.option("--escape-reward", help="Reward collected when a run leaves the domain.")
@click.option("--export", "export_path", type=click.Path(dir_okay=False, path_type=Path),
              help="Write the explicit model here.")
@click.option("--strategy", is_flag=True, help="Print an optimal memoryless strategy.")
@click.pass_context
def mdp(ctx, file, post, mode, escape_reward, export_path, strategy):
    """Solve the operational MDP of FILE."""
    source = load_file(file)
    report = run_mdp(source, _expectation(post, source), mode, strategy, export_path is not None,
                     _expectation(escape_reward, source), _options(ctx))
    if export_path is not None:
        export_path.write_text(report.pop("export"), encoding="utf-8")
        report["export_path"] = str(export_path)

    def render(report):
        model = report["model"]
        console.print(f"{model['states']} configurations, {model['transitions']} transitions, "
                      f"{'exact' if report['exact'] else 'epsilon=' + str(report['epsilon'])}")
        _render_values(report, escape(f"{report['mode']} expected {report['post']}"))
        if report.get("strategy"):
            table = Table(title="strategy")
            for column in ("config", "state", "statement", "action"):
                table.add_column(column)
            for row in report["strategy"]:
                state = ", ".join(f"{k}={v}" for k, v in row["state"].items())
                table.add_row(str(row["index"]), state, escape(row["statement"]), row["action"])
            console.print(table)

    _emit(ctx, report, render)


def main() -> None:
    pgcl(prog_name="pgcl")


if __name__ == "__main__":
    sys.exit(main())
