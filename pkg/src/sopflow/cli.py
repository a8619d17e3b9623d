"""Command line: parse and lint workflows, run scripts, evaluate, serve."""

from __future__ import annotations

import json
import pathlib
import sys

import click

from . import assets
from .config import load_config
from .errors import SopError
from .gar import load_gar
from .parser import lint_sop, parse_sop, render_sop


def _read_workflow(ref: str):
    """Packaged name or a path to an .sop file."""
    if ref in assets.workflow_names():
        return assets.load_workflow(ref)
    path = pathlib.Path(ref)
    if not path.exists():
        raise click.ClickException(
            f"{ref!r} is neither a packaged workflow ({', '.join(assets.workflow_names())}) nor a file"
        )
    return parse_sop(path.read_text(encoding="utf-8"), name=path.stem)


def _read_repo(gar_path: str | None):
    return load_gar(gar_path) if gar_path else assets.load_repository()


@click.group()
def main():
    """Workflow agent over indented SOP text."""


@main.command("parse")
@click.argument("sop")
@click.option("--json", "as_json", is_flag=True, help="emit the node table as JSON")
def parse_cmd(sop, as_json):
    """Parse a workflow and print its canonical form."""
    try:
        workflow = _read_workflow(sop)
    except SopError as exc:
        raise click.ClickException(str(exc)) from None
    click.echo(workflow.to_json() if as_json else render_sop(workflow))


@main.command("lint")
@click.argument("sop")
@click.option("--gar", "gar_path", type=click.Path(exists=True), help="action repository file")
def lint_cmd(sop, gar_path):
    """Check a workflow against the action repository."""
    try:
        workflow = _read_workflow(sop)
        repo = _read_repo(gar_path)
        diagnostics = lint_sop(workflow, repo)
    except SopError as exc:
        raise click.ClickException(str(exc)) from None
    if not diagnostics:
        click.echo("ok: no findings")
        return
    for diag in diagnostics:
        click.echo(str(diag))
    sys.exit(1)


@main.group("gar")
def gar_group():
    """Action repository utilities."""


@gar_group.command("validate")
@click.argument("path", required=False, type=click.Path(exists=True))
def gar_validate(path):
    """Validate a repository file (packaged one when no path is given)."""
    try:
        repo = _read_repo(path)
    except SopError as exc:
        raise click.ClickException(str(exc)) from None
    click.echo(f"ok: {len(repo)} actions")


@main.group("prompts")
def prompts_group():
    """Role prompt templates."""


@prompts_group.command("show")
@click.argument("role", type=click.Choice(["state", "action", "user"]))
def prompts_show(role):
    """Print a role's prompt template."""
    click.echo(assets.load_prompt(role), nl=False)


@main.command("run")
@click.argument("sop", required=False)
@click.option("--script", "script_ref", required=True, help="packaged script name or a JSON file")
@click.option("--json", "as_json", is_flag=True, help="emit the full transcript as JSON")
def run_cmd(sop, script_ref, as_json):
    """Run one scripted conversation and print its transcript."""
    from .engine import run_script

    path = pathlib.Path(script_ref)
    if path.exists():
        script = json.loads(path.read_text(encoding="utf-8"))
    else:
        try:
            script = assets.load_script(script_ref)
        except FileNotFoundError:
            raise click.ClickException(
                f"{script_ref!r} is neither a file nor a packaged script"
            ) from None
    if sop:
        script = {**script, "sop": sop}
    try:
        transcript = run_script(script)
    except SopError as exc:
        raise click.ClickException(str(exc)) from None
    if as_json:
        click.echo(transcript.to_json())
        return
    for event in transcript.events:
        click.echo(f"[{event.seq}] {event.kind}: {event.text}")
    click.echo(f"-- {transcript.status} ({transcript.reason})")


@main.command("eval")
@click.option("--suite", "suites", multiple=True, help="suite name, repeatable; default all")
@click.option("--seed", default=None, type=int, help="generation seed")
@click.option("--backend", "backend_kind", type=click.Choice(["scripted", "remote"]), default=None)
@click.option("--out", "out_path", type=click.Path(), help="also write the JSON report here")
def eval_cmd(suites, seed, backend_kind, out_path):
    """Generate labeled sessions and score a backend on them."""
    from .backends import make_backend
    from .evaluation import DEFAULT_SEED, run_evaluation

    config = load_config()
    if backend_kind:
        config.setdefault("backend", {})["kind"] = backend_kind
    try:
        backend = make_backend(config)
        report = run_evaluation(
            suites=list(suites) or None,
            seed=seed if seed is not None else DEFAULT_SEED,
            backend=backend,
            config=config,
        )
    except SopError as exc:
        raise click.ClickException(str(exc)) from None
    click.echo(report.render())
    if out_path:
        pathlib.Path(out_path).write_text(report.to_json(), encoding="utf-8")
        click.echo(f"json report written to {out_path}")


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True), help="JSON config file")
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
def serve_cmd(config_path, host, port):
    """Start the HTTP service."""
    from .service import serve

    serve(load_config(config_path), host=host, port=port)


if __name__ == "__main__":
    main()
