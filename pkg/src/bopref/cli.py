"""Command-line interface.

``bench`` runs/aggregates simulated benchmark suites locally; ``serve``
starts the HTTP session service; ``session`` is a thin HTTP client for
driving a live session (useful for terminal decision-makers and scripted
checks against a running service).
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .bench import SuiteConfig, aggregate, plot_data, run_suite, write_outputs
from .errors import ContractError


@click.group()
def main():
    """Preference-aware multi-attribute Bayesian optimization tools."""


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


@main.group()
def bench():
    """Simulated-DM benchmark harness."""


@bench.command("run")
@click.option("--suite", "suite_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--parallel", default=1, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--quiet", is_flag=True)
def bench_run(suite_path, out_dir, parallel, seed, quiet):
    """Run a suite config (problems x policies x replications)."""
    try:
        with open(suite_path) as fh:
            suite = SuiteConfig.from_dict(json.load(fh))
    except (ContractError, KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(3)

    def progress(outcome):
        if not quiet:
            status = "ok" if outcome.error is None else f"FAILED ({outcome.error})"
            click.echo(
                f"{outcome.problem} {outcome.policy} rep={outcome.replication}: {status}"
            )

    outcomes = run_suite(suite, seed_base=seed, parallel=parallel, progress=progress)
    manifest = write_outputs(outcomes, out_dir)
    if not quiet:
        click.echo(
            f"completed {manifest['completed']} runs, "
            f"{len(manifest['failures'])} failures -> {out_dir}"
        )
    sys.exit(2 if manifest["failures"] else 0)


@bench.command("aggregate")
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def bench_aggregate(in_dir, out_path):
    """Reduce raw run CSVs to per-iteration statistics."""
    try:
        rows = aggregate(in_dir, out_path)
    except ContractError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(3)
    click.echo(f"wrote {len(rows)} aggregated rows -> {out_path}")


@bench.command("plotdata")
@click.option("--in", "results_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def bench_plotdata(results_path, out_path):
    """Emit per-policy median/IQR traces as plot-ready JSON."""
    try:
        curves = plot_data(results_path, out_path)
    except ContractError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(3)
    click.echo(f"wrote curves for {len(curves['problems'])} problems -> {out_path}")


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------


@main.command("serve")
@click.option(
    "--data-dir",
    default=lambda: os.environ.get("BOPREF_DATA_DIR", "./bopref-data"),
    type=click.Path(),
)
@click.option("--addr", default=lambda: os.environ.get("BOPREF_ADDR", "127.0.0.1:8421"))
@click.option("--static-dir", default=None, type=click.Path())
def serve(data_dir, addr, static_dir):
    """Start the HTTP session service."""
    import uvicorn

    from .service import create_app

    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        click.echo(f"bad --addr {addr!r}, expected host:port", err=True)
        sys.exit(3)
    app = create_app(data_dir=data_dir, static_dir=static_dir)
    uvicorn.run(app, host=host, port=int(port), log_level="info")


# ---------------------------------------------------------------------------
# session client (thin HTTP client)
# ---------------------------------------------------------------------------


def _client(url):
    import httpx

    return httpx.Client(base_url=url, timeout=60.0)


def _echo_json(data):
    click.echo(json.dumps(data, indent=2, sort_keys=True))


@main.group()
@click.option(
    "--url",
    default=lambda: os.environ.get("BOPREF_URL", "http://127.0.0.1:8421"),
    help="Base URL of a running service.",
)
@click.pass_context
def session(ctx, url):
    """Drive a live session over HTTP."""
    ctx.obj = url


@session.command("create")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--manual", is_flag=True, help="External evaluation mode.")
@click.pass_obj
def session_create(url, config_path, manual):
    with open(config_path) as fh:
        config = json.load(fh)
    body = {"config": config, "evaluator": {"kind": "manual" if manual else "builtin"}}
    r = _client(url).post("/sessions", json=body)
    r.raise_for_status()
    data = r.json()
    click.echo(data["id"])
    click.echo(f"phase: {data['state']['phase']}", err=True)


@session.command("show")
@click.argument("session_id")
@click.pass_obj
def session_show(url, session_id):
    r = _client(url).get(f"/sessions/{session_id}")
    r.raise_for_status()
    _echo_json(r.json())


@session.command("query")
@click.argument("session_id")
@click.pass_obj
def session_query(url, session_id):
    r = _client(url).get(f"/sessions/{session_id}/query")
    if r.status_code == 409:
        click.echo(f"not awaiting a preference: {r.json()['error']}", err=True)
        sys.exit(1)
    r.raise_for_status()
    _echo_json(r.json())


@session.command("answer", context_settings={"ignore_unknown_options": True})
@click.argument("session_id")
@click.argument("m", type=int)
@click.argument("a", type=int)
@click.pass_obj
def session_answer(url, session_id, m, a):
    """Submit response A (-1, 0, or 1) for iteration M."""
    r = _client(url).post(f"/sessions/{session_id}/response", json={"m": m, "a": a})
    if r.status_code >= 400:
        click.echo(f"rejected: {r.text}", err=True)
        sys.exit(1)
    _echo_json(r.json())


@session.command("evaluate")
@click.argument("session_id")
@click.option("--y", "values", required=True, help="Comma-separated attribute values.")
@click.pass_obj
def session_evaluate(url, session_id, values):
    y = [float(v) for v in values.split(",")]
    r = _client(url).post(f"/sessions/{session_id}/evaluation", json={"y": y})
    if r.status_code >= 400:
        click.echo(f"rejected: {r.text}", err=True)
        sys.exit(1)
    _echo_json(r.json())


@session.command("menu")
@click.argument("session_id")
@click.pass_obj
def session_menu(url, session_id):
    r = _client(url).get(f"/sessions/{session_id}/menu")
    r.raise_for_status()
    _echo_json(r.json())


if __name__ == "__main__":
    main()
