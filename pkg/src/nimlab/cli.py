"""Thin CLI client for the experiment service.

Subcommands mirror the service's ``/run/{name}`` endpoints.  By default the
app is mounted in-process (no socket); ``--server URL`` points the client at a
running ``nimlab serve`` instance instead.  Exit codes: 0 all criteria pass,
1 criterion failure, 2 usage error, 3 solver error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

from .experiments import SUBCOMMANDS

_EXIT_PASS, _EXIT_FAIL, _EXIT_USAGE, _EXIT_SOLVER = 0, 1, 2, 3


def _post(server: str | None, path: str, payload: dict) -> httpx.Response:
    """POST to a remote service, or to the app mounted in-process."""
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.post(path, json=payload)
    import asyncio

    from .service import app

    async def go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://nimlab.local", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(go())


def _collect_overrides(config, out, opts) -> dict:
    overrides: dict = {}
    if config:
        try:
            overrides.update(json.loads(Path(config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise click.UsageError(f"cannot read config file: {exc}")
    if out:
        overrides["out_dir"] = out
    sweep = dict(overrides.get("sweep", {}))
    if opts["delta_start"] is not None:
        sweep["start"] = opts["delta_start"]
    if opts["delta_stop"] is not None:
        sweep["stop"] = opts["delta_stop"]
    if opts["delta_count"] is not None:
        sweep["count"] = opts["delta_count"]
    if sweep:
        overrides["sweep"] = sweep
    mesh = dict(overrides.get("mesh", {}))
    if opts["mesh_n"] is not None:
        mesh["angular_count"] = opts["mesh_n"]
    if mesh:
        overrides["mesh"] = mesh
    maxwell = dict(overrides.get("maxwell", {}))
    if opts["grid_n"] is not None:
        maxwell["grid_n"] = opts["grid_n"]
    if opts["steps"] is not None:
        maxwell["steps"] = opts["steps"]
    if maxwell:
        overrides["maxwell"] = maxwell
    for key in ("seed", "workers", "k"):
        if opts[key] is not None:
            overrides[key] = opts[key]
    if opts["write_vtk"]:
        overrides["write_vtk"] = True
    return overrides


def _print_summary(summary: dict) -> None:
    for crit in summary["criteria"]:
        status = "PASS" if crit["pass"] else "FAIL"
        measured = crit["measured"]
        shown = f"{measured:.6g}" if isinstance(measured, (int, float)) else str(measured)
        click.echo(f"[{status}] {crit['criterion']}: measured={shown} ({crit['threshold']})")
    overall = "PASS" if summary["pass"] else "FAIL"
    click.echo(
        f"{overall} {summary['subcommand']} in {summary['runtime_seconds']:.1f}s; "
        f"artifacts: {', '.join(summary['artifacts']) or 'none'}"
    )


@click.group()
def main() -> None:
    """Numerical laboratory for negative-index material devices."""


def _make_command(name: str):
    @click.option("--config", type=click.Path(), default=None, help="JSON override file")
    @click.option("--out", type=click.Path(), default=None, help="output directory")
    @click.option("--delta-start", type=float, default=None)
    @click.option("--delta-stop", type=float, default=None)
    @click.option("--delta-count", type=int, default=None)
    @click.option("--mesh-n", type=int, default=None, help="angular sector count")
    @click.option("--grid-n", type=int, default=None, help="Maxwell grid cells per axis")
    @click.option("--steps", type=int, default=None, help="Maxwell step count")
    @click.option("--k", type=float, default=None, help="frequency")
    @click.option("--seed", type=int, default=None)
    @click.option("--workers", type=int, default=None)
    @click.option("--write-vtk", is_flag=True, default=False)
    @click.option("--server", default=None, help="remote service URL (default: in-process)")
    def command(config, out, server, **opts):
        try:
            overrides = _collect_overrides(config, out, opts)
        except click.UsageError as exc:
            click.echo(f"usage error: {exc}", err=True)
            sys.exit(_EXIT_USAGE)
        resp = _post(server, f"/run/{name}", {"overrides": overrides})
        if resp.status_code in (404, 422):
            click.echo(f"usage error: {resp.json()['detail']}", err=True)
            sys.exit(_EXIT_USAGE)
        if resp.status_code != 200:
            click.echo(f"solver error: {resp.text}", err=True)
            sys.exit(_EXIT_SOLVER)
        summary = resp.json()
        _print_summary(summary)
        sys.exit(_EXIT_PASS if summary["pass"] else _EXIT_FAIL)

    command.__name__ = name.replace("-", "_")
    return main.command(name=name)(command)


for _name in SUBCOMMANDS:
    _make_command(_name)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host: str, port: int) -> None:
    """Run the experiment service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
