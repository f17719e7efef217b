"""Command line client for the celia service.

`celia run` starts the service; every other subcommand talks to a running
instance over HTTP. Exit codes: 0 ok, 1 config or connection problem,
2 scenario assertion failure.
"""
from __future__ import annotations

import sys

import click
import httpx

DEFAULT_URL = "http://127.0.0.1:8420"


def _client(url: str) -> httpx.Client:
    return httpx.Client(base_url=url, timeout=300.0)


def _fail(message: str, code: int = 1) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _post(url: str, path: str, payload: dict) -> dict:
    try:
        with _client(url) as client:
            resp = client.post(path, json=payload)
    except httpx.HTTPError as e:
        _fail(f"cannot reach service at {url}: {e}")
    if resp.status_code >= 400:
        detail = resp.json().get("detail", resp.text) if resp.headers.get(
            "content-type", "").startswith("application/json") else resp.text
        _fail(f"{path} failed ({resp.status_code}): {detail}")
    return resp.json()


@click.group()
@click.option("--url", default=DEFAULT_URL, envvar="CELIA_URL", show_default=True,
              help="Base URL of a running celia service.")
@click.pass_context
def main(ctx: click.Context, url: str) -> None:
    """Spatial-relations engine: track a workspace and ask where things are."""
    ctx.ensure_object(dict)
    ctx.obj["url"] = url


@main.command()
@click.option("--config", "-c", "config_path", type=click.Path(), default=None,
              help="Service config file (YAML).")
@click.option("--host", default=None, help="Override listen host.")
@click.option("--port", type=int, default=None, help="Override listen port.")
def run(config_path: str | None, host: str | None, port: int | None) -> None:
    """Start the service and block until interrupted."""
    import uvicorn

    from .service import ConfigError, ServiceConfig, create_app, load_config

    try:
        config = load_config(config_path) if config_path else ServiceConfig()
    except ConfigError as e:
        _fail(str(e))
    if host or port:
        from dataclasses import replace

        config = replace(config, host=host or config.host, port=port or config.port)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")


@main.command()
@click.argument("text")
@click.option("--speaker", default=None, help="Who is asking (person id or name).")
@click.pass_context
def query(ctx: click.Context, text: str, speaker: str | None) -> None:
    """Ask the running service a question."""
    result = _post(ctx.obj["url"], "/query", {"text": text, "speaker": speaker})
    if result["answered"]:
        click.echo(result["text"])
    else:
        click.echo(f"(no answer: {result.get('reason', 'ignored')})")


@main.command()
@click.argument("path", type=click.Path())
@click.option("--assert", "assert_path", type=click.Path(), default=None,
              help="File of expected answers, one per line; exit 2 on mismatch.")
@click.option("--mode", type=click.Choice(["frames", "heightmaps", "interactive"]), default="frames",
              show_default=True)
@click.option("--speed", type=float, default=0.0, show_default=True,
              help="Playback speed factor; 0 runs as fast as possible.")
@click.option("--record", "record_path", type=click.Path(), default=None,
              help="Also record the frame stream to this file.")
@click.pass_context
def scenario(ctx: click.Context, path: str, assert_path: str | None, mode: str,
             speed: float, record_path: str | None) -> None:
    """Load and run a scenario script on the service."""
    result = _post(ctx.obj["url"], "/scenario",
                   {"path": path, "mode": mode, "speed": speed, "record": record_path})
    click.echo(f"scenario {result.get('name')}: {result['status']}, {result.get('frames')} frames")
    answers = [entry["answer"]["text"] for entry in result.get("transcript", [])]
    for entry in result.get("transcript", []):
        click.echo(f"  [{entry['t']:.3f}] {entry.get('speaker') or '?'}: {entry['text']}")
        click.echo(f"      -> {entry['answer']['text']}")
    if assert_path:
        if result["status"] != "completed":
            _fail("scenario still running; use --speed 0 with --assert", 2)
        with open(assert_path, "r", encoding="utf-8") as fh:
            expected = [line.rstrip("\n") for line in fh if line.strip() and not line.startswith("#")]
        if answers != expected:
            click.echo("assertion failed:", err=True)
            click.echo(f"  expected: {expected}", err=True)
            click.echo(f"  actual:   {answers}", err=True)
            sys.exit(2)
        click.echo(f"all {len(expected)} expected answer(s) matched")


@main.command()
@click.argument("path", type=click.Path())
@click.option("--speed", type=float, default=0.0, show_default=True)
@click.pass_context
def replay(ctx: click.Context, path: str, speed: float) -> None:
    """Feed a recorded frame stream through the running service."""
    result = _post(ctx.obj["url"], "/replay", {"path": path, "speed": speed})
    if result["status"] == "completed":
        click.echo(f"replayed {result['frames']} frames in {result['elapsed']:.3f}s "
                   f"({result['fps']:.1f} fps)")
    else:
        click.echo(f"replay started ({result.get('frames')} frames)")


@main.command()
@click.argument("path", type=click.Path(), required=False)
@click.option("--stop", is_flag=True, help="Stop the active recording.")
@click.pass_context
def record(ctx: click.Context, path: str | None, stop: bool) -> None:
    """Start (or --stop) recording the service's frame stream to a file."""
    if not stop and not path:
        _fail("record needs a file path (or --stop)")
    result = _post(ctx.obj["url"], "/record", {"path": path, "stop": stop})
    if result["recording"]:
        click.echo(f"recording to {path}")
    else:
        click.echo(f"recording stopped ({result['frames_written']} frames written)")


@main.command()
@click.argument("path", type=click.Path())
@click.pass_context
def snapshot(ctx: click.Context, path: str) -> None:
    """Write the service's knowledge base snapshot to a file."""
    result = _post(ctx.obj["url"], "/snapshot", {"path": path})
    click.echo(f"snapshot written to {result['written']}")


if __name__ == "__main__":
    main()
