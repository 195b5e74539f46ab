"""The rulemesh command line: serve commands and operator plumbing.

Exit codes: 0 on success, 1 when any verdict or per-entry result reports an
error, 2 on transport failures (registry or engine unreachable).
"""
from __future__ import annotations

import json
import sys

import click
import uvicorn

from . import control, ir
from .control import EngineClient, UpstreamHTTPError
from .engine import DIALECTS, RuleEngine
from .ir import RuleMeshError
from .translate import translate as translate_text

DIALECT_CHOICE = click.Choice(sorted(DIALECTS))


def _echo_json(data) -> None:
    click.echo(json.dumps(data, indent=2, sort_keys=True))


def _read_text(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def _exit_for(exc: Exception) -> int:
    if isinstance(exc, RuleMeshError) and exc.code in (
        ir.E_REGISTRY_UNREACHABLE,
        ir.E_ENGINE_UNREACHABLE,
    ):
        return 2
    return 1


def _run(command) -> None:
    try:
        ok = command()
    except (RuleMeshError, UpstreamHTTPError) as e:
        detail = e.detail if isinstance(e, RuleMeshError) else json.dumps(e.payload)
        click.echo(f"error: {detail}", err=True)
        sys.exit(_exit_for(e))
    sys.exit(0 if ok else 1)


registry_url_option = click.option(
    "--registry-url", envvar="RULEMESH_REGISTRY_URL", required=True,
    help="Base URL of the discovery registry.",
)


@click.group()
def main() -> None:
    """Broker for heterogeneous production-rule engines."""


# --- serve commands ---


@main.group()
def registry() -> None:
    """Discovery registry commands."""


@registry.command("serve")
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", required=True, type=click.Path(file_okay=False))
def registry_serve(port: int, host: str, data_dir: str) -> None:
    """Serve the AtomPub discovery registry."""
    from .registry import RegistryStore, create_registry_app

    app = create_registry_app(RegistryStore(data_dir))
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.group()
def engine() -> None:
    """Rule engine commands."""


@engine.command("serve")
@click.option("--dialect", type=DIALECT_CHOICE, required=True)
@click.option("--port", type=int, default=8100, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--title", required=True, help="Engine title used in the registry.")
@click.option("--registry-url", default=None, help="Register here on startup.")
@click.option("--replica-group", default=None)
@click.option("--advertise-url", default=None,
              help="Base URL other services use to reach this engine.")
def engine_serve(dialect: str, port: int, host: str, title: str,
                 registry_url: str | None, replica_group: str | None,
                 advertise_url: str | None) -> None:
    """Serve one rule engine of a fixed dialect."""
    from .middleware import create_app

    app = create_app(
        RuleEngine(dialect),
        title=title,
        registry_url=registry_url,
        replica_group=replica_group,
        advertise_url=advertise_url or f"http://{host}:{port}",
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.group()
def gateway() -> None:
    """Gateway commands."""


@gateway.command("serve")
@click.option("--port", type=int, default=8200, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@registry_url_option
@click.option("--assets", default=None, type=click.Path(file_okay=False),
              help="Directory with the built web console.")
def gateway_serve(port: int, host: str, registry_url: str, assets: str | None) -> None:
    """Serve the aggregation API and the web console."""
    from .gateway import create_gateway_app

    app = create_gateway_app(registry_url, assets)
    uvicorn.run(app, host=host, port=port, log_level="warning")


# --- operator commands ---


@main.command("list")
@registry_url_option
def list_engines(registry_url: str) -> None:
    """List registered engines with liveness."""

    def go() -> bool:
        handles = control.discover(registry_url)
        _echo_json([h.to_json() for h in handles])
        return True

    _run(go)


def _client(registry_url: str, engine_ref: str) -> EngineClient:
    handles = control.discover(registry_url)
    handle = control.resolve(handles, engine_ref)
    if not handle.live:
        raise RuleMeshError(ir.E_ENGINE_UNREACHABLE, f"engine {handle.title!r} is down")
    return EngineClient(handle)


@main.group()
def ks() -> None:
    """Knowledge set commands."""


@ks.command("list")
@registry_url_option
@click.option("--engine", "engine_ref", required=True)
def ks_list(registry_url: str, engine_ref: str) -> None:
    def go() -> bool:
        _echo_json(_client(registry_url, engine_ref).knowledge_sets())
        return True

    _run(go)


@ks.command("create")
@registry_url_option
@click.option("--engine", "engine_ref", required=True)
@click.option("--name", required=True)
@click.argument("declarations", required=False)
def ks_create(registry_url: str, engine_ref: str, name: str, declarations: str | None) -> None:
    """Create a knowledge set; DECLARATIONS is a file of type declarations."""

    def go() -> bool:
        text = _read_text(declarations) if declarations else ""
        results = _client(registry_url, engine_ref).put_knowledge_sets(
            [{"name": name, "declarations": text}]
        )
        _echo_json(results)
        return all(r["status"] == "created" for r in results)

    _run(go)


@ks.command("delete")
@registry_url_option
@click.option("--engine", "engine_ref", required=True)
@click.option("--name", required=True)
def ks_delete(registry_url: str, engine_ref: str, name: str) -> None:
    def go() -> bool:
        results = _client(registry_url, engine_ref).delete_knowledge_sets([name])
        _echo_json(results)
        return all(r["status"] == "deleted" for r in results)

    _run(go)


@main.group()
def rules() -> None:
    """Rule commands."""


@rules.command("get")
@registry_url_option
@click.option("--engine", "engine_ref", required=True)
@click.option("--ks", "ks_name", required=True)
@click.option("--filter", "name_filter", default=None)
def rules_get(registry_url: str, engine_ref: str, ks_name: str, name_filter: str | None) -> None:
    def go() -> bool:
        _echo_json(_client(registry_url, engine_ref).get_rules(ks_name, name_filter))
        return True

    _run(go)


@rules.command("put")
@registry_url_option
@click.option("--engine", "engine_ref", required=True)
@click.option("--ks", "ks_name", required=True)
@click.option("--no-propagate", is_flag=True, default=False)
@click.argument("file", required=False)
def rules_put(registry_url: str, engine_ref: str, ks_name: str,
              no_propagate: bool, file: str | None) -> None:
    """Put rules from FILE (or stdin), one verdict per rule block."""

    def go() -> bool:
        text = _read_text(file)
        handles = control.discover(registry_url)
        handle = control.resolve(handles, engine_ref)
        module = DIALECTS.get(handle.dialect or "")
        if module is None:
            raise RuleMeshError(
                ir.E_BAD_REQUEST, f"engine {handle.title!r} has no known dialect"
            )
        doc = module.parse_document(text, None)
        if doc.diagnostics:
            d = doc.diagnostics[0]
            raise RuleMeshError(d.code, d.detail, d.line, d.column)
        texts = [b.text for b in doc.blocks if b.kind == "rule"]
        if not texts:
            raise RuleMeshError(ir.E_BAD_REQUEST, "no rule blocks in the input")
        outcome = control.put_rules(
            registry_url, engine_ref, ks_name, texts, propagate=not no_propagate
        )
        _echo_json({eid: o.to_json() for eid, o in outcome.items()})
        return all(
            o.error is None and all(v["status"] == "valid" for v in o.verdicts)
            for o in outcome.values()
        )

    _run(go)


@rules.command("delete")
@registry_url_option
@click.option("--engine", "engine_ref", required=True)
@click.option("--ks", "ks_name", required=True)
@click.option("--no-propagate", is_flag=True, default=False)
@click.argument("names", nargs=-1, required=True)
def rules_delete(registry_url: str, engine_ref: str, ks_name: str,
                 no_propagate: bool, names: tuple[str, ...]) -> None:
    def go() -> bool:
        outcome = control.delete_rules(
            registry_url, engine_ref, ks_name, list(names), propagate=not no_propagate
        )
        _echo_json({eid: o.to_json() for eid, o in outcome.items()})
        return all(
            o.error is None and all(r["status"] == "deleted" for r in o.results)
            for o in outcome.values()
        )

    _run(go)


@main.command("translate")
@click.option("--from", "source", type=DIALECT_CHOICE, required=True)
@click.option("--to", "target", type=DIALECT_CHOICE, required=True)
@click.argument("file", required=False)
def translate_cmd(source: str, target: str, file: str | None) -> None:
    """Translate a rule document; output text goes to stdout."""

    def go() -> bool:
        report = translate_text(_read_text(file), source, target, None)
        click.echo(report.output_text, nl=False)
        for outcome in report.per_rule:
            if outcome.status != "ok":
                for d in outcome.diagnostics:
                    click.echo(f"{outcome.rule_name}: {d.code}: {d.detail}", err=True)
        for d in report.declaration_diagnostics:
            click.echo(f"declaration: {d.code}: {d.detail}", err=True)
        return report.ok

    _run(go)


@main.command("validate")
@registry_url_option
@click.option("--engine", "engine_ref", required=True)
@click.option("--ks", "ks_name", required=True)
@click.argument("file", required=False)
def validate_cmd(registry_url: str, engine_ref: str, ks_name: str, file: str | None) -> None:
    def go() -> bool:
        verdicts = _client(registry_url, engine_ref).validate_rules(
            ks_name, [_read_text(file)]
        )
        _echo_json(verdicts)
        return all(v["status"] == "valid" for v in verdicts)

    _run(go)


@main.command("run")
@registry_url_option
@click.option("--engine", "engine_ref", required=True)
@click.option("--ks", "ks_name", required=True)
def run_cmd(registry_url: str, engine_ref: str, ks_name: str) -> None:
    def go() -> bool:
        _echo_json(_client(registry_url, engine_ref).run(ks_name))
        return True

    _run(go)


@main.group()
def facts() -> None:
    """Fact commands."""


@facts.command("get")
@registry_url_option
@click.option("--engine", "engine_ref", required=True)
@click.option("--ks", "ks_name", required=True)
def facts_get(registry_url: str, engine_ref: str, ks_name: str) -> None:
    def go() -> bool:
        _echo_json(_client(registry_url, engine_ref).get_facts(ks_name))
        return True

    _run(go)


@facts.command("put")
@registry_url_option
@click.option("--engine", "engine_ref", required=True)
@click.option("--ks", "ks_name", required=True)
@click.argument("file", required=False)
def facts_put(registry_url: str, engine_ref: str, ks_name: str, file: str | None) -> None:
    """Assert facts from a JSON array of {type_name, values} objects."""

    def go() -> bool:
        payload = json.loads(_read_text(file))
        if not isinstance(payload, list):
            raise RuleMeshError(ir.E_BAD_REQUEST, "expected a JSON array of facts")
        results = _client(registry_url, engine_ref).put_facts(ks_name, payload)
        _echo_json(results)
        return all("error" not in r for r in results)

    _run(go)


if __name__ == "__main__":
    main()
