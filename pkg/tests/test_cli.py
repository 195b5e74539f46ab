from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from conftest import ADULT_RULE_DRL, NOT_RULE_CLIPS, PERSON_ADULT_DRL
from servers import ServerHandle, free_port
from rulemesh.cli import main
from rulemesh.engine import RuleEngine
from rulemesh.middleware import create_app
from rulemesh.registry import RegistryStore, create_registry_app


@pytest.fixture(scope="module")
def stack(tmp_path_factory):
    registry = ServerHandle(
        create_registry_app(RegistryStore(tmp_path_factory.mktemp("reg")))
    ).start()
    port = free_port()
    engine = ServerHandle(
        create_app(
            RuleEngine("drl-mini"),
            title="drl.engine",
            registry_url=registry.url,
            advertise_url=f"http://127.0.0.1:{port}",
        ),
        port,
    ).start()
    yield registry
    engine.stop()
    registry.stop()


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


def invoke(runner, stack, *args, **kwargs):
    return runner.invoke(
        main, list(args), env={"RULEMESH_REGISTRY_URL": stack.url}, **kwargs
    )


def test_list_engines(runner, stack):
    result = invoke(runner, stack, "list")
    assert result.exit_code == 0, result.output
    engines = json.loads(result.output)
    assert [e["title"] for e in engines] == ["drl.engine"]
    assert engines[0]["live"] is True


def test_full_operator_flow(runner, stack, tmp_path):
    decls = tmp_path / "types.drl"
    decls.write_text(PERSON_ADULT_DRL)
    result = invoke(
        runner, stack, "ks", "create", "--engine", "drl.engine", "--name", "demo",
        str(decls),
    )
    assert result.exit_code == 0, result.output

    rules_file = tmp_path / "rules.drl"
    rules_file.write_text(ADULT_RULE_DRL)
    result = invoke(
        runner, stack, "rules", "put", "--engine", "drl.engine", "--ks", "demo",
        str(rules_file),
    )
    assert result.exit_code == 0, result.output

    result = invoke(runner, stack, "rules", "get", "--engine", "drl.engine", "--ks", "demo")
    assert result.exit_code == 0
    assert [r["name"] for r in json.loads(result.output)] == ["adult"]

    facts_file = tmp_path / "facts.json"
    facts_file.write_text(
        json.dumps([{"type_name": "Person", "values": {"name": "ann", "age": 20}}])
    )
    result = invoke(
        runner, stack, "facts", "put", "--engine", "drl.engine", "--ks", "demo",
        str(facts_file),
    )
    assert result.exit_code == 0, result.output

    result = invoke(runner, stack, "run", "--engine", "drl.engine", "--ks", "demo")
    assert result.exit_code == 0
    assert json.loads(result.output)["firings"] == 1

    result = invoke(runner, stack, "facts", "get", "--engine", "drl.engine", "--ks", "demo")
    facts = json.loads(result.output)
    assert {"type_name": "Adult", "values": {"name": "ann"}} in facts

    result = invoke(
        runner, stack, "validate", "--engine", "drl.engine", "--ks", "demo",
        str(rules_file),
    )
    # validating the already-installed rule reports a duplicate: exit 1
    assert result.exit_code == 1

    result = invoke(
        runner, stack, "rules", "delete", "--engine", "drl.engine", "--ks", "demo", "adult"
    )
    assert result.exit_code == 0, result.output


def test_translate_command(runner, stack, tmp_path):
    source = tmp_path / "adult.drl"
    source.write_text(ADULT_RULE_DRL)
    result = invoke(runner, stack, "translate", "--from", "drl-mini", "--to", "clips-mini",
                    str(source))
    assert result.exit_code == 0, result.output
    assert "(defrule adult" in result.output


def test_translate_command_reports_unsupported(runner, stack, tmp_path):
    source = tmp_path / "shy.clp"
    source.write_text(NOT_RULE_CLIPS)
    result = invoke(runner, stack, "translate", "--from", "clips-mini", "--to", "drl-mini",
                    str(source))
    assert result.exit_code == 1
    assert "E_UNSUPPORTED" in result.output


def test_unknown_dialect_rejected_at_parse(runner, stack):
    result = invoke(runner, stack, "translate", "--from", "prolog", "--to", "drl-mini")
    assert result.exit_code == 2  # click usage error
    assert "Invalid value" in result.output


def test_transport_error_exit_code(runner):
    result = CliRunner().invoke(
        main, ["list"], env={"RULEMESH_REGISTRY_URL": "http://127.0.0.1:1"}
    )
    assert result.exit_code == 2


def test_error_verdict_exit_code(runner, stack, tmp_path):
    bad = tmp_path / "bad.drl"
    bad.write_text('rule "bad"\nwhen\n  Ghost(x == 1)\nthen\n  insert Adult(name: "x");\nend')
    invoke(runner, stack, "ks", "create", "--engine", "drl.engine", "--name", "errdemo")
    result = invoke(
        runner, stack, "rules", "put", "--engine", "drl.engine", "--ks", "errdemo", str(bad)
    )
    assert result.exit_code == 1
