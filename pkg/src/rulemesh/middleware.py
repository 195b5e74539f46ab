"""Per-engine HTTP service: the Management and Functional operation sets plus Ping.

One process serves one engine of a fixed dialect.  Bodies are JSON with
rule and declaration payloads embedded as dialect text; errors are always
structured ({"code", "detail", "position"?}), and malformed client input is
a 4xx, never a 5xx.
"""
from __future__ import annotations

import contextlib
import json

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import __version__, ir
from .atomfeed import AtomEntry
from .engine import RuleEngine
from .ir import RuleMeshError

_STATUS = {ir.E_NOT_FOUND: 404}


def _error(status: int, code: str, detail: str, line=None, column=None) -> JSONResponse:
    body = {"code": code, "detail": detail}
    if line is not None:
        body["position"] = {"line": line, "column": column}
    return JSONResponse(body, status_code=status)


async def _json_body(request: Request) -> dict:
    try:
        body = json.loads(await request.body())
    except (json.JSONDecodeError, UnicodeDecodeError):
        raise RuleMeshError(ir.E_BAD_REQUEST, "request body is not valid JSON") from None
    if not isinstance(body, dict):
        raise RuleMeshError(ir.E_BAD_REQUEST, "request body must be a JSON object")
    return body


def _string_list(body: dict, key: str) -> list[str]:
    value = body.get(key)
    if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
        raise RuleMeshError(ir.E_BAD_REQUEST, f"{key!r} must be a list of strings")
    return value


def _fact_list(body: dict) -> list[ir.Fact]:
    value = body.get("facts")
    if not isinstance(value, list):
        raise RuleMeshError(ir.E_BAD_REQUEST, "'facts' must be a list")
    facts = []
    for item in value:
        try:
            facts.append(ir.fact_from_json(item))
        except (KeyError, TypeError, AttributeError, ValueError):
            raise RuleMeshError(
                ir.E_BAD_REQUEST,
                "each fact needs the shape {type_name, values:{slot: scalar}}",
            ) from None
    return facts


def create_app(
    engine: RuleEngine,
    *,
    title: str,
    registry_url: str | None = None,
    replica_group: str | None = None,
    advertise_url: str | None = None,
) -> FastAPI:
    registration: dict = {"entry_id": None}

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        if registry_url and advertise_url:
            from .control import RegistryClient

            entry = AtomEntry(
                title=title,
                links={
                    "functional": f"{advertise_url}/functional",
                    "management": f"{advertise_url}/management",
                    "ping": f"{advertise_url}/ping",
                },
                author_name=title,
                dialect=engine.dialect,
                replica_group=replica_group,
            )
            client = RegistryClient(registry_url)
            created = client.create_entry("engines", entry)
            registration["entry_id"] = created.id
        yield
        if registry_url and registration["entry_id"]:
            from .control import RegistryClient

            with contextlib.suppress(Exception):
                RegistryClient(registry_url).delete_entry("engines", registration["entry_id"])

    app = FastAPI(title=f"rulemesh engine: {title}", docs_url=None, redoc_url=None,
                  lifespan=lifespan)

    @app.exception_handler(RuleMeshError)
    async def _rulemesh_error(request: Request, exc: RuleMeshError):
        status = _STATUS.get(exc.code, 400)
        return _error(status, exc.code, exc.detail, exc.line, exc.column)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return _error(400, ir.E_BAD_REQUEST, "malformed request")

    # --- management ---

    @app.get("/management/properties")
    async def get_properties():
        return {
            "engine_id": engine.engine_id,
            "title": title,
            "dialect": engine.dialect,
            "version": __version__,
            "knowledge_set_count": len(engine.knowledge_set_names()),
        }

    @app.get("/management/knowledge-sets")
    async def get_knowledge_sets():
        return {"knowledge_sets": engine.knowledge_set_names()}

    @app.put("/management/knowledge-sets")
    async def put_knowledge_sets(request: Request):
        body = await _json_body(request)
        items = body.get("knowledge_sets")
        if not isinstance(items, list):
            raise RuleMeshError(ir.E_BAD_REQUEST, "'knowledge_sets' must be a list")
        results = []
        for item in items:
            if isinstance(item, str):
                name, declarations = item, ""
            elif isinstance(item, dict) and isinstance(item.get("name"), str):
                name = item["name"]
                declarations = item.get("declarations", "")
                if not isinstance(declarations, str):
                    results.append(
                        {"name": name, "status": "error",
                         "error": {"code": ir.E_BAD_REQUEST,
                                   "detail": "'declarations' must be a string"}}
                    )
                    continue
            else:
                results.append(
                    {"name": None, "status": "error",
                     "error": {"code": ir.E_BAD_REQUEST,
                               "detail": "each entry is a name or {name, declarations}"}}
                )
                continue
            try:
                engine.create_knowledge_set(name, declarations)
                results.append({"name": name, "status": "created"})
            except RuleMeshError as e:
                results.append(
                    {"name": name, "status": "error", "error": e.to_diagnostic().to_json()}
                )
        return {"results": results}

    @app.delete("/management/knowledge-sets")
    async def delete_knowledge_sets(request: Request):
        body = await _json_body(request)
        names = _string_list(body, "knowledge_sets")
        results = []
        for name in names:
            if engine.delete_knowledge_set(name):
                results.append({"name": name, "status": "deleted"})
            else:
                results.append(
                    {"name": name, "status": "error",
                     "error": {"code": ir.E_NOT_FOUND,
                               "detail": f"unknown knowledge set {name!r}"}}
                )
        return {"results": results}

    # --- functional ---

    @app.get("/functional/{ks}/rules")
    async def get_rules(ks: str, filter: str | None = None):
        entries = engine.get(ks).get_rules(filter)
        return {"rules": [{"name": e.name, "text": e.text} for e in entries]}

    @app.put("/functional/{ks}/rules")
    async def put_rules(ks: str, request: Request):
        kset = engine.get(ks)
        body = await _json_body(request)
        texts = _string_list(body, "rules")
        verdicts = [kset.add_rule(text, index=i) for i, text in enumerate(texts)]
        return {"verdicts": [v.to_json() for v in verdicts]}

    @app.delete("/functional/{ks}/rules")
    async def delete_rules(ks: str, request: Request):
        kset = engine.get(ks)
        body = await _json_body(request)
        names = _string_list(body, "rules")
        results = []
        for name in names:
            if kset.remove_rule(name):
                results.append({"name": name, "status": "deleted"})
            else:
                results.append(
                    {"name": name, "status": "error",
                     "error": {"code": ir.E_NOT_FOUND, "detail": f"unknown rule {name!r}"}}
                )
        return {"results": results}

    @app.post("/functional/{ks}/rules:validate")
    async def validate_rules(ks: str, request: Request):
        kset = engine.get(ks)
        body = await _json_body(request)
        texts = _string_list(body, "rules")
        verdicts = []
        for i, text in enumerate(texts):
            for verdict in kset.validate(text):
                label = verdict.rule if isinstance(verdict.rule, str) else i
                verdicts.append(
                    {"rule": label, "status": verdict.status,
                     "diagnostics": [d.to_json() for d in verdict.diagnostics]}
                )
        return {"verdicts": verdicts}

    @app.post("/functional/{ks}/run")
    async def run(ks: str):
        return engine.get(ks).run().to_json()

    @app.get("/functional/{ks}/facts")
    async def get_facts(ks: str):
        return {"facts": [ir.fact_to_json(f) for f in engine.get(ks).list_facts()]}

    @app.put("/functional/{ks}/facts")
    async def put_facts(ks: str, request: Request):
        kset = engine.get(ks)
        facts = _fact_list(await _json_body(request))
        results = []
        for fact in facts:
            try:
                changed = kset.assert_fact(fact)
                results.append({"fact": ir.fact_to_json(fact), "changed": changed})
            except RuleMeshError as e:
                results.append(
                    {"fact": ir.fact_to_json(fact), "error": e.to_diagnostic().to_json()}
                )
        return {"results": results}

    @app.delete("/functional/{ks}/facts")
    async def delete_facts(ks: str, request: Request):
        kset = engine.get(ks)
        facts = _fact_list(await _json_body(request))
        results = []
        for fact in facts:
            try:
                changed = kset.retract_fact(fact)
                results.append({"fact": ir.fact_to_json(fact), "changed": changed})
            except RuleMeshError as e:
                results.append(
                    {"fact": ir.fact_to_json(fact), "error": e.to_diagnostic().to_json()}
                )
        return {"results": results}

    @app.get("/ping")
    async def ping():
        return {"status": "ok", "engine_id": engine.engine_id}

    return app
