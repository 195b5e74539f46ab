"""Aggregation API for operators and the web console.

Stateless by construction: every request re-discovers engines from the
registry and proxies to the middleware, so restarting the gateway never
changes observable system state.  Upstream errors are forwarded with the
engine attributed.
"""
from __future__ import annotations

import json
from pathlib import Path

import httpx
from fastapi import FastAPI, Request
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from . import control, ir
from .control import EngineClient, EngineHandle, UpstreamHTTPError
from .ir import RuleMeshError
from .translate import translate

_STATUS = {
    ir.E_NOT_FOUND: 404,
    ir.E_REGISTRY_UNREACHABLE: 503,
    ir.E_ENGINE_UNREACHABLE: 502,
}

_PLACEHOLDER = """<!doctype html>
<html><head><title>rulemesh</title></head>
<body><h1>rulemesh gateway</h1>
<p>The web console is not built. The JSON API lives under <code>/api/</code>.</p>
</body></html>"""


def create_gateway_app(registry_url: str, assets_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="rulemesh gateway", docs_url=None, redoc_url=None)
    http = httpx.Client(timeout=control.DEFAULT_TIMEOUT)

    def handles() -> list[EngineHandle]:
        return control.discover(registry_url, http)

    def engine_client(engine: str) -> tuple[EngineHandle, EngineClient]:
        handle = control.resolve(handles(), engine)
        return handle, EngineClient(handle, http)

    @app.exception_handler(RuleMeshError)
    async def _rulemesh_error(request: Request, exc: RuleMeshError):
        status = _STATUS.get(exc.code, 400)
        body = {"code": exc.code, "detail": exc.detail}
        if exc.line is not None:
            body["position"] = {"line": exc.line, "column": exc.column}
        return JSONResponse(body, status_code=status)

    @app.exception_handler(UpstreamHTTPError)
    async def _upstream_error(request: Request, exc: UpstreamHTTPError):
        body = dict(exc.payload)
        body.setdefault("code", ir.E_BAD_REQUEST)
        engine = request.path_params.get("engine")
        if engine:
            body["engine"] = engine
        return JSONResponse(body, status_code=exc.status)

    async def _json_body(request: Request) -> dict:
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError):
            raise RuleMeshError(ir.E_BAD_REQUEST, "request body is not valid JSON") from None
        if not isinstance(body, dict):
            raise RuleMeshError(ir.E_BAD_REQUEST, "request body must be a JSON object")
        return body

    @app.get("/api/engines")
    async def list_engines():
        return {"engines": [h.to_json() for h in handles()]}

    @app.get("/api/engines/{engine}/knowledge-sets")
    async def get_knowledge_sets(engine: str):
        _, client = engine_client(engine)
        return {"knowledge_sets": client.knowledge_sets()}

    @app.put("/api/engines/{engine}/knowledge-sets")
    async def put_knowledge_sets(engine: str, request: Request):
        body = await _json_body(request)
        _, client = engine_client(engine)
        return {"results": client.put_knowledge_sets(body.get("knowledge_sets", []))}

    @app.delete("/api/engines/{engine}/knowledge-sets")
    async def delete_knowledge_sets(engine: str, request: Request):
        body = await _json_body(request)
        _, client = engine_client(engine)
        return {"results": client.delete_knowledge_sets(body.get("knowledge_sets", []))}

    @app.get("/api/engines/{engine}/knowledge-sets/{ks}/rules")
    async def get_rules(engine: str, ks: str, filter: str | None = None):
        _, client = engine_client(engine)
        return {"rules": client.get_rules(ks, filter)}

    @app.delete("/api/engines/{engine}/knowledge-sets/{ks}/rules")
    async def delete_rules(engine: str, ks: str, request: Request):
        body = await _json_body(request)
        _, client = engine_client(engine)
        return {"results": client.delete_rules(ks, body.get("rules", []))}

    @app.post("/api/engines/{engine}/knowledge-sets/{ks}/rules:validate")
    async def validate_rules(engine: str, ks: str, request: Request):
        body = await _json_body(request)
        _, client = engine_client(engine)
        return {"verdicts": client.validate_rules(ks, body.get("rules", []))}

    @app.get("/api/engines/{engine}/knowledge-sets/{ks}/facts")
    async def get_facts(engine: str, ks: str):
        _, client = engine_client(engine)
        return {"facts": client.get_facts(ks)}

    @app.put("/api/engines/{engine}/knowledge-sets/{ks}/facts")
    async def put_facts(engine: str, ks: str, request: Request):
        body = await _json_body(request)
        _, client = engine_client(engine)
        return {"results": client.put_facts(ks, body.get("facts", []))}

    @app.delete("/api/engines/{engine}/knowledge-sets/{ks}/facts")
    async def delete_facts(engine: str, ks: str, request: Request):
        body = await _json_body(request)
        _, client = engine_client(engine)
        return {"results": client.delete_facts(ks, body.get("facts", []))}

    @app.post("/api/parse")
    async def parse_text(request: Request):
        """Lower rule text to the neutral IR's stable JSON rendering."""
        body = await _json_body(request)
        text = body.get("text")
        dialect = body.get("dialect")
        if not isinstance(text, str) or not isinstance(dialect, str):
            raise RuleMeshError(ir.E_BAD_REQUEST, "'text' and 'dialect' are required")
        from .engine import dialect_module

        doc = dialect_module(dialect).parse_document(text, None)
        return {
            "rules": [ir.rule_to_json(r) for r in doc.rules],
            "declarations": [ir.facttype_to_json(t) for t in doc.declarations],
            "diagnostics": [d.to_json() for d in doc.all_diagnostics],
        }

    @app.post("/api/translate")
    async def translate_text(request: Request):
        body = await _json_body(request)
        text = body.get("text")
        source = body.get("from")
        target = body.get("to")
        if not all(isinstance(x, str) for x in (text, source, target)):
            raise RuleMeshError(ir.E_BAD_REQUEST, "'text', 'from' and 'to' are required")
        # The gateway has no knowledge-set context: type-level validation is
        # left to whichever engine eventually receives the output.
        return translate(text, source, target, None).to_json()

    @app.post("/api/put-rules")
    async def put_rules(request: Request):
        body = await _json_body(request)
        engine = body.get("engine")
        ks = body.get("ks")
        rules = body.get("rules")
        if not isinstance(engine, str) or not isinstance(ks, str) or not isinstance(rules, list):
            raise RuleMeshError(ir.E_BAD_REQUEST, "'engine', 'ks' and 'rules' are required")
        propagate = bool(body.get("propagate", True))
        outcome = control.put_rules(registry_url, engine, ks, rules, propagate, http)
        return {"results": {eid: o.to_json() for eid, o in outcome.items()}}

    @app.post("/api/delete-rules")
    async def delete_rules_propagated(request: Request):
        body = await _json_body(request)
        engine = body.get("engine")
        ks = body.get("ks")
        names = body.get("rules")
        if not isinstance(engine, str) or not isinstance(ks, str) or not isinstance(names, list):
            raise RuleMeshError(ir.E_BAD_REQUEST, "'engine', 'ks' and 'rules' are required")
        propagate = bool(body.get("propagate", True))
        outcome = control.delete_rules(registry_url, engine, ks, names, propagate, http)
        return {"results": {eid: o.to_json() for eid, o in outcome.items()}}

    @app.post("/api/translate-copy")
    async def translate_copy(request: Request):
        body = await _json_body(request)
        required = ("src_engine", "src_ks", "rule_names", "dst_engine", "dst_ks")
        if not all(k in body for k in required):
            raise RuleMeshError(
                ir.E_BAD_REQUEST, f"required fields: {', '.join(required)}"
            )
        verdicts = control.translate_copy(
            registry_url,
            body["src_engine"],
            body["src_ks"],
            list(body["rule_names"]),
            body["dst_engine"],
            body["dst_ks"],
            http,
        )
        return {"verdicts": verdicts}

    @app.post("/api/run")
    async def run(request: Request):
        body = await _json_body(request)
        engine = body.get("engine")
        ks = body.get("ks")
        if not isinstance(engine, str) or not isinstance(ks, str):
            raise RuleMeshError(ir.E_BAD_REQUEST, "'engine' and 'ks' are required")
        _, client = engine_client(engine)
        return client.run(ks)

    if assets_dir and Path(assets_dir).is_dir():
        app.mount("/", StaticFiles(directory=assets_dir, html=True), name="console")
    else:

        @app.get("/", response_class=HTMLResponse)
        async def index():
            return _PLACEHOLDER

    return app
