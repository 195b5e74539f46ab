"""Control plane: discovery, liveness, and replica-aware rule propagation.

Rule updates fan out from here, not engine to engine: the target engine is
written first, then every other live engine in its replica group receives
the same rules, translated through the pivot when dialects differ.  Replica
failures are reported per engine and never roll back the target
(at-least-once semantics).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import httpx

from . import ir
from .atomfeed import AtomEntry, entry_from_xml, entry_to_xml, feed_from_xml, now_rfc3339
from .ir import Diagnostic, RuleMeshError
from .translate import translate

DEFAULT_TIMEOUT = 5.0


class UpstreamHTTPError(Exception):
    """A non-2xx reply from a downstream service, with its structured body."""

    def __init__(self, status: int, payload: dict):
        super().__init__(f"upstream returned {status}")
        self.status = status
        self.payload = payload


def _check(response: httpx.Response) -> httpx.Response:
    if response.status_code >= 400:
        try:
            payload = response.json()
        except ValueError:
            payload = {"code": ir.E_BAD_REQUEST, "detail": response.text}
        raise UpstreamHTTPError(response.status_code, payload)
    return response


class RegistryClient:
    """Atom client for the discovery registry."""

    def __init__(self, base_url: str, client: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(timeout=DEFAULT_TIMEOUT)

    def _url(self, *parts: str) -> str:
        return "/".join([self.base_url, *parts])

    def list_entries(self, collection: str) -> list[AtomEntry]:
        try:
            response = _check(self._client.get(self._url("registry", collection)))
        except httpx.HTTPError as e:
            raise RuleMeshError(
                ir.E_REGISTRY_UNREACHABLE, f"registry at {self.base_url}: {e}"
            ) from None
        return feed_from_xml(response.content)

    def create_entry(self, collection: str, entry: AtomEntry) -> AtomEntry:
        try:
            response = _check(
                self._client.post(
                    self._url("registry", collection),
                    content=entry_to_xml(entry),
                    headers={"content-type": "application/atom+xml"},
                )
            )
        except httpx.HTTPError as e:
            raise RuleMeshError(
                ir.E_REGISTRY_UNREACHABLE, f"registry at {self.base_url}: {e}"
            ) from None
        return entry_from_xml(response.content)

    def delete_entry(self, collection: str, entry_id: str) -> None:
        try:
            _check(self._client.delete(self._url("registry", collection, entry_id)))
        except httpx.HTTPError as e:
            raise RuleMeshError(
                ir.E_REGISTRY_UNREACHABLE, f"registry at {self.base_url}: {e}"
            ) from None


@dataclass
class EngineHandle:
    descriptor: AtomEntry
    live: bool
    last_ping: str

    @property
    def id(self) -> str:
        return self.descriptor.id or ""

    @property
    def title(self) -> str:
        return self.descriptor.title

    @property
    def dialect(self) -> str | None:
        return self.descriptor.dialect

    @property
    def replica_group(self) -> str | None:
        return self.descriptor.replica_group

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "dialect": self.dialect,
            "replica_group": self.replica_group,
            "live": self.live,
            "last_ping": self.last_ping,
            "links": dict(self.descriptor.links),
        }


class EngineClient:
    """JSON client for one engine's middleware endpoints."""

    def __init__(self, handle: EngineHandle, client: httpx.Client | None = None):
        self.handle = handle
        self._client = client or httpx.Client(timeout=DEFAULT_TIMEOUT)

    def _request(self, method: str, url: str, **kwargs) -> dict:
        try:
            response = _check(self._client.request(method, url, **kwargs))
        except httpx.HTTPError as e:
            raise RuleMeshError(
                ir.E_ENGINE_UNREACHABLE, f"engine {self.handle.title!r}: {e}"
            ) from None
        return response.json()

    def _functional(self, *parts: str) -> str:
        return "/".join([self.handle.descriptor.links["functional"], *parts])

    def _management(self, *parts: str) -> str:
        return "/".join([self.handle.descriptor.links["management"], *parts])

    def properties(self) -> dict:
        return self._request("GET", self._management("properties"))

    def knowledge_sets(self) -> list[str]:
        return self._request("GET", self._management("knowledge-sets"))["knowledge_sets"]

    def put_knowledge_sets(self, items: list) -> list[dict]:
        return self._request(
            "PUT", self._management("knowledge-sets"), json={"knowledge_sets": items}
        )["results"]

    def delete_knowledge_sets(self, names: list[str]) -> list[dict]:
        return self._request(
            "DELETE", self._management("knowledge-sets"), json={"knowledge_sets": names}
        )["results"]

    def get_rules(self, ks: str, name_filter: str | None = None) -> list[dict]:
        params = {"filter": name_filter} if name_filter is not None else None
        return self._request("GET", self._functional(ks, "rules"), params=params)["rules"]

    def put_rules(self, ks: str, texts: list[str]) -> list[dict]:
        return self._request(
            "PUT", self._functional(ks, "rules"), json={"rules": texts}
        )["verdicts"]

    def delete_rules(self, ks: str, names: list[str]) -> list[dict]:
        return self._request(
            "DELETE", self._functional(ks, "rules"), json={"rules": names}
        )["results"]

    def validate_rules(self, ks: str, texts: list[str]) -> list[dict]:
        return self._request(
            "POST", self._functional(ks, "rules:validate"), json={"rules": texts}
        )["verdicts"]

    def run(self, ks: str) -> dict:
        return self._request("POST", self._functional(ks, "run"))

    def get_facts(self, ks: str) -> list[dict]:
        return self._request("GET", self._functional(ks, "facts"))["facts"]

    def put_facts(self, ks: str, facts: list[dict]) -> list[dict]:
        return self._request(
            "PUT", self._functional(ks, "facts"), json={"facts": facts}
        )["results"]

    def delete_facts(self, ks: str, facts: list[dict]) -> list[dict]:
        return self._request(
            "DELETE", self._functional(ks, "facts"), json={"facts": facts}
        )["results"]


def discover(registry_url: str, client: httpx.Client | None = None) -> list[EngineHandle]:
    """One handle per registered engine, each pinged once; dead engines stay listed."""
    http = client or httpx.Client(timeout=DEFAULT_TIMEOUT)
    entries = RegistryClient(registry_url, http).list_entries("engines")
    handles = []
    for entry in entries:
        live = False
        ping_url = entry.links.get("ping")
        if ping_url:
            try:
                live = http.get(ping_url).status_code == 200
            except httpx.HTTPError:
                live = False
        handles.append(EngineHandle(entry, live, now_rfc3339()))
    return handles


def resolve(handles: list[EngineHandle], engine: str) -> EngineHandle:
    """Find an engine by entry id or title."""
    by_id = [h for h in handles if h.id == engine]
    if by_id:
        return by_id[0]
    by_title = [h for h in handles if h.title == engine]
    if len(by_title) == 1:
        return by_title[0]
    if len(by_title) > 1:
        raise RuleMeshError(ir.E_BAD_REQUEST, f"engine title {engine!r} is ambiguous")
    raise RuleMeshError(ir.E_NOT_FOUND, f"no engine {engine!r} in the registry")


@dataclass
class EngineOutcome:
    """Per-engine result of a propagated operation."""

    verdicts: list[dict] = field(default_factory=list)
    results: list[dict] = field(default_factory=list)
    error: Diagnostic | None = None

    def to_json(self) -> dict:
        out: dict = {}
        if self.verdicts:
            out["verdicts"] = self.verdicts
        if self.results:
            out["results"] = self.results
        if self.error is not None:
            out["error"] = self.error.to_json()
        return out


def _replicas(handles: list[EngineHandle], target: EngineHandle) -> list[EngineHandle]:
    if not target.replica_group:
        return []
    return [
        h
        for h in handles
        if h.id != target.id and h.replica_group == target.replica_group
    ]


def _translated_put(
    http: httpx.Client,
    replica: EngineHandle,
    ks: str,
    texts: list[str],
    source_dialect: str | None,
) -> EngineOutcome:
    if not replica.live:
        return EngineOutcome(
            error=Diagnostic(ir.E_ENGINE_UNREACHABLE, f"replica {replica.title!r} is down")
        )
    to_put: list[str | None] = []
    verdicts_by_index: dict[int, dict] = {}
    if source_dialect and replica.dialect and replica.dialect != source_dialect:
        for i, text in enumerate(texts):
            try:
                report = translate(text, source_dialect, replica.dialect, None)
            except RuleMeshError as e:
                verdicts_by_index[i] = {
                    "rule": i, "status": "invalid",
                    "diagnostics": [e.to_diagnostic().to_json()],
                }
                to_put.append(None)
                continue
            bad = [r for r in report.per_rule if r.status != "ok"]
            if bad:
                verdicts_by_index[i] = {
                    "rule": bad[0].rule_name, "status": "invalid",
                    "diagnostics": [d.to_json() for r in bad for d in r.diagnostics],
                }
                to_put.append(None)
            else:
                to_put.append(report.output_text)
    else:
        to_put = list(texts)

    survivors = [t for t in to_put if t is not None]
    try:
        put_verdicts = (
            EngineClient(replica, http).put_rules(ks, survivors) if survivors else []
        )
    except RuleMeshError as e:
        return EngineOutcome(error=e.to_diagnostic())
    except UpstreamHTTPError as e:
        return EngineOutcome(
            error=Diagnostic(
                e.payload.get("code", ir.E_BAD_REQUEST), e.payload.get("detail", "")
            )
        )
    merged = []
    put_iter = iter(put_verdicts)
    for i, text in enumerate(to_put):
        merged.append(verdicts_by_index[i] if text is None else next(put_iter))
    return EngineOutcome(verdicts=merged)


def put_rules(
    registry_url: str,
    engine: str,
    ks: str,
    texts: list[str],
    propagate: bool = True,
    client: httpx.Client | None = None,
) -> dict[str, EngineOutcome]:
    """Put rules on one engine and, unless told otherwise, on its whole replica group."""
    http = client or httpx.Client(timeout=DEFAULT_TIMEOUT)
    handles = discover(registry_url, http)
    target = resolve(handles, engine)
    if not target.live:
        raise RuleMeshError(ir.E_ENGINE_UNREACHABLE, f"engine {target.title!r} is down")

    results: dict[str, EngineOutcome] = {}
    results[target.id] = EngineOutcome(
        verdicts=EngineClient(target, http).put_rules(ks, texts)
    )
    if propagate:
        for replica in _replicas(handles, target):
            results[replica.id] = _translated_put(http, replica, ks, texts, target.dialect)
    return results


def delete_rules(
    registry_url: str,
    engine: str,
    ks: str,
    names: list[str],
    propagate: bool = True,
    client: httpx.Client | None = None,
) -> dict[str, EngineOutcome]:
    """Delete named rules on an engine and its replica group; names are dialect-neutral."""
    http = client or httpx.Client(timeout=DEFAULT_TIMEOUT)
    handles = discover(registry_url, http)
    target = resolve(handles, engine)
    if not target.live:
        raise RuleMeshError(ir.E_ENGINE_UNREACHABLE, f"engine {target.title!r} is down")

    results: dict[str, EngineOutcome] = {}
    results[target.id] = EngineOutcome(
        results=EngineClient(target, http).delete_rules(ks, names)
    )
    if propagate:
        for replica in _replicas(handles, target):
            if not replica.live:
                results[replica.id] = EngineOutcome(
                    error=Diagnostic(
                        ir.E_ENGINE_UNREACHABLE, f"replica {replica.title!r} is down"
                    )
                )
                continue
            try:
                results[replica.id] = EngineOutcome(
                    results=EngineClient(replica, http).delete_rules(ks, names)
                )
            except (RuleMeshError, UpstreamHTTPError) as e:
                detail = e.detail if isinstance(e, RuleMeshError) else str(e.payload)
                code = e.code if isinstance(e, RuleMeshError) else ir.E_BAD_REQUEST
                results[replica.id] = EngineOutcome(error=Diagnostic(code, detail))
    return results


def translate_copy(
    registry_url: str,
    src_engine: str,
    src_ks: str,
    rule_names: list[str],
    dst_engine: str,
    dst_ks: str,
    client: httpx.Client | None = None,
) -> list[dict]:
    """Copy named rules across engines through the pivot: fetch, translate,
    validate on the destination, then put.  The source is never modified."""
    http = client or httpx.Client(timeout=DEFAULT_TIMEOUT)
    handles = discover(registry_url, http)
    src = resolve(handles, src_engine)
    dst = resolve(handles, dst_engine)
    for handle in (src, dst):
        if not handle.live:
            raise RuleMeshError(ir.E_ENGINE_UNREACHABLE, f"engine {handle.title!r} is down")

    available = {r["name"]: r["text"] for r in EngineClient(src, http).get_rules(src_ks)}
    dst_client = EngineClient(dst, http)
    verdicts: list[dict] = []
    for name in rule_names:
        if name not in available:
            verdicts.append(
                {"rule": name, "status": "invalid",
                 "diagnostics": [Diagnostic(
                     ir.E_NOT_FOUND, f"no rule {name!r} in {src_ks!r}").to_json()]}
            )
            continue
        text = available[name]
        if src.dialect and dst.dialect and src.dialect != dst.dialect:
            report = translate(text, src.dialect, dst.dialect, None)
            bad = [r for r in report.per_rule if r.status != "ok"]
            if bad:
                verdicts.append(
                    {"rule": name, "status": "invalid",
                     "diagnostics": [d.to_json() for r in bad for d in r.diagnostics]}
                )
                continue
            text = report.output_text
        validation = dst_client.validate_rules(dst_ks, [text])
        invalid = [v for v in validation if v["status"] != "valid"]
        if invalid:
            verdicts.extend(invalid)
            continue
        verdicts.extend(dst_client.put_rules(dst_ks, [text]))
    return verdicts
