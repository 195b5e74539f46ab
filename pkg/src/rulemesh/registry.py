"""Discovery registry: an AtomPub subset over two fixed collections.

Engines and translators are stored as Atom entries, one XML file per entry
under the data directory, atomically replaced on update so a restart
reproduces the identical feed.
"""
from __future__ import annotations

import os
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import ir
from .atomfeed import (
    AtomEntry,
    AtomError,
    bump_timestamp,
    entry_from_xml,
    entry_to_xml,
    feed_to_xml,
    now_rfc3339,
    validate_entry_links,
)
from .ir import RuleMeshError

COLLECTIONS = ("engines", "translators")

ATOM_TYPE = "application/atom+xml; charset=utf-8"


class RegistryStore:
    """File-backed entry store; per-store lock serializes mutations."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self._lock = threading.RLock()
        self._entries: dict[str, dict[str, AtomEntry]] = {c: {} for c in COLLECTIONS}
        for collection in COLLECTIONS:
            cdir = self.data_dir / collection
            cdir.mkdir(parents=True, exist_ok=True)
            for path in sorted(cdir.glob("*.xml")):
                entry = entry_from_xml(path.read_bytes())
                if entry.id:
                    self._entries[collection][entry.id] = entry

    def _check_collection(self, collection: str) -> None:
        if collection not in COLLECTIONS:
            raise RuleMeshError(ir.E_NOT_FOUND, f"unknown collection {collection!r}")

    def _path(self, collection: str, entry_id: str) -> Path:
        return self.data_dir / collection / f"{entry_id.rsplit(':', 1)[-1]}.xml"

    def _write(self, collection: str, entry: AtomEntry) -> None:
        path = self._path(collection, entry.id)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(entry_to_xml(entry))
        os.replace(tmp, path)

    def create(self, collection: str, entry: AtomEntry) -> AtomEntry:
        self._check_collection(collection)
        if entry.id:
            raise RuleMeshError(ir.E_BAD_REQUEST, "entry id is server-assigned; omit it")
        validate_entry_links(collection, entry)
        with self._lock:
            entry.id = f"urn:uuid:{uuid.uuid4()}"
            entry.published = entry.updated = now_rfc3339()
            entry.edit_href = f"/registry/{collection}/{entry.id}"
            self._entries[collection][entry.id] = entry
            self._write(collection, entry)
            return entry

    def get(self, collection: str, entry_id: str) -> AtomEntry:
        self._check_collection(collection)
        with self._lock:
            entry = self._entries[collection].get(entry_id)
        if entry is None:
            raise RuleMeshError(ir.E_NOT_FOUND, f"no entry {entry_id!r} in {collection}")
        return entry

    def update(self, collection: str, entry_id: str, body: AtomEntry) -> AtomEntry:
        with self._lock:
            current = self.get(collection, entry_id)
            if body.id is not None and body.id != entry_id:
                raise RuleMeshError(
                    ir.E_BAD_REQUEST, "entry id in the body does not match the URL"
                )
            validate_entry_links(collection, body)
            current.title = body.title
            current.links = dict(body.links)
            current.author_name = body.author_name
            current.author_uri = body.author_uri
            current.author_email = body.author_email
            current.dialect = body.dialect
            current.replica_group = body.replica_group
            current.updated = bump_timestamp(current.updated)
            self._write(collection, current)
            return current

    def delete(self, collection: str, entry_id: str) -> None:
        with self._lock:
            self.get(collection, entry_id)
            del self._entries[collection][entry_id]
            path = self._path(collection, entry_id)
            if path.exists():
                path.unlink()

    def feed(self, collection: str) -> list[AtomEntry]:
        self._check_collection(collection)
        with self._lock:
            entries = list(self._entries[collection].values())
        return sorted(entries, key=lambda e: (e.updated or "", e.id or ""), reverse=True)

    # Entries are mutated in place under the lock; serializing inside it is
    # what makes reads consistent snapshots.

    def feed_xml(self, collection: str) -> bytes:
        with self._lock:
            return feed_to_xml(collection, self.feed(collection))

    def entry_xml(self, collection: str, entry_id: str) -> bytes:
        with self._lock:
            return entry_to_xml(self.get(collection, entry_id))


def _error(status: int, code: str, detail: str) -> JSONResponse:
    return JSONResponse({"code": code, "detail": detail}, status_code=status)


_STATUS = {ir.E_NOT_FOUND: 404, ir.E_BAD_REQUEST: 400}


def create_registry_app(store: RegistryStore) -> FastAPI:
    app = FastAPI(title="rulemesh registry", docs_url=None, redoc_url=None)

    @app.exception_handler(RuleMeshError)
    async def _rulemesh_error(request: Request, exc: RuleMeshError):
        return _error(_STATUS.get(exc.code, 400), exc.code, exc.detail)

    @app.exception_handler(AtomError)
    async def _atom_error(request: Request, exc: AtomError):
        return _error(400, ir.E_BAD_REQUEST, str(exc))

    @app.get("/registry/{collection}")
    async def get_feed(collection: str):
        return Response(store.feed_xml(collection), media_type=ATOM_TYPE)

    @app.post("/registry/{collection}", status_code=201)
    async def create_entry(collection: str, request: Request):
        entry = entry_from_xml(await request.body())
        created = store.create(collection, entry)
        return Response(
            store.entry_xml(collection, created.id),
            status_code=201,
            media_type=ATOM_TYPE,
            headers={"Location": created.edit_href},
        )

    @app.get("/registry/{collection}/{entry_id:path}")
    async def get_entry(collection: str, entry_id: str):
        return Response(store.entry_xml(collection, entry_id), media_type=ATOM_TYPE)

    @app.put("/registry/{collection}/{entry_id:path}")
    async def update_entry(collection: str, entry_id: str, request: Request):
        body = entry_from_xml(await request.body())
        updated = store.update(collection, entry_id, body)
        return Response(store.entry_xml(collection, updated.id), media_type=ATOM_TYPE)

    @app.delete("/registry/{collection}/{entry_id:path}", status_code=204)
    async def delete_entry(collection: str, entry_id: str):
        store.delete(collection, entry_id)
        return Response(status_code=204)

    return app
