"""Atom entry and feed encoding for the discovery registry.

An entry carries service identity (urn:uuid id), timestamps, an edit link,
one enclosure link per exposed interface (functional, management, ping for
engines; exactly one for translators), the author, and two category
elements for dialect and replica group.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

ATOM_NS = "http://www.w3.org/2005/Atom"
DIALECT_SCHEME = "urn:rulemesh:dialect"
REPLICA_SCHEME = "urn:rulemesh:replica-group"

ENGINE_LINKS = ("functional", "management", "ping")

_A = "{%s}" % ATOM_NS


class AtomError(ValueError):
    """Malformed or incomplete entry XML."""


@dataclass
class AtomEntry:
    title: str
    id: str | None = None
    updated: str | None = None
    published: str | None = None
    edit_href: str | None = None
    links: dict[str, str] = field(default_factory=dict)  # enclosure title -> href
    author_name: str | None = None
    author_uri: str | None = None
    author_email: str | None = None
    dialect: str | None = None
    replica_group: str | None = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "updated": self.updated,
            "published": self.published,
            "links": dict(self.links),
            "author": {
                "name": self.author_name,
                "uri": self.author_uri,
                "email": self.author_email,
            },
            "dialect": self.dialect,
            "replica_group": self.replica_group,
        }


def now_rfc3339() -> str:
    return datetime.now(timezone.utc).isoformat()


def bump_timestamp(previous: str | None) -> str:
    """A fresh timestamp, strictly greater than the previous one."""
    now = datetime.now(timezone.utc)
    if previous is not None:
        floor = datetime.fromisoformat(previous) + timedelta(microseconds=1)
        if now < floor:
            now = floor
    return now.isoformat()


def entry_to_element(entry: AtomEntry) -> ET.Element:
    root = ET.Element(_A + "entry")
    if entry.id:
        ET.SubElement(root, _A + "id").text = entry.id
    if entry.updated:
        ET.SubElement(root, _A + "updated").text = entry.updated
    if entry.published:
        ET.SubElement(root, _A + "published").text = entry.published
    if entry.edit_href:
        ET.SubElement(
            root, _A + "link",
            {"href": entry.edit_href, "rel": "edit", "type": "application/atom+xml"},
        )
    ET.SubElement(root, _A + "title").text = entry.title
    ordered = [t for t in ENGINE_LINKS if t in entry.links]
    ordered += sorted(set(entry.links) - set(ENGINE_LINKS))
    for link_title in ordered:
        ET.SubElement(
            root, _A + "link",
            {
                "href": entry.links[link_title],
                "rel": "enclosure",
                "title": link_title,
                "type": "application/json",
            },
        )
    author = ET.SubElement(root, _A + "author")
    ET.SubElement(author, _A + "name").text = entry.author_name or ""
    if entry.author_uri:
        ET.SubElement(author, _A + "uri").text = entry.author_uri
    if entry.author_email:
        ET.SubElement(author, _A + "email").text = entry.author_email
    if entry.dialect:
        ET.SubElement(
            root, _A + "category", {"scheme": DIALECT_SCHEME, "term": entry.dialect}
        )
    if entry.replica_group:
        ET.SubElement(
            root, _A + "category", {"scheme": REPLICA_SCHEME, "term": entry.replica_group}
        )
    return root


def entry_to_xml(entry: AtomEntry) -> bytes:
    ET.register_namespace("", ATOM_NS)
    return ET.tostring(entry_to_element(entry), encoding="utf-8", xml_declaration=True)


def entry_from_element(root: ET.Element) -> AtomEntry:
    if root.tag != _A + "entry":
        raise AtomError(f"expected an atom entry, got {root.tag!r}")
    title = root.findtext(_A + "title")
    if title is None or not title.strip():
        raise AtomError("entry needs a non-empty title")
    entry = AtomEntry(title=title)
    entry.id = root.findtext(_A + "id")
    entry.updated = root.findtext(_A + "updated")
    entry.published = root.findtext(_A + "published")
    for link in root.findall(_A + "link"):
        rel = link.get("rel")
        href = link.get("href")
        if href is None:
            raise AtomError("link without href")
        if rel == "edit":
            entry.edit_href = href
        elif rel == "enclosure":
            link_title = link.get("title")
            if not link_title:
                raise AtomError("enclosure link without title")
            entry.links[link_title] = href
    author = root.find(_A + "author")
    if author is not None:
        entry.author_name = author.findtext(_A + "name")
        entry.author_uri = author.findtext(_A + "uri")
        entry.author_email = author.findtext(_A + "email")
    for category in root.findall(_A + "category"):
        scheme, term = category.get("scheme"), category.get("term")
        if scheme == DIALECT_SCHEME:
            entry.dialect = term
        elif scheme == REPLICA_SCHEME:
            entry.replica_group = term
    return entry


def entry_from_xml(data: bytes | str) -> AtomEntry:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as e:
        raise AtomError(f"malformed XML: {e}") from None
    return entry_from_element(root)


def validate_entry_links(collection: str, entry: AtomEntry) -> None:
    if collection == "engines":
        missing = [t for t in ENGINE_LINKS if t not in entry.links]
        if missing:
            raise AtomError(f"engine entry misses enclosure links: {', '.join(missing)}")
    elif collection == "translators":
        if len(entry.links) != 1:
            raise AtomError("translator entry needs exactly one enclosure link")


def feed_to_xml(collection: str, entries: list[AtomEntry]) -> bytes:
    ET.register_namespace("", ATOM_NS)
    root = ET.Element(_A + "feed")
    ET.SubElement(root, _A + "title").text = collection
    updated = max((e.updated for e in entries if e.updated), default=None)
    ET.SubElement(root, _A + "updated").text = updated or "1970-01-01T00:00:00+00:00"
    for entry in entries:
        root.append(entry_to_element(entry))
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def feed_from_xml(data: bytes | str) -> list[AtomEntry]:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as e:
        raise AtomError(f"malformed XML: {e}") from None
    if root.tag != _A + "feed":
        raise AtomError(f"expected an atom feed, got {root.tag!r}")
    return [entry_from_element(e) for e in root.findall(_A + "entry")]
