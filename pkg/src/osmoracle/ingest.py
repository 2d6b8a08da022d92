"""Loading OSM data into an immutable :class:`ObjectStore`.

Three input formats are understood:

* OSM XML (``<osm><node/><way/></osm>``), parsed incrementally.
* The line fixture format used for hand-authored test data::

      # comment
      node <id> <lat> <lon> [key=value ...]
      way <id> <ref,ref,...> [key=value ...]
      area <name> <way-id>

  Lines are split with shell quoting rules, so a tag containing spaces is
  written ``'addr:street=Baker Street'``. Latitude and longitude are decimal
  degrees with at most 8 fractional digits.
* The binary snapshot written by :func:`save_store` (magic, version, then the
  zlib-compressed fixture text).
"""

from __future__ import annotations

import io
import os
import shlex
import struct
import xml.etree.ElementTree as ET
import zlib
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import BinaryIO, NamedTuple

from .errors import DanglingReference, DuplicateObject, InvalidCoordinate, ParseError
from .model import (
    Node,
    ScaledCoord,
    Way,
    coord_in_bounds,
    is_closed_way,
    is_valid_id,
    scale_decimal_degrees,
    unscale_to_decimal,
)

SNAPSHOT_MAGIC = b"OSMOSTR\x00"
SNAPSHOT_VERSION = 1

# Closed ways with a name and one of these keys become named areas when
# reading OSM XML.
AREA_KEYS = ("boundary", "place")


class AreaEntry(NamedTuple):
    name: str
    way_id: int


class Violation(NamedTuple):
    rule: str
    object_id: int
    detail: str


@dataclass(frozen=True)
class ObjectStore:
    nodes: dict[int, Node] = field(default_factory=dict)
    ways: dict[int, Way] = field(default_factory=dict)
    areas: tuple[AreaEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.nodes) + len(self.ways)


def validate_store(s: ObjectStore) -> list[Violation]:
    """Check every store invariant and report each broken one.

    An empty list means the store is safe to index.
    """
    out: list[Violation] = []
    for key, node in s.nodes.items():
        if key != node.id:
            out.append(Violation("KeyMismatch", key, f"stored under {key} but has id {node.id}"))
        if not is_valid_id(node.id):
            out.append(Violation("InvalidObjectId", node.id, "node id must be in 1..2**64-1"))
        if not coord_in_bounds(node.coord):
            out.append(Violation("InvalidCoordinate", node.id, f"{node.coord.lat}, {node.coord.lon}"))
        out.extend(_tag_violations(node.id, node.tags))
    for key, way in s.ways.items():
        if key != way.id:
            out.append(Violation("KeyMismatch", key, f"stored under {key} but has id {way.id}"))
        if not is_valid_id(way.id):
            out.append(Violation("InvalidObjectId", way.id, "way id must be in 1..2**64-1"))
        if len(way.node_refs) < 2:
            out.append(Violation("ShortWay", way.id, f"{len(way.node_refs)} node refs"))
        missing = sorted({r for r in way.node_refs if r not in s.nodes})
        if missing:
            out.append(Violation("DanglingReference", way.id, f"missing nodes {missing}"))
        out.extend(_tag_violations(way.id, way.tags))
    for entry in s.areas:
        if not entry.name.strip():
            out.append(Violation("EmptyAreaName", entry.way_id, "area name is blank"))
        way = s.ways.get(entry.way_id)
        if way is None:
            out.append(Violation("AreaUnknownWay", entry.way_id, f"area {entry.name!r}"))
        elif not is_closed_way(way):
            out.append(Violation("AreaNotClosed", entry.way_id, f"area {entry.name!r}"))
    return out


def _tag_violations(oid: int, tags: Mapping[str, str]) -> list[Violation]:
    return [Violation("EmptyTagKey", oid, "tag key is empty") for k in tags if not k]


class _Builder:
    """Accumulates parsed objects and enforces the store invariants."""

    def __init__(self) -> None:
        self.nodes: dict[int, Node] = {}
        self.ways: dict[int, Way] = {}
        self.areas: list[AreaEntry] = []

    def add_node(self, oid: int, lat: int, lon: int, tags: dict[str, str]) -> None:
        if oid in self.nodes:
            raise DuplicateObject(f"duplicate node {oid}")
        coord = ScaledCoord(lat, lon)
        if not coord_in_bounds(coord):
            raise InvalidCoordinate(f"node {oid} coordinate out of range")
        self.nodes[oid] = Node(oid, coord, tags)

    def add_way(self, oid: int, refs: list[int], tags: dict[str, str]) -> None:
        if oid in self.ways:
            raise DuplicateObject(f"duplicate way {oid}")
        if len(refs) < 2:
            raise ParseError(f"way {oid} has {len(refs)} node refs, need at least 2")
        self.ways[oid] = Way(oid, tuple(refs), tags)

    def finish(self) -> ObjectStore:
        for way in self.ways.values():
            missing = sorted({r for r in way.node_refs if r not in self.nodes})
            if missing:
                raise DanglingReference(way.id, missing)
        for entry in self.areas:
            way = self.ways.get(entry.way_id)
            if way is None:
                raise ParseError(f"area {entry.name!r} references unknown way {entry.way_id}")
            if not is_closed_way(way):
                raise ParseError(f"area {entry.name!r} way {entry.way_id} is not closed")
        return ObjectStore(self.nodes, self.ways, tuple(self.areas))


def _parse_id(text: str | None, what: str, line: int | None = None) -> int:
    if text is None:
        raise ParseError(f"{what} is missing", line)
    try:
        value = int(text)
    except ValueError:
        raise ParseError(f"{what} {text!r} is not an integer", line) from None
    if not is_valid_id(value):
        raise ParseError(f"{what} {value} is not a positive 64-bit id", line)
    return value


def _parse_degrees(text: str | None, what: str, line: int | None = None) -> int:
    if text is None:
        raise ParseError(f"{what} is missing", line)
    try:
        return scale_decimal_degrees(text)
    except InvalidCoordinate as exc:
        raise ParseError(f"{what}: {exc}", line) from None


# -- OSM XML --


def parse_osm_xml(data: bytes | BinaryIO, chunk_size: int = 1 << 16) -> ObjectStore:
    """Parse an OSM XML document incrementally.

    ``data`` may be bytes or a binary file object. Results do not depend on
    ``chunk_size``.
    """
    stream = io.BytesIO(data) if isinstance(data, (bytes, bytearray)) else data
    parser = ET.XMLPullParser(events=("start", "end"))
    builder = _Builder()
    depth = 0
    try:
        while True:
            chunk = stream.read(chunk_size)
            if not chunk:
                break
            parser.feed(chunk)
            depth = _drain(parser, builder, depth)
        parser.close()
        depth = _drain(parser, builder, depth)
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from None
    return builder.finish()


def _drain(parser: ET.XMLPullParser, builder: _Builder, depth: int) -> int:
    for event, el in parser.read_events():
        if event == "start":
            if depth == 0 and el.tag != "osm":
                raise ParseError(f"root element is <{el.tag}>, expected <osm>")
            depth += 1
            continue
        depth -= 1
        if depth != 1:
            continue
        if el.tag == "node":
            oid = _parse_id(el.get("id"), "node id")
            lat = _parse_degrees(el.get("lat"), f"node {oid} lat")
            lon = _parse_degrees(el.get("lon"), f"node {oid} lon")
            builder.add_node(oid, lat, lon, _xml_tags(el, oid))
        elif el.tag == "way":
            oid = _parse_id(el.get("id"), "way id")
            refs = [_parse_id(nd.get("ref"), f"way {oid} nd ref") for nd in el.iter("nd")]
            tags = _xml_tags(el, oid)
            builder.add_way(oid, refs, tags)
            if tags.get("name") and any(k in tags for k in AREA_KEYS) and refs[0] == refs[-1] and len(refs) >= 4:
                builder.areas.append(AreaEntry(tags["name"], oid))
        el.clear()
    return depth


def _xml_tags(el: ET.Element, oid: int) -> dict[str, str]:
    tags: dict[str, str] = {}
    for tag in el.iter("tag"):
        k, v = tag.get("k"), tag.get("v")
        if not k or v is None:
            raise ParseError(f"object {oid} has a tag without k or v")
        if k in tags:
            raise ParseError(f"object {oid} repeats tag key {k!r}")
        tags[k] = v
    return tags


# -- fixture text format --


def parse_fixture(lines: Iterable[str]) -> ObjectStore:
    builder = _Builder()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            tokens = shlex.split(line)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        kind, args = tokens[0], tokens[1:]
        try:
            if kind == "node":
                if len(args) < 3:
                    raise ParseError("expected: node <id> <lat> <lon> [k=v ...]", lineno)
                oid = _parse_id(args[0], "node id", lineno)
                lat = _parse_degrees(args[1], "lat", lineno)
                lon = _parse_degrees(args[2], "lon", lineno)
                builder.add_node(oid, lat, lon, _fixture_tags(args[3:], lineno))
            elif kind == "way":
                if len(args) < 2:
                    raise ParseError("expected: way <id> <ref,ref,...> [k=v ...]", lineno)
                oid = _parse_id(args[0], "way id", lineno)
                refs = [_parse_id(r, "node ref", lineno) for r in args[1].split(",")]
                builder.add_way(oid, refs, _fixture_tags(args[2:], lineno))
            elif kind == "area":
                if len(args) != 2:
                    raise ParseError("expected: area <name> <way-id>", lineno)
                if not args[0].strip():
                    raise ParseError("area name is blank", lineno)
                builder.areas.append(AreaEntry(args[0], _parse_id(args[1], "area way id", lineno)))
            else:
                raise ParseError(f"unknown record type {kind!r}", lineno)
        except ParseError as exc:
            if exc.line is None:
                raise ParseError(str(exc), lineno) from None
            raise
        except (DuplicateObject, InvalidCoordinate) as exc:
            raise type(exc)(f"line {lineno}: {exc}") from None
    return builder.finish()


def _fixture_tags(tokens: list[str], lineno: int) -> dict[str, str]:
    tags: dict[str, str] = {}
    for tok in tokens:
        k, sep, v = tok.partition("=")
        if not sep or not k:
            raise ParseError(f"bad tag {tok!r}, expected key=value", lineno)
        if k in tags:
            raise ParseError(f"repeated tag key {k!r}", lineno)
        tags[k] = v
    return tags


def load_fixture(path: str | os.PathLike) -> ObjectStore:
    with open(path, encoding="utf-8") as fh:
        return parse_fixture(fh)


def dump_fixture(s: ObjectStore) -> str:
    """Serialize a store to fixture text. ``parse_fixture`` inverts this."""
    out = []
    for node in s.nodes.values():
        lat, lon = unscale_to_decimal(node.coord.lat), unscale_to_decimal(node.coord.lon)
        out.append(" ".join(["node", str(node.id), lat, lon, *_quoted_tags(node.tags)]))
    for way in s.ways.values():
        refs = ",".join(map(str, way.node_refs))
        out.append(" ".join(["way", str(way.id), refs, *_quoted_tags(way.tags)]))
    for entry in s.areas:
        out.append(f"area {shlex.quote(entry.name)} {entry.way_id}")
    return "".join(line + "\n" for line in out)


def _quoted_tags(tags: Mapping[str, str]) -> list[str]:
    return [shlex.quote(f"{k}={v}") for k, v in tags.items()]


# -- snapshots --


def save_store(s: ObjectStore, path: str | os.PathLike, fmt: str = "binary") -> None:
    text = dump_fixture(s).encode("utf-8")
    if fmt == "text":
        data = text
    elif fmt == "binary":
        data = SNAPSHOT_MAGIC + struct.pack(">H", SNAPSHOT_VERSION) + zlib.compress(text, 9)
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}")
    with open(path, "wb") as fh:
        fh.write(data)


def load_store(path: str | os.PathLike) -> ObjectStore:
    """Load a snapshot, fixture or OSM XML file, detected from its content."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(SNAPSHOT_MAGIC):
        header = len(SNAPSHOT_MAGIC)
        if len(data) < header + 2:
            raise ParseError("truncated snapshot header")
        (version,) = struct.unpack(">H", data[header : header + 2])
        if version != SNAPSHOT_VERSION:
            raise ParseError(f"unsupported snapshot version {version}")
        try:
            text = zlib.decompress(data[header + 2 :])
        except zlib.error as exc:
            raise ParseError(f"corrupt snapshot: {exc}") from None
        return parse_fixture(text.decode("utf-8").splitlines())
    if data.lstrip()[:1] == b"<":
        return parse_osm_xml(data)
    try:
        return parse_fixture(data.decode("utf-8").splitlines())
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc}") from None
