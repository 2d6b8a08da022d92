"""Address lookup in both directions.

Forward geocoding scores every object carrying a name or address tags by how
many distinct address tokens it shares with the query. Reverse geocoding
returns the nearest object with a fixed-format description.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass

from .errors import InvalidCoordinate, NoMatch
from .model import ObjectType, ScaledCoord, coord_in_bounds, haversine_distance
from .spatial import SpatialIndex

ADDRESS_KEYS = ("addr:housenumber", "addr:street", "addr:city", "addr:postcode", "name")
FULL_ADDRESS_KEYS = ("addr:housenumber", "addr:street", "addr:city", "addr:postcode")

_PUNCT = re.compile(r"[^\w\s]", re.UNICODE)


@dataclass(frozen=True)
class GeocodeResult:
    type_flag: ObjectType
    id: int
    coord: ScaledCoord


@dataclass(frozen=True)
class ReverseGeocodeResult:
    type_flag: ObjectType
    id: int
    description: str

    def __post_init__(self) -> None:
        if not self.description:
            raise ValueError("description must be non-empty")


def normalize_address(text: str) -> list[str]:
    """Case-fold, drop punctuation and split on whitespace.

    Punctuation is replaced by a space, so ``"A,,B"`` gives ``["a", "b"]``.
    """
    return _PUNCT.sub(" ", text.casefold()).replace("_", " ").split()


def describe(tags, kind: ObjectType, oid: int) -> str:
    parts = []
    if tags.get("name"):
        parts.append(tags["name"])
    street = " ".join(t for t in (tags.get("addr:housenumber"), tags.get("addr:street")) if t)
    if street:
        parts.append(street)
    for key in ("addr:city", "addr:postcode"):
        if tags.get(key):
            parts.append(tags[key])
    return ", ".join(parts) if parts else f"{kind.label} {oid}"


def medoid(coords: list[ScaledCoord]) -> ScaledCoord:
    """The member coordinate with the least summed distance to the others.

    The closing node of a ring is counted once; ties keep the earlier vertex.
    """
    pts = list(dict.fromkeys(coords))
    best, best_sum = pts[0], None
    for c in pts:
        total = sum(haversine_distance(c, o) for o in pts)
        if best_sum is None or total < best_sum:
            best, best_sum = c, total
    return best


class Geocoder:
    def __init__(self, index: SpatialIndex) -> None:
        self.index = index
        self._tokens: dict[tuple[ObjectType, int], frozenset[str]] = {}
        self._postings: dict[str, list[tuple[ObjectType, int]]] = defaultdict(list)
        store = index.store
        for kind, objects in ((ObjectType.NODE, store.nodes), (ObjectType.WAY, store.ways)):
            for obj in objects.values():
                tokens = frozenset(
                    tok for key in ADDRESS_KEYS if key in obj.tags for tok in normalize_address(obj.tags[key])
                )
                if tokens:
                    self._tokens[kind, obj.id] = tokens
                    for tok in tokens:
                        self._postings[tok].append((kind, obj.id))

    def representative_point(self, kind: ObjectType, oid: int) -> ScaledCoord:
        if kind == ObjectType.NODE:
            return self.index.coord(oid)
        return medoid(self.index.way_coords(oid))

    def geocode(self, address: str) -> GeocodeResult:
        query = set(normalize_address(address))
        matched: dict[tuple[ObjectType, int], int] = defaultdict(int)
        for tok in query:
            for obj in self._postings.get(tok, ()):
                matched[obj] += 1
        if not matched:
            raise NoMatch(f"no object matches {address!r}")
        # most shared tokens, then fewest unmatched object tokens, then type, then id
        kind, oid = min(
            matched,
            key=lambda o: (-matched[o], len(self._tokens[o]) - matched[o], o[0], o[1]),
        )
        return GeocodeResult(kind, oid, self.representative_point(kind, oid))

    def reverse_geocode(self, lat: int, lon: int) -> ReverseGeocodeResult:
        p = ScaledCoord(lat, lon)
        if not coord_in_bounds(p):
            raise InvalidCoordinate(f"coordinate out of range: {lat}, {lon}")
        kind, oid, _ = self.index.nearest_object(p)
        store = self.index.store
        tags = (store.nodes if kind == ObjectType.NODE else store.ways)[oid].tags
        return ReverseGeocodeResult(kind, oid, describe(tags, kind, oid))
