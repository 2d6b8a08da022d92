"""The location query functions: searches and counts by named area or
bounding box, tag lookups by id, and way geometry.

Searches return ids in ascending order, truncated to ``limit``. Counts always
report the untruncated match set, so ``len(search(limit)) == min(limit, count)``.
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Callable, Sequence
from dataclasses import dataclass

from .errors import InvalidBoundingBox, InvalidLimit, ObjectNotFound
from .model import MAX_LAT, MAX_LON, BoundingBox, ObjectType, ScaledCoord
from .spatial import SpatialIndex

# Filters matching at most this many objects are answered by testing each
# tagged object directly instead of walking the tree.
DEFAULT_POSTING_THRESHOLD = 256


@dataclass(frozen=True)
class TagFilter:
    key: str
    value: str

    def __post_init__(self) -> None:
        if not self.key:
            raise ValueError("tag filter key must be non-empty")


def check_bbox(bb: BoundingBox) -> BoundingBox:
    for name in ("south", "north"):
        if not -MAX_LAT <= getattr(bb, name) <= MAX_LAT:
            raise InvalidBoundingBox(f"{name} {getattr(bb, name)} out of range")
    for name in ("west", "east"):
        if not -MAX_LON <= getattr(bb, name) <= MAX_LON:
            raise InvalidBoundingBox(f"{name} {getattr(bb, name)} out of range")
    if bb.south > bb.north:
        raise InvalidBoundingBox(f"south {bb.south} is above north {bb.north}")
    if bb.west > bb.east:
        raise InvalidBoundingBox(
            f"west {bb.west} is east of {bb.east}; split antimeridian queries into two boxes"
        )
    return bb


def check_limit(limit: int) -> None:
    if isinstance(limit, bool) or not isinstance(limit, int) or limit < 1:
        raise InvalidLimit(f"limit must be a positive integer, got {limit!r}")


class QueryEngine:
    """Query functions over one index.

    ``brute_force=True`` answers searches by scanning every object instead of
    using the tree or tag postings; results are identical, only slower.
    """

    def __init__(
        self,
        index: SpatialIndex,
        posting_threshold: int = DEFAULT_POSTING_THRESHOLD,
        brute_force: bool = False,
    ) -> None:
        self.index = index
        self.posting_threshold = posting_threshold
        self.brute_force = brute_force
        postings: dict[tuple[ObjectType, str, str], list[int]] = defaultdict(list)
        for node in index.store.nodes.values():
            for k, v in node.tags.items():
                postings[ObjectType.NODE, k, v].append(node.id)
        for way in index.store.ways.values():
            for k, v in way.tags.items():
                postings[ObjectType.WAY, k, v].append(way.id)
        self._postings = {key: sorted(ids) for key, ids in postings.items()}

    def _objects(self, t: ObjectType):
        return self.index.store.nodes if t == ObjectType.NODE else self.index.store.ways

    def _matches(
        self,
        t: ObjectType,
        f: TagFilter,
        contains: Callable[[int], bool],
        box: tuple[int, int, int, int],
    ) -> list[int]:
        objects = self._objects(t)
        if self.brute_force:
            return sorted(oid for oid, obj in objects.items() if obj.tags.get(f.key) == f.value and contains(oid))
        posting = self._postings.get((ObjectType(t), f.key, f.value), [])
        if len(posting) <= self.posting_threshold:
            return [oid for oid in posting if contains(oid)]
        idx = self.index
        candidates = idx.node_candidates(box) if t == ObjectType.NODE else idx.way_candidates(box)
        if len(candidates) >= len(posting):
            # long ways make for loose boxes; the postings are the smaller set
            return [oid for oid in posting if contains(oid)]
        return sorted(oid for oid in candidates if objects[oid].tags.get(f.key) == f.value and contains(oid))

    def area_matches(self, t: ObjectType, f: TagFilter, area: str) -> list[int]:
        """All matching ids inside the named area, ascending."""
        idx = self.index
        a = idx.resolve_named_area(area)
        if t == ObjectType.NODE:
            return self._matches(t, f, lambda i: idx.node_in_area(i, a), a.box)
        return self._matches(t, f, lambda i: idx.way_in_area(i, a), a.box)

    def bbox_matches(self, t: ObjectType, f: TagFilter, bb: BoundingBox) -> list[int]:
        idx = self.index
        check_bbox(bb)
        box = (bb.south, bb.west, bb.north, bb.east)
        if t == ObjectType.NODE:
            nodes = idx.store.nodes
            return self._matches(t, f, lambda i: bb.contains(nodes[i].coord), box)
        return self._matches(t, f, lambda i: idx.way_in_bbox(i, bb), box)

    def objects_in_area(self, t: ObjectType, f: TagFilter, area: str, limit: int) -> tuple[int, ...]:
        check_limit(limit)
        return tuple(self.area_matches(t, f, area)[:limit])

    def object_count_in_area(self, t: ObjectType, f: TagFilter, area: str) -> int:
        return len(self.area_matches(t, f, area))

    def objects_in_bbox(self, t: ObjectType, f: TagFilter, bb: BoundingBox, limit: int) -> tuple[int, ...]:
        check_limit(limit)
        return tuple(self.bbox_matches(t, f, bb)[:limit])

    def object_count_in_bbox(self, t: ObjectType, f: TagFilter, bb: BoundingBox) -> int:
        return len(self.bbox_matches(t, f, bb))

    def object_tag_query(self, t: ObjectType, oid: int, keys: Sequence[str]) -> list[str]:
        """Values for ``keys`` in order; absent keys give ``""``."""
        obj = self._objects(t).get(oid)
        if obj is None:
            raise ObjectNotFound(f"no {ObjectType(t).label} {oid}")
        return [obj.tags.get(k, "") for k in keys]

    def way_geometry(self, oid: int) -> list[ScaledCoord]:
        if oid not in self.index.store.ways:
            raise ObjectNotFound(f"no way {oid}")
        return self.index.way_coords(oid)

    def way_node_count(self, oid: int) -> int:
        way = self.index.store.ways.get(oid)
        if way is None:
            raise ObjectNotFound(f"no way {oid}")
        return len(way.node_refs)
