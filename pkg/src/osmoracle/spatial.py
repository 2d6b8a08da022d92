"""Spatial retrieval over an :class:`~osmoracle.ingest.ObjectStore`.

Membership rules used throughout:

* bounding boxes are closed on all four sides and never wrap the antimeridian;
* polygon containment uses the even-odd rule and counts boundary points as
  inside;
* a way is inside a region when at least one of its member nodes is.

All containment tests run on the scaled integer coordinates, so they are exact.
"""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .errors import AmbiguousArea, AreaNotFound, BuildRejected, NoObjects
from .ingest import ObjectStore, validate_store
from .model import (
    EARTH_RADIUS_M,
    SCALE,
    BoundingBox,
    ObjectType,
    ScaledCoord,
    haversine_distance,
)
from .rtree import Box, RTree

_FULL_TURN = 360 * SCALE


@dataclass(frozen=True)
class AreaDefinition:
    name: str
    ring: tuple[ScaledCoord, ...]
    source_way: int
    box: Box


def normalize_area_name(name: str) -> str:
    return " ".join(name.casefold().split())


def ring_box(ring: Iterable[ScaledCoord]) -> Box:
    ring = list(ring)
    lats = [c.lat for c in ring]
    lons = [c.lon for c in ring]
    return (min(lats), min(lons), max(lats), max(lons))


def point_in_polygon(p: ScaledCoord, ring: Sequence[ScaledCoord]) -> bool:
    """Even-odd containment of ``p`` in the closed ``ring``; boundary is inside."""
    y, x = p
    inside = False
    ay, ax = ring[0]
    for by, bx in ring[1:]:
        dx, dy = bx - ax, by - ay
        if (
            dx * (y - ay) == dy * (x - ax)
            and min(ax, bx) <= x <= max(ax, bx)
            and min(ay, by) <= y <= max(ay, by)
        ):
            return True
        if (ay > y) != (by > y):
            # Does the edge cross the horizontal ray going east from p?
            lhs = (x - ax) * dy
            rhs = (y - ay) * dx
            if (lhs < rhs) if dy > 0 else (lhs > rhs):
                inside = not inside
        ay, ax = by, bx
    return inside


def _orient(a: ScaledCoord, b: ScaledCoord, c: ScaledCoord) -> int:
    v = (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon)
    return (v > 0) - (v < 0)


def _on_segment(a: ScaledCoord, b: ScaledCoord, c: ScaledCoord) -> bool:
    return min(a.lat, b.lat) <= c.lat <= max(a.lat, b.lat) and min(a.lon, b.lon) <= c.lon <= max(a.lon, b.lon)


def _segments_touch(p1, p2, p3, p4) -> bool:
    d1 = _orient(p3, p4, p1)
    d2 = _orient(p3, p4, p2)
    d3 = _orient(p1, p2, p3)
    d4 = _orient(p1, p2, p4)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    return (
        (d1 == 0 and _on_segment(p3, p4, p1))
        or (d2 == 0 and _on_segment(p3, p4, p2))
        or (d3 == 0 and _on_segment(p1, p2, p3))
        or (d4 == 0 and _on_segment(p1, p2, p4))
    )


def ring_is_simple(ring: Sequence[ScaledCoord]) -> bool:
    """True when the closed ring has no self-intersections and nonzero area."""
    pts = [ring[0]]
    for c in ring[1:]:
        if c != pts[-1]:
            pts.append(c)
    if pts[0] != pts[-1] or len(pts) < 4:
        return False
    n = len(pts) - 1
    segs = [(pts[i], pts[i + 1]) for i in range(n)]

    twice_area = sum(a.lon * b.lat - b.lon * a.lat for a, b in segs)
    if twice_area == 0:
        return False

    for i in range(n):
        a0, a1 = segs[i]
        b1 = segs[(i + 1) % n][1]
        # adjacent edges may only share their common vertex
        if _orient(a0, a1, b1) == 0 and (a0.lat - a1.lat) * (b1.lat - a1.lat) + (a0.lon - a1.lon) * (b1.lon - a1.lon) > 0:
            return False

    order = sorted(range(n), key=lambda i: min(segs[i][0].lon, segs[i][1].lon))
    for pos, i in enumerate(order):
        p1, p2 = segs[i]
        max_lon = max(p1.lon, p2.lon)
        lo_lat, hi_lat = min(p1.lat, p2.lat), max(p1.lat, p2.lat)
        for j in order[pos + 1 :]:
            p3, p4 = segs[j]
            if min(p3.lon, p4.lon) > max_lon:
                break
            if abs(i - j) in (1, n - 1):
                continue
            if max(p3.lat, p4.lat) < lo_lat or min(p3.lat, p4.lat) > hi_lat:
                continue
            if _segments_touch(p1, p2, p3, p4):
                return False
    return True


def distance_lower_bound(p: ScaledCoord, box: Box) -> float:
    """A value never larger than the haversine distance from ``p`` to any
    point of ``box``."""
    s, w, n, e = box
    lat, lon = p
    dlat = s - lat if lat < s else (lat - n if lat > n else 0)
    if w <= lon <= e:
        dlon = 0
    else:
        dw = abs(lon - w) % _FULL_TURN
        de = abs(lon - e) % _FULL_TURN
        dlon = min(dw, _FULL_TURN - dw, de, _FULL_TURN - de)
    if dlat == 0 and dlon == 0:
        return 0.0
    to_rad = math.pi / (180 * SCALE)
    min_cos = min(math.cos(s * to_rad), math.cos(n * to_rad))
    h = math.sin(dlat * to_rad / 2) ** 2 + math.cos(lat * to_rad) * max(0.0, min_cos) * math.sin(dlon * to_rad / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, h)))


class SpatialIndex:
    """Read-only spatial view of a validated store. Build with :func:`build_index`."""

    def __init__(self, store: ObjectStore, areas: dict[str, list[AreaDefinition]]) -> None:
        self.store = store
        self.areas = areas
        nodes = store.nodes
        self.node_tree: RTree[int] = RTree([((n.coord.lat, n.coord.lon, n.coord.lat, n.coord.lon), n.id) for n in nodes.values()])
        self.way_boxes: dict[int, Box] = {
            w.id: ring_box(nodes[r].coord for r in w.node_refs) for w in store.ways.values()
        }
        self.way_tree: RTree[int] = RTree([(box, wid) for wid, box in self.way_boxes.items()])
        self.vertex_nodes: frozenset[int] = frozenset(r for w in store.ways.values() for r in w.node_refs)

    def coord(self, node_id: int) -> ScaledCoord:
        return self.store.nodes[node_id].coord

    def way_coords(self, way_id: int) -> list[ScaledCoord]:
        nodes = self.store.nodes
        return [nodes[r].coord for r in self.store.ways[way_id].node_refs]

    # -- bounding boxes --

    def node_candidates(self, box: Box) -> list[int]:
        """Nodes whose coordinate lies in ``box``."""
        return [nid for _, nid in self.node_tree.search(box)]

    def way_candidates(self, box: Box) -> list[int]:
        """Ways whose bounding box meets ``box``: a superset of the ways with a
        member node inside it."""
        return [wid for _, wid in self.way_tree.search(box)]

    def query_nodes_in_bbox(self, bb: BoundingBox) -> set[int]:
        return {nid for _, nid in self.node_tree.search((bb.south, bb.west, bb.north, bb.east))}

    def query_ways_in_bbox(self, bb: BoundingBox) -> set[int]:
        box = (bb.south, bb.west, bb.north, bb.east)
        return {wid for _, wid in self.way_tree.search(box) if self.way_in_bbox(wid, bb)}

    def way_in_bbox(self, way_id: int, bb: BoundingBox) -> bool:
        nodes = self.store.nodes
        return any(bb.contains(nodes[r].coord) for r in self.store.ways[way_id].node_refs)

    # -- named areas --

    def resolve_named_area(self, name: str) -> AreaDefinition:
        key = normalize_area_name(name)
        found = self.areas.get(key)
        if not found:
            raise AreaNotFound(f"no area named {name!r}")
        if len(found) > 1:
            raise AmbiguousArea(name, [a.source_way for a in found])
        return found[0]

    def node_in_area(self, node_id: int, area: AreaDefinition) -> bool:
        c = self.store.nodes[node_id].coord
        s, w, n, e = area.box
        return s <= c.lat <= n and w <= c.lon <= e and point_in_polygon(c, area.ring)

    def way_in_area(self, way_id: int, area: AreaDefinition) -> bool:
        return any(self.node_in_area(r, area) for r in self.store.ways[way_id].node_refs)

    def query_nodes_in_area(self, area: AreaDefinition) -> set[int]:
        return {nid for _, nid in self.node_tree.search(area.box) if self.node_in_area(nid, area)}

    def query_ways_in_area(self, area: AreaDefinition) -> set[int]:
        return {wid for _, wid in self.way_tree.search(area.box) if self.way_in_area(wid, area)}

    # -- proximity --

    def is_nearest_candidate(self, node_id: int) -> bool:
        """Untagged way vertices carry no identity of their own and are skipped."""
        return bool(self.store.nodes[node_id].tags) or node_id not in self.vertex_nodes

    def way_distance(self, way_id: int, p: ScaledCoord) -> float:
        nodes = self.store.nodes
        return min(haversine_distance(p, nodes[r].coord) for r in self.store.ways[way_id].node_refs)

    def nearest_object(self, p: ScaledCoord) -> tuple[ObjectType, int, float]:
        """Closest object to ``p``; ties go to the lower type code, then lower id."""
        if not self.store.nodes:
            raise NoObjects("store is empty")

        def bound(box: Box) -> float:
            return distance_lower_bound(p, box)

        def node_score(nid: int):
            if not self.is_nearest_candidate(nid):
                return None
            return (haversine_distance(p, self.store.nodes[nid].coord), ObjectType.NODE, nid)

        def way_score(wid: int):
            return (self.way_distance(wid, p), ObjectType.WAY, wid)

        found = [k for k in (self.node_tree.nearest(bound, node_score), self.way_tree.nearest(bound, way_score)) if k]
        if not found:
            raise NoObjects("store has no candidate objects")
        dist, kind, oid = min(found)
        return ObjectType(kind), oid, dist


def build_index(s: ObjectStore) -> SpatialIndex:
    violations = validate_store(s)
    if violations:
        shown = "; ".join(f"{v.rule} {v.object_id}: {v.detail}" for v in violations[:5])
        raise BuildRejected(f"{len(violations)} store violation(s): {shown}")
    areas: dict[str, list[AreaDefinition]] = defaultdict(list)
    seen: set[tuple[str, int]] = set()
    for entry in s.areas:
        key = normalize_area_name(entry.name)
        if (key, entry.way_id) in seen:
            continue
        seen.add((key, entry.way_id))
        ring = tuple(s.nodes[r].coord for r in s.ways[entry.way_id].node_refs)
        if not ring_is_simple(ring):
            raise BuildRejected(f"area {entry.name!r} (way {entry.way_id}) is not a simple polygon")
        areas[key].append(AreaDefinition(key, ring, entry.way_id, ring_box(ring)))
    return SpatialIndex(s, dict(areas))
