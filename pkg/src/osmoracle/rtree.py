"""Static R-tree packed with Sort-Tile-Recursive bulk loading.

Boxes are ``(south, west, north, east)`` integer tuples in scaled degrees. The
tree is built once and never modified, so concurrent readers need no locking.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections.abc import Callable, Iterator, Sequence
from typing import Any, Generic, TypeVar

T = TypeVar("T")
Box = tuple[int, int, int, int]


class _Node:
    __slots__ = ("box", "children", "leaf")

    def __init__(self, box: Box, children: list, leaf: bool) -> None:
        self.box = box
        self.children = children
        self.leaf = leaf


def _union(boxes: Sequence[Box]) -> Box:
    return (
        min(b[0] for b in boxes),
        min(b[1] for b in boxes),
        max(b[2] for b in boxes),
        max(b[3] for b in boxes),
    )


def _intersects(a: Box, b: Box) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def _str_pack(items: list[tuple[Box, Any]], capacity: int) -> list[list[tuple[Box, Any]]]:
    """Group items into runs of ``capacity`` using the STR tiling."""
    n = len(items)
    pages = math.ceil(n / capacity)
    slices = math.ceil(math.sqrt(pages))
    per_slice = slices * capacity
    items = sorted(items, key=lambda it: it[0][1] + it[0][3])
    groups = []
    for i in range(0, n, per_slice):
        vertical = sorted(items[i : i + per_slice], key=lambda it: it[0][0] + it[0][2])
        for j in range(0, len(vertical), capacity):
            groups.append(vertical[j : j + capacity])
    return groups


class RTree(Generic[T]):
    def __init__(self, entries: Sequence[tuple[Box, T]], capacity: int = 16) -> None:
        if capacity < 2:
            raise ValueError("capacity must be at least 2")
        self._size = len(entries)
        self._root: _Node | None = None
        if not entries:
            return
        level = [
            _Node(_union([b for b, _ in group]), list(group), True)
            for group in _str_pack(list(entries), capacity)
        ]
        while len(level) > 1:
            level = [
                _Node(_union([b for b, _ in group]), [node for _, node in group], False)
                for group in _str_pack([(node.box, node) for node in level], capacity)
            ]
        self._root = level[0]

    def __len__(self) -> int:
        return self._size

    @property
    def bounds(self) -> Box | None:
        return self._root.box if self._root else None

    def entries(self) -> Iterator[tuple[Box, T]]:
        if self._root is None:
            return
        stack = [self._root]
        while stack:
            node = stack.pop()
            if node.leaf:
                yield from node.children
            else:
                stack.extend(node.children)

    def search(self, box: Box) -> Iterator[tuple[Box, T]]:
        """Yield every entry whose box intersects ``box`` (edges inclusive)."""
        if self._root is None or not _intersects(self._root.box, box):
            return
        s, w, n, e = box
        stack = [self._root]
        while stack:
            node = stack.pop()
            if node.leaf:
                for entry in node.children:
                    b = entry[0]
                    if b[0] <= n and s <= b[2] and b[1] <= e and w <= b[3]:
                        yield entry
            else:
                for child in node.children:
                    b = child.box
                    if b[0] <= n and s <= b[2] and b[1] <= e and w <= b[3]:
                        stack.append(child)

    def nearest(
        self,
        bound: Callable[[Box], float],
        score: Callable[[T], tuple | None],
        slack: float = 1e-6,
    ) -> tuple | None:
        """Best-first branch and bound search.

        ``bound(box)`` must never exceed the first component of ``score`` for
        any item inside ``box``. ``score`` returns a sortable tuple whose first
        element is the distance, or ``None`` to skip the item. Returns the
        minimal score.
        """
        if self._root is None:
            return None
        best: tuple | None = None
        tick = itertools.count()
        heap: list = [(bound(self._root.box), next(tick), self._root)]
        while heap:
            lb, _, node = heapq.heappop(heap)
            if best is not None and lb > best[0] * (1 + 1e-12) + slack:
                break
            if node.leaf:
                for b, item in node.children:
                    if best is not None and bound(b) > best[0] * (1 + 1e-12) + slack:
                        continue
                    key = score(item)
                    if key is not None and (best is None or key < best):
                        best = key
            else:
                for child in node.children:
                    heapq.heappush(heap, (bound(child.box), next(tick), child))
        return best
