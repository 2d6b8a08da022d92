"""Core OSM object types and exact fixed-point coordinate handling.

Coordinates are stored as signed integers in degrees scaled by 10**8, the
representation contracts receive on the wire. Decimal text is converted with
integer arithmetic only, so every 1e-7 precision OSM coordinate survives a
round trip unchanged.
"""

from __future__ import annotations

import math
import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple

from .errors import InvalidCoordinate

SCALE = 10**8
SCALE_DIGITS = 8
MAX_LAT = 90 * SCALE
MAX_LON = 180 * SCALE
INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1
UINT64_MAX = 2**64 - 1

EARTH_RADIUS_M = 6_371_000.0

_DECIMAL_RE = re.compile(r"([+-]?)(\d*)(?:\.(\d*))?")


class ObjectType(IntEnum):
    NODE = 0
    WAY = 1

    @property
    def label(self) -> str:
        return self.name.lower()


class ScaledCoord(NamedTuple):
    lat: int
    lon: int


@dataclass(frozen=True, slots=True)
class Node:
    id: int
    coord: ScaledCoord
    tags: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class Way:
    id: int
    node_refs: tuple[int, ...]
    tags: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned box in scaled degrees. Edges are inclusive."""

    south: int
    west: int
    north: int
    east: int

    def contains(self, c: ScaledCoord) -> bool:
        return self.south <= c.lat <= self.north and self.west <= c.lon <= self.east


def is_valid_id(value: int) -> bool:
    return isinstance(value, int) and 0 < value <= UINT64_MAX


def coord_in_bounds(c: ScaledCoord) -> bool:
    return -MAX_LAT <= c.lat <= MAX_LAT and -MAX_LON <= c.lon <= MAX_LON


def check_coord(c: ScaledCoord) -> ScaledCoord:
    if not coord_in_bounds(c):
        raise InvalidCoordinate(f"coordinate out of range: {c.lat}, {c.lon}")
    return c


def scale_decimal_degrees(text: str) -> int:
    """Parse a decimal degree string into degrees * 10**8, exactly.

    >>> scale_decimal_degrees("40.7719")
    4077190000
    """
    m = _DECIMAL_RE.fullmatch(text.strip())
    if m is None:
        raise InvalidCoordinate(f"malformed number {text!r}")
    sign, whole, frac = m.group(1), m.group(2), m.group(3)
    frac = frac or ""
    if not whole and not frac:
        raise InvalidCoordinate(f"malformed number {text!r}")
    if len(frac) > SCALE_DIGITS:
        raise InvalidCoordinate(f"more than {SCALE_DIGITS} fractional digits in {text!r}")
    value = int(whole or "0") * SCALE + int(frac.ljust(SCALE_DIGITS, "0"))
    if sign == "-":
        value = -value
    if not INT64_MIN <= value <= INT64_MAX:
        raise InvalidCoordinate(f"{text!r} does not fit in a signed 64-bit integer")
    return value


def unscale_to_decimal(v: int) -> str:
    """Inverse of :func:`scale_decimal_degrees`, with trailing zeros dropped."""
    if not -MAX_LON <= v <= MAX_LON:
        raise InvalidCoordinate(f"scaled value {v} out of range")
    whole, frac = divmod(abs(v), SCALE)
    text = str(whole)
    digits = str(frac).rjust(SCALE_DIGITS, "0").rstrip("0")
    if digits:
        text += "." + digits
    return "-" + text if v < 0 else text


def is_closed_way(w: Way) -> bool:
    refs = w.node_refs
    return len(refs) >= 4 and refs[0] == refs[-1]


def haversine_distance(a: ScaledCoord, b: ScaledCoord) -> float:
    """Great-circle distance in meters on a sphere of mean Earth radius."""
    if a == b:
        return 0.0
    lat1 = math.radians(a.lat / SCALE)
    lat2 = math.radians(b.lat / SCALE)
    dlat = lat2 - lat1
    dlon = math.radians((b.lon - a.lon) / SCALE)
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, h)))
